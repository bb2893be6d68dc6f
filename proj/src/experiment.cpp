#include "twloc/experiment.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <thread>

#include "twloc/error.hpp"
#include "twloc/io.hpp"

namespace twloc {

double relative_error(double x_measured, double x_true, double length) {
  if (!(length > 0.0)) throw Error(ErrorCode::Parameter, "line length must be positive");
  return std::abs(x_measured - x_true) / length;
}

LinePreset line_preset(std::string_view name) {
  // Lengths of the three evaluated sections; M2 placement is ours.
  if (name == "a") return {"a", 184.4e3, 0.4, 2e-3};
  if (name == "b") return {"b", 65.4e3, 0.5, 1e-3};
  if (name == "c") return {"c", 35.4e3, 0.45, 1e-3};
  throw Error::validation("sections", "unknown line section '" + std::string(name) + "' (expected a, b or c)");
}

ExperimentMatrix default_matrix() {
  ExperimentMatrix m;
  m.lines = {line_preset("a"), line_preset("b"), line_preset("c")};
  m.cases = {{"cable", model_preset("cable"), default_pd_source()},
             {"overhead", model_preset("overhead"), default_lightning_source()}};
  for (int n = 1; n <= 9; ++n) m.location_factors.push_back(n / 10.0);
  m.noise_levels = {std::nullopt};
  m.seeds = {1};
  m.desync_cases = {{0.0, 0.0, 0.0}};
  return m;
}

void ExperimentMatrix::validate() const {
  if (lines.empty()) throw Error::validation("sections", "at least one line section is required");
  if (cases.empty()) throw Error::validation("cases", "at least one line case is required");
  if (location_factors.empty()) throw Error::validation("locations", "at least one event location is required");
  if (noise_levels.empty()) throw Error::validation("snr_db", "at least one noise level is required");
  if (desync_cases.empty()) throw Error::validation("desync", "at least one desync case is required");
  const bool noisy = std::any_of(noise_levels.begin(), noise_levels.end(), [](const auto& s) { return s.has_value(); });
  if (noisy && seeds.empty()) throw Error::validation("seeds", "noisy levels need at least one seed");
  for (const LinePreset& line : lines) {
    if (!(line.length_m > 0.0)) throw Error::validation("section." + line.name + ".length_m", "must be positive");
    if (!(line.a_over_l > 0.0 && line.a_over_l < 1.0)) {
      throw Error::validation("section." + line.name + ".a_over_l", "must lie in (0, 1)");
    }
    if (!(line.duration > 0.0)) throw Error::validation("section." + line.name + ".duration", "must be positive");
    for (double f : location_factors) {
      const double x = f * line.a_over_l;
      if (!(x > 0.0 && x < 1.0)) {
        throw Error::validation("locations", fmt::format("factor {} puts the event at x/l = {} on section {}, outside (0, 1)",
                                                         f, x, line.name));
      }
    }
  }
  for (const LineCase& c : cases) {
    c.model.validate();
    c.source.validate();
  }
  if (!(sample_rate > 0.0)) throw Error::validation("sample_rate", "must be positive");
  if (!(velocity_error >= 0.0 && velocity_error < 1.0)) throw Error::validation("velocity_error", "must lie in [0, 1)");
  if (workers < 0) throw Error::validation("workers", "must be >= 0");
  analysis.validate();
}

std::size_t ExperimentMatrix::scenario_count() const {
  std::size_t per_location = 0;
  for (const auto& s : noise_levels) per_location += s ? seeds.size() : 1;
  return lines.size() * cases.size() * location_factors.size() * per_location * desync_cases.size();
}

ScenarioConfig Scenario::config(double sample_rate, double f_max) const {
  ScenarioConfig cfg;
  cfg.geometry = {line->length_m, line->a_over_l, location_factor * line->a_over_l};
  cfg.model = line_case->model;
  cfg.source = line_case->source;
  cfg.sample_rate = sample_rate;
  cfg.duration = line->duration;
  cfg.snr_db = snr_db;
  cfg.noise_seed = seed;
  cfg.desync_offsets = desync;
  cfg.analysis_f_max = f_max;
  return cfg;
}

std::vector<Scenario> enumerate(const ExperimentMatrix& matrix) {
  std::vector<Scenario> out;
  out.reserve(matrix.scenario_count());
  for (const LinePreset& line : matrix.lines) {
    for (const LineCase& c : matrix.cases) {
      for (double factor : matrix.location_factors) {
        for (const auto& snr : matrix.noise_levels) {
          const std::vector<std::uint64_t> seeds = snr ? matrix.seeds : std::vector<std::uint64_t>{0};
          for (std::uint64_t seed : seeds) {
            for (const auto& desync : matrix.desync_cases) {
              out.push_back({out.size(), &line, &c, factor, snr, seed, desync});
            }
          }
        }
      }
    }
  }
  return out;
}

namespace {

double worst_relative(double estimate, double truth, double current) {
  const double e = truth > 0.0 ? std::abs(estimate - truth) / truth : std::abs(estimate);
  return std::max(current, e);
}

}  // namespace

ResultRow run_scenario(const Scenario& s, const ExperimentMatrix& matrix) {
  const auto start = std::chrono::steady_clock::now();
  ResultRow row;
  row.id = s.id;
  row.section = s.line->name;
  row.model = s.line_case->model_name;
  row.source = std::string(to_string(s.line_case->source.kind));
  row.length_m = s.line->length_m;
  row.a_over_l = s.line->a_over_l;
  row.x_true = s.location_factor * s.line->a_over_l;
  row.snr_db = s.snr_db;
  row.seed = s.seed;
  row.desync = s.desync;

  try {
    const ScenarioConfig cfg = s.config(matrix.sample_rate, matrix.analysis.f_max);
    const MeasurementSet ms = synthesize_measurements(cfg);
    const LocalizationReport report = run_localization(ms, matrix.analysis);
    row.x_hat = report.x_over_l;
    row.x_error = relative_error(report.x_over_l, row.x_true, 1.0);
    row.sigma = report.sigma;
    row.n_valid = report.n_valid;
    row.n_outliers = report.n_outliers;
    row.side = std::string(to_string(report.side));

    if (const auto fb = baseline_frequency(report)) {
      const double v = 1.0 / group_delay_per_meter(cfg.model, *fb);
      const double l = cfg.geometry.length_m;
      const double x_true_m = row.x_true * l;
      row.baseline_f_hz = *fb;
      row.baseline_error_low =
          relative_error(baseline_from_report(report, v * (1.0 - matrix.velocity_error), l).x_m, x_true_m, l);
      row.baseline_error_high =
          relative_error(baseline_from_report(report, v * (1.0 + matrix.velocity_error), l).x_m, x_true_m, l);
    }

    const double l = cfg.geometry.length_m;
    for (const CharacteristicPoint& c : report.characteristic.points) {
      if (!c.valid) continue;
      const GammaValue g = gamma_eval(cfg.model, c.f_hz);
      row.alpha_l_error = worst_relative(c.alpha_l, g.alpha * l, row.alpha_l_error);
      row.beta_prime_l_error = worst_relative(
          c.beta_prime_l, 2.0 * std::numbers::pi * group_delay_per_meter(cfg.model, c.f_hz) * l, row.beta_prime_l_error);
    }
  } catch (const Error& e) {
    row.status = std::string(to_string(e.code()));
    row.step = e.step();
  }
  row.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return row;
}

namespace {

unsigned worker_count(const ExperimentMatrix& matrix, std::size_t jobs) {
  unsigned n = matrix.workers > 0 ? static_cast<unsigned>(matrix.workers) : std::thread::hardware_concurrency();
  if (const char* env = std::getenv("TWLOC_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) n = static_cast<unsigned>(v);
  }
  n = std::max(1U, n);
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(1, jobs)));
}

}  // namespace

std::vector<ResultRow> run_rows(const ExperimentMatrix& matrix) {
  matrix.validate();
  const std::vector<Scenario> scenarios = enumerate(matrix);
  std::vector<ResultRow> rows(scenarios.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < scenarios.size(); i = next++) rows[i] = run_scenario(scenarios[i], matrix);
  };
  const unsigned n = worker_count(matrix, scenarios.size());
  if (n == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(work);
  }
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) { return a.id < b.id; });
  return rows;
}

std::string_view result_csv_header(bool timing) {
  static constexpr std::string_view base =
      "scenario,section,model,source,length_m,a_over_l,x_true_over_l,snr_db,seed,desync_m1_s,desync_m2_s,desync_m3_s,"
      "status,step,x_hat_over_l,x_error,sigma,n_valid,n_outliers,side,baseline_f_hz,baseline_error_low,"
      "baseline_error_high,alpha_l_error,beta_prime_l_error";
  static constexpr std::string_view with_timing =
      "scenario,section,model,source,length_m,a_over_l,x_true_over_l,snr_db,seed,desync_m1_s,desync_m2_s,desync_m3_s,"
      "status,step,x_hat_over_l,x_error,sigma,n_valid,n_outliers,side,baseline_f_hz,baseline_error_low,"
      "baseline_error_high,alpha_l_error,beta_prime_l_error,runtime_ms";
  return timing ? with_timing : base;
}

std::string result_csv(const std::vector<ResultRow>& rows, bool timing) {
  std::string out = "# errors are relative to the synthetic simulator's ground truth\n";
  out += result_csv_header(timing);
  out += '\n';
  for (const ResultRow& r : rows) {
    out += fmt::format("{},{},{},{},{:.17g},{:.17g},{:.17g},{},{},{:.17g},{:.17g},{:.17g},{},{},", r.id, r.section, r.model,
                       r.source, r.length_m, r.a_over_l, r.x_true, r.snr_db ? fmt::format("{:.17g}", *r.snr_db) : "",
                       r.seed, r.desync[0], r.desync[1], r.desync[2], r.status, r.step);
    out += fmt::format("{:.17g},{:.17g},{:.17g},{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}", r.x_hat, r.x_error,
                       r.sigma, r.n_valid, r.n_outliers, r.side, r.baseline_f_hz, r.baseline_error_low,
                       r.baseline_error_high, r.alpha_l_error, r.beta_prime_l_error);
    if (timing) out += fmt::format(",{:.3f}", r.runtime_ms);
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s) { return s.empty() ? 0.0 : std::stod(s); }

}  // namespace

std::vector<ResultRow> parse_result_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (header.empty()) {
      header = split(line);
      if (header.empty() || header.front() != "scenario") {
        throw Error(ErrorCode::Io, "not an experiment result CSV (header must start with 'scenario')");
      }
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != header.size()) throw Error(ErrorCode::Io, "result row with wrong column count: " + line);
    std::map<std::string, std::string> c;
    for (std::size_t i = 0; i < header.size(); ++i) c[header[i]] = cells[i];
    try {
      ResultRow r;
      r.id = std::stoul(c["scenario"]);
      r.section = c["section"];
      r.model = c["model"];
      r.source = c["source"];
      r.length_m = to_double(c["length_m"]);
      r.a_over_l = to_double(c["a_over_l"]);
      r.x_true = to_double(c["x_true_over_l"]);
      if (!c["snr_db"].empty()) r.snr_db = to_double(c["snr_db"]);
      r.seed = std::stoull(c["seed"]);
      r.desync = {to_double(c["desync_m1_s"]), to_double(c["desync_m2_s"]), to_double(c["desync_m3_s"])};
      r.status = c["status"];
      r.step = c["step"];
      r.x_hat = to_double(c["x_hat_over_l"]);
      r.x_error = to_double(c["x_error"]);
      r.sigma = to_double(c["sigma"]);
      r.n_valid = std::stoi(c["n_valid"]);
      r.n_outliers = std::stoi(c["n_outliers"]);
      r.side = c["side"];
      r.baseline_f_hz = to_double(c["baseline_f_hz"]);
      r.baseline_error_low = to_double(c["baseline_error_low"]);
      r.baseline_error_high = to_double(c["baseline_error_high"]);
      r.alpha_l_error = to_double(c["alpha_l_error"]);
      r.beta_prime_l_error = to_double(c["beta_prime_l_error"]);
      if (c.count("runtime_ms")) r.runtime_ms = to_double(c["runtime_ms"]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::Io, "malformed result row: " + line);
    }
  }
  return rows;
}

std::vector<GroupSummary> summarize(const std::vector<ResultRow>& rows) {
  std::vector<GroupSummary> groups;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> index;
  std::vector<std::vector<const ResultRow*>> members;
  for (const ResultRow& r : rows) {
    const auto key = std::make_tuple(r.section, r.model, r.source);
    auto [it, fresh] = index.try_emplace(key, groups.size());
    if (fresh) {
      groups.push_back({r.section, r.model, r.source, r.length_m});
      members.emplace_back();
    }
    members[it->second].push_back(&r);
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    GroupSummary& s = groups[g];
    s.total = members[g].size();
    double sum = 0.0;
    double sum_base = 0.0;
    for (const ResultRow* r : members[g]) {
      if (!r->ok()) continue;
      ++s.ok;
      sum += r->x_error;
      sum_base += std::max(r->baseline_error_low, r->baseline_error_high);
      s.worst_error = std::max(s.worst_error, r->x_error);
    }
    if (s.ok == 0) continue;
    s.mean_error = sum / static_cast<double>(s.ok);
    s.mean_baseline_error = sum_base / static_cast<double>(s.ok);
    if (s.ok > 1) {
      double ss = 0.0;
      for (const ResultRow* r : members[g]) {
        if (r->ok()) ss += (r->x_error - s.mean_error) * (r->x_error - s.mean_error);
      }
      s.std_error = std::sqrt(ss / static_cast<double>(s.ok - 1));
    }
  }
  return groups;
}

std::string summary_text(const std::vector<GroupSummary>& groups) {
  std::string out = "# relative errors |x_hat - x| / l against the synthetic simulator's ground truth, in %\n";
  out += fmt::format("{:<8}{:>9}  {:<9}{:<10}{:>6}{:>6}{:>11}{:>11}{:>11}{:>15}\n", "section", "l [km]", "model", "source",
                     "runs", "ok", "mean", "worst", "std", "baseline mean");
  for (const GroupSummary& g : groups) {
    out += fmt::format("{:<8}{:>9.1f}  {:<9}{:<10}{:>6}{:>6}{:>11.5f}{:>11.5f}{:>11.5f}{:>15.5f}\n", g.section,
                       g.length_m / 1e3, g.model, g.source, g.total, g.ok, 100.0 * g.mean_error, 100.0 * g.worst_error,
                       100.0 * g.std_error, 100.0 * g.mean_baseline_error);
  }
  return out;
}

MatrixOutcome run_matrix(const ExperimentMatrix& matrix, const std::filesystem::path& out_path) {
  matrix.validate();
  std::filesystem::path summary_path = out_path;
  summary_path += ".summary.txt";
  io::ensure_writable(out_path);
  io::ensure_writable(summary_path);

  MatrixOutcome outcome;
  outcome.rows = run_rows(matrix);
  outcome.summary = summarize(outcome.rows);

  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::out | std::ios::trunc | std::ios::binary);
    out << text;
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "write to '" + p.string() + "' failed");
  };
  write(out_path, result_csv(outcome.rows, matrix.timing));
  write(summary_path, summary_text(outcome.summary));
  return outcome;
}

}  // namespace twloc
