#include "twloc/plot.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>

#include "twloc/error.hpp"

namespace twloc::plot {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 36.0;
constexpr double kBottom = 50.0;

constexpr std::array<const char*, 6> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

struct Axes {
  double x0, x1, y0, y1;
  bool log_x = false;
  bool log_y = false;

  double px(double x) const {
    const double t = log_x ? (std::log10(x) - std::log10(x0)) / (std::log10(x1) - std::log10(x0)) : (x - x0) / (x1 - x0);
    return kLeft + t * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    const double t = log_y ? (std::log10(y) - std::log10(y0)) / (std::log10(y1) - std::log10(y0)) : (y - y0) / (y1 - y0);
    return kHeight - kBottom - t * (kHeight - kTop - kBottom);
  }
};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string open_svg(const std::string& title) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"22\" font-size=\"15\" text-anchor=\"middle\">{3}</text>\n",
      kWidth, kHeight, kWidth / 2.0, escape(title));
}

// Frame, ticks and axis labels.
std::string frame(const Axes& ax, const std::string& xlabel, const std::string& ylabel, int ticks = 5) {
  std::string s = fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n", kLeft,
                              kTop, kWidth - kLeft - kRight, kHeight - kTop - kBottom);
  auto tick_values = [ticks](double lo, double hi, bool log) {
    std::vector<double> v;
    if (log) {
      for (double e = std::floor(std::log10(lo)); e <= std::ceil(std::log10(hi)); e += 1.0) {
        const double t = std::pow(10.0, e);
        if (t >= lo * (1 - 1e-9) && t <= hi * (1 + 1e-9)) v.push_back(t);
      }
      if (v.size() < 2) v = {lo, hi};
    } else {
      for (int i = 0; i <= ticks; ++i) v.push_back(lo + (hi - lo) * i / ticks);
    }
    return v;
  };
  for (double x : tick_values(ax.x0, ax.x1, ax.log_x)) {
    const double p = ax.px(x);
    s += fmt::format("<line x1=\"{0:.2f}\" x2=\"{0:.2f}\" y1=\"{1}\" y2=\"{2}\" stroke=\"#333\"/>"
                     "<text x=\"{0:.2f}\" y=\"{3}\" text-anchor=\"middle\">{4:.4g}</text>\n",
                     p, kHeight - kBottom, kHeight - kBottom + 5, kHeight - kBottom + 18, x);
  }
  for (double y : tick_values(ax.y0, ax.y1, ax.log_y)) {
    const double p = ax.py(y);
    s += fmt::format("<line x1=\"{0}\" x2=\"{1}\" y1=\"{2:.2f}\" y2=\"{2:.2f}\" stroke=\"#333\"/>"
                     "<text x=\"{3}\" y=\"{4:.2f}\" text-anchor=\"end\">{5:.4g}</text>\n",
                     kLeft - 5, kLeft, p, kLeft - 8, p + 4, y);
  }
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", (kLeft + kWidth - kRight) / 2.0,
                   kHeight - 12, escape(xlabel));
  s += fmt::format("<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
                   (kTop + kHeight - kBottom) / 2.0, escape(ylabel));
  return s;
}

void save(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::out | std::ios::trunc | std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << body << "</svg>\n";
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write to '" + path.string() + "' failed");
}

// Viridis-like ramp on [0, 1].
std::string color(double t) {
  static constexpr std::array<std::array<double, 3>, 5> stops{
      {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const auto i = std::min<std::size_t>(3, static_cast<std::size_t>(t));
  const double u = t - static_cast<double>(i);
  std::array<int, 3> c{};
  for (int k = 0; k < 3; ++k) c[k] = static_cast<int>(std::lround(stops[i][k] + u * (stops[i + 1][k] - stops[i][k])));
  return fmt::format("#{:02x}{:02x}{:02x}", c[0], c[1], c[2]);
}

}  // namespace

void waveform_svg(const fs::path& path, const Waveform& w, const std::string& title, std::optional<double> marker_time) {
  const double t_first = w.t0();
  const double t_last = w.time_at(static_cast<double>(w.size() - 1));
  auto [lo, hi] = std::minmax_element(w.samples().begin(), w.samples().end());
  double y0 = *lo;
  double y1 = *hi;
  if (y1 - y0 <= 0.0) {
    y0 -= 1.0;
    y1 += 1.0;
  }
  const double pad = 0.05 * (y1 - y0);
  const Axes ax{t_first * 1e6, std::max(t_last, t_first + 1e-12) * 1e6, y0 - pad, y1 + pad};

  std::string s = open_svg(title) + frame(ax, "time [us]", "amplitude");
  // Min/max decimation keeps narrow pulses visible at any zoom.
  const std::size_t columns = 1500;
  const std::size_t per = std::max<std::size_t>(1, w.size() / columns);
  s += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1\" points=\"";
  for (std::size_t k = 0; k < w.size(); k += per) {
    const std::size_t end = std::min(w.size(), k + per);
    std::size_t kmin = k;
    std::size_t kmax = k;
    for (std::size_t j = k; j < end; ++j) {
      if (w[j] < w[kmin]) kmin = j;
      if (w[j] > w[kmax]) kmax = j;
    }
    for (std::size_t j : {std::min(kmin, kmax), std::max(kmin, kmax)}) {
      s += fmt::format("{:.2f},{:.2f} ", ax.px(w.time_at(static_cast<double>(j)) * 1e6), ax.py(w[j]));
    }
  }
  s += "\"/>\n";
  if (marker_time) {
    const double p = ax.px(*marker_time * 1e6);
    s += fmt::format("<line class=\"arrival\" data-t=\"{:.17g}\" x1=\"{:.2f}\" x2=\"{:.2f}\" y1=\"{}\" y2=\"{}\" "
                     "stroke=\"#d62728\" stroke-dasharray=\"4 3\"/>\n",
                     *marker_time, p, p, kTop, kHeight - kBottom);
  }
  save(path, s);
}

void scalogram_svg(const fs::path& path, const Scalogram& sg, const ArrivalFeature& feature, const std::string& title) {
  const auto& freqs = sg.grid().frequencies;
  const double t_first = sg.t0();
  const double t_last = sg.t0() + static_cast<double>(sg.cols()) / sg.sample_rate();
  const Axes ax{t_first * 1e6, t_last * 1e6, 0.0, static_cast<double>(freqs.size())};

  const std::size_t columns = std::min<std::size_t>(600, sg.cols());
  const std::size_t per = (sg.cols() + columns - 1) / columns;
  std::vector<std::vector<double>> cells(sg.rows(), std::vector<double>(columns, 0.0));
  double peak = 0.0;
  for (std::size_t i = 0; i < sg.rows(); ++i) {
    const auto row = sg.row(i);
    for (std::size_t k = 0; k < sg.cols(); ++k) {
      double& c = cells[i][k / per];
      c = std::max(c, std::abs(row[k]));
    }
    for (double c : cells[i]) peak = std::max(peak, c);
  }

  std::string s = open_svg(title);
  const double cell_w = (kWidth - kLeft - kRight) / static_cast<double>(columns);
  const double cell_h = (kHeight - kTop - kBottom) / static_cast<double>(sg.rows());
  for (std::size_t i = 0; i < sg.rows(); ++i) {
    const double y = kHeight - kBottom - static_cast<double>(i + 1) * cell_h;
    for (std::size_t c = 0; c < columns; ++c) {
      const double v = peak > 0.0 ? cells[i][c] / peak : 0.0;
      s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>", kLeft + c * cell_w,
                       y, cell_w + 0.3, cell_h + 0.3, color(std::sqrt(v)));
    }
    s += '\n';
  }
  s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n", kLeft, kTop,
                   kWidth - kLeft - kRight, kHeight - kTop - kBottom);
  for (int i = 0; i <= 5; ++i) {
    const double t = ax.x0 + (ax.x1 - ax.x0) * i / 5.0;
    s += fmt::format("<text x=\"{:.2f}\" y=\"{}\" text-anchor=\"middle\">{:.4g}</text>\n", ax.px(t), kHeight - kBottom + 18,
                     t);
  }
  for (std::size_t i = 0; i < freqs.size(); i += std::max<std::size_t>(1, freqs.size() / 6)) {
    s += fmt::format("<text x=\"{}\" y=\"{:.2f}\" text-anchor=\"end\">{:.0f}</text>\n", kLeft - 6,
                     ax.py(static_cast<double>(i) + 0.5) + 4, freqs[i] / 1e3);
  }
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">time [us]</text>\n", (kLeft + kWidth - kRight) / 2.0,
                   kHeight - 12);
  s += fmt::format("<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">f [kHz]</text>\n",
                   (kTop + kHeight - kBottom) / 2.0);

  for (std::size_t i = 0; i < feature.size() && i < freqs.size(); ++i) {
    const ArrivalPoint& p = feature[i];
    if (!p.valid) continue;
    s += fmt::format("<circle class=\"maximum\" data-f-hz=\"{:.17g}\" data-t-max=\"{:.17g}\" cx=\"{:.2f}\" cy=\"{:.2f}\" "
                     "r=\"3\" fill=\"none\" stroke=\"#ff2020\" stroke-width=\"1.5\"/>\n",
                     p.f_hz, p.t_max, ax.px(p.t_max * 1e6), ax.py(static_cast<double>(i) + 0.5));
  }
  save(path, s);
}

void location_svg(const fs::path& path, const LocalizationReport& r) {
  double y0 = r.x_over_l;
  double y1 = r.x_over_l;
  for (std::size_t i = 0; i < r.per_frequency.size(); ++i) {
    if (!r.per_frequency[i].valid) continue;
    y0 = std::min(y0, r.per_frequency[i].raw);
    y1 = std::max(y1, r.per_frequency[i].raw);
  }
  const double span = std::max(y1 - y0, std::max(4.0 * r.sigma, 1e-4));
  const double mid = 0.5 * (y0 + y1);
  const Axes ax{r.frequencies.front(), r.frequencies.back(), mid - 0.6 * span, mid + 0.6 * span, true, false};

  std::string s = open_svg(fmt::format("x(f)/l, aggregate {:.5f} ± {:.5f}", r.x_over_l, r.sigma)) +
                  frame(ax, "central frequency [Hz]", "x(f) / l");
  const double band_lo = ax.py(r.x_over_l - r.sigma);
  const double band_hi = ax.py(r.x_over_l + r.sigma);
  s += fmt::format("<rect x=\"{}\" y=\"{:.2f}\" width=\"{}\" height=\"{:.2f}\" fill=\"#1f77b4\" fill-opacity=\"0.15\"/>\n",
                   kLeft, band_hi, kWidth - kLeft - kRight, std::max(0.5, band_lo - band_hi));
  s += fmt::format("<line class=\"aggregate\" data-x-over-l=\"{:.17g}\" x1=\"{}\" x2=\"{}\" y1=\"{:.2f}\" y2=\"{:.2f}\" "
                   "stroke=\"#1f77b4\"/>\n",
                   r.x_over_l, kLeft, kWidth - kRight, ax.py(r.x_over_l), ax.py(r.x_over_l));
  for (std::size_t i = 0; i < r.per_frequency.size(); ++i) {
    const LocationPoint& p = r.per_frequency[i];
    if (!p.valid) continue;
    const bool out = r.outlier[i];
    s += fmt::format("<circle class=\"{}\" data-f-hz=\"{:.17g}\" data-x-over-l=\"{:.17g}\" cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"4\" "
                     "fill=\"{}\"/>\n",
                     out ? "outlier" : "estimate", p.f_hz, p.raw, ax.px(p.f_hz), ax.py(p.raw), out ? "#d62728" : "#333");
  }
  save(path, s);
}

void error_scatter_svg(const fs::path& path, const std::vector<ResultRow>& rows) {
  double lo = 1e-6;
  double hi = 1e-2;
  for (const ResultRow& r : rows) {
    if (!r.ok()) continue;
    lo = std::min(lo, std::max(r.x_error, 1e-9));
    hi = std::max(hi, r.x_error);
  }
  lo = std::pow(10.0, std::floor(std::log10(lo)));
  hi = std::pow(10.0, std::ceil(std::log10(hi)));
  const Axes ax{-0.5, static_cast<double>(rows.size()) - 0.5, lo, hi, false, true};
  std::string s = open_svg("relative localization error per scenario") + frame(ax, "scenario", "|x_hat - x| / l");

  std::map<std::string, std::size_t> groups;
  for (const ResultRow& r : rows) {
    const std::string key = r.section + " " + r.model + "/" + r.source;
    const auto [it, fresh] = groups.try_emplace(key, groups.size());
    const char* c = kPalette[it->second % kPalette.size()];
    const double x = ax.px(static_cast<double>(&r - rows.data()));
    if (r.ok()) {
      s += fmt::format("<circle data-scenario=\"{}\" data-x-error=\"{:.17g}\" cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n",
                       r.id, r.x_error, x, ax.py(std::max(r.x_error, lo)), c);
    } else {
      s += fmt::format("<text data-scenario=\"{}\" x=\"{:.2f}\" y=\"{}\" fill=\"{}\" text-anchor=\"middle\">x</text>\n", r.id, x,
                       kTop + 12, c);
    }
  }
  for (const double level : {1e-3, 1e-2}) {
    if (level < lo || level > hi) continue;
    s += fmt::format("<line x1=\"{}\" x2=\"{}\" y1=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#999\" stroke-dasharray=\"5 4\"/>\n",
                     kLeft, kWidth - kRight, ax.py(level), ax.py(level));
  }
  double ly = kTop + 14;
  for (const auto& [name, idx] : groups) {
    s += fmt::format("<text x=\"{}\" y=\"{:.1f}\" fill=\"{}\">{}</text>\n", kWidth - kRight - 150, ly,
                     kPalette[idx % kPalette.size()], escape(name));
    ly += 15;
  }
  save(path, s);
}

void error_histogram_svg(const fs::path& path, const std::vector<ResultRow>& rows) {
  // Bins over log10(error) in quarter decades from 1e-8 to 1.
  constexpr int kBins = 32;
  std::array<int, kBins> counts{};
  int failed = 0;
  for (const ResultRow& r : rows) {
    if (!r.ok()) {
      ++failed;
      continue;
    }
    const double e = std::clamp(std::log10(std::max(r.x_error, 1e-8)), -8.0, -1e-9);
    ++counts[static_cast<std::size_t>(std::min(kBins - 1, static_cast<int>((e + 8.0) * 4.0)))];
  }
  const int peak = std::max(1, *std::max_element(counts.begin(), counts.end()));
  const Axes ax{1e-8, 1.0, 0.0, static_cast<double>(peak), true, false};
  std::string s = open_svg(fmt::format("error distribution ({} runs, {} failed)", rows.size(), failed)) +
                  frame(ax, "|x_hat - x| / l", "scenarios");
  for (int b = 0; b < kBins; ++b) {
    if (counts[b] == 0) continue;
    const double x0 = ax.px(std::pow(10.0, -8.0 + b / 4.0));
    const double x1 = ax.px(std::pow(10.0, -8.0 + (b + 1) / 4.0));
    s += fmt::format("<rect data-count=\"{}\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"#1f77b4\"/>\n",
                     counts[b], x0, ax.py(counts[b]), x1 - x0 - 1.0, ax.py(0.0) - ax.py(counts[b]));
  }
  save(path, s);
}

std::vector<fs::path> emit_report_plots(const MeasurementSet& ms, const LocalizationReport& report,
                                        const AnalysisParams& params, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + dir.string() + "': " + ec.message());
  std::vector<fs::path> files;
  const FrequencyGrid grid = central_frequencies(params.f_min, params.f_max, params.voices, ms.waveforms[0].sample_rate());
  for (int i = 0; i < 3; ++i) {
    const std::string name = device_names[i];
    std::optional<double> marker;
    const auto& pts = report.features[i].points;
    for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
      if (it->valid) {
        marker = it->t_max;
        break;
      }
    }
    files.push_back(dir / (name + "_waveform.svg"));
    waveform_svg(files.back(), ms.waveforms[i], name + " modal waveform", marker);
    const Scalogram sg = cwt_morlet(ms.waveforms[i], grid, params.cwt.omega0);
    files.push_back(dir / (name + "_scalogram.svg"));
    scalogram_svg(files.back(), sg, report.features[i], name + " |W(t, f)|");
  }
  files.push_back(dir / "location.svg");
  location_svg(files.back(), report);
  return files;
}

std::vector<fs::path> emit_matrix_plots(const std::vector<ResultRow>& rows, const fs::path& dir) {
  if (rows.empty()) return {};
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + dir.string() + "': " + ec.message());
  std::vector<fs::path> files{dir / "errors.svg", dir / "error_histogram.svg"};
  error_scatter_svg(files[0], rows);
  error_histogram_svg(files[1], rows);
  return files;
}

}  // namespace twloc::plot
