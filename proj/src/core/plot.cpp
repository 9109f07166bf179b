#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "error.hpp"
#include "run_store.hpp"

namespace selekt {

const std::vector<std::string>& figure_families() {
  static const std::vector<std::string> f{"acc-vs-alpha",      "acc-vs-eps",    "acc-vs-steps",
                                          "jacobian-vs-alpha", "dims-vs-layer", "corruption-bars"};
  return f;
}

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 60;

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x, y, lo, hi;
};

struct Axis {
  double lo = 0, hi = 1;
  std::vector<double> ticks;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

Axis nice_axis(double lo, double hi) {
  if (!(hi > lo)) {
    const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
    lo -= pad;
    hi += pad;
  }
  const double raw = (hi - lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  Axis a;
  a.lo = std::floor(lo / step) * step;
  a.hi = std::ceil(hi / step) * step;
  for (double t = a.lo; t <= a.hi + step * 1e-9; t += step) a.ticks.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  return a;
}

// Blue for negative alpha through grey to red for positive alpha.
std::string alpha_color(double alpha, double max_abs) {
  const double t = max_abs > 0 ? std::clamp(alpha / max_abs, -1.0, 1.0) : 0.0;
  int r, g, b;
  if (t < 0) {
    r = static_cast<int>(120 + 100 * t);
    g = static_cast<int>(120 + 20 * t);
    b = static_cast<int>(120 - 100 * t);
  } else {
    r = static_cast<int>(120 + 100 * t);
    g = static_cast<int>(120 - 80 * t);
    b = static_cast<int>(120 - 80 * t);
  }
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

class Svg {
 public:
  Svg(const std::string& title) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
         << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight
         << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
         << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
         << esc(title) << "</text>\n";
  }

  void axes(const Axis& x, const Axis& y, const std::string& xlabel, const std::string& ylabel,
            const std::vector<std::pair<double, std::string>>& xtick_labels = {}) {
    x_ = x;
    y_ = y;
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    for (double t : y.ticks) {
      out_ << "<line x1=\"" << x0 << "\" x2=\"" << x1 << "\" y1=\"" << py(t) << "\" y2=\""
           << py(t) << "\" stroke=\"#e5e5e5\"/>\n"
           << "<text x=\"" << x0 - 6 << "\" y=\"" << py(t) + 4 << "\" text-anchor=\"end\">"
           << num(t) << "</text>\n";
    }
    if (xtick_labels.empty()) {
      for (double t : x.ticks)
        out_ << "<text x=\"" << px(t) << "\" y=\"" << y0 + 16 << "\" text-anchor=\"middle\">"
             << num(t) << "</text>\n";
    } else {
      for (const auto& [t, label] : xtick_labels)
        out_ << "<text x=\"" << px(t) << "\" y=\"" << y0 + 16 << "\" text-anchor=\"middle\">"
             << esc(label) << "</text>\n";
    }
    out_ << "<line x1=\"" << x0 << "\" x2=\"" << x1 << "\" y1=\"" << y0 << "\" y2=\"" << y0
         << "\" stroke=\"black\"/>\n"
         << "<line x1=\"" << x0 << "\" x2=\"" << x0 << "\" y1=\"" << y0 << "\" y2=\"" << y1
         << "\" stroke=\"black\"/>\n"
         << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 18
         << "\" text-anchor=\"middle\">" << esc(xlabel) << "</text>\n"
         << "<text transform=\"translate(18," << (y0 + y1) / 2
         << ") rotate(-90)\" text-anchor=\"middle\">" << esc(ylabel) << "</text>\n";
  }

  void line_series(const Series& s) {
    if (s.x.size() > 1) {
      out_ << "<polygon class=\"ci-band\" fill=\"" << s.color << "\" fill-opacity=\"0.18\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) out_ << px(s.x[i]) << ',' << py(s.hi[i]) << ' ';
      for (std::size_t i = s.x.size(); i-- > 0;) out_ << px(s.x[i]) << ',' << py(s.lo[i]) << ' ';
      out_ << "\"/>\n<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << s.color
           << "\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) out_ << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
      out_ << "\"/>\n";
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      out_ << "<line class=\"ci-bar\" stroke=\"" << s.color << "\" x1=\"" << px(s.x[i])
           << "\" x2=\"" << px(s.x[i]) << "\" y1=\"" << py(s.lo[i]) << "\" y2=\"" << py(s.hi[i])
           << "\"/>\n<circle r=\"3\" fill=\"" << s.color << "\" cx=\"" << px(s.x[i])
           << "\" cy=\"" << py(s.y[i]) << "\"/>\n";
    }
  }

  void bar(double center, double width, double value, double lo, double hi,
           const std::string& color) {
    const double left = px(center) - width / 2;
    const double top = py(std::max(value, 0.0));
    const double base = py(std::max(y_.lo, 0.0));
    out_ << "<rect x=\"" << left << "\" y=\"" << std::min(top, base) << "\" width=\"" << width
         << "\" height=\"" << std::abs(base - top) << "\" fill=\"" << color
         << "\" fill-opacity=\"0.75\"/>\n"
         << "<rect class=\"ci-band\" x=\"" << left << "\" y=\"" << py(hi) << "\" width=\""
         << width << "\" height=\"" << std::max(py(lo) - py(hi), 0.0) << "\" fill=\"" << color
         << "\" fill-opacity=\"0.25\"/>\n"
         << "<line class=\"ci-bar\" stroke=\"black\" x1=\"" << px(center) << "\" x2=\""
         << px(center) << "\" y1=\"" << py(lo) << "\" y2=\"" << py(hi) << "\"/>\n";
  }

  void legend(const std::vector<std::pair<std::string, std::string>>& entries,
              const std::string& heading) {
    const double x = kWidth - kRight + 16;
    double y = kTop + 10;
    out_ << "<text x=\"" << x << "\" y=\"" << y << "\" font-weight=\"bold\">" << esc(heading)
         << "</text>\n";
    for (const auto& [label, color] : entries) {
      y += 18;
      out_ << "<rect x=\"" << x << "\" y=\"" << y - 9 << "\" width=\"14\" height=\"10\" fill=\""
           << color << "\"/>\n<text x=\"" << x + 20 << "\" y=\"" << y << "\">" << esc(label)
           << "</text>\n";
    }
  }

  double px(double v) const {
    return kLeft + (v - x_.lo) / (x_.hi - x_.lo) * (kWidth - kLeft - kRight);
  }
  double py(double v) const {
    return kHeight - kBottom - (v - y_.lo) / (y_.hi - y_.lo) * (kHeight - kTop - kBottom);
  }

  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  std::ostringstream out_;
  Axis x_, y_;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(s);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  return out;
}

double field_value(const std::string& part, const std::string& key) {
  require(part.rfind(key + "=", 0) == 0, ErrorCode::kIo, "malformed metric segment '" + part + "'");
  return std::stod(part.substr(key.size() + 1));
}

std::vector<double> alphas_of(const Summary& s) {
  std::vector<double> a;
  for (const auto& g : s.groups) a.push_back(g.alpha);
  return a;
}

double max_abs_alpha(const Summary& s) {
  double m = 0;
  for (const auto& g : s.groups) m = std::max(m, std::abs(g.alpha));
  return m;
}

std::string alpha_label(double a) { return "alpha = " + num(a); }

[[noreturn]] void missing(const std::string& metric, const std::string& fig) {
  throw Error(ErrorCode::kInvalidArgument,
              "summary has no metric '" + metric + "' needed by figure " + fig, "summary");
}

// y range over all series including CI bounds.
Axis y_axis(const std::vector<Series>& series, bool from_zero) {
  double lo = from_zero ? 0.0 : INFINITY, hi = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      lo = std::min(lo, s.lo[i]);
      hi = std::max(hi, s.hi[i]);
    }
  return nice_axis(lo, hi);
}

Axis x_axis(const std::vector<Series>& series) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& s : series)
    for (double x : s.x) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  return nice_axis(lo, hi);
}

void push(Series& s, double x, const MetricSummary& m) {
  s.x.push_back(x);
  s.y.push_back(m.mean);
  s.lo.push_back(m.lower);
  s.hi.push_back(m.upper);
}

std::string line_chart(const std::string& title, const std::string& xlabel,
                       const std::string& ylabel, const std::vector<Series>& series,
                       const std::string& legend_heading, bool from_zero,
                       const std::vector<std::pair<double, std::string>>& xticks = {}) {
  Svg svg(title);
  svg.axes(x_axis(series), y_axis(series, from_zero), xlabel, ylabel, xticks);
  std::vector<std::pair<std::string, std::string>> legend;
  for (const auto& s : series) {
    svg.line_series(s);
    legend.push_back({s.label, s.color});
  }
  svg.legend(legend, legend_heading);
  return svg.finish();
}

std::string acc_vs_alpha(const Summary& s) {
  const std::vector<std::pair<std::string, std::string>> wanted{
      {"clean_acc", "clean"},
      {"corrupt/mean_acc", "corrupted (mean)"},
      {"corrupt/mean_norm", "corrupted / clean"}};
  std::vector<Series> series;
  int color = 0;
  for (const auto& [metric, label] : wanted) {
    Series line{label, kPalette[color++], {}, {}, {}, {}};
    for (double a : alphas_of(s))
      if (const auto* m = s.find(metric, a)) push(line, a, *m);
    if (line.x.empty()) {
      if (metric == "corrupt/mean_norm") continue;
      missing(metric, "acc-vs-alpha");
    }
    series.push_back(std::move(line));
  }
  return line_chart("Accuracy vs selectivity regularization", "alpha", "test accuracy", series,
                    "metric", true);
}

std::string per_alpha_lines(const Summary& s, const std::string& title, const std::string& xlabel,
                            const std::string& ylabel,
                            const std::map<double, std::string>& x_to_metric,
                            const std::vector<std::pair<double, std::string>>& xticks = {}) {
  std::vector<Series> series;
  const double amax = max_abs_alpha(s);
  for (double a : alphas_of(s)) {
    Series line{alpha_label(a), alpha_color(a, amax), {}, {}, {}, {}};
    for (const auto& [x, metric] : x_to_metric)
      if (const auto* m = s.find(metric, a)) push(line, x, *m);
    if (!line.x.empty()) series.push_back(std::move(line));
  }
  return line_chart(title, xlabel, ylabel, series, "alpha", true, xticks);
}

std::string acc_vs_eps(const Summary& s, const std::string& kind) {
  const std::string method = kind.empty() ? "fgsm" : kind;
  require(method == "fgsm" || method == "pgd", ErrorCode::kInvalidArgument,
          "acc-vs-eps kind must be fgsm or pgd", "kind");
  std::map<double, std::string> x_to_metric;
  if (method == "fgsm") {
    for (const auto& name : s.metric_names()) {
      const auto parts = split(name, '/');
      if (parts.size() == 3 && parts[0] == "attack" && parts[1] == "fgsm")
        x_to_metric[field_value(parts[2], "eps")] = name;
    }
  } else {
    // Use the largest step count evaluated.
    int best_steps = -1;
    for (const auto& name : s.metric_names()) {
      const auto parts = split(name, '/');
      if (parts.size() == 5 && parts[0] == "attack" && parts[1] == "pgd")
        best_steps = std::max(best_steps, static_cast<int>(field_value(parts[3], "steps")));
    }
    for (const auto& name : s.metric_names()) {
      const auto parts = split(name, '/');
      if (parts.size() == 5 && parts[0] == "attack" && parts[1] == "pgd" &&
          static_cast<int>(field_value(parts[3], "steps")) == best_steps)
        x_to_metric[field_value(parts[2], "eps")] = name;
    }
  }
  if (x_to_metric.empty()) missing("attack/" + method + "/eps=*", "acc-vs-eps");
  return per_alpha_lines(s, "Accuracy vs perturbation budget (" + method + ")", "epsilon",
                         "test accuracy", x_to_metric);
}

std::string acc_vs_steps(const Summary& s) {
  // Group PGD metrics by (eps, step size); plot the group with most step counts.
  std::map<std::pair<double, double>, std::map<double, std::string>> groups;
  for (const auto& name : s.metric_names()) {
    const auto parts = split(name, '/');
    if (parts.size() == 5 && parts[0] == "attack" && parts[1] == "pgd")
      groups[{field_value(parts[2], "eps"), field_value(parts[4], "step")}]
            [field_value(parts[3], "steps")] = name;
  }
  if (groups.empty()) missing("attack/pgd/*", "acc-vs-steps");
  const auto best = std::max_element(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
    return a.second.size() < b.second.size() ||
           (a.second.size() == b.second.size() && a.first < b.first);
  });
  return per_alpha_lines(s,
                         "Accuracy vs PGD steps (eps=" + num(best->first.first) +
                             ", step=" + num(best->first.second) + ")",
                         "PGD steps", "test accuracy", best->second);
}

std::string jacobian_vs_alpha(const Summary& s, const std::string& kind) {
  std::string metric = "jacobian/" + (kind.empty() ? std::string("frobenius") : kind);
  Series line{"mean Jacobian norm", kPalette[0], {}, {}, {}, {}};
  for (double a : alphas_of(s))
    if (const auto* m = s.find(metric, a)) push(line, a, *m);
  if (line.x.empty()) missing(metric, "jacobian-vs-alpha");
  return line_chart("Input-output Jacobian vs selectivity regularization", "alpha",
                    "Jacobian norm (" + metric.substr(9) + ")", {line}, "metric", true);
}

std::string dims_vs_layer(const Summary& s, const std::string& kind) {
  const std::string k = kind.empty() ? "clean" : kind;
  require(k == "clean" || k == "corruption_diff" || k == "adversarial_diff",
          ErrorCode::kInvalidArgument,
          "dims-vs-layer kind must be clean, corruption_diff or adversarial_diff", "kind");
  std::string pert;
  std::map<double, std::string> x_to_metric;
  std::vector<std::pair<double, std::string>> ticks;
  for (const auto& name : s.metric_names()) {
    const auto parts = split(name, '/');
    if (parts.size() != 5 || parts[0] != "dims" || parts[1] != k) continue;
    if (pert.empty()) pert = parts[2];
    if (parts[2] != pert) continue;
    const double idx = std::stod(parts[3]);
    x_to_metric[idx] = name;
    ticks.push_back({idx, parts[4]});
  }
  if (x_to_metric.empty()) missing("dims/" + k + "/*", "dims-vs-layer");
  return per_alpha_lines(s,
                         "Fraction of dimensionality by layer (" + k +
                             (pert == "none" ? std::string() : ", " + pert) + ")",
                         "layer", "fraction of dimensions for 90% variance", x_to_metric, ticks);
}

std::string corruption_bars(const Summary& s, const std::string& kind) {
  const std::string k = kind.empty() ? "acc" : kind;
  require(k == "acc" || k == "norm", ErrorCode::kInvalidArgument,
          "corruption-bars kind must be acc or norm", "kind");
  std::vector<std::string> names;
  for (const auto& name : s.metric_names()) {
    const auto parts = split(name, '/');
    if (parts.size() == 3 && parts[0] == "corrupt" && parts[2] == k) names.push_back(parts[1]);
  }
  if (names.empty()) missing("corrupt/*/" + k, "corruption-bars");
  const auto alphas = alphas_of(s);
  const double amax = max_abs_alpha(s);
  double hi = 0.0;
  for (const auto& m : s.metrics) hi = std::max(hi, m.name.rfind("corrupt/", 0) == 0 ? m.upper : 0.0);

  Svg svg(k == "acc" ? "Accuracy per corruption" : "Normalized accuracy per corruption");
  std::vector<std::pair<double, std::string>> ticks;
  for (std::size_t i = 0; i < names.size(); ++i) ticks.push_back({static_cast<double>(i), names[i]});
  Axis x{-0.5, static_cast<double>(names.size()) - 0.5, {}};
  svg.axes(x, nice_axis(0.0, hi), "corruption", k == "acc" ? "test accuracy" : "corrupted / clean",
           ticks);
  const double slot = (kWidth - kLeft - kRight) / static_cast<double>(names.size());
  const double bar_w = slot * 0.8 / static_cast<double>(std::max<std::size_t>(alphas.size(), 1));
  std::vector<std::pair<std::string, std::string>> legend;
  for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
    const std::string color = alpha_color(alphas[ai], amax);
    legend.push_back({alpha_label(alphas[ai]), color});
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto* m = s.find("corrupt/" + names[i] + "/" + k, alphas[ai]);
      if (!m) continue;
      const double offset = (static_cast<double>(ai) - (alphas.size() - 1) / 2.0) * bar_w;
      const double center_px = svg.px(static_cast<double>(i)) + offset;
      const double center = x.lo + (center_px - kLeft) / (kWidth - kLeft - kRight) * (x.hi - x.lo);
      svg.bar(center, bar_w * 0.9, m->mean, m->lower, m->upper, color);
    }
  }
  svg.legend(legend, "alpha");
  return svg.finish();
}

}  // namespace

std::string render_figure(const Summary& summary, const std::string& fig, const std::string& kind) {
  require(!summary.metrics.empty(), ErrorCode::kInvalidArgument, "summary has no metrics",
          "summary");
  if (fig == "acc-vs-alpha") return acc_vs_alpha(summary);
  if (fig == "acc-vs-eps") return acc_vs_eps(summary, kind);
  if (fig == "acc-vs-steps") return acc_vs_steps(summary);
  if (fig == "jacobian-vs-alpha") return jacobian_vs_alpha(summary, kind);
  if (fig == "dims-vs-layer") return dims_vs_layer(summary, kind);
  if (fig == "corruption-bars") return corruption_bars(summary, kind);
  throw Error(ErrorCode::kInvalidArgument, "unknown figure family '" + fig + "'", "fig");
}

std::filesystem::path plot_figure(const std::filesystem::path& summary_json, const std::string& fig,
                                  const std::string& kind,
                                  const std::optional<std::filesystem::path>& out) {
  const Summary s = read_summary(summary_json);
  const std::string svg = render_figure(s, fig, kind);
  const std::filesystem::path dir = out ? *out : summary_json.parent_path() / "figures";
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message(), "out");
  const auto path = dir / (fig + (kind.empty() ? "" : "-" + kind) + ".svg");
  write_text_atomic(path, svg);
  return path;
}

}  // namespace selekt
