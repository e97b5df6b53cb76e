#include "cmlf/eval/figures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cmlf/errors.hpp"

namespace cmlf::eval {

namespace {

constexpr int kWidth = 720, kHeight = 440;
constexpr int kMarginLeft = 70, kMarginRight = 160, kMarginTop = 50, kMarginBottom = 55;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(4);
  out << v;
  return out.str();
}

struct Canvas {
  std::ostringstream body;

  void text(double x, double y, const std::string& s, int size = 12,
            const std::string& anchor = "start", const std::string& color = "#222") {
    body << "<text x='" << fmt(x) << "' y='" << fmt(y) << "' font-size='" << size
         << "' text-anchor='" << anchor << "' fill='" << color
         << "' font-family='sans-serif'>" << s << "</text>\n";
  }
  void line(double x1, double y1, double x2, double y2, const std::string& color = "#555",
            double width = 1.0) {
    body << "<line x1='" << fmt(x1) << "' y1='" << fmt(y1) << "' x2='" << fmt(x2) << "' y2='"
         << fmt(y2) << "' stroke='" << color << "' stroke-width='" << fmt(width) << "'/>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& fill,
            double opacity = 1.0) {
    body << "<rect x='" << fmt(x) << "' y='" << fmt(y) << "' width='" << fmt(w) << "' height='"
         << fmt(h) << "' fill='" << fill << "' fill-opacity='" << fmt(opacity) << "'/>\n";
  }
  void path(const std::string& d, const std::string& stroke, double width = 1.8,
            const std::string& fill = "none", double opacity = 1.0) {
    body << "<path d='" << d << "' stroke='" << stroke << "' stroke-width='" << fmt(width)
         << "' fill='" << fill << "' fill-opacity='" << fmt(opacity) << "'/>\n";
  }

  void save(const std::filesystem::path& path, const std::string& title) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write figure: " + path.string());
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth << "' height='" << kHeight
        << "' viewBox='0 0 " << kWidth << " " << kHeight << "'>\n";
    out << "<rect width='" << kWidth << "' height='" << kHeight << "' fill='white'/>\n";
    out << "<text x='" << kWidth / 2 << "' y='28' font-size='15' text-anchor='middle' "
        << "font-family='sans-serif' fill='#111'>" << title << "</text>\n";
    out << body.str();
    out << "</svg>\n";
  }
};

struct Scale {
  double lo, hi, px0, px1;
  double operator()(double v) const { return px0 + (v - lo) / (hi - lo) * (px1 - px0); }
};

void draw_axes(Canvas& canvas, const Scale& x, const Scale& y, const std::string& x_label,
               const std::string& y_label) {
  canvas.line(kMarginLeft, kHeight - kMarginBottom, kWidth - kMarginRight,
              kHeight - kMarginBottom);
  canvas.line(kMarginLeft, kMarginTop, kMarginLeft, kHeight - kMarginBottom);
  for (int k = 0; k <= 4; ++k) {
    double vy = y.lo + (y.hi - y.lo) * k / 4.0;
    double py = y(vy);
    canvas.line(kMarginLeft - 4, py, kMarginLeft, py);
    canvas.text(kMarginLeft - 8, py + 4, fmt(vy), 10, "end");
    double vx = x.lo + (x.hi - x.lo) * k / 4.0;
    double px = x(vx);
    canvas.line(px, kHeight - kMarginBottom, px, kHeight - kMarginBottom + 4);
    canvas.text(px, kHeight - kMarginBottom + 18, fmt(vx), 10, "middle");
  }
  canvas.text((kMarginLeft + kWidth - kMarginRight) / 2.0, kHeight - 14, x_label, 12, "middle");
  canvas.text(18, kMarginTop - 10, y_label, 12, "start");
}

}  // namespace

void write_line_chart(const std::filesystem::path& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<LineSeries>& series) {
  if (series.empty()) throw ContractError("write_line_chart: no series");
  double lo = 0.0, hi = -1e300;
  Eigen::Index n = series.front().values.size();
  for (const LineSeries& s : series) {
    for (Eigen::Index i = 0; i < s.values.size(); ++i) {
      double band = s.band.size() > 0 ? s.band[i] : 0.0;
      hi = std::max(hi, s.values[i] + band);
      lo = std::min(lo, s.values[i] - band);
    }
  }
  if (hi <= lo) hi = lo + 1.0;
  Scale x{0.0, static_cast<double>(n - 1), kMarginLeft, kWidth - kMarginRight};
  Scale y{lo, hi * 1.05, kHeight - kMarginBottom, kMarginTop};

  Canvas canvas;
  draw_axes(canvas, x, y, x_label, y_label);
  for (std::size_t s = 0; s < series.size(); ++s) {
    const std::string color = kPalette[s % kPaletteSize];
    const LineSeries& ls = series[s];
    if (ls.band.size() == ls.values.size()) {
      std::ostringstream d;
      for (Eigen::Index i = 0; i < n; ++i)
        d << (i == 0 ? "M" : "L") << fmt(x(static_cast<double>(i))) << " "
          << fmt(y(ls.values[i] + ls.band[i])) << " ";
      for (Eigen::Index i = n; i-- > 0;)
        d << "L" << fmt(x(static_cast<double>(i))) << " " << fmt(y(ls.values[i] - ls.band[i]))
          << " ";
      d << "Z";
      canvas.path(d.str(), "none", 0.0, color, 0.15);
    }
    std::ostringstream d;
    for (Eigen::Index i = 0; i < n; ++i)
      d << (i == 0 ? "M" : "L") << fmt(x(static_cast<double>(i))) << " " << fmt(y(ls.values[i]))
        << " ";
    canvas.path(d.str(), color);
    double ly = kMarginTop + 18.0 * static_cast<double>(s);
    canvas.line(kWidth - kMarginRight + 10, ly, kWidth - kMarginRight + 34, ly, color, 2.5);
    canvas.text(kWidth - kMarginRight + 40, ly + 4, ls.name, 11);
  }
  canvas.save(path, title);
}

void write_bar_chart(const std::filesystem::path& path, const std::string& title,
                     const std::vector<std::string>& series_names,
                     const std::vector<BarGroup>& groups, const std::string& y_label) {
  if (groups.empty()) throw ContractError("write_bar_chart: no groups");
  double hi = 0.0, lo = 0.0;
  for (const BarGroup& g : groups)
    for (std::size_t s = 0; s < g.values.size(); ++s) {
      double e = s < g.errors.size() ? g.errors[s] : 0.0;
      hi = std::max(hi, g.values[s] + e);
      lo = std::min(lo, g.values[s] - e);
    }
  if (hi <= lo) hi = lo + 1.0;
  Scale y{lo, hi * 1.1, kHeight - kMarginBottom, kMarginTop};

  Canvas canvas;
  Scale x{0.0, 1.0, kMarginLeft, kWidth - kMarginRight};
  draw_axes(canvas, x, y, "", y_label);
  const double span = (kWidth - kMarginRight - kMarginLeft) / static_cast<double>(groups.size());
  const std::size_t n_series = series_names.size();
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const BarGroup& g = groups[gi];
    double gx = kMarginLeft + span * static_cast<double>(gi);
    double bar_w = span * 0.8 / static_cast<double>(std::max<std::size_t>(1, n_series));
    for (std::size_t s = 0; s < g.values.size(); ++s) {
      double bx = gx + span * 0.1 + bar_w * static_cast<double>(s);
      double top = y(g.values[s]);
      double base = y(std::max(lo, 0.0));
      canvas.rect(bx, std::min(top, base), bar_w * 0.9, std::abs(base - top),
                  kPalette[s % kPaletteSize], 0.85);
      if (s < g.errors.size() && g.errors[s] > 0.0) {
        double cx = bx + bar_w * 0.45;
        canvas.line(cx, y(g.values[s] - g.errors[s]), cx, y(g.values[s] + g.errors[s]), "#333");
      }
    }
    canvas.text(gx + span / 2, kHeight - kMarginBottom + 32, g.label, 11, "middle");
  }
  for (std::size_t s = 0; s < n_series; ++s) {
    double ly = kMarginTop + 18.0 * static_cast<double>(s);
    canvas.rect(kWidth - kMarginRight + 10, ly - 8, 22, 10, kPalette[s % kPaletteSize], 0.85);
    canvas.text(kWidth - kMarginRight + 40, ly + 2, series_names[s], 11);
  }
  canvas.save(path, title);
}

void write_heat_grid(const std::filesystem::path& path, const std::string& title,
                     const std::vector<std::string>& row_labels,
                     const std::vector<std::string>& col_labels, const Eigen::MatrixXd& values) {
  if (values.rows() != static_cast<Eigen::Index>(row_labels.size()) ||
      values.cols() != static_cast<Eigen::Index>(col_labels.size()))
    throw ContractError("write_heat_grid: label/value shape mismatch");
  double lo = values.minCoeff(), hi = values.maxCoeff();
  if (hi <= lo) hi = lo + 1.0;

  Canvas canvas;
  const double x0 = 150, y0 = 70;
  const double cw = (kWidth - x0 - 40) / static_cast<double>(values.cols());
  const double ch = (kHeight - y0 - 40) / static_cast<double>(values.rows());
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    canvas.text(x0 - 8, y0 + ch * (static_cast<double>(r) + 0.55), row_labels[static_cast<std::size_t>(r)], 11, "end");
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      double t = (values(r, c) - lo) / (hi - lo);
      int red = 255;
      int green = static_cast<int>(235 - 150 * t);
      int blue = static_cast<int>(205 - 170 * t);
      std::ostringstream color;
      color << "rgb(" << red << "," << green << "," << blue << ")";
      canvas.rect(x0 + cw * static_cast<double>(c), y0 + ch * static_cast<double>(r), cw - 2,
                  ch - 2, color.str());
      canvas.text(x0 + cw * (static_cast<double>(c) + 0.5),
                  y0 + ch * (static_cast<double>(r) + 0.58), fmt(values(r, c)), 11, "middle");
    }
  }
  for (Eigen::Index c = 0; c < values.cols(); ++c)
    canvas.text(x0 + cw * (static_cast<double>(c) + 0.5), y0 - 12, col_labels[static_cast<std::size_t>(c)], 11,
                "middle");
  canvas.save(path, title);
}

}  // namespace cmlf::eval
