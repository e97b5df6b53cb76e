#include "cmlf/eval/report.hpp"

#include <fstream>

#include "json.hpp"

#include "cmlf/eval/figures.hpp"

namespace cmlf::eval {

using nlohmann::json;

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_to_json(m.row(r).transpose()));
  return out;
}

json curves_to_json(const NmseCurves& curves) {
  json out;
  out["properties"] = property_names();
  out["curves"] = matrix_to_json(curves.curves);
  out["time_avg_mean"] = vector_to_json(curves.time_avg_mean);
  out["time_avg_std"] = vector_to_json(curves.time_avg_std);
  out["normalizers"] = vector_to_json(curves.normalizers);
  return out;
}

}  // namespace

std::string EvalReport::to_json_string() const {
  json out;
  out["variant"] = variant;
  out["seed"] = seed;
  out["aligned"] = curves_to_json(aligned);
  if (surprise.has_value()) out["surprise"] = curves_to_json(*surprise);
  json cls;
  for (const auto& [name, acc] : classification) {
    cls[name] = {{"mean", acc.mean}, {"std", acc.stddev}, {"folds", acc.fold_accuracies}};
  }
  out["classification"] = cls;
  json cells = json::array();
  for (const PerturbationCell& cell : perturbation)
    cells.push_back({{"sigma", cell.sigma},
                     {"c", cell.c},
                     {"nmse_per_property", vector_to_json(cell.nmse_per_property)}});
  out["perturbation"] = cells;
  json tests_json = json::array();
  for (const Comparison& cmp : tests)
    tests_json.push_back({{"a", cmp.method_a},
                          {"b", cmp.method_b},
                          {"statistic", cmp.statistic},
                          {"raw_p", cmp.raw_p},
                          {"adjusted_p", cmp.adjusted_p},
                          {"stars", cmp.stars}});
  out["tests"] = tests_json;
  return out.dump(2);
}

void EvalReport::write_json(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report: " + path.string());
  out << to_json_string() << "\n";
}

void write_report_figures(const EvalReport& report, const std::filesystem::path& dir,
                          double band_scale) {
  std::filesystem::create_directories(dir);

  auto curve_figure = [&](const NmseCurves& curves, const std::string& file,
                          const std::string& title) {
    std::vector<LineSeries> series;
    LineSeries intrinsic{"intrinsic", curves.mean_curve(kIntrinsicProps), {}};
    LineSeries extrinsic{"extrinsic", curves.mean_curve(kExtrinsicProps), {}};
    // band: std of the per-property time-avgs, scaled; constant over time
    double int_band = band_scale * (curves.time_avg_std[3] + curves.time_avg_std[4] +
                                    curves.time_avg_std[5]) / 3.0;
    double ext_band = band_scale * (curves.time_avg_std[0] + curves.time_avg_std[1] +
                                    curves.time_avg_std[2]) / 3.0;
    intrinsic.band = Eigen::VectorXd::Constant(intrinsic.values.size(), int_band);
    extrinsic.band = Eigen::VectorXd::Constant(extrinsic.values.size(), ext_band);
    series.push_back(intrinsic);
    series.push_back(extrinsic);
    write_line_chart(dir / file, title, "time step", "NMSE", series);
  };
  curve_figure(report.aligned, "nmse_over_time.svg",
               "NMSE over time (" + report.variant + ", aligned set)");
  if (report.surprise.has_value())
    curve_figure(*report.surprise, "nmse_over_time_surprise.svg",
                 "NMSE over time (" + report.variant + ", surprise set)");

  if (!report.classification.empty()) {
    std::vector<std::string> names;
    BarGroup group{report.variant, {}, {}};
    for (const auto& [name, acc] : report.classification) {
      names.push_back(name);
      group.values.push_back(acc.mean);
      group.errors.push_back(acc.stddev);
    }
    write_bar_chart(dir / "classification.svg", "Object classification accuracy", names, {group},
                    "accuracy");
  }

  {
    std::vector<BarGroup> groups;
    for (std::size_t p = 0; p < property_names().size(); ++p) {
      BarGroup g{property_names()[p],
                 {report.aligned.time_avg_mean[static_cast<Eigen::Index>(p)]},
                 {report.aligned.time_avg_std[static_cast<Eigen::Index>(p)]}};
      groups.push_back(g);
    }
    write_bar_chart(dir / "property_nmse.svg", "Per-property NMSE (" + report.variant + ")",
                    {report.variant}, groups, "NMSE");
  }

  if (!report.perturbation.empty()) {
    std::vector<std::string> rows, cols;
    for (const std::string& name : property_names()) rows.push_back(name);
    Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size()),
                           static_cast<Eigen::Index>(report.perturbation.size()));
    for (std::size_t c = 0; c < report.perturbation.size(); ++c) {
      const PerturbationCell& cell = report.perturbation[c];
      std::string label = cell.sigma > 0.0 ? ("s=" + std::to_string(cell.sigma).substr(0, 4))
                          : cell.c > 0.0   ? ("c=" + std::to_string(cell.c).substr(0, 4))
                                           : "nominal";
      cols.push_back(label);
      values.col(static_cast<Eigen::Index>(c)) = cell.nmse_per_property;
    }
    write_heat_grid(dir / "perturbation_grid.svg",
                    "Perturbation robustness (" + report.variant + ", NMSE x100 style)", rows,
                    cols, values);
  }
}

}  // namespace cmlf::eval
