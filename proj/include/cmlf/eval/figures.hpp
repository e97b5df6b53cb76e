// Static SVG figures: NMSE-over-time line charts with shaded bands,
// grouped bar charts with error bars, and a heat grid for the
// perturbation table.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cmlf::eval {

struct LineSeries {
  std::string name;
  Eigen::VectorXd values;
  Eigen::VectorXd band;  // half-width of the shaded band; empty disables it
};

void write_line_chart(const std::filesystem::path& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<LineSeries>& series);

struct BarGroup {
  std::string label;
  std::vector<double> values;  // one per series
  std::vector<double> errors;
};

void write_bar_chart(const std::filesystem::path& path, const std::string& title,
                     const std::vector<std::string>& series_names,
                     const std::vector<BarGroup>& groups, const std::string& y_label);

void write_heat_grid(const std::filesystem::path& path, const std::string& title,
                     const std::vector<std::string>& row_labels,
                     const std::vector<std::string>& col_labels, const Eigen::MatrixXd& values);

}  // namespace cmlf::eval
