// Machine-readable evaluation report plus figure emission.
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cmlf/eval/evaluate.hpp"

namespace cmlf::eval {

struct EvalReport {
  std::string variant;
  std::uint64_t seed = 0;
  NmseCurves aligned;                  // test split of the aligned set
  std::optional<NmseCurves> surprise;  // surprise set, aligned-set normalizers
  std::map<std::string, CvAccuracy> classification;  // per feature set
  std::vector<PerturbationCell> perturbation;
  std::vector<Comparison> tests;

  void write_json(const std::filesystem::path& path) const;
  std::string to_json_string() const;
};

/// Emits the report figures (NMSE-over-time, classification bars,
/// perturbation heat grid, surprise curves when present) into a directory.
void write_report_figures(const EvalReport& report, const std::filesystem::path& dir,
                          double band_scale = 1.0);

}  // namespace cmlf::eval
