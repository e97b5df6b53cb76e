// Named parameter store. Every tensor is initialized from a seed derived
// from its name, so two variants sharing a parameter name start from
// identical weights under the same seed.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cmlf/ad/graph.hpp"

namespace cmlf::model {

class ParamStore {
 public:
  ParamStore() = default;
  explicit ParamStore(std::uint64_t init_seed) : init_seed_(init_seed) {}

  /// Creates a tensor initialized N(0, scale^2) entrywise, scale chosen by
  /// the caller (0 for biases).
  ad::Tensor& create(const std::string& name, Eigen::Index rows, Eigen::Index cols, double scale);

  ad::Tensor& at(const std::string& name);
  const ad::Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  std::vector<std::string> names() const;
  std::size_t total_size() const;

  void zero_grads();
  double grad_norm() const;
  void scale_grads(double factor);
  bool values_finite() const;

  std::map<std::string, ad::Tensor>& map() { return params_; }
  const std::map<std::string, ad::Tensor>& map() const { return params_; }
  std::uint64_t init_seed() const { return init_seed_; }

 private:
  std::map<std::string, ad::Tensor> params_;
  std::uint64_t init_seed_ = 0;
};

}  // namespace cmlf::model
