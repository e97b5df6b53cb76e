#include "cmlf/model/params.hpp"

#include <cmath>

#include "cmlf/core/rng.hpp"
#include "cmlf/errors.hpp"

namespace cmlf::model {

ad::Tensor& ParamStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                               double scale) {
  if (params_.count(name)) throw ContractError("ParamStore: duplicate parameter '" + name + "'");
  Rng rng(derive_seed(init_seed_, "init", hash_str(name)));
  Eigen::MatrixXd value = scale == 0.0 ? Eigen::MatrixXd::Zero(rows, cols)
                                       : (scale * rng.normal_matrix(rows, cols)).eval();
  auto [it, inserted] = params_.emplace(name, ad::Tensor(std::move(value)));
  return it->second;
}

ad::Tensor& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

const ad::Tensor& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, tensor] : params_) out.push_back(name);
  return out;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& [name, tensor] : params_) n += static_cast<std::size_t>(tensor.value.size());
  return n;
}

void ParamStore::zero_grads() {
  for (auto& [name, tensor] : params_) tensor.zero_grad();
}

double ParamStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& [name, tensor] : params_) sq += tensor.grad.squaredNorm();
  return std::sqrt(sq);
}

void ParamStore::scale_grads(double factor) {
  for (auto& [name, tensor] : params_) tensor.grad *= factor;
}

bool ParamStore::values_finite() const {
  for (const auto& [name, tensor] : params_)
    if (!tensor.value.allFinite()) return false;
  return true;
}

}  // namespace cmlf::model
