// Network building blocks over the autodiff tape: tanh MLP trunks,
// diagonal-Gaussian heads, an LSTM cell and stride-2 convolution stacks
// for grid observations.
#pragma once

#include <string>
#include <vector>

#include "cmlf/ad/gaussian_ops.hpp"
#include "cmlf/ad/graph.hpp"
#include "cmlf/model/params.hpp"

namespace cmlf::model {

/// tanh-activated trunk; the last listed layer is also tanh-activated.
class MlpTrunk {
 public:
  MlpTrunk() = default;
  MlpTrunk(ParamStore& store, const std::string& prefix, const std::vector<int>& dims);

  ad::Var forward(ad::Graph& g, const ad::Var& input) const;
  int out_dim() const { return out_dim_; }

 private:
  std::vector<ad::Tensor*> weights_;
  std::vector<ad::Tensor*> biases_;
  int out_dim_ = 0;
};

/// Linear mean head + clamped log-variance head over a trunk output.
class GaussianHead {
 public:
  GaussianHead() = default;
  GaussianHead(ParamStore& store, const std::string& prefix, int in_dim, int out_dim);

  ad::GaussianVar forward(ad::Graph& g, const ad::Var& trunk) const;

 private:
  ad::Tensor* mean_w_ = nullptr;
  ad::Tensor* mean_b_ = nullptr;
  ad::Tensor* lv_w_ = nullptr;
  ad::Tensor* lv_b_ = nullptr;
};

/// Plain linear layer.
class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& prefix, int in_dim, int out_dim);

  ad::Var forward(ad::Graph& g, const ad::Var& input) const;

 private:
  ad::Tensor* w_ = nullptr;
  ad::Tensor* b_ = nullptr;
};

/// Standard LSTM cell (gate order i, f, g, o; forget bias starts at +1).
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(ParamStore& store, const std::string& prefix, int in_dim, int hidden);

  struct State {
    ad::Var h, c;
  };
  State forward(ad::Graph& g, const ad::Var& input, const State& prev) const;
  int hidden() const { return hidden_; }

 private:
  ad::Tensor* w_ = nullptr;
  ad::Tensor* b_ = nullptr;
  int hidden_ = 0;
};

/// 3x3 convolution over a square single- or multi-channel grid, stored in
/// channel layout (channels x (positions * batch)).
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParamStore& store, const std::string& prefix, int in_side, int in_ch, int out_ch,
         int stride);

  ad::Var forward(ad::Graph& g, const ad::Var& input, Eigen::Index batch) const;
  int out_side() const { return out_side_; }
  int out_ch() const { return out_ch_; }

 private:
  ad::Tensor* w_ = nullptr;
  ad::Tensor* b_ = nullptr;
  int in_side_ = 0, in_ch_ = 0, out_ch_ = 0, stride_ = 1, out_side_ = 0;
};

/// Nearest-neighbor x2 upsample in channel layout.
ad::Var upsample2(ad::Graph& g, const ad::Var& input, int in_side, Eigen::Index batch);

}  // namespace cmlf::model
