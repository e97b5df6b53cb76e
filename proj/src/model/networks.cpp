#include "cmlf/model/networks.hpp"

#include <cmath>

#include "cmlf/core/gaussian.hpp"

namespace cmlf::model {

namespace {
double fan_in_scale(int fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }
}  // namespace

MlpTrunk::MlpTrunk(ParamStore& store, const std::string& prefix, const std::vector<int>& dims) {
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    std::string layer = prefix + ".l" + std::to_string(l);
    weights_.push_back(&store.create(layer + ".w", dims[l + 1], dims[l],
                                     fan_in_scale(dims[l])));
    biases_.push_back(&store.create(layer + ".b", dims[l + 1], 1, 0.0));
  }
  out_dim_ = dims.back();
}

ad::Var MlpTrunk::forward(ad::Graph& g, const ad::Var& input) const {
  ad::Var h = input;
  for (std::size_t l = 0; l < weights_.size(); ++l)
    h = ad::tanh(ad::add_colwise(ad::matmul(g.param(*weights_[l]), h), g.param(*biases_[l])));
  return h;
}

GaussianHead::GaussianHead(ParamStore& store, const std::string& prefix, int in_dim, int out_dim) {
  mean_w_ = &store.create(prefix + ".mean.w", out_dim, in_dim, fan_in_scale(in_dim));
  mean_b_ = &store.create(prefix + ".mean.b", out_dim, 1, 0.0);
  lv_w_ = &store.create(prefix + ".lv.w", out_dim, in_dim, fan_in_scale(in_dim));
  lv_b_ = &store.create(prefix + ".lv.b", out_dim, 1, 0.0);
}

ad::GaussianVar GaussianHead::forward(ad::Graph& g, const ad::Var& trunk) const {
  ad::Var mean = ad::add_colwise(ad::matmul(g.param(*mean_w_), trunk), g.param(*mean_b_));
  ad::Var raw_lv = ad::add_colwise(ad::matmul(g.param(*lv_w_), trunk), g.param(*lv_b_));
  return ad::make_gaussian(mean, ad::clamp(raw_lv, kLogVarMin, kLogVarMax));
}

Linear::Linear(ParamStore& store, const std::string& prefix, int in_dim, int out_dim) {
  w_ = &store.create(prefix + ".w", out_dim, in_dim, fan_in_scale(in_dim));
  b_ = &store.create(prefix + ".b", out_dim, 1, 0.0);
}

ad::Var Linear::forward(ad::Graph& g, const ad::Var& input) const {
  return ad::add_colwise(ad::matmul(g.param(*w_), input), g.param(*b_));
}

LstmCell::LstmCell(ParamStore& store, const std::string& prefix, int in_dim, int hidden)
    : hidden_(hidden) {
  w_ = &store.create(prefix + ".w", 4 * hidden, in_dim + hidden, fan_in_scale(in_dim + hidden));
  b_ = &store.create(prefix + ".b", 4 * hidden, 1, 0.0);
  // forget-gate bias starts positive so early training retains memory
  b_->value.middleRows(hidden, hidden).setConstant(1.0);
}

LstmCell::State LstmCell::forward(ad::Graph& g, const ad::Var& input, const State& prev) const {
  ad::Var joined = ad::concat_rows({input, prev.h});
  ad::Var gates = ad::add_colwise(ad::matmul(g.param(*w_), joined), g.param(*b_));
  ad::Var i = ad::sigmoid(ad::slice_rows(gates, 0, hidden_));
  ad::Var f = ad::sigmoid(ad::slice_rows(gates, hidden_, hidden_));
  ad::Var u = ad::tanh(ad::slice_rows(gates, 2 * hidden_, hidden_));
  ad::Var o = ad::sigmoid(ad::slice_rows(gates, 3 * hidden_, hidden_));
  ad::Var c = ad::add(ad::cmul(f, prev.c), ad::cmul(i, u));
  ad::Var h = ad::cmul(o, ad::tanh(c));
  return {h, c};
}

Conv2d::Conv2d(ParamStore& store, const std::string& prefix, int in_side, int in_ch, int out_ch,
               int stride)
    : in_side_(in_side), in_ch_(in_ch), out_ch_(out_ch), stride_(stride) {
  out_side_ = (in_side + 2 - 3) / stride + 1;  // 3x3 kernel, pad 1
  w_ = &store.create(prefix + ".w", out_ch, 9 * in_ch, fan_in_scale(9 * in_ch));
  b_ = &store.create(prefix + ".b", out_ch, 1, 0.0);
}

ad::Var Conv2d::forward(ad::Graph& g, const ad::Var& input, Eigen::Index batch) const {
  // input: (in_ch x (in_side^2 * batch)), columns position-major.
  const int out_positions = out_side_ * out_side_;
  std::vector<ad::Var> taps;
  taps.reserve(9);
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      std::vector<int> idx(static_cast<std::size_t>(out_positions) *
                           static_cast<std::size_t>(batch));
      for (int oy = 0; oy < out_side_; ++oy) {
        for (int ox = 0; ox < out_side_; ++ox) {
          int sy = oy * stride_ + dy;
          int sx = ox * stride_ + dx;
          int src = (sy < 0 || sy >= in_side_ || sx < 0 || sx >= in_side_)
                        ? -1
                        : (sy * in_side_ + sx);
          for (Eigen::Index s = 0; s < batch; ++s)
            idx[static_cast<std::size_t>((oy * out_side_ + ox) * batch + s)] =
                src < 0 ? -1 : static_cast<int>(src * batch + s);
        }
      }
      taps.push_back(ad::gather_cols(input, idx));
    }
  }
  ad::Var patches = ad::concat_rows(taps);  // (9 * in_ch) x (out_positions * batch)
  return ad::add_colwise(ad::matmul(g.param(*w_), patches), g.param(*b_));
}

ad::Var upsample2(ad::Graph& g, const ad::Var& input, int in_side, Eigen::Index batch) {
  (void)g;
  const int out_side = 2 * in_side;
  std::vector<int> idx(static_cast<std::size_t>(out_side) * out_side *
                       static_cast<std::size_t>(batch));
  for (int oy = 0; oy < out_side; ++oy)
    for (int ox = 0; ox < out_side; ++ox) {
      int src = (oy / 2) * in_side + (ox / 2);
      for (Eigen::Index s = 0; s < batch; ++s)
        idx[static_cast<std::size_t>((oy * out_side + ox) * batch + s)] =
            static_cast<int>(src * batch + s);
    }
  return ad::gather_cols(input, idx);
}

}  // namespace cmlf::model
