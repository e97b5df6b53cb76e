#include "cmlf/train/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"

#include "cmlf/core/rng.hpp"
#include "cmlf/train/adam.hpp"

namespace cmlf::train {

using model::CmlfModel;
using model::ModelConfig;

namespace {

model::Batch make_batch(const sim::Dataset& dataset, const std::vector<int>& indices,
                        std::size_t first, std::size_t count) {
  std::vector<const sim::Trajectory*> slice;
  slice.reserve(count);
  for (std::size_t i = first; i < first + count; ++i)
    slice.push_back(&dataset.trajectory(indices[i]));
  return model::Batch::from_trajectories(slice);
}

LossBreakdown weighted_add(const LossBreakdown& acc, const LossBreakdown& term, double weight) {
  LossBreakdown out = acc;
  out.recon_V += weight * term.recon_V;
  out.recon_T += weight * term.recon_T;
  out.kl_zV += weight * term.kl_zV;
  out.kl_zT += weight * term.kl_zT;
  out.kl_yV += weight * term.kl_yV;
  out.kl_yT += weight * term.kl_yT;
  out.total += weight * term.total;
  return out;
}

}  // namespace

std::string metric_row_json(const MetricRow& row) {
  nlohmann::json j;
  j["epoch"] = row.epoch;
  j["split"] = row.split;
  j["recon_V"] = row.loss.recon_V;
  j["recon_T"] = row.loss.recon_T;
  j["kl_zV"] = row.loss.kl_zV;
  j["kl_zT"] = row.loss.kl_zT;
  j["kl_yV"] = row.loss.kl_yV;
  j["kl_yT"] = row.loss.kl_yT;
  j["total"] = row.loss.total;
  j["beta"] = row.beta;
  j["cm_active"] = row.cm_active;
  return j.dump();
}

TrainResult train(ModelConfig model_config, const TrainConfig& config, const sim::Dataset& dataset,
                  const std::filesystem::path& metric_log_path) {
  config.validate();
  if (dataset.splits.train.empty()) throw ConfigError("train: dataset has no training split");
  model_config.variant = config.variant;
  if (model_config.object_ids.empty()) {
    std::set<int> ids;
    for (int idx : dataset.splits.train)
      ids.insert(dataset.trajectory(idx).object.object_index);
    model_config.object_ids.assign(ids.begin(), ids.end());
  }

  const std::uint64_t init_seed = derive_seed(config.seed, "init_root");
  CmlfModel model(model_config, init_seed);
  AdamOptimizer adam(model.params(), config.learning_rate);

  std::ofstream log_file;
  if (!metric_log_path.empty()) {
    // one training run owns one log; rows are appended as epochs finish
    log_file.open(metric_log_path, std::ios::trunc);
    if (!log_file) throw IoError("cannot open metric log: " + metric_log_path.string());
  }

  TrainResult result{model, model, -1, {}, false, ""};
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<int> order = dataset.splits.train;

  // epoch-start snapshot retained as the last good state on divergence
  CmlfModel last_good = model;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double beta = anneal_weight(epoch, config);
    const bool cm_active = cm_gate(epoch, config);

    Rng shuffle_rng(derive_seed(config.seed, "shuffle", epoch));
    shuffle_rng.shuffle(order);

    last_good = model;
    LossBreakdown train_acc{};
    std::size_t seen = 0;
    bool diverged = false;
    int batch_index = 0;
    for (std::size_t first = 0; first < order.size();
         first += static_cast<std::size_t>(config.batch_size), ++batch_index) {
      std::size_t count =
          std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), order.size() - first);
      model::Batch batch = make_batch(dataset, order, first, count);
      ad::Graph g;
      LossGraph loss =
          elbo_loss_graph(g, model, batch, beta, cm_active,
                          derive_seed(config.seed, "noise", epoch, batch_index));
      if (!loss.breakdown.finite()) {
        result.aborted = true;
        result.abort_reason = std::string("non-finite loss term '") +
                              loss.breakdown.offending_term() + "' at epoch " +
                              std::to_string(epoch);
        diverged = true;
        break;
      }
      model.params().zero_grads();
      g.backward(loss.total);
      double norm = model.params().grad_norm();
      if (!std::isfinite(norm)) {
        result.aborted = true;
        result.abort_reason = "non-finite gradient at epoch " + std::to_string(epoch);
        diverged = true;
        break;
      }
      if (norm > config.grad_clip) model.params().scale_grads(config.grad_clip / norm);
      adam.step();
      train_acc = weighted_add(train_acc, loss.breakdown, static_cast<double>(count));
      seen += count;
    }
    if (diverged || !model.params().values_finite()) {
      if (!result.aborted) {
        result.aborted = true;
        result.abort_reason = "non-finite parameters at epoch " + std::to_string(epoch);
      }
      result.model = last_good;
      break;
    }

    MetricRow train_row{epoch, "train", weighted_add(LossBreakdown{}, train_acc, 0.0), beta,
                        cm_active};
    train_row.loss = weighted_add(LossBreakdown{}, train_acc, 1.0 / static_cast<double>(seen));
    result.log.push_back(train_row);
    if (log_file) log_file << metric_row_json(train_row) << "\n";

    if (!dataset.splits.val.empty()) {
      LossBreakdown val_acc{};
      std::size_t val_seen = 0;
      int val_batch = 0;
      for (std::size_t first = 0; first < dataset.splits.val.size();
           first += static_cast<std::size_t>(config.batch_size), ++val_batch) {
        std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size),
                                                  dataset.splits.val.size() - first);
        model::Batch batch = make_batch(dataset, dataset.splits.val, first, count);
        LossBreakdown val = elbo_loss(model, batch, beta, cm_active,
                                      derive_seed(config.seed, "val_noise", epoch, val_batch));
        val_acc = weighted_add(val_acc, val, static_cast<double>(count));
        val_seen += count;
      }
      MetricRow val_row{epoch, "val",
                        weighted_add(LossBreakdown{}, val_acc, 1.0 / static_cast<double>(val_seen)),
                        beta, cm_active};
      result.log.push_back(val_row);
      if (log_file) log_file << metric_row_json(val_row) << "\n";
      if (val_row.loss.total < best_val) {
        best_val = val_row.loss.total;
        result.best_model = model;
        result.best_epoch = epoch;
      }
    }
  }

  if (!result.aborted) result.model = model;
  if (result.best_epoch < 0) {
    result.best_model = result.model;
    result.best_epoch = config.epochs - 1;
  }
  return result;
}

}  // namespace cmlf::train
