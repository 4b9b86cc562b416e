#include <algorithm>

#include "epifed/error.hpp"
#include "epifed/models.hpp"
#include "epifed/rng.hpp"

namespace epifed {

TrainReport train_local(const ModelConfig& model, ModelState& state, AdamState& adam,
                        const WindowDataset& train, const AttentionGraph* graph,
                        const TrainConfig& cfg, std::uint64_t seed, std::size_t first_epoch,
                        const Proximal* proximal) {
  if (train.n_windows == 0) throw ValidationError("train_local: empty training split");
  if (cfg.batch_size == 0) throw ValidationError("train_local: batch size must be positive");
  if (proximal != nullptr) {
    if (proximal->mu < 0.0) throw ValidationError("train_local: mu must be non-negative");
    if (proximal->global == nullptr || !proximal->global->congruent(state.params))
      throw ValidationError("train_local: proximal reference does not match parameters");
  }
  adam.lr = cfg.lr;
  adam.weight_decay = cfg.weight_decay;
  const std::uint64_t shuffle_seed = derive_seed(seed, 1);
  const std::uint64_t dropout_seed = derive_seed(seed, 2);
  TrainReport report;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const std::size_t epoch = first_epoch + e;
    const WindowDataset shuffled = shuffle_train(train, derive_seed(shuffle_seed, epoch));
    const std::uint64_t epoch_dropout = derive_seed(dropout_seed, epoch);
    double total = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t b0 = 0; b0 < shuffled.n_windows; b0 += cfg.batch_size) {
      const auto batch = make_batch(shuffled, b0, std::min(shuffled.n_windows, b0 + cfg.batch_size));
      ParamSet grads = state.params.zeros_like();
      double loss = model_loss_and_grad(model, state, batch, graph,
                                        derive_seed(epoch_dropout, n_batches), grads);
      if (proximal != nullptr) {
        const double mu = proximal->mu;
        loss += 0.5 * mu * squared_distance(state.params, *proximal->global);
        for (std::size_t k = 0; k < grads.size(); ++k) {
          auto g = grads.at(k).data();
          auto p = state.params.at(k).data();
          auto ref = proximal->global->at(k).data();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += mu * (p[i] - ref[i]);
        }
      }
      adam_step(state.params, grads, adam);
      report.batch_loss.push_back(loss);
      total += loss;
      ++n_batches;
    }
    report.epoch_loss.push_back(total / static_cast<double>(n_batches));
  }
  return report;
}

}  // namespace epifed
