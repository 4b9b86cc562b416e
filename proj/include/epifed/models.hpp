#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "epifed/dataset.hpp"
#include "epifed/layers.hpp"
#include "epifed/optim.hpp"
#include "epifed/tensor.hpp"

namespace epifed {

enum class Architecture { Lstm, Stgat };
std::string to_string(Architecture a);
Architecture parse_architecture(const std::string& name);

struct ModelConfig {
  Architecture architecture = Architecture::Lstm;
  std::size_t n_classes = 2;
  std::size_t t_history = 10;
  std::size_t t_future = 10;
  std::size_t d_embed = 16;
  std::size_t lstm_hidden = 64;   // LSTM model
  std::size_t stgat_hidden1 = 32;  // STGAT: first then second recurrent layer
  std::size_t stgat_hidden2 = 64;
  std::size_t gat_heads = 8;
  std::size_t gat_head_dim = 8;
  double dropout = 0.1;  // STGAT only, before the head

  void validate() const;
  GatConfig gat() const { return {gat_heads, gat_head_dim, 0.2}; }
  /// `key=value;...` record used in checkpoints and provenance lines.
  std::string to_record() const;
  static ModelConfig from_record(const std::string& record);
  bool operator==(const ModelConfig&) const = default;
};

/// Trainable parameters plus non-trainable buffers (batch-norm running stats).
struct ModelState {
  ParamSet params;
  ParamSet buffers;
  bool operator==(const ModelState&) const = default;
};

ModelState init_model(const ModelConfig& cfg, std::uint64_t seed);

/// B windows of one client, inputs [B x N x t_history] and targets
/// [B x N x t_future] as class indices.
struct WindowBatch {
  std::size_t batch = 0;
  std::size_t n_nodes = 0;
  std::size_t t_history = 0;
  std::size_t t_future = 0;
  std::vector<std::uint8_t> inputs;
  std::vector<std::uint8_t> targets;
};

WindowBatch make_batch(const WindowDataset& d, std::size_t begin, std::size_t end);

/// Eval-mode logits with one row per (window, node, horizon step) cell in that
/// order and one column per class. `graph` is required for STGAT.
Matrix model_forward(const ModelConfig& cfg, const ModelState& state, const WindowBatch& batch,
                     const AttentionGraph* graph);

/// Training-mode mean cross entropy over all cells. Gradients are accumulated
/// into `grads` (congruent with state.params); batch-norm running statistics in
/// state.buffers are updated.
double model_loss_and_grad(const ModelConfig& cfg, ModelState& state, const WindowBatch& batch,
                           const AttentionGraph* graph, std::uint64_t dropout_seed,
                           ParamSet& grads);

/// Row argmax; ties go to the smallest class index.
std::vector<std::uint8_t> predict(const Matrix& logits);

struct TrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double lr = 2e-4;
  double weight_decay = 5e-5;
};

struct Proximal {
  const ParamSet* global = nullptr;
  double mu = 0.0;
};

struct TrainReport {
  std::vector<double> batch_loss;  // per optimizer step, including any proximal term
  std::vector<double> epoch_loss;  // mean of batch losses per epoch
};

/// Runs `cfg.epochs` epochs of minibatch Adam over `train`. Epoch e (counted
/// from `first_epoch`) shuffles with a stream derived from (seed, e).
TrainReport train_local(const ModelConfig& model, ModelState& state, AdamState& adam,
                        const WindowDataset& train, const AttentionGraph* graph,
                        const TrainConfig& cfg, std::uint64_t seed, std::size_t first_epoch = 0,
                        const Proximal* proximal = nullptr);

/// Eval-mode logits for every window of `d`.
Matrix predict_logits(const ModelConfig& cfg, const ModelState& state, const WindowDataset& d,
                      const AttentionGraph* graph, std::size_t batch_size = 32);

/// Checkpoint: a text header with the config record followed by the parameter
/// and buffer sets in ParamSet binary format.
void write_checkpoint(const ModelConfig& cfg, const ModelState& state, std::ostream& out);
std::pair<ModelConfig, ModelState> read_checkpoint(std::istream& in);

}  // namespace epifed
