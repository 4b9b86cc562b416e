#include "epifed/models.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "epifed/error.hpp"
#include "epifed/rng.hpp"

namespace epifed {

std::string to_string(Architecture a) { return a == Architecture::Lstm ? "lstm" : "stgat"; }

Architecture parse_architecture(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "lstm") return Architecture::Lstm;
  if (s == "stgat") return Architecture::Stgat;
  throw ValidationError("unknown architecture '" + name + "' (expected lstm or stgat)");
}

void ModelConfig::validate() const {
  if (n_classes < 2 || n_classes > 5) throw ValidationError("model: n_classes must lie in 2..5");
  if (t_history == 0 || t_future == 0) throw ValidationError("model: window lengths must be positive");
  if (d_embed == 0 || lstm_hidden == 0 || stgat_hidden1 == 0 || stgat_hidden2 == 0 ||
      gat_heads == 0 || gat_head_dim == 0)
    throw ValidationError("model: layer widths must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("model: dropout must lie in [0, 1)");
}

std::string ModelConfig::to_record() const {
  std::ostringstream o;
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, dropout);
  o << "architecture=" << to_string(architecture) << ";classes=" << n_classes
    << ";t_history=" << t_history << ";t_future=" << t_future << ";d_embed=" << d_embed
    << ";lstm_hidden=" << lstm_hidden << ";hidden1=" << stgat_hidden1
    << ";hidden2=" << stgat_hidden2 << ";heads=" << gat_heads << ";head_dim=" << gat_head_dim
    << ";dropout=" << std::string(buf, r.ptr);
  return o.str();
}

ModelConfig ModelConfig::from_record(const std::string& record) {
  ModelConfig c;
  std::istringstream in(record);
  std::string item;
  auto size_value = [](const std::string& v) {
    std::size_t x = 0;
    auto r = std::from_chars(v.data(), v.data() + v.size(), x);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
      throw ValidationError("model record: bad integer '" + v + "'");
    return x;
  };
  while (std::getline(in, item, ';')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("model record: expected key=value, got '" + item + "'");
    const auto key = item.substr(0, eq), value = item.substr(eq + 1);
    if (key == "architecture") c.architecture = parse_architecture(value);
    else if (key == "classes") c.n_classes = size_value(value);
    else if (key == "t_history") c.t_history = size_value(value);
    else if (key == "t_future") c.t_future = size_value(value);
    else if (key == "d_embed") c.d_embed = size_value(value);
    else if (key == "lstm_hidden") c.lstm_hidden = size_value(value);
    else if (key == "hidden1") c.stgat_hidden1 = size_value(value);
    else if (key == "hidden2") c.stgat_hidden2 = size_value(value);
    else if (key == "heads") c.gat_heads = size_value(value);
    else if (key == "head_dim") c.gat_head_dim = size_value(value);
    else if (key == "dropout") {
      auto r = std::from_chars(value.data(), value.data() + value.size(), c.dropout);
      if (r.ec != std::errc()) throw ValidationError("model record: bad dropout '" + value + "'");
    } else {
      throw ValidationError("model record: unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

ModelState init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelState s;
  std::uint64_t stream = 0;
  auto xavier = [&](const std::string& name, std::vector<std::size_t> shape) {
    s.params.add(name, xavier_init(shape, derive_seed(seed, stream++)));
  };
  auto zeros = [&](const std::string& name, std::size_t n) { s.params.add(name, Tensor({n})); };
  const std::size_t C = cfg.n_classes, d = cfg.d_embed, out = cfg.t_future * C;
  xavier("embed", {C, d});
  if (cfg.architecture == Architecture::Lstm) {
    const std::size_t H = cfg.lstm_hidden;
    xavier("lstm.W", {H + d, 4 * H});
    zeros("lstm.b", 4 * H);
    xavier("head.W", {H, out});
    zeros("head.b", out);
  } else {
    const std::size_t width = cfg.gat_heads * cfg.gat_head_dim;
    const std::size_t H1 = cfg.stgat_hidden1, H2 = cfg.stgat_hidden2;
    xavier("gat.phi", {d, width});
    xavier("gat.attention", {cfg.gat_heads, 2 * cfg.gat_head_dim});
    xavier("lstm1.W", {H1 + width, 4 * H1});
    zeros("lstm1.b", 4 * H1);
    xavier("lstm2.W", {H2 + H1, 4 * H2});
    zeros("lstm2.b", 4 * H2);
    s.params.add("bn.gamma", Tensor({H2}, 1.0));
    zeros("bn.beta", H2);
    xavier("head.W", {H2, out});
    zeros("head.b", out);
    s.buffers.add("bn.running_mean", Tensor({H2}));
    s.buffers.add("bn.running_var", Tensor({H2}, 1.0));
  }
  return s;
}

WindowBatch make_batch(const WindowDataset& d, std::size_t begin, std::size_t end) {
  if (begin >= end || end > d.n_windows) throw ValidationError("batch range out of bounds");
  WindowBatch b;
  b.batch = end - begin;
  b.n_nodes = d.n_nodes;
  b.t_history = d.t_history;
  b.t_future = d.t_future;
  b.inputs.assign(d.inputs.begin() + static_cast<std::ptrdiff_t>(begin * d.input_stride()),
                  d.inputs.begin() + static_cast<std::ptrdiff_t>(end * d.input_stride()));
  b.targets.assign(d.targets.begin() + static_cast<std::ptrdiff_t>(begin * d.target_stride()),
                   d.targets.begin() + static_cast<std::ptrdiff_t>(end * d.target_stride()));
  return b;
}

namespace {

void check_batch(const ModelConfig& cfg, const WindowBatch& b, const AttentionGraph* graph) {
  if (b.batch == 0 || b.n_nodes == 0) throw ValidationError("empty batch");
  if (b.t_history != cfg.t_history || b.t_future != cfg.t_future)
    throw ValidationError("batch window lengths do not match the model");
  if (b.inputs.size() != b.batch * b.n_nodes * b.t_history ||
      (!b.targets.empty() && b.targets.size() != b.batch * b.n_nodes * b.t_future))
    throw ValidationError("batch buffers have the wrong size");
  for (auto c : b.inputs)
    if (c >= cfg.n_classes) throw ValidationError("batch: class index out of range");
  if (cfg.architecture == Architecture::Stgat) {
    if (graph == nullptr) throw ValidationError("stgat needs the client graph");
    if (graph->n_nodes != b.n_nodes) throw ValidationError("stgat: graph node count differs from batch");
  }
}

// Codes of every (window, node) row at history step s.
std::vector<std::uint8_t> step_codes(const WindowBatch& b, std::size_t s) {
  const std::size_t rows = b.batch * b.n_nodes;
  std::vector<std::uint8_t> codes(rows);
  for (std::size_t r = 0; r < rows; ++r) codes[r] = b.inputs[r * b.t_history + s];
  return codes;
}

struct Forward {
  std::vector<std::vector<std::uint8_t>> codes;
  std::vector<Matrix> embedded;
  std::vector<GatCache> gat;
  std::vector<LstmStep> rnn1, rnn2;
  BatchNormCache bn;
  DropoutResult drop;
  Matrix head_in;
  Matrix logits;  // cells x classes
};

Matrix as_cells(const Matrix& m, std::size_t classes) {
  return Eigen::Map<const Matrix>(m.data(), m.size() / static_cast<Eigen::Index>(classes),
                                  static_cast<Eigen::Index>(classes));
}

Forward run_forward(const ModelConfig& cfg, const ParamSet& p, ParamSet& buffers,
                    const WindowBatch& b, const AttentionGraph* graph, bool training,
                    std::uint64_t dropout_seed) {
  check_batch(cfg, b, graph);
  Forward f;
  for (std::size_t s = 0; s < b.t_history; ++s) {
    f.codes.push_back(step_codes(b, s));
    f.embedded.push_back(embedding_forward(p.get("embed"), f.codes.back()));
  }
  if (cfg.architecture == Architecture::Lstm) {
    f.rnn1 = lstm_sequence_forward(f.embedded, p.get("lstm.W"), p.get("lstm.b"));
    f.head_in = f.rnn1.back().h;
  } else {
    const auto gc = cfg.gat();
    std::vector<Matrix> spatial;
    for (std::size_t s = 0; s < b.t_history; ++s) {
      f.gat.push_back(gat_forward(f.embedded[s], b.batch, *graph, p.get("gat.phi"),
                                  p.get("gat.attention"), gc));
      spatial.push_back(f.gat.back().out);
    }
    f.rnn1 = lstm_sequence_forward(spatial, p.get("lstm1.W"), p.get("lstm1.b"));
    std::vector<Matrix> h1;
    for (const auto& st : f.rnn1) h1.push_back(st.h);
    f.rnn2 = lstm_sequence_forward(h1, p.get("lstm2.W"), p.get("lstm2.b"));
    Matrix normed = batchnorm_forward(f.rnn2.back().h, p.get("bn.gamma"), p.get("bn.beta"),
                                      buffers.get("bn.running_mean"),
                                      buffers.get("bn.running_var"), training, f.bn);
    f.drop = dropout_forward(normed, cfg.dropout, dropout_seed, training);
    f.head_in = f.drop.out;
  }
  f.logits = as_cells(linear_forward(f.head_in, p.get("head.W"), p.get("head.b")), cfg.n_classes);
  return f;
}

}  // namespace

Matrix model_forward(const ModelConfig& cfg, const ModelState& state, const WindowBatch& batch,
                     const AttentionGraph* graph) {
  ParamSet buffers = state.buffers;
  return run_forward(cfg, state.params, buffers, batch, graph, false, 0).logits;
}

double model_loss_and_grad(const ModelConfig& cfg, ModelState& state, const WindowBatch& b,
                           const AttentionGraph* graph, std::uint64_t dropout_seed,
                           ParamSet& grads) {
  if (b.targets.size() != b.batch * b.n_nodes * b.t_future)
    throw ValidationError("training batch has no targets");
  for (auto c : b.targets)
    if (c >= cfg.n_classes) throw ValidationError("batch: target class out of range");
  const ParamSet& p = state.params;
  Forward f = run_forward(cfg, p, state.buffers, b, graph, true, dropout_seed);
  const auto ce = softmax_cross_entropy(f.logits, b.targets);
  Matrix d_cells = softmax_cross_entropy_backward(ce, b.targets);
  const Matrix d_out = Eigen::Map<const Matrix>(d_cells.data(), f.head_in.rows(),
                                                static_cast<Eigen::Index>(b.t_future * cfg.n_classes));
  Matrix d_head_in = linear_backward(f.head_in, d_out, p.get("head.W"), grads.get("head.W"),
                                     grads.get("head.b"));
  std::vector<Matrix> d_embedded;
  if (cfg.architecture == Architecture::Lstm) {
    std::vector<Matrix> d_hidden(f.rnn1.size());
    d_hidden.back() = std::move(d_head_in);
    d_embedded = lstm_sequence_backward(f.rnn1, d_hidden, p.get("lstm.W"), grads.get("lstm.W"),
                                        grads.get("lstm.b"));
  } else {
    Matrix d_normed = dropout_backward(f.drop, d_head_in);
    Matrix d_h2 = batchnorm_backward(f.bn, d_normed, p.get("bn.gamma"), grads.get("bn.gamma"),
                                     grads.get("bn.beta"));
    std::vector<Matrix> d_hidden2(f.rnn2.size());
    d_hidden2.back() = std::move(d_h2);
    auto d_h1 = lstm_sequence_backward(f.rnn2, d_hidden2, p.get("lstm2.W"), grads.get("lstm2.W"),
                                       grads.get("lstm2.b"));
    auto d_spatial = lstm_sequence_backward(f.rnn1, d_h1, p.get("lstm1.W"), grads.get("lstm1.W"),
                                            grads.get("lstm1.b"));
    const auto gc = cfg.gat();
    for (std::size_t s = 0; s < f.gat.size(); ++s)
      d_embedded.push_back(gat_backward(f.gat[s], d_spatial[s], *graph, p.get("gat.phi"),
                                        p.get("gat.attention"), gc, grads.get("gat.phi"),
                                        grads.get("gat.attention")));
  }
  for (std::size_t s = 0; s < d_embedded.size(); ++s)
    embedding_backward(d_embedded[s], f.codes[s], grads.get("embed"));
  return ce.loss;
}

std::vector<std::uint8_t> predict(const Matrix& logits) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c)
      if (logits(r, c) > logits(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<std::uint8_t>(best);
  }
  return out;
}

Matrix predict_logits(const ModelConfig& cfg, const ModelState& state, const WindowDataset& d,
                      const AttentionGraph* graph, std::size_t batch_size) {
  if (d.n_windows == 0) throw ValidationError("cannot evaluate an empty split");
  batch_size = std::max<std::size_t>(batch_size, 1);
  Matrix all(static_cast<Eigen::Index>(d.n_windows * d.target_stride()),
             static_cast<Eigen::Index>(cfg.n_classes));
  Eigen::Index row = 0;
  for (std::size_t b0 = 0; b0 < d.n_windows; b0 += batch_size) {
    const auto batch = make_batch(d, b0, std::min(d.n_windows, b0 + batch_size));
    Matrix logits = model_forward(cfg, state, batch, graph);
    all.middleRows(row, logits.rows()) = logits;
    row += logits.rows();
  }
  return all;
}

void write_checkpoint(const ModelConfig& cfg, const ModelState& state, std::ostream& out) {
  out << "epifed-checkpoint 1\n" << cfg.to_record() << '\n';
  write_paramset(state.params, out);
  write_paramset(state.buffers, out);
  if (!out) throw Error("failed to write checkpoint");
}

std::pair<ModelConfig, ModelState> read_checkpoint(std::istream& in) {
  std::string magic, record;
  if (!std::getline(in, magic) || magic != "epifed-checkpoint 1")
    throw ParseError("not a checkpoint file", 1);
  if (!std::getline(in, record)) throw ParseError("checkpoint: missing model record", 2);
  auto cfg = ModelConfig::from_record(record);
  ModelState s;
  s.params = read_paramset(in);
  s.buffers = read_paramset(in);
  const auto expected = init_model(cfg, 0);
  if (!expected.params.congruent(s.params) || !expected.buffers.congruent(s.buffers))
    throw ValidationError("checkpoint parameters do not match the model record");
  return {cfg, s};
}

}  // namespace epifed
