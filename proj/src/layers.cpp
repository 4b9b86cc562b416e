#include "epifed/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "epifed/error.hpp"
#include "epifed/rng.hpp"

namespace epifed {

Matrix embedding_forward(const Tensor& table, std::span<const std::uint8_t> codes) {
  const auto n_codes = table.rows();
  const auto d = static_cast<Eigen::Index>(table.cols());
  Matrix out(static_cast<Eigen::Index>(codes.size()), d);
  const auto t = table.mat();
  for (std::size_t r = 0; r < codes.size(); ++r) {
    if (codes[r] >= n_codes) throw ValidationError("embedding: state code out of range");
    out.row(static_cast<Eigen::Index>(r)) = t.row(codes[r]);
  }
  return out;
}

void embedding_backward(const Matrix& d_out, std::span<const std::uint8_t> codes, Tensor& d_table) {
  auto dt = d_table.mat();
  for (std::size_t r = 0; r < codes.size(); ++r) dt.row(codes[r]) += d_out.row(static_cast<Eigen::Index>(r));
}

Matrix linear_forward(const Matrix& x, const Tensor& weight, const Tensor& bias) {
  if (static_cast<std::size_t>(x.cols()) != weight.rows() || bias.size() != weight.cols())
    throw ValidationError("linear: shape mismatch");
  Matrix out = x * weight.mat();
  out.rowwise() += bias.mat().row(0);
  check_finite(out, "linear");
  return out;
}

Matrix linear_backward(const Matrix& x, const Matrix& d_out, const Tensor& weight,
                       Tensor& d_weight, Tensor& d_bias) {
  d_weight.mat().noalias() += x.transpose() * d_out;
  d_bias.mat().row(0) += d_out.colwise().sum();
  return d_out * weight.mat().transpose();
}

namespace {

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

LstmStep lstm_cell_forward(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
                           const Tensor& weight, const Tensor& bias) {
  const auto hidden = static_cast<Eigen::Index>(weight.cols() / 4);
  const auto w = weight.mat();
  if (weight.cols() % 4 != 0 || w.rows() != hidden + x.cols() || h_prev.cols() != hidden ||
      c_prev.cols() != hidden || h_prev.rows() != x.rows() || c_prev.rows() != x.rows() ||
      static_cast<Eigen::Index>(bias.size()) != 4 * hidden)
    throw ValidationError("lstm cell: shape mismatch");
  LstmStep s;
  s.h_prev = h_prev;
  s.c_prev = c_prev;
  s.x = x;
  s.gates.noalias() = h_prev * w.topRows(hidden);
  s.gates.noalias() += x * w.bottomRows(w.rows() - hidden);
  s.gates.rowwise() += bias.mat().row(0);
  const Eigen::Index n = x.rows();
  s.c.resize(n, hidden);
  s.tanh_c.resize(n, hidden);
  s.h.resize(n, hidden);
  for (Eigen::Index r = 0; r < n; ++r) {
    double* g = s.gates.row(r).data();
    for (Eigen::Index k = 0; k < hidden; ++k) {
      const double f = sigmoid(g[k]);
      const double in = sigmoid(g[hidden + k]);
      const double cand = std::tanh(g[2 * hidden + k]);
      const double o = sigmoid(g[3 * hidden + k]);
      g[k] = f;
      g[hidden + k] = in;
      g[2 * hidden + k] = cand;
      g[3 * hidden + k] = o;
      const double c = f * c_prev(r, k) + in * cand;
      const double tc = std::tanh(c);
      s.c(r, k) = c;
      s.tanh_c(r, k) = tc;
      s.h(r, k) = o * tc;
    }
  }
  check_finite(s.c, "lstm cell");
  return s;
}

LstmCellGrads lstm_cell_backward(const LstmStep& s, const Matrix& dh, const Matrix& dc,
                                 const Tensor& weight, Tensor& d_weight, Tensor& d_bias) {
  const Eigen::Index hidden = s.h.cols();
  const Eigen::Index n = s.h.rows();
  Matrix dz(n, 4 * hidden);
  LstmCellGrads out;
  out.dc_prev.resize(n, hidden);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double* g = s.gates.row(r).data();
    double* z = dz.row(r).data();
    for (Eigen::Index k = 0; k < hidden; ++k) {
      const double f = g[k], in = g[hidden + k], cand = g[2 * hidden + k], o = g[3 * hidden + k];
      const double tc = s.tanh_c(r, k);
      const double dct = dc(r, k) + dh(r, k) * o * (1.0 - tc * tc);
      z[k] = dct * s.c_prev(r, k) * f * (1.0 - f);
      z[hidden + k] = dct * cand * in * (1.0 - in);
      z[2 * hidden + k] = dct * in * (1.0 - cand * cand);
      z[3 * hidden + k] = dh(r, k) * tc * o * (1.0 - o);
      out.dc_prev(r, k) = dct * f;
    }
  }
  auto w = weight.mat();
  auto dw = d_weight.mat();
  dw.topRows(hidden).noalias() += s.h_prev.transpose() * dz;
  dw.bottomRows(dw.rows() - hidden).noalias() += s.x.transpose() * dz;
  d_bias.mat().row(0) += dz.colwise().sum();
  out.dh_prev.noalias() = dz * w.topRows(hidden).transpose();
  out.dx.noalias() = dz * w.bottomRows(w.rows() - hidden).transpose();
  return out;
}

std::vector<LstmStep> lstm_sequence_forward(const std::vector<Matrix>& inputs, const Tensor& weight,
                                            const Tensor& bias) {
  if (inputs.empty()) throw ValidationError("lstm: empty sequence");
  const auto hidden = static_cast<Eigen::Index>(weight.cols() / 4);
  const Eigen::Index n = inputs.front().rows();
  std::vector<LstmStep> steps;
  steps.reserve(inputs.size());
  Matrix h = Matrix::Zero(n, hidden), c = Matrix::Zero(n, hidden);
  for (const auto& x : inputs) {
    steps.push_back(lstm_cell_forward(x, h, c, weight, bias));
    h = steps.back().h;
    c = steps.back().c;
  }
  return steps;
}

std::vector<Matrix> lstm_sequence_backward(const std::vector<LstmStep>& steps,
                                           const std::vector<Matrix>& d_hidden,
                                           const Tensor& weight, Tensor& d_weight, Tensor& d_bias) {
  const Eigen::Index n = steps.front().h.rows(), hidden = steps.front().h.cols();
  std::vector<Matrix> dx(steps.size());
  Matrix dh = Matrix::Zero(n, hidden), dc = Matrix::Zero(n, hidden);
  for (std::size_t t = steps.size(); t-- > 0;) {
    if (t < d_hidden.size() && d_hidden[t].size() > 0) dh += d_hidden[t];
    auto g = lstm_cell_backward(steps[t], dh, dc, weight, d_weight, d_bias);
    dx[t] = std::move(g.dx);
    dh = std::move(g.dh_prev);
    dc = std::move(g.dc_prev);
  }
  return dx;
}

AttentionGraph AttentionGraph::from_graph(const Graph& g) {
  AttentionGraph a;
  a.n_nodes = g.n_nodes();
  a.offsets.push_back(0);
  for (std::size_t i = 0; i < g.n_nodes(); ++i) {
    const auto self = static_cast<NodeId>(i);
    bool placed = false;
    for (auto j : g.neighbors(self)) {
      if (!placed && j > self) {
        a.targets.push_back(self);
        placed = true;
      }
      a.targets.push_back(j);
    }
    if (!placed) a.targets.push_back(self);
    a.offsets.push_back(a.targets.size());
  }
  return a;
}

namespace {

void check_gat_shapes(const Matrix& input, std::size_t n_graphs, const AttentionGraph& graph,
                      const Tensor& phi, const Tensor& attention, const GatConfig& cfg) {
  const std::size_t width = cfg.heads * cfg.head_dim;
  if (static_cast<std::size_t>(input.rows()) != n_graphs * graph.n_nodes ||
      static_cast<std::size_t>(input.cols()) != phi.rows() || phi.cols() != width ||
      attention.rows() != cfg.heads || attention.cols() != 2 * cfg.head_dim)
    throw ValidationError("gat: shape mismatch");
}

}  // namespace

GatCache gat_forward(const Matrix& input, std::size_t n_graphs, const AttentionGraph& graph,
                     const Tensor& phi, const Tensor& attention, const GatConfig& cfg) {
  check_gat_shapes(input, n_graphs, graph, phi, attention, cfg);
  const std::size_t heads = cfg.heads, fd = cfg.head_dim, n = graph.n_nodes;
  const std::size_t slots = graph.targets.size();
  const auto rows = static_cast<Eigen::Index>(n_graphs * n);
  GatCache c;
  c.n_graphs = n_graphs;
  c.input = input;
  c.z.noalias() = input * phi.mat();
  c.score_self.resize(rows, static_cast<Eigen::Index>(heads));
  c.score_nbr.resize(rows, static_cast<Eigen::Index>(heads));
  const auto att = attention.mat();
  for (std::size_t h = 0; h < heads; ++h) {
    const auto block = c.z.middleCols(static_cast<Eigen::Index>(h * fd), static_cast<Eigen::Index>(fd));
    c.score_self.col(static_cast<Eigen::Index>(h)) =
        block * att.row(static_cast<Eigen::Index>(h)).head(static_cast<Eigen::Index>(fd)).transpose();
    c.score_nbr.col(static_cast<Eigen::Index>(h)) =
        block * att.row(static_cast<Eigen::Index>(h)).tail(static_cast<Eigen::Index>(fd)).transpose();
  }
  c.alpha.assign(n_graphs * slots * heads, 0.0);
  c.raw.assign(n_graphs * slots * heads, 0.0);
  c.pre = Matrix::Zero(rows, static_cast<Eigen::Index>(heads * fd));
  for (std::size_t g = 0; g < n_graphs; ++g) {
    const std::size_t base = g * n;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ri = static_cast<Eigen::Index>(base + i);
      const std::size_t lo = graph.offsets[i], hi = graph.offsets[i + 1];
      for (std::size_t h = 0; h < heads; ++h) {
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t s = lo; s < hi; ++s) {
          const auto rj = static_cast<Eigen::Index>(base + static_cast<std::size_t>(graph.targets[s]));
          const double v = c.score_self(ri, static_cast<Eigen::Index>(h)) +
                           c.score_nbr(rj, static_cast<Eigen::Index>(h));
          const double e = v > 0.0 ? v : cfg.leaky_slope * v;
          c.raw[(g * slots + s) * heads + h] = v;
          c.alpha[(g * slots + s) * heads + h] = e;
          top = std::max(top, e);
        }
        double total = 0.0;
        for (std::size_t s = lo; s < hi; ++s) {
          double& a = c.alpha[(g * slots + s) * heads + h];
          a = std::exp(a - top);
          total += a;
        }
        double* pre = c.pre.row(ri).data() + h * fd;
        for (std::size_t s = lo; s < hi; ++s) {
          double& a = c.alpha[(g * slots + s) * heads + h];
          a /= total;
          const auto rj = static_cast<Eigen::Index>(base + static_cast<std::size_t>(graph.targets[s]));
          const double* zj = c.z.row(rj).data() + h * fd;
          for (std::size_t k = 0; k < fd; ++k) pre[k] += a * zj[k];
        }
      }
    }
  }
  c.out = c.pre.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
  check_finite(c.out, "gat");
  return c;
}

Matrix gat_backward(const GatCache& c, const Matrix& d_out, const AttentionGraph& graph,
                    const Tensor& phi, const Tensor& attention, const GatConfig& cfg,
                    Tensor& d_phi, Tensor& d_attention) {
  const std::size_t heads = cfg.heads, fd = cfg.head_dim, n = graph.n_nodes;
  const std::size_t slots = graph.targets.size();
  const Eigen::Index rows = c.z.rows();
  Matrix d_pre = d_out.cwiseProduct(
      c.pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); }));
  Matrix dz = Matrix::Zero(rows, c.z.cols());
  Matrix d_self = Matrix::Zero(rows, static_cast<Eigen::Index>(heads));
  Matrix d_nbr = Matrix::Zero(rows, static_cast<Eigen::Index>(heads));
  std::vector<double> d_alpha;
  for (std::size_t g = 0; g < c.n_graphs; ++g) {
    const std::size_t base = g * n;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ri = static_cast<Eigen::Index>(base + i);
      const std::size_t lo = graph.offsets[i], hi = graph.offsets[i + 1];
      d_alpha.resize(hi - lo);
      for (std::size_t h = 0; h < heads; ++h) {
        const double* dp = d_pre.row(ri).data() + h * fd;
        double weighted = 0.0;
        for (std::size_t s = lo; s < hi; ++s) {
          const auto rj = static_cast<Eigen::Index>(base + static_cast<std::size_t>(graph.targets[s]));
          const double a = c.alpha[(g * slots + s) * heads + h];
          const double* zj = c.z.row(rj).data() + h * fd;
          double* dzj = dz.row(rj).data() + h * fd;
          double da = 0.0;
          for (std::size_t k = 0; k < fd; ++k) {
            da += dp[k] * zj[k];
            dzj[k] += a * dp[k];
          }
          d_alpha[s - lo] = da;
          weighted += a * da;
        }
        for (std::size_t s = lo; s < hi; ++s) {
          const auto rj = static_cast<Eigen::Index>(base + static_cast<std::size_t>(graph.targets[s]));
          const double a = c.alpha[(g * slots + s) * heads + h];
          const double de = a * (d_alpha[s - lo] - weighted);
          const double raw = c.raw[(g * slots + s) * heads + h];
          const double dr = raw > 0.0 ? de : cfg.leaky_slope * de;
          d_self(ri, static_cast<Eigen::Index>(h)) += dr;
          d_nbr(rj, static_cast<Eigen::Index>(h)) += dr;
        }
      }
    }
  }
  const auto att = attention.mat();
  auto datt = d_attention.mat();
  for (std::size_t h = 0; h < heads; ++h) {
    const auto hi = static_cast<Eigen::Index>(h);
    const auto col0 = static_cast<Eigen::Index>(h * fd);
    const auto w = static_cast<Eigen::Index>(fd);
    const auto block = c.z.middleCols(col0, w);
    datt.row(hi).head(w) += d_self.col(hi).transpose() * block;
    datt.row(hi).tail(w) += d_nbr.col(hi).transpose() * block;
    dz.middleCols(col0, w).noalias() += d_self.col(hi) * att.row(hi).head(w);
    dz.middleCols(col0, w).noalias() += d_nbr.col(hi) * att.row(hi).tail(w);
  }
  d_phi.mat().noalias() += c.input.transpose() * dz;
  return dz * phi.mat().transpose();
}

double gat_alpha(const GatCache& cache, const AttentionGraph& graph, std::size_t g,
                 std::size_t node, std::size_t head, std::size_t slot, const GatConfig& cfg) {
  const std::size_t s = graph.offsets[node] + slot;
  return cache.alpha[(g * graph.targets.size() + s) * cfg.heads + head];
}

DropoutResult dropout_forward(const Matrix& x, double p, std::uint64_t seed, bool training) {
  if (!(p >= 0.0 && p < 1.0)) throw ValidationError("dropout: p must lie in [0, 1)");
  DropoutResult r;
  if (!training || p == 0.0) {
    r.out = x;
    return r;
  }
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - p);
  r.mask.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < r.mask.size(); ++i)
    r.mask.data()[i] = rng.uniform() < p ? 0.0 : keep_scale;
  r.out = x.cwiseProduct(r.mask);
  return r;
}

Matrix dropout_backward(const DropoutResult& r, const Matrix& d_out) {
  return r.mask.size() == 0 ? d_out : Matrix(d_out.cwiseProduct(r.mask));
}

Matrix batchnorm_forward(const Matrix& x, const Tensor& gamma, const Tensor& beta,
                         Tensor& running_mean, Tensor& running_var, bool training,
                         BatchNormCache& cache, double momentum, double eps) {
  const Eigen::Index n = x.rows(), f = x.cols();
  if (static_cast<Eigen::Index>(gamma.size()) != f || static_cast<Eigen::Index>(beta.size()) != f)
    throw ValidationError("batch_norm: shape mismatch");
  cache.training = training;
  auto rm = running_mean.mat().row(0);
  auto rv = running_var.mat().row(0);
  Eigen::RowVectorXd mean, var;
  if (training) {
    if (n < 2) throw ValidationError("batch_norm: training needs at least two rows");
    mean = x.colwise().mean();
    var = (x.rowwise() - mean).array().square().colwise().mean().matrix();
    const double unbiased = static_cast<double>(n) / static_cast<double>(n - 1);
    rm = momentum * rm + (1.0 - momentum) * mean;
    rv = momentum * rv + (1.0 - momentum) * unbiased * var;
  } else {
    mean = rm;
    var = rv;
  }
  cache.inv_std = (var.array() + eps).rsqrt().matrix();
  cache.x_hat = (x.rowwise() - mean).array().rowwise() * cache.inv_std.array();
  Matrix out = cache.x_hat.array().rowwise() * gamma.mat().row(0).array();
  out.rowwise() += beta.mat().row(0);
  check_finite(out, "batch_norm");
  return out;
}

Matrix batchnorm_backward(const BatchNormCache& cache, const Matrix& d_out, const Tensor& gamma,
                          Tensor& d_gamma, Tensor& d_beta) {
  d_gamma.mat().row(0) += d_out.cwiseProduct(cache.x_hat).colwise().sum();
  d_beta.mat().row(0) += d_out.colwise().sum();
  Matrix dxhat = d_out.array().rowwise() * gamma.mat().row(0).array();
  if (!cache.training) return dxhat.array().rowwise() * cache.inv_std.array();
  const double n = static_cast<double>(d_out.rows());
  Eigen::RowVectorXd sum_d = dxhat.colwise().sum();
  Eigen::RowVectorXd sum_dx = dxhat.cwiseProduct(cache.x_hat).colwise().sum();
  Matrix dx = (n * dxhat).rowwise() - sum_d;
  dx -= (cache.x_hat.array().rowwise() * sum_dx.array()).matrix();
  dx = dx.array().rowwise() * (cache.inv_std.array() / n);
  return dx;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

CrossEntropyResult softmax_cross_entropy(const Matrix& logits, std::span<const std::uint8_t> labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size())
    throw ValidationError("cross entropy: label count mismatch");
  CrossEntropyResult r;
  r.probs = softmax_rows(logits);
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto y = labels[static_cast<std::size_t>(i)];
    if (y >= logits.cols()) throw ValidationError("cross entropy: label out of range");
    const double top = logits.row(i).maxCoeff();
    const double lse = top + std::log((logits.row(i).array() - top).exp().sum());
    total += lse - logits(i, y);
  }
  r.loss = labels.empty() ? 0.0 : total / static_cast<double>(labels.size());
  if (!std::isfinite(r.loss)) throw NumericError("non-finite cross entropy");
  return r;
}

Matrix softmax_cross_entropy_backward(const CrossEntropyResult& r,
                                      std::span<const std::uint8_t> labels) {
  Matrix d = r.probs;
  for (std::size_t i = 0; i < labels.size(); ++i) d(static_cast<Eigen::Index>(i), labels[i]) -= 1.0;
  d /= static_cast<double>(labels.size());
  return d;
}

}  // namespace epifed
