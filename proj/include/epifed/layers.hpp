#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "epifed/graph.hpp"
#include "epifed/tensor.hpp"

namespace epifed {

// Layers expose explicit forward/backward pairs. Forward returns whatever the
// backward pass needs; backward *accumulates* parameter gradients into the
// supplied tensors and returns the gradient with respect to the layer input.
// Matrices are row-major with one row per sample.

// ---------------------------------------------------------------- embedding

/// Row-gather of `table` [C x d]; codes must be < C.
Matrix embedding_forward(const Tensor& table, std::span<const std::uint8_t> codes);
void embedding_backward(const Matrix& d_out, std::span<const std::uint8_t> codes, Tensor& d_table);

// ------------------------------------------------------------------- linear

/// x W + b with W [in x out], b [out].
Matrix linear_forward(const Matrix& x, const Tensor& weight, const Tensor& bias);
Matrix linear_backward(const Matrix& x, const Matrix& d_out, const Tensor& weight,
                       Tensor& d_weight, Tensor& d_bias);

// --------------------------------------------------------------------- LSTM
//
// W has shape [(H + D) x 4H] and acts on the concatenation [h_prev, x]; the
// column blocks are the forget, input, candidate and output gates in that
// order. b has shape [4H].

struct LstmStep {
  Matrix h_prev, c_prev, x;
  Matrix gates;  // activated f, i, c~, o  [n x 4H]
  Matrix c, tanh_c, h;
};

LstmStep lstm_cell_forward(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
                           const Tensor& weight, const Tensor& bias);

struct LstmCellGrads {
  Matrix dx, dh_prev, dc_prev;
};

/// dh and dc are gradients w.r.t. this step's outputs h_t and c_t.
LstmCellGrads lstm_cell_backward(const LstmStep& step, const Matrix& dh, const Matrix& dc,
                                 const Tensor& weight, Tensor& d_weight, Tensor& d_bias);

/// Runs the cell over `inputs` from zero initial state.
std::vector<LstmStep> lstm_sequence_forward(const std::vector<Matrix>& inputs,
                                            const Tensor& weight, const Tensor& bias);

/// d_hidden[t] is the gradient flowing into h_t from outside the recurrence
/// (an empty matrix means zero). Returns the gradient for each input step.
std::vector<Matrix> lstm_sequence_backward(const std::vector<LstmStep>& steps,
                                           const std::vector<Matrix>& d_hidden,
                                           const Tensor& weight, Tensor& d_weight,
                                           Tensor& d_bias);

// ---------------------------------------------------------- graph attention

/// Neighbor lists with a self-loop on every node, in CSR form.
struct AttentionGraph {
  std::size_t n_nodes = 0;
  std::vector<std::size_t> offsets;  // n_nodes + 1
  std::vector<NodeId> targets;

  static AttentionGraph from_graph(const Graph& g);
};

struct GatConfig {
  std::size_t heads = 8;
  std::size_t head_dim = 8;
  double leaky_slope = 0.2;
};

/// One multi-head GAT layer applied independently to `n_graphs` stacked copies
/// of the same topology. Input rows are ordered graph-major (row g*N + i).
/// phi has shape [F_in x heads*head_dim]; attention has shape
/// [heads x 2*head_dim] holding [a_target | a_neighbor] per head.
struct GatCache {
  std::size_t n_graphs = 0;
  Matrix input;
  Matrix z;         // transformed features      [rows x heads*head_dim]
  Matrix score_self, score_nbr;  // a . z terms   [rows x heads]
  std::vector<double> alpha;     // per (row, head, edge slot)
  std::vector<double> raw;       // pre-activation e_ij, same layout
  Matrix pre;       // sum_j alpha_ij z_j
  Matrix out;       // ELU(pre), heads concatenated
};

GatCache gat_forward(const Matrix& input, std::size_t n_graphs, const AttentionGraph& graph,
                     const Tensor& phi, const Tensor& attention, const GatConfig& cfg);
Matrix gat_backward(const GatCache& cache, const Matrix& d_out, const AttentionGraph& graph,
                    const Tensor& phi, const Tensor& attention, const GatConfig& cfg,
                    Tensor& d_phi, Tensor& d_attention);

/// Attention weight alpha_ij for graph copy g, target node i, neighbor slot k
/// (slot order follows AttentionGraph::targets).
double gat_alpha(const GatCache& cache, const AttentionGraph& graph, std::size_t g,
                 std::size_t node, std::size_t head, std::size_t slot, const GatConfig& cfg);

// ------------------------------------------------------------------ dropout

struct DropoutResult {
  Matrix out;
  Matrix mask;  // 0 or 1/(1-p); empty when inactive
};

/// Inverted dropout; identity when !training or p == 0. p must lie in [0, 1).
DropoutResult dropout_forward(const Matrix& x, double p, std::uint64_t seed, bool training);
Matrix dropout_backward(const DropoutResult& r, const Matrix& d_out);

// --------------------------------------------------------------- batch norm

struct BatchNormCache {
  bool training = true;
  Matrix x_hat;
  Eigen::RowVectorXd inv_std;
};

/// Normalizes each column over the rows. Training mode uses batch statistics
/// and updates running stats with momentum 0.9; eval mode uses running stats.
Matrix batchnorm_forward(const Matrix& x, const Tensor& gamma, const Tensor& beta,
                         Tensor& running_mean, Tensor& running_var, bool training,
                         BatchNormCache& cache, double momentum = 0.9, double eps = 1e-5);
Matrix batchnorm_backward(const BatchNormCache& cache, const Matrix& d_out, const Tensor& gamma,
                          Tensor& d_gamma, Tensor& d_beta);

// ------------------------------------------------------------------ softmax

/// Row softmax, max-subtracted.
Matrix softmax_rows(const Matrix& logits);

struct CrossEntropyResult {
  double loss = 0.0;  // mean over rows
  Matrix probs;
};

CrossEntropyResult softmax_cross_entropy(const Matrix& logits, std::span<const std::uint8_t> labels);
/// Gradient of the mean loss w.r.t. the logits.
Matrix softmax_cross_entropy_backward(const CrossEntropyResult& r,
                                      std::span<const std::uint8_t> labels);

}  // namespace epifed
