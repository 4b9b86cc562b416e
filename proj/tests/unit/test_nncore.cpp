#include <cmath>
#include <sstream>

#include "doctest.h"
#include "epifed/error.hpp"
#include "epifed/gradcheck.hpp"
#include "epifed/layers.hpp"
#include "epifed/optim.hpp"
#include "epifed/rng.hpp"

using namespace epifed;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed, double scale = 1.0) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.data()) v = rng.uniform(-scale, scale);
  return t;
}

Matrix as_matrix(const Tensor& t) { return t.mat(); }

double dot(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }

Graph triangle_with_tail() {
  std::vector<Edge> e{{0, 1}, {1, 2}, {0, 2}, {2, 3}};
  return Graph::from_edges(4, e);
}

constexpr double kTol = 1e-5;

}  // namespace

TEST_CASE("embedding gathers rows and scatters gradients") {
  Tensor table({3, 2}, {1, 2, 3, 4, 5, 6});
  std::vector<std::uint8_t> codes{2, 0, 2};
  auto out = embedding_forward(table, codes);
  CHECK(out(0, 0) == 5);
  CHECK(out(1, 1) == 2);
  Tensor d(table.shape());
  embedding_backward(Matrix::Ones(3, 2), codes, d);
  CHECK(d.data()[4] == 2);
  CHECK(d.data()[0] == 1);
  CHECK(d.data()[2] == 0);
  std::vector<std::uint8_t> bad{3};
  CHECK_THROWS_AS(embedding_forward(table, bad), ValidationError);
}

TEST_CASE("linear layer gradients") {
  ParamSet p;
  p.add("x", random_tensor({4, 3}, 1));
  p.add("W", random_tensor({3, 5}, 2));
  p.add("b", random_tensor({5}, 3));
  Matrix r = as_matrix(random_tensor({4, 5}, 4));
  auto f = [&](const ParamSet& q) {
    return dot(linear_forward(as_matrix(q.get("x")), q.get("W"), q.get("b")), r);
  };
  ParamSet g = p.zeros_like();
  Matrix dx = linear_backward(as_matrix(p.get("x")), r, p.get("W"), g.get("W"), g.get("b"));
  g.get("x").mat() = dx;
  CHECK(gradient_check(f, p, g).max_relative_error < kTol);
}

TEST_CASE("lstm with zero weights keeps a zero state") {
  Tensor w({2 + 3, 8}), b({8});
  std::vector<Matrix> xs(4, Matrix::Ones(1, 3));
  auto steps = lstm_sequence_forward(xs, w, b);
  for (const auto& s : steps) {
    CHECK(s.h.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.gates(0, 0) == doctest::Approx(0.5));
  }
}

TEST_CASE("lstm cell follows the gate equations") {
  // One unit, one input; forget gate open, input gate open, output gate open.
  Tensor w({2, 4}, {0, 0, 0, 0, 0, 0, 1, 0});
  Tensor b({4}, {100, 100, 0, 100});
  Matrix x(1, 1), h0 = Matrix::Zero(1, 1), c0(1, 1);
  x << 0.5;
  c0 << 0.25;
  auto s = lstm_cell_forward(x, h0, c0, w, b);
  CHECK(s.c(0, 0) == doctest::Approx(0.25 + std::tanh(0.5)).epsilon(1e-12));
  CHECK(s.h(0, 0) == doctest::Approx(std::tanh(0.25 + std::tanh(0.5))).epsilon(1e-12));
}

TEST_CASE("lstm sequence gradients") {
  const std::size_t n = 3, d = 2, h = 4, steps = 4;
  ParamSet p;
  p.add("W", random_tensor({h + d, 4 * h}, 5, 0.5));
  p.add("b", random_tensor({4 * h}, 6, 0.5));
  for (std::size_t t = 0; t < steps; ++t) p.add("x" + std::to_string(t), random_tensor({n, d}, 10 + t));
  std::vector<Matrix> r;
  for (std::size_t t = 0; t < steps; ++t) r.push_back(as_matrix(random_tensor({n, h}, 20 + t)));
  auto inputs = [&](const ParamSet& q) {
    std::vector<Matrix> xs;
    for (std::size_t t = 0; t < steps; ++t) xs.push_back(as_matrix(q.get("x" + std::to_string(t))));
    return xs;
  };
  auto f = [&](const ParamSet& q) {
    auto s = lstm_sequence_forward(inputs(q), q.get("W"), q.get("b"));
    double v = 0;
    for (std::size_t t = 0; t < steps; ++t) v += dot(s[t].h, r[t]);
    return v;
  };
  auto s = lstm_sequence_forward(inputs(p), p.get("W"), p.get("b"));
  ParamSet g = p.zeros_like();
  auto dx = lstm_sequence_backward(s, r, p.get("W"), g.get("W"), g.get("b"));
  for (std::size_t t = 0; t < steps; ++t) g.get("x" + std::to_string(t)).mat() = dx[t];
  CHECK(gradient_check(f, p, g, 1e-5, 400).max_relative_error < kTol);
}

TEST_CASE("attention graph adds sorted self-loops") {
  auto ag = AttentionGraph::from_graph(triangle_with_tail());
  CHECK(ag.offsets == std::vector<std::size_t>{0, 3, 6, 10, 12});
  CHECK(std::vector<NodeId>(ag.targets.begin() + 6, ag.targets.begin() + 10) ==
        std::vector<NodeId>{0, 1, 2, 3});
}

TEST_CASE("attention weights form a distribution over each neighborhood") {
  auto graph = triangle_with_tail();
  auto ag = AttentionGraph::from_graph(graph);
  GatConfig cfg{.heads = 3, .head_dim = 2};
  auto phi = random_tensor({5, 6}, 7);
  auto att = random_tensor({3, 4}, 8);
  auto cache = gat_forward(as_matrix(random_tensor({8, 5}, 9)), 2, ag, phi, att, cfg);
  for (std::size_t g = 0; g < 2; ++g)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t h = 0; h < 3; ++h) {
        double sum = 0;
        for (std::size_t k = 0; k < ag.offsets[i + 1] - ag.offsets[i]; ++k)
          sum += gat_alpha(cache, ag, g, i, h, k, cfg);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      }
}

TEST_CASE("isolated node attends only to itself") {
  auto g = Graph::from_edges(1, std::vector<Edge>{});
  auto ag = AttentionGraph::from_graph(g);
  GatConfig cfg{.heads = 2, .head_dim = 2};
  auto phi = random_tensor({3, 4}, 1);
  auto att = random_tensor({2, 4}, 2);
  Matrix x = as_matrix(random_tensor({1, 3}, 3));
  auto cache = gat_forward(x, 1, ag, phi, att, cfg);
  CHECK(gat_alpha(cache, ag, 0, 0, 1, 0, cfg) == 1.0);
  Matrix z = x * phi.mat();
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    double expect = z(0, c) > 0 ? z(0, c) : std::expm1(z(0, c));
    CHECK(cache.out(0, c) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("graph attention gradients") {
  auto ag = AttentionGraph::from_graph(triangle_with_tail());
  GatConfig cfg{.heads = 2, .head_dim = 3};
  ParamSet p;
  p.add("x", random_tensor({8, 4}, 11));
  p.add("phi", random_tensor({4, 6}, 12));
  p.add("a", random_tensor({2, 6}, 13));
  Matrix r = as_matrix(random_tensor({8, 6}, 14));
  auto f = [&](const ParamSet& q) {
    return dot(gat_forward(as_matrix(q.get("x")), 2, ag, q.get("phi"), q.get("a"), cfg).out, r);
  };
  auto cache = gat_forward(as_matrix(p.get("x")), 2, ag, p.get("phi"), p.get("a"), cfg);
  ParamSet g = p.zeros_like();
  g.get("x").mat() = gat_backward(cache, r, ag, p.get("phi"), p.get("a"), cfg, g.get("phi"), g.get("a"));
  CHECK(gradient_check(f, p, g, 1e-6, 400).max_relative_error < kTol);
}

TEST_CASE("batch norm training-mode gradients and running statistics") {
  ParamSet p;
  p.add("x", random_tensor({6, 3}, 21));
  p.add("gamma", random_tensor({3}, 22));
  p.add("beta", random_tensor({3}, 23));
  Matrix r = as_matrix(random_tensor({6, 3}, 24));
  auto f = [&](const ParamSet& q) {
    Tensor mean({3}), var({3}, 1.0);
    BatchNormCache c;
    return dot(batchnorm_forward(as_matrix(q.get("x")), q.get("gamma"), q.get("beta"), mean, var, true, c), r);
  };
  Tensor mean({3}), var({3}, 1.0);
  BatchNormCache c;
  Matrix x = as_matrix(p.get("x"));
  batchnorm_forward(x, p.get("gamma"), p.get("beta"), mean, var, true, c);
  ParamSet g = p.zeros_like();
  g.get("x").mat() = batchnorm_backward(c, r, p.get("gamma"), g.get("gamma"), g.get("beta"));
  CHECK(gradient_check(f, p, g).max_relative_error < kTol);
  CHECK(mean[0] == doctest::Approx(0.1 * x.col(0).mean()).epsilon(1e-12));
}

TEST_CASE("softmax and cross entropy") {
  Matrix logits(1, 3);
  logits << 10, 0, 0;
  CHECK(softmax_rows(logits)(0, 0) == doctest::Approx(0.99991).epsilon(1e-5));
  Matrix uniform = Matrix::Zero(2, 3);
  std::vector<std::uint8_t> labels{0, 2};
  CHECK(softmax_cross_entropy(uniform, labels).loss == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  Matrix big(1, 2);
  big << 1000, -1000;
  std::vector<std::uint8_t> one{0};
  CHECK(std::isfinite(softmax_cross_entropy(big, one).loss));

  ParamSet p;
  p.add("z", random_tensor({5, 4}, 31, 2.0));
  std::vector<std::uint8_t> y{0, 3, 1, 1, 2};
  auto f = [&](const ParamSet& q) { return softmax_cross_entropy(as_matrix(q.get("z")), y).loss; };
  ParamSet g = p.zeros_like();
  g.get("z").mat() = softmax_cross_entropy_backward(softmax_cross_entropy(as_matrix(p.get("z")), y), y);
  CHECK(gradient_check(f, p, g).max_relative_error < kTol);
}

TEST_CASE("dropout is the identity at p = 0 and in eval mode") {
  Matrix x = as_matrix(random_tensor({4, 4}, 1));
  CHECK(dropout_forward(x, 0.0, 3, true).out == x);
  CHECK(dropout_forward(x, 0.5, 3, false).out == x);
  auto r = dropout_forward(x, 0.5, 3, true);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double m = r.mask.data()[i];
    CHECK((m == 0.0 || m == 2.0));
  }
  CHECK(dropout_forward(x, 0.5, 3, true).out == r.out);
  CHECK_THROWS_AS(dropout_forward(x, 1.0, 3, true), ValidationError);
}

TEST_CASE("first adam step moves each coordinate by about lr") {
  ParamSet p;
  p.add("w", Tensor({3}, {1.0, -2.0, 0.5}));
  ParamSet g;
  g.add("w", Tensor({3}, {0.3, -4.0, 1e-3}));
  auto st = AdamState::for_params(p, 0.01, 0.0);
  adam_step(p, g, st);
  CHECK(p.get("w")[0] == doctest::Approx(0.99).epsilon(1e-6));
  CHECK(p.get("w")[1] == doctest::Approx(-1.99).epsilon(1e-6));
  CHECK(st.step == 1);
}

TEST_CASE("weight decay shrinks parameters under zero gradient") {
  ParamSet p;
  p.add("w", Tensor({2}, {1.0, -1.0}));
  ParamSet g = p.zeros_like();
  auto st = AdamState::for_params(p, 0.01, 0.1);
  for (int i = 0; i < 10; ++i) adam_step(p, g, st);
  CHECK(std::abs(p.get("w")[0]) < 1.0);
  CHECK(std::abs(p.get("w")[1]) < 1.0);
  ParamSet bad = g;
  bad.get("w")[0] = NAN;
  CHECK_THROWS_AS(adam_step(p, bad, st), NumericError);
}

TEST_CASE("xavier initialization bounds") {
  auto t = xavier_init({20, 30}, 5);
  const double bound = std::sqrt(6.0 / 50.0);
  double mean = 0;
  for (double v : t.data()) {
    CHECK(std::abs(v) <= bound);
    mean += v;
  }
  mean /= static_cast<double>(t.size());
  CHECK(std::abs(mean) < 0.05);
  CHECK(xavier_init({20, 30}, 5) == t);
  CHECK_FALSE(xavier_init({20, 30}, 6) == t);
}

TEST_CASE("gradient checker agrees on closed forms and flags errors") {
  ParamSet p;
  p.add("a", Tensor({3}, {1.0, -2.0, 3.0}));
  auto f = [](const ParamSet& q) {
    const auto& a = q.get("a");
    return a[0] * a[0] + 3 * a[1] + a[2] * a[0];
  };
  ParamSet g;
  g.add("a", Tensor({3}, {2 * 1.0 + 3.0, 3.0, 1.0}));
  CHECK(gradient_check(f, p, g).max_relative_error < 1e-9);
  g.get("a")[1] = 2.0;
  auto bad = gradient_check(f, p, g);
  CHECK(bad.max_relative_error > 0.1);
  CHECK(bad.worst == "a[1]");
}

TEST_CASE("param sets round-trip through the binary format") {
  ParamSet p;
  p.add("alpha", random_tensor({2, 3}, 1));
  p.add("beta", random_tensor({4}, 2));
  std::stringstream s;
  write_paramset(p, s);
  CHECK(read_paramset(s) == p);
  std::istringstream junk("nope");
  CHECK_THROWS(read_paramset(junk));
}
