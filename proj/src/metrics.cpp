#include "epifed/metrics.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "epifed/error.hpp"
#include "epifed/layers.hpp"

namespace epifed {

namespace {

void check_same(std::size_t a, std::size_t b) {
  if (a != b) throw ValidationError("prediction and truth sizes differ");
  if (a == 0) throw ValidationError("empty evaluation set");
}

}  // namespace

double accuracy(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
  check_same(pred.size(), truth.size());
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

double macro_f1(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
  check_same(pred.size(), truth.size());
  std::array<std::size_t, 256> tp{}, fp{}, fn{};
  std::array<bool, 256> seen{};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    seen[pred[i]] = seen[truth[i]] = true;
    if (pred[i] == truth[i]) {
      ++tp[pred[i]];
    } else {
      ++fp[pred[i]];
      ++fn[truth[i]];
    }
  }
  double total = 0.0;
  std::size_t classes = 0;
  for (std::size_t c = 0; c < 256; ++c) {
    if (!seen[c]) continue;
    ++classes;
    const double denom = 2.0 * static_cast<double>(tp[c]) + static_cast<double>(fp[c] + fn[c]);
    total += denom > 0 ? 2.0 * static_cast<double>(tp[c]) / denom : 0.0;
  }
  return total / static_cast<double>(classes);
}

double cross_entropy(const Matrix& logits, std::span<const std::uint8_t> truth) {
  check_same(static_cast<std::size_t>(logits.rows()), truth.size());
  return softmax_cross_entropy(logits, truth).loss;
}

ClassificationMetrics classification_metrics(const Matrix& logits,
                                             std::span<const std::uint8_t> truth) {
  check_same(static_cast<std::size_t>(logits.rows()), truth.size());
  std::vector<std::uint8_t> pred(truth.size());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c)
      if (logits(r, c) > logits(r, best)) best = c;
    pred[static_cast<std::size_t>(r)] = static_cast<std::uint8_t>(best);
  }
  return {cross_entropy(logits, truth), accuracy(pred, truth), macro_f1(pred, truth)};
}

PrevalenceErrors prevalence_errors(std::span<const std::uint8_t> pred,
                                   std::span<const std::uint8_t> truth, std::size_t n_nodes,
                                   std::size_t t_future, std::uint8_t infected) {
  check_same(pred.size(), truth.size());
  const std::size_t stride = n_nodes * t_future;
  if (stride == 0 || pred.size() % stride != 0)
    throw ValidationError("prevalence_errors: cell count is not windows x nodes x steps");
  const std::size_t windows = pred.size() / stride;
  if (windows == 0) throw ValidationError("prevalence_errors: empty evaluation set");
  double sq = 0.0, ab = 0.0;
  for (std::size_t w = 0; w < windows; ++w)
    for (std::size_t f = 0; f < t_future; ++f) {
      std::size_t yp = 0, yt = 0;
      for (std::size_t n = 0; n < n_nodes; ++n) {
        const std::size_t i = w * stride + n * t_future + f;
        yp += pred[i] == infected;
        yt += truth[i] == infected;
      }
      const double diff = 100.0 * (static_cast<double>(yp) - static_cast<double>(yt)) /
                          static_cast<double>(n_nodes);
      sq += diff * diff;
      ab += std::abs(diff);
    }
  const double pairs = static_cast<double>(windows * t_future);
  return {std::sqrt(sq / pairs), ab / pairs};
}

double mean_client_metric(std::span<const double> values) {
  if (values.empty()) throw ValidationError("mean_client_metric: no client values");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double efficacy_energy(std::span<const double> alpha_bar, EtaNormalization mode) {
  if (alpha_bar.size() < 2)
    throw ValidationError("efficacy_energy: need one value for every M in 2..M_0 with M_0 >= 3");
  double s = 0.0;
  for (double v : alpha_bar) s += v;
  const double terms = static_cast<double>(alpha_bar.size());
  return mode == EtaNormalization::TermCount ? s / terms : s / (terms - 1.0);
}

std::string format_double(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_summary(std::span<const SummaryRow> rows, std::ostream& out,
                   const std::string& provenance) {
  std::istringstream prov(provenance);
  for (std::string line; std::getline(prov, line);) out << "# " << line << '\n';
  out << "scenario,model,aggregation,partition,epidemic,M,metric,value\n";
  for (const auto& r : rows)
    out << r.scenario << ',' << r.model << ',' << r.aggregation << ',' << r.partition << ','
        << r.epidemic << ',' << r.M << ',' << r.metric << ',' << format_double(r.value) << '\n';
}

std::vector<SummaryRow> read_summary(std::istream& in) {
  std::vector<SummaryRow> rows;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "scenario,model,aggregation,partition,epidemic,M,metric,value")
        throw ParseError("unexpected summary header", lineno);
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 8) throw ParseError("summary row needs 8 fields", lineno);
    SummaryRow r{f[0], f[1], f[2], f[3], f[4], 0, f[6], 0.0};
    auto a = std::from_chars(f[5].data(), f[5].data() + f[5].size(), r.M);
    auto b = std::from_chars(f[7].data(), f[7].data() + f[7].size(), r.value);
    if (a.ec != std::errc() || b.ec != std::errc()) throw ParseError("bad number in summary row", lineno);
    rows.push_back(std::move(r));
  }
  if (!header) throw ParseError("summary has no header", lineno);
  return rows;
}

}  // namespace epifed
