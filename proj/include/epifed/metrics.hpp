#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "epifed/tensor.hpp"

namespace epifed {

struct ClassificationMetrics {
  double ce = 0.0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

double accuracy(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth);
/// Unweighted mean of per-class F1 over classes present in pred or truth.
double macro_f1(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth);
/// Mean softmax cross entropy of logits rows against labels.
double cross_entropy(const Matrix& logits, std::span<const std::uint8_t> truth);
/// Predictions are the row argmax of `logits`.
ClassificationMetrics classification_metrics(const Matrix& logits,
                                             std::span<const std::uint8_t> truth);

struct PrevalenceErrors {
  double rmse = 0.0;  // percentage points
  double mae = 0.0;
};

/// Cells are laid out (window, node, horizon step). Prevalence of `infected`
/// is formed over nodes for every (window, step) pair and compared.
PrevalenceErrors prevalence_errors(std::span<const std::uint8_t> pred,
                                   std::span<const std::uint8_t> truth, std::size_t n_nodes,
                                   std::size_t t_future, std::uint8_t infected);

double mean_client_metric(std::span<const double> values);

enum class EtaNormalization { TermCount, Typeset };

/// Mean of the cross-client averages for M = 2..M_0 (one value per M, in
/// order). Typeset divides the sum by M_0 - 2 instead of the term count.
double efficacy_energy(std::span<const double> alpha_bar,
                       EtaNormalization mode = EtaNormalization::TermCount);

struct SummaryRow {
  std::string scenario, model, aggregation, partition, epidemic;
  std::size_t M = 0;
  std::string metric;
  double value = 0.0;
};

/// CSV `scenario,model,aggregation,partition,epidemic,M,metric,value`.
void write_summary(std::span<const SummaryRow> rows, std::ostream& out,
                   const std::string& provenance = {});
std::vector<SummaryRow> read_summary(std::istream& in);

/// Shortest round-trip text for a double.
std::string format_double(double v);

}  // namespace epifed
