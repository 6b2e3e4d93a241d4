#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "srd/data.hpp"
#include "srd/model.hpp"

namespace srd {

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels);

struct EvalReport {
  double accuracy = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  // False where precision + recall is zero; the score itself is pinned to 0
  // so aggregates stay total.
  std::vector<bool> f1_defined;
  std::vector<std::vector<int>> confusion;  // [true label][predicted]
  std::size_t total = 0;
  int fold_id = -1;
  double deadline = std::numeric_limits<double>::infinity();
};

EvalReport evaluate(const std::vector<int>& preds, const std::vector<int>& labels,
                    std::size_t classes);

std::map<int, double> per_class_f1(const std::vector<int>& preds, const std::vector<int>& labels,
                                   std::size_t classes);

// Inference pass: no dropout, argmax over detector probabilities (first
// maximum wins ties).
std::vector<int> predict_labels(const Model& model, const std::vector<const FeaturizedEvent*>& events);

EvalReport evaluate_events(const Model& model, const std::vector<const FeaturizedEvent*>& events,
                           std::size_t classes);

// Truncate every event to the deadline, re-featurize against the training
// vocabulary, evaluate; one report per deadline, ascending.
std::vector<EvalReport> early_detection_curve(const Model& model,
                                              const std::vector<EventRecord>& test_events,
                                              const Vocabulary& vocab,
                                              const std::vector<double>& deadlines);

struct ReportRow {
  std::string mode;
  double lambda = 0.0;
  double tau = 0.0;
  EvalReport report;
};

// Header: mode,lambda,tau,fold,deadline,accuracy,precision_*,recall_*,f1_*.
std::string reports_csv(const std::vector<ReportRow>& rows);

// Shortest representation that parses back to the same double; "inf" for
// infinities. Keeps CSV output reproducible byte for byte.
std::string format_double(double v);

}  // namespace srd
