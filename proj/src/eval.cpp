#include "srd/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace srd {

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size())
    throw std::invalid_argument("accuracy: prediction/label length mismatch");
  if (preds.empty()) throw std::invalid_argument("accuracy: empty inputs");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

EvalReport evaluate(const std::vector<int>& preds, const std::vector<int>& labels,
                    std::size_t classes) {
  if (preds.size() != labels.size())
    throw std::invalid_argument("evaluate: prediction/label length mismatch");
  if (preds.empty()) throw std::invalid_argument("evaluate: empty inputs");
  if (classes < 2) throw std::invalid_argument("evaluate: need at least 2 classes");

  EvalReport report;
  report.total = preds.size();
  report.confusion.assign(classes, std::vector<int>(classes, 0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    int p = preds[i];
    int y = labels[i];
    if (p < 0 || static_cast<std::size_t>(p) >= classes || y < 0 ||
        static_cast<std::size_t>(y) >= classes)
      throw std::invalid_argument("evaluate: class index out of range");
    ++report.confusion[y][p];
  }

  std::size_t trace = 0;
  for (std::size_t c = 0; c < classes; ++c) trace += report.confusion[c][c];
  report.accuracy = static_cast<double>(trace) / static_cast<double>(report.total);

  report.precision.assign(classes, 0.0);
  report.recall.assign(classes, 0.0);
  report.f1.assign(classes, 0.0);
  report.f1_defined.assign(classes, false);
  for (std::size_t c = 0; c < classes; ++c) {
    int tp = report.confusion[c][c];
    int predicted = 0;
    int present = 0;
    for (std::size_t o = 0; o < classes; ++o) {
      predicted += report.confusion[o][c];
      present += report.confusion[c][o];
    }
    double p = predicted > 0 ? static_cast<double>(tp) / predicted : 0.0;
    double r = present > 0 ? static_cast<double>(tp) / present : 0.0;
    report.precision[c] = p;
    report.recall[c] = r;
    if (p + r > 0.0) {
      report.f1[c] = 2.0 * p * r / (p + r);
      report.f1_defined[c] = true;
    }
  }
  return report;
}

std::map<int, double> per_class_f1(const std::vector<int>& preds, const std::vector<int>& labels,
                                   std::size_t classes) {
  EvalReport report = evaluate(preds, labels, classes);
  std::map<int, double> out;
  for (std::size_t c = 0; c < classes; ++c) out[static_cast<int>(c)] = report.f1[c];
  return out;
}

namespace {

int argmax_row(const Tensor& t, std::size_t row) {
  int best = 0;
  double best_v = t.at(row, 0);
  for (std::size_t j = 1; j < t.cols(); ++j) {
    if (t.at(row, j) > best_v) {
      best_v = t.at(row, j);
      best = static_cast<int>(j);
    }
  }
  return best;
}

}  // namespace

std::vector<int> predict_labels(const Model& model,
                                const std::vector<const FeaturizedEvent*>& events) {
  std::vector<int> preds;
  preds.reserve(events.size());
  Rng unused(0);
  for (const FeaturizedEvent* ev : events) {
    Tape tape;
    BatchViews views = batch_forward(tape, model, {ev}, model.mode, 0.0, unused, false);
    Tensor probs = predict(tape, detector_input(tape, views, model.mode), model.detector);
    preds.push_back(argmax_row(probs, 0));
  }
  return preds;
}

EvalReport evaluate_events(const Model& model, const std::vector<const FeaturizedEvent*>& events,
                           std::size_t classes) {
  std::vector<int> labels;
  labels.reserve(events.size());
  for (const FeaturizedEvent* ev : events) labels.push_back(ev->label);
  return evaluate(predict_labels(model, events), labels, classes);
}

std::vector<EvalReport> early_detection_curve(const Model& model,
                                              const std::vector<EventRecord>& test_events,
                                              const Vocabulary& vocab,
                                              const std::vector<double>& deadlines) {
  if (!std::is_sorted(deadlines.begin(), deadlines.end()))
    throw std::invalid_argument("early_detection_curve: deadlines must be ascending");
  std::vector<EvalReport> reports;
  for (double deadline : deadlines) {
    std::vector<FeaturizedEvent> truncated;
    truncated.reserve(test_events.size());
    for (const EventRecord& ev : test_events)
      truncated.push_back(
          featurize(truncate_by_deadline(ev, deadline), vocab, model.dims.seq_len));
    std::vector<const FeaturizedEvent*> ptrs;
    ptrs.reserve(truncated.size());
    for (const FeaturizedEvent& fe : truncated) ptrs.push_back(&fe);
    EvalReport report = evaluate_events(model, ptrs, model.dims.classes);
    report.deadline = deadline;
    reports.push_back(std::move(report));
  }
  return reports;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string reports_csv(const std::vector<ReportRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("reports_csv: no rows");
  std::size_t classes = rows[0].report.f1.size();
  std::ostringstream out;
  out << "mode,lambda,tau,fold,deadline,accuracy";
  for (std::size_t c = 0; c < classes; ++c) out << ",precision_" << c;
  for (std::size_t c = 0; c < classes; ++c) out << ",recall_" << c;
  for (std::size_t c = 0; c < classes; ++c) out << ",f1_" << c;
  out << "\n";
  for (const ReportRow& row : rows) {
    if (row.report.f1.size() != classes)
      throw std::invalid_argument("reports_csv: inconsistent class counts");
    out << row.mode << ',' << format_double(row.lambda) << ',' << format_double(row.tau) << ','
        << row.report.fold_id << ',' << format_double(row.report.deadline) << ','
        << format_double(row.report.accuracy);
    for (double v : row.report.precision) out << ',' << format_double(v);
    for (double v : row.report.recall) out << ',' << format_double(v);
    for (double v : row.report.f1) out << ',' << format_double(v);
    out << "\n";
  }
  return out.str();
}

}  // namespace srd
