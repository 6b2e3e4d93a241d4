#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "srd/graph_encoder.hpp"
#include "srd/tensor.hpp"
#include "srd/text_encoder.hpp"

namespace srd {

struct EventNode {
  int id = 0;
  int parent = -1;  // -1 encodes the JSON null of the root
  double t = 0.0;   // minutes after the root post
  std::vector<std::string> tokens;
};

// One labeled cascade. Node ids are 0..n-1 with the root at 0; parents form a
// tree; timestamps are non-negative with the root at zero.
struct EventRecord {
  std::string event_id;
  int label = 0;
  std::vector<EventNode> nodes;
};

// Parse one event per JSON line. Errors carry the 1-based line number and a
// short diagnostic (malformed json, duplicate id, cycle, multiple roots,
// negative timestamp, ...).
std::vector<EventRecord> parse_events(const std::string& path);
std::vector<EventRecord> parse_events_text(const std::string& text);

std::string serialize_event(const EventRecord& event);
void write_events(const std::vector<EventRecord>& events, const std::string& path);

// Token ids: 0 = padding, 1 = unknown, real tokens from 2 upward, ranked by
// descending corpus frequency (ties: lexicographic).
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnknown = 1;

  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> ranked_tokens);

  int lookup(const std::string& token) const;  // kUnknown when absent
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  std::size_t size() const { return ranked_.size() + 2; }  // includes both reserved slots
  const std::vector<std::string>& ranked_tokens() const { return ranked_; }

 private:
  std::vector<std::string> ranked_;
  std::unordered_map<std::string, int> index_;
};

Vocabulary build_vocabulary(const std::vector<EventRecord>& events, std::size_t min_count = 2,
                            std::size_t max_size = 5000);

// True when no token anywhere in the event survives the vocabulary; such
// events are removed from training and evaluation.
bool event_empty_under(const EventRecord& event, const Vocabulary& vocab);

struct FeaturizedEvent {
  std::string event_id;
  int label = 0;
  PropagationGraph graph;  // multi-hot node features over the full vocab width
  TokenSequence seq;       // root tokens, padded/truncated
};

FeaturizedEvent featurize(const EventRecord& event, const Vocabulary& vocab,
                          std::size_t seq_len);

// Keep nodes whose timestamp is at or before the deadline (root always kept),
// drop any node whose ancestor was dropped, reindex contiguously.
EventRecord truncate_by_deadline(const EventRecord& event, double deadline_minutes);

// Labeled cascades with class-dependent branching profiles and token pools.
// `correlation` is the per-event probability that each signal (structure,
// text) is drawn from its class profile rather than the class-free null
// profile. Labels are assigned round-robin, so counts balance within one.
std::vector<EventRecord> generate_synthetic(std::size_t n_events, std::size_t n_classes,
                                            double correlation, std::uint64_t seed);

struct DatasetStats {
  std::size_t events = 0;
  std::size_t posts = 0;
  std::map<int, std::size_t> per_class;
  // depth buckets 1..5 plus one overflow bucket for depth > 5; root depth is 1
  std::array<std::size_t, 6> depth_hist{};
};

DatasetStats compute_stats(const std::vector<EventRecord>& events);
std::string stats_csv(const DatasetStats& stats);

}  // namespace srd
