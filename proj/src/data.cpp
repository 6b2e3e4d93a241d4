#include "srd/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "srd/rng.hpp"

namespace srd {

namespace {

using nlohmann::json;

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  throw std::runtime_error("line " + std::to_string(line) + ": " + what);
}

EventRecord event_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) parse_fail(line, "event is not a JSON object");
  if (!j.contains("event_id") || !j["event_id"].is_string())
    parse_fail(line, "missing string event_id");
  if (!j.contains("label") || !j["label"].is_number_integer())
    parse_fail(line, "missing integer label");
  if (!j.contains("nodes") || !j["nodes"].is_array() || j["nodes"].empty())
    parse_fail(line, "missing non-empty nodes array");

  EventRecord ev;
  ev.event_id = j["event_id"].get<std::string>();
  ev.label = j["label"].get<int>();
  if (ev.label < 0) parse_fail(line, "negative label");

  std::size_t n = j["nodes"].size();
  ev.nodes.resize(n);
  std::vector<bool> seen(n, false);
  std::size_t roots = 0;
  for (const json& nj : j["nodes"]) {
    if (!nj.is_object() || !nj.contains("id") || !nj["id"].is_number_integer() ||
        !nj.contains("parent") || !nj.contains("t") || !nj["t"].is_number() ||
        !nj.contains("tokens") || !nj["tokens"].is_array())
      parse_fail(line, "malformed node object");
    int id = nj["id"].get<int>();
    if (id < 0 || static_cast<std::size_t>(id) >= n)
      parse_fail(line, "node id " + std::to_string(id) + " outside 0.." +
                           std::to_string(n - 1));
    if (seen[id]) parse_fail(line, "duplicate node id " + std::to_string(id));
    seen[id] = true;

    EventNode& node = ev.nodes[id];
    node.id = id;
    node.t = nj["t"].get<double>();
    if (node.t < 0.0) parse_fail(line, "negative timestamp on node " + std::to_string(id));
    if (nj["parent"].is_null()) {
      node.parent = -1;
      ++roots;
      if (id != 0) parse_fail(line, "root must be node 0, found null parent on " +
                                        std::to_string(id));
      if (node.t != 0.0) parse_fail(line, "root timestamp must be 0");
    } else if (nj["parent"].is_number_integer()) {
      node.parent = nj["parent"].get<int>();
      if (node.parent < 0 || static_cast<std::size_t>(node.parent) >= n)
        parse_fail(line, "parent " + std::to_string(node.parent) + " outside 0.." +
                             std::to_string(n - 1));
      if (node.parent == id) parse_fail(line, "cycle: node " + std::to_string(id) +
                                                  " is its own parent");
    } else {
      parse_fail(line, "parent must be an integer or null");
    }
    for (const json& tok : nj["tokens"]) {
      if (!tok.is_string()) parse_fail(line, "non-string token");
      node.tokens.push_back(tok.get<std::string>());
    }
  }
  if (roots == 0) parse_fail(line, "no root (every node has a parent)");
  if (roots > 1) parse_fail(line, "multiple roots");

  // every node must reach the root; a loop in the parent chain is a cycle
  for (std::size_t i = 0; i < n; ++i) {
    int cur = static_cast<int>(i);
    std::size_t hops = 0;
    while (cur != 0) {
      cur = ev.nodes[cur].parent;
      if (++hops > n) parse_fail(line, "cycle in parent chain at node " + std::to_string(i));
    }
  }
  return ev;
}

}  // namespace

std::vector<EventRecord> parse_events_text(const std::string& text) {
  std::vector<EventRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) parse_fail(line_no, "malformed JSON");
    out.push_back(event_from_json(j, line_no));
  }
  return out;
}

std::vector<EventRecord> parse_events(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_events_text(buf.str());
}

std::string serialize_event(const EventRecord& event) {
  json nodes = json::array();
  for (const EventNode& n : event.nodes) {
    json nj;
    nj["id"] = n.id;
    if (n.parent < 0)
      nj["parent"] = nullptr;
    else
      nj["parent"] = n.parent;
    nj["t"] = n.t;
    nj["tokens"] = n.tokens;
    nodes.push_back(nj);
  }
  json j;
  j["event_id"] = event.event_id;
  j["label"] = event.label;
  j["nodes"] = nodes;
  return j.dump();
}

void write_events(const std::vector<EventRecord>& events, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const EventRecord& ev : events) out << serialize_event(ev) << "\n";
}

Vocabulary::Vocabulary(std::vector<std::string> ranked_tokens)
    : ranked_(std::move(ranked_tokens)) {
  for (std::size_t i = 0; i < ranked_.size(); ++i)
    index_[ranked_[i]] = static_cast<int>(i) + 2;
}

int Vocabulary::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnknown : it->second;
}

Vocabulary build_vocabulary(const std::vector<EventRecord>& events, std::size_t min_count,
                            std::size_t max_size) {
  if (events.empty()) throw std::invalid_argument("build_vocabulary: empty corpus");
  std::map<std::string, std::size_t> freq;
  for (const EventRecord& ev : events)
    for (const EventNode& node : ev.nodes)
      for (const std::string& tok : node.tokens) ++freq[tok];

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, count] : freq)
    if (count >= min_count) kept.push_back({tok, count});
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (kept.size() > max_size) kept.resize(max_size);

  std::vector<std::string> ranked;
  ranked.reserve(kept.size());
  for (auto& [tok, count] : kept) ranked.push_back(tok);
  return Vocabulary(std::move(ranked));
}

bool event_empty_under(const EventRecord& event, const Vocabulary& vocab) {
  for (const EventNode& node : event.nodes)
    for (const std::string& tok : node.tokens)
      if (vocab.contains(tok)) return false;
  return true;
}

FeaturizedEvent featurize(const EventRecord& event, const Vocabulary& vocab,
                          std::size_t seq_len) {
  FeaturizedEvent out;
  out.event_id = event.event_id;
  out.label = event.label;

  std::size_t n = event.nodes.size();
  Tensor features(n, vocab.size());
  for (std::size_t i = 0; i < n; ++i)
    for (const std::string& tok : event.nodes[i].tokens)
      if (vocab.contains(tok)) features.at(i, static_cast<std::size_t>(vocab.lookup(tok))) = 1.0;

  std::vector<std::pair<int, int>> edges;
  for (const EventNode& node : event.nodes)
    if (node.parent >= 0) edges.push_back({node.id, node.parent});
  out.graph = make_propagation_graph(edges, features);

  std::vector<int> root_ids;
  for (const std::string& tok : event.nodes[0].tokens) root_ids.push_back(vocab.lookup(tok));
  out.seq = pad_or_truncate(root_ids, seq_len);
  return out;
}

EventRecord truncate_by_deadline(const EventRecord& event, double deadline_minutes) {
  if (deadline_minutes < 0.0)
    throw std::invalid_argument("truncate_by_deadline: negative deadline");
  std::size_t n = event.nodes.size();
  std::vector<std::vector<int>> children(n);
  for (const EventNode& node : event.nodes)
    if (node.parent >= 0) children[node.parent].push_back(node.id);
  // walk down from the root so a dropped node takes its whole subtree with it
  std::vector<bool> keep(n, false);
  keep[0] = true;
  std::vector<int> queue{0};
  for (std::size_t q = 0; q < queue.size(); ++q)
    for (int child : children[queue[q]])
      if (event.nodes[child].t <= deadline_minutes) {
        keep[child] = true;
        queue.push_back(child);
      }

  std::vector<int> remap(n, -1);
  int next_id = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) remap[i] = next_id++;
  EventRecord out;
  out.event_id = event.event_id;
  out.label = event.label;
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    EventNode node = event.nodes[i];
    node.id = remap[i];
    if (node.parent >= 0) node.parent = remap[node.parent];
    out.nodes.push_back(std::move(node));
  }
  return out;
}

namespace {

// Class-conditional cascade shape: how bushy the root is and how likely each
// reply is to keep the thread going. Root fanout carries a deterministic
// per-class floor so adjacent classes stay separable by tree size.
struct BranchProfile {
  int root_floor;
  double root_extra;
  double continue_prob;
  double child_fanout;
};

BranchProfile class_profile(std::size_t cls) {
  double c = static_cast<double>(cls);
  return {1 + 2 * static_cast<int>(cls), 0.6 + 0.3 * c, 0.18 + 0.15 * c, 0.4 + 0.5 * c};
}

constexpr BranchProfile kNullProfile{1, 1.0, 0.3, 0.7};
constexpr std::size_t kClassPool = 20;
constexpr std::size_t kBackgroundPool = 60;
constexpr std::size_t kMaxDepth = 5;
constexpr std::size_t kMaxNodes = 30;

std::string class_token(std::size_t cls, std::size_t j) {
  return "c" + std::to_string(cls) + "w" + std::to_string(j);
}

std::vector<std::string> draw_tokens(Rng& rng, std::size_t count, bool informative,
                                     std::size_t cls, double class_share) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) {
    if (informative && rng.bernoulli(class_share)) {
      out.push_back(class_token(cls, static_cast<std::size_t>(
                                         rng.uniform_int(0, static_cast<int>(kClassPool) - 1))));
    } else {
      out.push_back("bg" + std::to_string(
                               rng.uniform_int(0, static_cast<int>(kBackgroundPool) - 1)));
    }
  }
  return out;
}

}  // namespace

std::vector<EventRecord> generate_synthetic(std::size_t n_events, std::size_t n_classes,
                                            double correlation, std::uint64_t seed) {
  if (n_classes < 2) throw std::invalid_argument("generate_synthetic: need >= 2 classes");
  if (n_events < n_classes)
    throw std::invalid_argument("generate_synthetic: fewer events than classes");
  if (correlation < 0.0 || correlation > 1.0)
    throw std::invalid_argument("generate_synthetic: correlation must lie in [0, 1]");

  std::vector<EventRecord> out;
  out.reserve(n_events);
  for (std::size_t i = 0; i < n_events; ++i) {
    std::size_t cls = i % n_classes;
    Rng rng = make_stream(seed, "synthetic.event." + std::to_string(i));
    bool informative_structure = rng.bernoulli(correlation);
    bool informative_text = rng.bernoulli(correlation);
    const BranchProfile profile = informative_structure ? class_profile(cls) : kNullProfile;

    EventRecord ev;
    ev.event_id = "ev" + std::to_string(i);
    ev.label = static_cast<int>(cls);

    EventNode root;
    root.id = 0;
    root.parent = -1;
    root.t = 0.0;
    root.tokens = draw_tokens(rng, 8 + static_cast<std::size_t>(rng.uniform_int(0, 4)),
                              informative_text, cls, 0.35);
    ev.nodes.push_back(std::move(root));

    struct Frontier {
      int id;
      std::size_t depth;
    };
    std::vector<Frontier> frontier;
    int root_children = profile.root_floor + rng.poisson(profile.root_extra);
    for (int c = 0; c < root_children && ev.nodes.size() < kMaxNodes; ++c) {
      EventNode node;
      node.id = static_cast<int>(ev.nodes.size());
      node.parent = 0;
      node.t = rng.exponential(25.0);
      node.tokens = draw_tokens(rng, 3 + static_cast<std::size_t>(rng.uniform_int(0, 3)),
                                informative_text, cls, 0.5);
      frontier.push_back({node.id, 2});
      ev.nodes.push_back(std::move(node));
    }
    for (std::size_t f = 0; f < frontier.size() && ev.nodes.size() < kMaxNodes; ++f) {
      if (frontier[f].depth >= kMaxDepth) continue;
      if (!rng.bernoulli(profile.continue_prob)) continue;
      int children = 1 + rng.poisson(profile.child_fanout);
      for (int c = 0; c < children && ev.nodes.size() < kMaxNodes; ++c) {
        EventNode node;
        node.id = static_cast<int>(ev.nodes.size());
        node.parent = frontier[f].id;
        node.t = ev.nodes[frontier[f].id].t + rng.exponential(40.0);
        node.tokens = draw_tokens(rng, 3 + static_cast<std::size_t>(rng.uniform_int(0, 3)),
                                  informative_text, cls, 0.5);
        frontier.push_back({node.id, frontier[f].depth + 1});
        ev.nodes.push_back(std::move(node));
      }
    }
    out.push_back(std::move(ev));
  }
  return out;
}

DatasetStats compute_stats(const std::vector<EventRecord>& events) {
  DatasetStats stats;
  stats.events = events.size();
  for (const EventRecord& ev : events) {
    stats.posts += ev.nodes.size();
    ++stats.per_class[ev.label];
    std::vector<std::size_t> depth(ev.nodes.size(), 1);
    for (std::size_t i = 1; i < ev.nodes.size(); ++i)
      depth[i] = depth[ev.nodes[i].parent] + 1;
    for (std::size_t d : depth) {
      if (d > 5)
        ++stats.depth_hist[5];
      else
        ++stats.depth_hist[d - 1];
    }
  }
  return stats;
}

std::string stats_csv(const DatasetStats& stats) {
  std::ostringstream out;
  out << "metric,value\n";
  out << "events," << stats.events << "\n";
  out << "posts," << stats.posts << "\n";
  for (const auto& [cls, count] : stats.per_class)
    out << "class_" << cls << "," << count << "\n";
  for (std::size_t d = 0; d < 5; ++d)
    out << "depth_" << (d + 1) << "," << stats.depth_hist[d] << "\n";
  out << "depth_gt5," << stats.depth_hist[5] << "\n";
  return out.str();
}

}  // namespace srd
