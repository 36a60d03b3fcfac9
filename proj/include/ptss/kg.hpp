#pragma once

// Knowledge-graph data model, TSV ingestion and topology statistics.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

namespace ptss {

using Id = std::uint32_t;

struct Triple {
  Id head = 0;
  Id predicate = 0;
  Id tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t k = (static_cast<std::uint64_t>(t.head) << 32) ^ t.tail;
    k ^= static_cast<std::uint64_t>(t.predicate) * 0x9e3779b97f4a7c15ULL;
    return static_cast<std::size_t>(k ^ (k >> 29));
  }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& msg)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Bidirectional string <-> dense index map. Indices follow first appearance.
class Vocabulary {
 public:
  Id intern(std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it != index_.end()) return it->second;
    const auto id = static_cast<Id>(names_.size());
    names_.emplace_back(name);
    index_.emplace(names_.back(), id);
    return id;
  }

  const std::string& name(Id id) const { return names_.at(id); }

  bool contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

  Id at(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw std::out_of_range("unknown vocabulary item: " + std::string(name));
    return it->second;
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Id> index_;
};

using PostingList = std::vector<Id>;

class KnowledgeGraph {
 public:
  Vocabulary entities;
  Vocabulary predicates;
  std::vector<Triple> triples;
  // element id -> sorted triple indices
  std::vector<PostingList> by_head;
  std::vector<PostingList> by_tail;
  std::vector<PostingList> by_predicate;
  std::size_t duplicates_dropped = 0;

  std::size_t num_entities() const noexcept { return entities.size(); }
  std::size_t num_predicates() const noexcept { return predicates.size(); }
  std::size_t num_triples() const noexcept { return triples.size(); }

  // Adds a triple by name; returns false if it was already present.
  bool add(std::string_view head, std::string_view predicate, std::string_view tail) {
    Triple t{entities.intern(head), predicates.intern(predicate), entities.intern(tail)};
    if (!seen_.insert(t).second) {
      ++duplicates_dropped;
      return false;
    }
    triples.push_back(t);
    return true;
  }

  // Rebuilds the inverted indices. Call after the last add().
  void build_indices() {
    by_head.assign(num_entities(), {});
    by_tail.assign(num_entities(), {});
    by_predicate.assign(num_predicates(), {});
    for (std::size_t i = 0; i < triples.size(); ++i) {
      const auto& t = triples[i];
      by_head[t.head].push_back(static_cast<Id>(i));
      by_tail[t.tail].push_back(static_cast<Id>(i));
      by_predicate[t.predicate].push_back(static_cast<Id>(i));
    }
  }

  // Graph over integer ids with generated names "e<i>" / "r<i>".
  static KnowledgeGraph from_ids(std::size_t num_entities, std::size_t num_predicates,
                                 const std::vector<Triple>& ts) {
    KnowledgeGraph g;
    for (std::size_t i = 0; i < num_entities; ++i) g.entities.intern("e" + std::to_string(i));
    for (std::size_t i = 0; i < num_predicates; ++i) g.predicates.intern("r" + std::to_string(i));
    for (const auto& t : ts) {
      if (t.head >= num_entities || t.tail >= num_entities || t.predicate >= num_predicates)
        throw std::out_of_range("triple id outside vocabulary");
      if (g.seen_.insert(t).second)
        g.triples.push_back(t);
      else
        ++g.duplicates_dropped;
    }
    g.build_indices();
    return g;
  }

  // Subgraph induced by a triple subset; vocabularies are re-indexed by first appearance.
  KnowledgeGraph subgraph(const std::vector<std::size_t>& triple_ids) const {
    KnowledgeGraph g;
    for (auto i : triple_ids) {
      const auto& t = triples.at(i);
      g.add(entities.name(t.head), predicates.name(t.predicate), entities.name(t.tail));
    }
    g.build_indices();
    return g;
  }

 private:
  std::unordered_set<Triple, TripleHash> seen_;
};

namespace detail {

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
}

inline std::vector<std::string_view> split_tabs(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace detail

// Appends the triples of one head<TAB>predicate<TAB>tail file to g.
inline void append_triples(KnowledgeGraph& g, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open triple file: " + path);
  std::string line;
  std::size_t lineno = 0;
  std::size_t nonempty = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty() || detail::is_blank(line)) continue;
    ++nonempty;
    auto fields = detail::split_tabs(line);
    if (fields.size() != 3)
      throw ParseError(path, lineno,
                       "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
    for (auto f : fields)
      if (f.empty()) throw ParseError(path, lineno, "empty field");
    g.add(fields[0], fields[1], fields[2]);
  }
  if (nonempty == 0) throw std::runtime_error("empty triple file: " + path);
}

// Union of one or more triple files (e.g. train + valid + test).
inline KnowledgeGraph load_triples(const std::vector<std::string>& paths) {
  if (paths.empty()) throw std::invalid_argument("load_triples: no input files");
  KnowledgeGraph g;
  for (const auto& p : paths) append_triples(g, p);
  g.build_indices();
  return g;
}

inline KnowledgeGraph load_triples(const std::string& path) {
  return load_triples(std::vector<std::string>{path});
}

inline void write_triples(const KnowledgeGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write triple file: " + path);
  for (const auto& t : g.triples)
    out << g.entities.name(t.head) << '\t' << g.predicates.name(t.predicate) << '\t'
        << g.entities.name(t.tail) << '\n';
}

struct GraphStats {
  std::size_t num_entities = 0;
  std::size_t num_predicates = 0;
  std::size_t num_triples = 0;
  std::size_t num_multi_edge_triples = 0;
  std::size_t num_scc = 0;
  std::size_t num_wcc = 0;

  friend bool operator==(const GraphStats&, const GraphStats&) = default;
};

inline nlohmann::json to_json(const GraphStats& s) {
  return {{"num_entities", s.num_entities},   {"num_predicates", s.num_predicates},
          {"num_triples", s.num_triples},     {"num_multi_edge_triples", s.num_multi_edge_triples},
          {"num_scc", s.num_scc},             {"num_wcc", s.num_wcc}};
}

namespace detail {

inline std::uint64_t pair_key(Id h, Id t) {
  return (static_cast<std::uint64_t>(h) << 32) | t;
}

// Deduplicated directed adjacency (h -> t) in CSR form.
struct Csr {
  std::vector<std::size_t> offsets;
  std::vector<Id> targets;
};

inline Csr entity_adjacency(const KnowledgeGraph& g) {
  const std::size_t n = g.num_entities();
  Csr csr;
  csr.offsets.assign(n + 1, 0);
  for (const auto& t : g.triples) ++csr.offsets[t.head + 1];
  for (std::size_t i = 0; i < n; ++i) csr.offsets[i + 1] += csr.offsets[i];
  std::vector<Id> raw(g.triples.size());
  auto fill = csr.offsets;
  for (const auto& t : g.triples) raw[fill[t.head]++] = t.tail;

  csr.targets.reserve(raw.size());
  std::vector<std::size_t> offsets(n + 1, 0);
  for (std::size_t v = 0; v < n; ++v) {
    auto first = raw.begin() + static_cast<std::ptrdiff_t>(csr.offsets[v]);
    auto last = raw.begin() + static_cast<std::ptrdiff_t>(csr.offsets[v + 1]);
    std::sort(first, last);
    last = std::unique(first, last);
    csr.targets.insert(csr.targets.end(), first, last);
    offsets[v + 1] = csr.targets.size();
  }
  csr.offsets = std::move(offsets);
  return csr;
}

// Iterative Tarjan; returns the number of strongly connected components.
inline std::size_t count_scc(const Csr& adj, std::size_t n) {
  constexpr std::size_t kUnvisited = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(n, kUnvisited), low(n, 0), edge_pos(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<Id> stack, call;
  std::size_t next_index = 0, components = 0;

  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnvisited) continue;
    call.push_back(static_cast<Id>(root));
    index[root] = low[root] = next_index++;
    edge_pos[root] = adj.offsets[root];
    stack.push_back(static_cast<Id>(root));
    on_stack[root] = true;

    while (!call.empty()) {
      const Id v = call.back();
      if (edge_pos[v] < adj.offsets[v + 1]) {
        const Id w = adj.targets[edge_pos[v]++];
        if (index[w] == kUnvisited) {
          index[w] = low[w] = next_index++;
          edge_pos[w] = adj.offsets[w];
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back(w);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      call.pop_back();
      if (!call.empty()) low[call.back()] = std::min(low[call.back()], low[v]);
      if (low[v] == index[v]) {
        Id w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
        } while (w != v);
        ++components;
      }
    }
  }
  return components;
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<unsigned char> rank_;
};

}  // namespace detail

// Triples whose (head, tail) pair carries at least two distinct predicates, ascending.
inline std::vector<std::size_t> multi_predicate_triple_ids(const KnowledgeGraph& g) {
  std::unordered_map<std::uint64_t, std::size_t> pair_count;
  pair_count.reserve(g.triples.size());
  // Triples are unique, so counting triples per (h, t) counts distinct predicates.
  for (const auto& t : g.triples) ++pair_count[detail::pair_key(t.head, t.tail)];
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < g.triples.size(); ++i)
    if (pair_count[detail::pair_key(g.triples[i].head, g.triples[i].tail)] >= 2) out.push_back(i);
  return out;
}

inline GraphStats compute_stats(const KnowledgeGraph& g) {
  if (g.triples.empty()) throw std::invalid_argument("compute_stats: empty graph");
  GraphStats s;
  s.num_entities = g.num_entities();
  s.num_predicates = g.num_predicates();
  s.num_triples = g.num_triples();
  s.num_multi_edge_triples = multi_predicate_triple_ids(g).size();

  const auto adj = detail::entity_adjacency(g);
  s.num_scc = detail::count_scc(adj, s.num_entities);

  detail::UnionFind uf(s.num_entities);
  std::size_t wcc = s.num_entities;
  for (const auto& t : g.triples)
    if (uf.unite(t.head, t.tail)) --wcc;
  s.num_wcc = wcc;
  return s;
}

}  // namespace ptss
