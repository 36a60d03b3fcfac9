#pragma once

// Weak-supervision pairs: candidate sampling per anchor triple and the
// pairwise triple similarity score (mean of head, predicate and tail cosines).

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "kg.hpp"
#include "kge.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace ptss {

// Cosine similarity clamped to [-1, 1]; 0 when either vector is all-zero.
inline double cosine_sim(std::span<const double> u, std::span<const double> v) {
  require_same_size(u, v, "cosine_sim");
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) return 0.0;
  return std::clamp(uv / std::sqrt(uu * vv), -1.0, 1.0);
}

inline double compute_ptss(const Triple& a, const Triple& b, const EmbeddingSet& emb) {
  const double sh = cosine_sim(emb.entity(a.head), emb.entity(b.head));
  const double sp = cosine_sim(emb.predicate(a.predicate), emb.predicate(b.predicate));
  const double st = cosine_sim(emb.entity(a.tail), emb.entity(b.tail));
  return (sh + sp + st) / 3.0;
}

enum class Provenance : std::uint8_t { SharedHead, SharedTail, SharedPredicate, Negative };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::SharedHead: return "shared-head";
    case Provenance::SharedTail: return "shared-tail";
    case Provenance::SharedPredicate: return "shared-predicate";
    case Provenance::Negative: return "negative";
  }
  return "negative";
}

inline Provenance parse_provenance(std::string_view s) {
  for (auto p : {Provenance::SharedHead, Provenance::SharedTail, Provenance::SharedPredicate,
                 Provenance::Negative})
    if (s == to_string(p)) return p;
  throw std::invalid_argument("unknown provenance: " + std::string(s));
}

// Does (a, b) satisfy the relation its provenance claims?
inline bool provenance_holds(const Triple& a, const Triple& b, Provenance p) {
  switch (p) {
    case Provenance::SharedHead: return a.head == b.head;
    case Provenance::SharedTail: return a.tail == b.tail;
    case Provenance::SharedPredicate: return a.predicate == b.predicate;
    case Provenance::Negative:
      return a.head != b.head && a.tail != b.tail && a.predicate != b.predicate;
  }
  return false;
}

struct Candidate {
  Id triple = 0;
  Provenance provenance = Provenance::Negative;
  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct CandidateSet {
  std::vector<Candidate> items;
  // Fewer than N negatives were found within the rejection budget.
  bool negative_shortfall = false;
};

inline constexpr std::size_t kNegativeAttemptsPerN = 100;

namespace detail {

// N distinct members of `posting` other than `anchor`, uniformly (Floyd's
// algorithm); the whole set when it has at most N members.
inline void sample_posting(const PostingList& posting, Id anchor, std::size_t n, Provenance prov,
                           Rng& rng, std::vector<Candidate>& out) {
  const auto pos = static_cast<std::size_t>(
      std::lower_bound(posting.begin(), posting.end(), anchor) - posting.begin());
  const bool has_anchor = pos < posting.size() && posting[pos] == anchor;
  const std::size_t m = posting.size() - (has_anchor ? 1 : 0);
  auto at = [&](std::size_t i) { return posting[(has_anchor && i >= pos) ? i + 1 : i]; };
  if (m <= n) {
    for (std::size_t i = 0; i < m; ++i) out.push_back({at(i), prov});
    return;
  }
  std::vector<std::size_t> chosen;
  chosen.reserve(n);
  for (std::size_t j = m - n; j < m; ++j) {
    const std::size_t r = rng.index(j + 1);
    if (std::find(chosen.begin(), chosen.end(), r) == chosen.end())
      chosen.push_back(r);
    else
      chosen.push_back(j);
  }
  std::sort(chosen.begin(), chosen.end());
  for (auto i : chosen) out.push_back({at(i), prov});
}

}  // namespace detail

// Up to N shared-head, N shared-tail, N shared-predicate and N negative
// candidates for one anchor. Slots may overlap; overlapping draws are kept
// under each provenance.
inline CandidateSet sample_candidates(const KnowledgeGraph& g, Id anchor, std::size_t n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_candidates: N must be >= 1");
  if (anchor >= g.triples.size()) throw std::out_of_range("sample_candidates: bad triple id");
  const Triple& a = g.triples[anchor];
  CandidateSet out;
  out.items.reserve(4 * n);
  detail::sample_posting(g.by_head[a.head], anchor, n, Provenance::SharedHead, rng, out.items);
  detail::sample_posting(g.by_tail[a.tail], anchor, n, Provenance::SharedTail, rng, out.items);
  detail::sample_posting(g.by_predicate[a.predicate], anchor, n, Provenance::SharedPredicate, rng,
                         out.items);

  const std::size_t first_negative = out.items.size();
  const std::size_t budget = kNegativeAttemptsPerN * n;
  std::size_t found = 0;
  for (std::size_t attempt = 0; attempt < budget && found < n; ++attempt) {
    const auto j = static_cast<Id>(rng.index(g.triples.size()));
    if (!provenance_holds(a, g.triples[j], Provenance::Negative)) continue;
    auto first = out.items.begin() + static_cast<std::ptrdiff_t>(first_negative);
    if (std::any_of(first, out.items.end(), [&](const Candidate& c) { return c.triple == j; }))
      continue;
    out.items.push_back({j, Provenance::Negative});
    ++found;
  }
  out.negative_shortfall = found < n;
  return out;
}

struct PtssPair {
  Id triple_a = 0;
  Id triple_b = 0;
  double score = 0.0;
  Provenance provenance = Provenance::Negative;
  friend bool operator==(const PtssPair&, const PtssPair&) = default;
};

struct PtssDataset {
  std::vector<PtssPair> pairs;
  std::size_t n_param = 5;
  ModelTag seed_tag = ModelTag::Imported;
  std::uint64_t rng_seed = 0;
  // Anchors that got fewer than N negatives.
  std::size_t negative_shortfalls = 0;

  friend bool operator==(const PtssDataset&, const PtssDataset&) = default;
};

// Candidates and scores for every anchor, in anchor order. Each anchor
// draws from its own stream derived from (rng_seed, anchor), so the result
// does not depend on `threads`.
inline PtssDataset build_dataset(const KnowledgeGraph& g, const EmbeddingSet& emb, std::size_t n,
                                 std::uint64_t rng_seed, unsigned threads = 1) {
  emb.validate_against(g);
  const std::size_t T = g.triples.size();
  struct Chunk {
    std::vector<PtssPair> pairs;
    std::size_t shortfalls = 0;
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(T, 1))));
  std::vector<Chunk> chunks(threads);
  auto work = [&](unsigned w) {
    const std::size_t lo = T * w / threads, hi = T * (w + 1) / threads;
    auto& c = chunks[w];
    c.pairs.reserve((hi - lo) * 4 * n);
    Rng rng;
    for (std::size_t i = lo; i < hi; ++i) {
      rng.reseed(derive_seed(rng_seed, i));
      const auto cands = sample_candidates(g, static_cast<Id>(i), n, rng);
      if (cands.negative_shortfall) ++c.shortfalls;
      for (const auto& cand : cands.items)
        c.pairs.push_back({static_cast<Id>(i), cand.triple,
                           compute_ptss(g.triples[i], g.triples[cand.triple], emb),
                           cand.provenance});
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  PtssDataset ds;
  ds.n_param = n;
  ds.seed_tag = emb.model_tag;
  ds.rng_seed = rng_seed;
  for (auto& c : chunks) {
    ds.pairs.insert(ds.pairs.end(), c.pairs.begin(), c.pairs.end());
    ds.negative_shortfalls += c.shortfalls;
  }
  return ds;
}

// a_id<TAB>b_id<TAB>score<TAB>provenance, preceded by one '#' metadata line.
inline void write_dataset(const PtssDataset& ds, std::ostream& out) {
  out << "# n=" << ds.n_param << " seed_tag=" << to_string(ds.seed_tag)
      << " rng_seed=" << ds.rng_seed << " negative_shortfalls=" << ds.negative_shortfalls << '\n';
  for (const auto& p : ds.pairs)
    out << p.triple_a << '\t' << p.triple_b << '\t' << format_double(p.score) << '\t'
        << to_string(p.provenance) << '\n';
}

inline void write_dataset(const PtssDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_dataset(ds, out);
}

inline PtssDataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  PtssDataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string kv;
      while (meta >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const auto key = kv.substr(0, eq), val = kv.substr(eq + 1);
        if (key == "n") ds.n_param = std::stoul(val);
        else if (key == "seed_tag") ds.seed_tag = parse_model_tag(val);
        else if (key == "rng_seed") ds.rng_seed = std::stoull(val);
        else if (key == "negative_shortfalls") ds.negative_shortfalls = std::stoul(val);
      }
      continue;
    }
    auto f = detail::split_tabs(line);
    if (f.size() != 4) throw ParseError(path, lineno, "expected 4 fields");
    try {
      PtssPair p;
      p.triple_a = static_cast<Id>(std::stoul(std::string(f[0])));
      p.triple_b = static_cast<Id>(std::stoul(std::string(f[1])));
      p.score = std::stod(std::string(f[2]));
      p.provenance = parse_provenance(f[3]);
      ds.pairs.push_back(p);
    } catch (const std::invalid_argument& e) {
      throw ParseError(path, lineno, e.what());
    }
  }
  return ds;
}

}  // namespace ptss
