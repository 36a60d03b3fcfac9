#pragma once

// Triple2vec baseline: predicate co-occurrence weighting (TF / ITF), a
// weighted line graph over triples, weighted random walks, and skip-gram
// with negative sampling over triple-id tokens.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "kg.hpp"
#include "matrix.hpp"
#include "rng.hpp"
#include "sampler.hpp"

namespace ptss {

// C[i][j] (i != j): number of (h, t) pairs linked by both p_i and p_j.
// C[i][i]: number of (h, t) pairs carrying p_i, or 0 with zero_diagonal.
inline Matrix cooccurrence_counts(const KnowledgeGraph& g, bool zero_diagonal = false) {
  const std::size_t P = g.num_predicates();
  Matrix c(P, P);
  std::unordered_map<std::uint64_t, std::vector<Id>> by_pair;
  by_pair.reserve(g.num_triples());
  for (const auto& t : g.triples) by_pair[detail::pair_key(t.head, t.tail)].push_back(t.predicate);
  for (const auto& [key, preds] : by_pair) {
    for (auto pi : preds) {
      if (!zero_diagonal) c(pi, pi) += 1.0;
      for (auto pj : preds)
        if (pj != pi) c(pi, pj) += 1.0;
    }
  }
  return c;
}

inline double tf(std::size_t i, std::size_t j, const Matrix& c) { return std::log1p(c(i, j)); }

// log(|E| / |{p_i : C[i][j] > 0}|); 0 when no predicate co-occurs with p_j.
inline double itf(std::size_t j, std::size_t num_edges, const Matrix& c) {
  std::size_t support = 0;
  for (std::size_t i = 0; i < c.rows(); ++i)
    if (c(i, j) > 0) ++support;
  if (support == 0) return 0.0;
  return std::log(static_cast<double>(num_edges) / static_cast<double>(support));
}

// C_M(i, j) = TF(p_i, p_j) * ITF(p_j, E).
inline Matrix build_cm(const Matrix& c, std::size_t num_edges) {
  if (num_edges < 1) throw std::invalid_argument("build_cm: need at least one edge");
  const std::size_t P = c.rows();
  std::vector<double> itf_col(P);
  for (std::size_t j = 0; j < P; ++j) itf_col[j] = itf(j, num_edges, c);
  Matrix cm(P, P);
  for (std::size_t i = 0; i < P; ++i)
    for (std::size_t j = 0; j < P; ++j) cm(i, j) = tf(i, j, c) * itf_col[j];
  return cm;
}

// Pairwise cosine similarity between rows of C_M, unit diagonal.
inline Matrix predicate_similarity(const Matrix& cm) {
  const std::size_t P = cm.rows();
  Matrix mr(P, P);
  for (std::size_t i = 0; i < P; ++i) {
    mr(i, i) = 1.0;
    for (std::size_t j = i + 1; j < P; ++j) mr(i, j) = mr(j, i) = cosine_sim(cm.row(i), cm.row(j));
  }
  return mr;
}

struct PredicateCooc {
  Matrix c, cm, mr;
};

inline PredicateCooc predicate_cooccurrence(const KnowledgeGraph& g, bool zero_diagonal = false) {
  PredicateCooc out;
  out.c = cooccurrence_counts(g, zero_diagonal);
  out.cm = build_cm(out.c, g.num_triples());
  out.mr = predicate_similarity(out.cm);
  return out;
}

struct WeightedEdge {
  Id a = 0, b = 0;  // a < b
  double weight = 0.0;
};

// Undirected line graph: nodes are triples, edges join triples sharing an
// entity endpoint. Edges are stored once; `offsets`/`neighbors` is the
// symmetric CSR view used by walks, with per-node cumulative weights.
struct LineGraph {
  std::size_t num_nodes = 0;
  std::vector<WeightedEdge> edges;
  std::vector<std::size_t> offsets;
  std::vector<Id> neighbors;
  std::vector<double> cumulative;  // running weight sum within each node's range

  std::span<const Id> adjacent(Id v) const {
    return {neighbors.data() + offsets[v], offsets[v + 1] - offsets[v]};
  }
};

// CSR view and cumulative weights for an undirected edge list over n nodes.
inline LineGraph make_line_graph(std::size_t n, std::vector<WeightedEdge> edges) {
  LineGraph lg;
  lg.num_nodes = n;
  lg.edges = std::move(edges);
  lg.offsets.assign(n + 1, 0);
  for (const auto& e : lg.edges) {
    if (e.a >= n || e.b >= n || e.a == e.b) throw std::invalid_argument("make_line_graph: bad edge");
    if (!(e.weight >= 0.0)) throw std::invalid_argument("make_line_graph: negative edge weight");
    ++lg.offsets[e.a + 1];
    ++lg.offsets[e.b + 1];
  }
  for (std::size_t i = 0; i < n; ++i) lg.offsets[i + 1] += lg.offsets[i];
  lg.neighbors.resize(lg.offsets[n]);
  std::vector<double> w(lg.offsets[n]);
  auto fill = lg.offsets;
  for (const auto& e : lg.edges) {
    lg.neighbors[fill[e.a]] = e.b;
    w[fill[e.a]++] = e.weight;
    lg.neighbors[fill[e.b]] = e.a;
    w[fill[e.b]++] = e.weight;
  }
  lg.cumulative.resize(w.size());
  for (std::size_t v = 0; v < n; ++v) {
    double run = 0.0;
    for (std::size_t k = lg.offsets[v]; k < lg.offsets[v + 1]; ++k) lg.cumulative[k] = (run += w[k]);
  }
  return lg;
}

// Edge weight = max(0, M_R[p_a][p_b]).
inline LineGraph build_line_graph(const KnowledgeGraph& g, const Matrix& mr) {
  const std::size_t T = g.num_triples();
  if (mr.rows() != g.num_predicates() || mr.cols() != g.num_predicates())
    throw std::invalid_argument("build_line_graph: predicate similarity has wrong shape");
  std::vector<WeightedEdge> edges;
  std::vector<std::size_t> stamp(T, static_cast<std::size_t>(-1));
  auto visit = [&](std::size_t i, const PostingList& posting) {
    for (auto j : posting) {
      if (j <= i || stamp[j] == i) continue;
      stamp[j] = i;
      const double w = std::max(0.0, mr(g.triples[i].predicate, g.triples[j].predicate));
      edges.push_back({static_cast<Id>(i), j, w});
    }
  };
  for (std::size_t i = 0; i < T; ++i) {
    const auto& t = g.triples[i];
    visit(i, g.by_head[t.head]);
    visit(i, g.by_tail[t.head]);
    visit(i, g.by_head[t.tail]);
    visit(i, g.by_tail[t.tail]);
  }
  return make_line_graph(T, std::move(edges));
}

using Walk = std::vector<Id>;

// walks_per_node weighted walks from every node; a walk stops early when its
// current node has no edge of positive weight. Each start node uses its own
// stream derived from (rng_seed, node).
inline std::vector<Walk> random_walks(const LineGraph& lg, std::size_t walks_per_node,
                                      std::size_t walk_length, std::uint64_t rng_seed) {
  if (walk_length < 1) throw std::invalid_argument("random_walks: walk_length must be >= 1");
  std::vector<Walk> corpus;
  corpus.reserve(lg.num_nodes * walks_per_node);
  Rng rng;
  for (std::size_t s = 0; s < lg.num_nodes; ++s) {
    rng.reseed(derive_seed(rng_seed, s));
    for (std::size_t w = 0; w < walks_per_node; ++w) {
      Walk walk{static_cast<Id>(s)};
      while (walk.size() < walk_length) {
        const Id v = walk.back();
        const std::size_t lo = lg.offsets[v], hi = lg.offsets[v + 1];
        if (lo == hi || lg.cumulative[hi - 1] <= 0.0) break;
        const double r = rng.uniform() * lg.cumulative[hi - 1];
        auto it = std::upper_bound(lg.cumulative.begin() + static_cast<std::ptrdiff_t>(lo),
                                   lg.cumulative.begin() + static_cast<std::ptrdiff_t>(hi), r);
        auto k = static_cast<std::size_t>(it - lg.cumulative.begin());
        if (k >= hi) k = hi - 1;
        walk.push_back(lg.neighbors[k]);
      }
      corpus.push_back(std::move(walk));
    }
  }
  return corpus;
}

inline void write_corpus(const std::vector<Walk>& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& w : corpus) {
    for (std::size_t i = 0; i < w.size(); ++i) out << (i ? " " : "") << w[i];
    out << '\n';
  }
}

inline std::vector<Walk> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<Walk> corpus;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    Walk w;
    unsigned long id;
    while (ss >> id) w.push_back(static_cast<Id>(id));
    if (!w.empty()) corpus.push_back(std::move(w));
  }
  return corpus;
}

struct SkipGramConfig {
  std::size_t dim = 32;
  std::size_t epochs = 30;
  std::size_t window = 5;
  std::size_t negatives = 5;
  double learning_rate = 0.025;  // linearly decayed to learning_rate * 1e-4
  std::uint64_t rng_seed = 0;
};

struct SkipGramResult {
  Matrix vectors;                // num_tokens x dim (input vectors)
  std::vector<bool> in_corpus;   // false: row is still its random initialization
  std::vector<double> epoch_losses;
};

// Skip-gram with negative sampling, unigram^0.75 noise, dynamic window.
inline SkipGramResult train_skipgram(const std::vector<Walk>& corpus, std::size_t num_tokens,
                                     const SkipGramConfig& cfg) {
  std::size_t total_tokens = 0;
  for (const auto& w : corpus) total_tokens += w.size();
  if (total_tokens == 0) throw std::invalid_argument("train_skipgram: empty corpus");
  if (cfg.dim < 1) throw std::invalid_argument("train_skipgram: dim must be >= 1");

  SkipGramResult res;
  res.in_corpus.assign(num_tokens, false);
  std::vector<double> counts(num_tokens, 0.0);
  for (const auto& w : corpus)
    for (auto id : w) {
      if (id >= num_tokens) throw std::out_of_range("train_skipgram: token id out of range");
      counts[id] += 1.0;
      res.in_corpus[id] = true;
    }
  std::vector<double> noise_cdf(num_tokens);
  double acc = 0.0;
  for (std::size_t i = 0; i < num_tokens; ++i) noise_cdf[i] = (acc += std::pow(counts[i], 0.75));

  const std::size_t d = cfg.dim;
  Rng rng(derive_seed(cfg.rng_seed, "skipgram"));
  Matrix in(num_tokens, d), out(num_tokens, d);
  for (auto& v : in.data()) v = (rng.uniform() - 0.5) / static_cast<double>(d);

  auto draw_noise = [&]() {
    const double r = rng.uniform() * acc;
    auto it = std::upper_bound(noise_cdf.begin(), noise_cdf.end(), r);
    return static_cast<Id>(std::min<std::size_t>(static_cast<std::size_t>(it - noise_cdf.begin()), num_tokens - 1));
  };
  auto log_sigmoid = [](double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); };

  const double total_steps = static_cast<double>(total_tokens * cfg.epochs);
  const double min_lr = cfg.learning_rate * 1e-4;
  std::size_t processed = 0;
  std::vector<double> grad_in(d);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss = 0.0;
    std::size_t pairs = 0;
    for (const auto& walk : corpus) {
      for (std::size_t pos = 0; pos < walk.size(); ++pos, ++processed) {
        const double lr = std::max(min_lr, cfg.learning_rate * (1.0 - static_cast<double>(processed) / total_steps));
        const std::size_t b = 1 + rng.index(cfg.window);
        const std::size_t lo = pos >= b ? pos - b : 0, hi = std::min(walk.size(), pos + b + 1);
        const Id center = walk[pos];
        auto vin = in.row(center);
        for (std::size_t c = lo; c < hi; ++c) {
          if (c == pos) continue;
          std::fill(grad_in.begin(), grad_in.end(), 0.0);
          for (std::size_t k = 0; k <= cfg.negatives; ++k) {
            const Id target = k == 0 ? walk[c] : draw_noise();
            if (k > 0 && target == walk[c]) continue;
            const double label = k == 0 ? 1.0 : 0.0;
            auto vout = out.row(target);
            const double s = dot(vin, vout);
            loss -= label > 0 ? log_sigmoid(s) : log_sigmoid(-s);
            const double gsc = (label - 1.0 / (1.0 + std::exp(-s))) * lr;
            for (std::size_t j = 0; j < d; ++j) {
              grad_in[j] += gsc * vout[j];
              vout[j] += gsc * vin[j];
            }
          }
          for (std::size_t j = 0; j < d; ++j) vin[j] += grad_in[j];
          ++pairs;
        }
      }
    }
    res.epoch_losses.push_back(pairs ? loss / static_cast<double>(pairs) : 0.0);
  }
  res.vectors = std::move(in);
  return res;
}

struct Triple2vecConfig {
  bool zero_diagonal = false;
  std::size_t walks_per_node = 10;
  std::size_t walk_length = 20;
  SkipGramConfig skipgram;
};

// Line graph -> walks -> skip-gram, returning |T| x dim triple embeddings.
inline SkipGramResult triple2vec(const KnowledgeGraph& g, const Triple2vecConfig& cfg) {
  const auto cooc = predicate_cooccurrence(g, cfg.zero_diagonal);
  const auto lg = build_line_graph(g, cooc.mr);
  const auto corpus = random_walks(lg, cfg.walks_per_node, cfg.walk_length, derive_seed(cfg.skipgram.rng_seed, "walks"));
  return train_skipgram(corpus, g.num_triples(), cfg.skipgram);
}

}  // namespace ptss
