#pragma once

// Seed knowledge-graph embeddings: scoring functions with analytic
// gradients, in-repo training for TransE/DistMult/ComplEx/RotatE, and
// TSV/binary import and export.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "adam.hpp"
#include "kg.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace ptss {

enum class ValueKind { Real, ComplexInterleaved };

enum class ModelTag { TransE, DistMult, ComplEx, RotatE, Rescal, ConvE, Imported };

inline const char* to_string(ModelTag t) {
  switch (t) {
    case ModelTag::TransE: return "transe";
    case ModelTag::DistMult: return "distmult";
    case ModelTag::ComplEx: return "complex";
    case ModelTag::RotatE: return "rotate";
    case ModelTag::Rescal: return "rescal";
    case ModelTag::ConvE: return "conve";
    case ModelTag::Imported: return "imported";
  }
  return "imported";
}

inline ModelTag parse_model_tag(const std::string& s) {
  for (auto t : {ModelTag::TransE, ModelTag::DistMult, ModelTag::ComplEx, ModelTag::RotatE,
                 ModelTag::Rescal, ModelTag::ConvE, ModelTag::Imported})
    if (s == to_string(t)) return t;
  throw std::invalid_argument("unknown model tag: " + s);
}

inline const char* to_string(ValueKind k) {
  return k == ValueKind::Real ? "real" : "complex-interleaved";
}

inline ValueKind parse_value_kind(const std::string& s) {
  if (s == "real") return ValueKind::Real;
  if (s == "complex-interleaved" || s == "complex") return ValueKind::ComplexInterleaved;
  throw std::invalid_argument("unknown value kind: " + s);
}

inline ValueKind natural_value_kind(ModelTag t) {
  return (t == ModelTag::ComplEx || t == ModelTag::RotatE) ? ValueKind::ComplexInterleaved
                                                           : ValueKind::Real;
}

struct EmbeddingSet {
  Matrix entity_vectors;     // |E| x d
  Matrix predicate_vectors;  // |P| x d  (|P| x d*d for imported RESCAL)
  ValueKind value_kind = ValueKind::Real;
  ModelTag model_tag = ModelTag::Imported;

  std::size_t dim() const noexcept { return entity_vectors.cols(); }

  std::span<const double> entity(Id id) const { return entity_vectors.row(id); }
  std::span<const double> predicate(Id id) const { return predicate_vectors.row(id); }

  // Throws if shape or value invariants are violated.
  void validate() const {
    const std::size_t d = dim();
    if (d == 0) throw std::invalid_argument("embedding set has zero dimension");
    if (value_kind == ValueKind::ComplexInterleaved && d % 2 != 0)
      throw std::invalid_argument("complex-interleaved embeddings need even dimension");
    const std::size_t pd = predicate_vectors.cols();
    if (pd != d && !(model_tag == ModelTag::Rescal && pd == d * d))
      throw std::invalid_argument("predicate dimension " + std::to_string(pd) +
                                  " inconsistent with entity dimension " + std::to_string(d));
    if (!entity_vectors.all_finite() || !predicate_vectors.all_finite())
      throw std::invalid_argument("embedding set contains NaN or Inf");
  }

  void validate_against(const KnowledgeGraph& g) const {
    validate();
    if (entity_vectors.rows() != g.num_entities() ||
        predicate_vectors.rows() != g.num_predicates())
      throw std::invalid_argument("embedding rows do not match graph vocabularies");
  }

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;
};

// ---------------------------------------------------------------------------
// Scoring functions

// Gradient of a score with respect to its three arguments.
struct ScoreGrad {
  double score = 0.0;
  std::vector<double> d_head, d_pred, d_tail;
};

inline void require_even(std::size_t n, const char* what) {
  if (n % 2 != 0) throw std::invalid_argument(std::string(what) + ": odd dimension");
}

// -||h + p - t|| under L1 or L2.
inline ScoreGrad score_transe_grad(std::span<const double> h, std::span<const double> p,
                                   std::span<const double> t, int norm = 2) {
  require_same_size(h, p, "score_transe");
  require_same_size(h, t, "score_transe");
  if (norm != 1 && norm != 2) throw std::invalid_argument("score_transe: norm must be 1 or 2");
  const std::size_t d = h.size();
  std::vector<double> r(d);
  for (std::size_t i = 0; i < d; ++i) r[i] = h[i] + p[i] - t[i];
  ScoreGrad g;
  g.d_head.resize(d);
  if (norm == 1) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      s += std::abs(r[i]);
      g.d_head[i] = r[i] > 0 ? -1.0 : (r[i] < 0 ? 1.0 : 0.0);
    }
    g.score = -s;
  } else {
    const double n = norm2(r);
    g.score = -n;
    for (std::size_t i = 0; i < d; ++i) g.d_head[i] = n > 0 ? -r[i] / n : 0.0;
  }
  g.d_pred = g.d_head;
  g.d_tail.resize(d);
  for (std::size_t i = 0; i < d; ++i) g.d_tail[i] = -g.d_head[i];
  return g;
}

inline double score_transe(std::span<const double> h, std::span<const double> p,
                           std::span<const double> t, int norm = 2) {
  return score_transe_grad(h, p, t, norm).score;
}

inline ScoreGrad score_distmult_grad(std::span<const double> h, std::span<const double> p,
                                     std::span<const double> t) {
  require_same_size(h, p, "score_distmult");
  require_same_size(h, t, "score_distmult");
  const std::size_t d = h.size();
  ScoreGrad g;
  g.d_head.resize(d);
  g.d_pred.resize(d);
  g.d_tail.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    g.score += h[i] * p[i] * t[i];
    g.d_head[i] = p[i] * t[i];
    g.d_pred[i] = h[i] * t[i];
    g.d_tail[i] = h[i] * p[i];
  }
  return g;
}

inline double score_distmult(std::span<const double> h, std::span<const double> p,
                             std::span<const double> t) {
  return score_distmult_grad(h, p, t).score;
}

// Re(sum_k h_k * p_k * conj(t_k)) over interleaved [re, im] slots.
inline ScoreGrad score_complex_grad(std::span<const double> h, std::span<const double> p,
                                    std::span<const double> t) {
  require_same_size(h, p, "score_complex");
  require_same_size(h, t, "score_complex");
  require_even(h.size(), "score_complex");
  const std::size_t d = h.size();
  ScoreGrad g;
  g.d_head.resize(d);
  g.d_pred.resize(d);
  g.d_tail.resize(d);
  for (std::size_t k = 0; k < d; k += 2) {
    const double a = h[k], b = h[k + 1], c = p[k], dd = p[k + 1], e = t[k], f = t[k + 1];
    const double re = a * c - b * dd, im = a * dd + b * c;
    g.score += re * e + im * f;
    g.d_head[k] = c * e + dd * f;
    g.d_head[k + 1] = -dd * e + c * f;
    g.d_pred[k] = a * e + b * f;
    g.d_pred[k + 1] = -b * e + a * f;
    g.d_tail[k] = re;
    g.d_tail[k + 1] = im;
  }
  return g;
}

inline double score_complex(std::span<const double> h, std::span<const double> p,
                            std::span<const double> t) {
  return score_complex_grad(h, p, t).score;
}

// -||h o p - t||_2 with slotwise complex product; no modulus check on p.
inline ScoreGrad score_rotate_unchecked_grad(std::span<const double> h,
                                             std::span<const double> p,
                                             std::span<const double> t) {
  require_same_size(h, p, "score_rotate");
  require_same_size(h, t, "score_rotate");
  require_even(h.size(), "score_rotate");
  const std::size_t d = h.size();
  std::vector<double> r(d);
  for (std::size_t k = 0; k < d; k += 2) {
    r[k] = h[k] * p[k] - h[k + 1] * p[k + 1] - t[k];
    r[k + 1] = h[k] * p[k + 1] + h[k + 1] * p[k] - t[k + 1];
  }
  const double n = norm2(r);
  ScoreGrad g;
  g.score = -n;
  g.d_head.assign(d, 0.0);
  g.d_pred.assign(d, 0.0);
  g.d_tail.assign(d, 0.0);
  if (n == 0.0) return g;
  for (std::size_t k = 0; k < d; k += 2) {
    const double x = r[k] / n, y = r[k + 1] / n;
    g.d_head[k] = -(x * p[k] + y * p[k + 1]);
    g.d_head[k + 1] = -(-x * p[k + 1] + y * p[k]);
    g.d_pred[k] = -(x * h[k] + y * h[k + 1]);
    g.d_pred[k + 1] = -(-x * h[k + 1] + y * h[k]);
    g.d_tail[k] = x;
    g.d_tail[k + 1] = y;
  }
  return g;
}

inline void require_unit_modulus(std::span<const double> p, double tol = 1e-6) {
  require_even(p.size(), "score_rotate");
  for (std::size_t k = 0; k < p.size(); k += 2) {
    const double mod = std::hypot(p[k], p[k + 1]);
    if (std::abs(mod - 1.0) > tol)
      throw std::invalid_argument("score_rotate: predicate slot " + std::to_string(k / 2) +
                                  " has modulus " + std::to_string(mod));
  }
}

inline ScoreGrad score_rotate_grad(std::span<const double> h, std::span<const double> p,
                                   std::span<const double> t) {
  require_unit_modulus(p);
  return score_rotate_unchecked_grad(h, p, t);
}

inline double score_rotate(std::span<const double> h, std::span<const double> p,
                           std::span<const double> t) {
  return score_rotate_grad(h, p, t).score;
}

// Interleaved unit-modulus predicate from phase angles.
inline std::vector<double> phases_to_rotation(std::span<const double> phase) {
  std::vector<double> p(2 * phase.size());
  for (std::size_t k = 0; k < phase.size(); ++k) {
    p[2 * k] = std::cos(phase[k]);
    p[2 * k + 1] = std::sin(phase[k]);
  }
  return p;
}

// RotatE score parameterized by phases; d_pred holds d(score)/d(phase).
inline ScoreGrad score_rotate_phase_grad(std::span<const double> h, std::span<const double> phase,
                                         std::span<const double> t) {
  const auto p = phases_to_rotation(phase);
  ScoreGrad g = score_rotate_unchecked_grad(h, p, t);
  std::vector<double> d_phase(phase.size());
  for (std::size_t k = 0; k < phase.size(); ++k)
    d_phase[k] = g.d_pred[2 * k] * -p[2 * k + 1] + g.d_pred[2 * k + 1] * p[2 * k];
  g.d_pred = std::move(d_phase);
  return g;
}

// h^T P t with P stored row-major (d x d). d_pred is the flattened dP.
inline ScoreGrad score_rescal_grad(std::span<const double> h, std::span<const double> pk,
                                   std::span<const double> t) {
  const std::size_t d = h.size();
  if (t.size() != d || pk.size() != d * d)
    throw std::invalid_argument("score_rescal: shape mismatch");
  ScoreGrad g;
  g.d_head.assign(d, 0.0);
  g.d_pred.assign(d * d, 0.0);
  g.d_tail.assign(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double pij = pk[i * d + j];
      g.score += h[i] * pij * t[j];
      g.d_head[i] += pij * t[j];
      g.d_tail[j] += h[i] * pij;
      g.d_pred[i * d + j] = h[i] * t[j];
    }
  }
  return g;
}

inline double score_rescal(std::span<const double> h, std::span<const double> pk,
                           std::span<const double> t) {
  return score_rescal_grad(h, pk, t).score;
}

inline double score_rescal(std::span<const double> h, const Matrix& pk,
                           std::span<const double> t) {
  if (pk.rows() != h.size() || pk.cols() != t.size())
    throw std::invalid_argument("score_rescal: shape mismatch");
  return score_rescal_grad(h, pk.data(), t).score;
}

// ---------------------------------------------------------------------------
// Training

struct SeedTrainConfig {
  std::size_t dim = 32;
  std::size_t epochs = 100;
  double learning_rate = 0.01;
  std::size_t batch_size = 128;
  std::size_t negatives_per_positive = 1;
  double margin = 1.0;  // TransE / RotatE
  int transe_norm = 2;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (dim < 2) throw std::invalid_argument("seed dim must be >= 2");
    if (negatives_per_positive < 1) throw std::invalid_argument("negatives_per_positive must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be > 0");
  }
};

namespace detail {

inline double softplus(double x) {
  return x > 30 ? x : (x < -30 ? std::exp(x) : std::log1p(std::exp(x)));
}
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Parameter block with sparse-row Adam updates.
struct SparseRows {
  Matrix values;
  Matrix grad;
  AdamState adam;
  std::vector<std::size_t> touched;
  std::vector<bool> is_touched;

  explicit SparseRows(Matrix init)
      : values(std::move(init)),
        grad(values.rows(), values.cols()),
        adam(values.rows() * values.cols()),
        is_touched(values.rows(), false) {}

  std::span<double> grad_row(std::size_t r) {
    if (!is_touched[r]) {
      is_touched[r] = true;
      touched.push_back(r);
    }
    return grad.row(r);
  }

  void step(double lr, std::size_t t) {
    std::sort(touched.begin(), touched.end());
    for (auto r : touched) {
      adam.update(values.row(r), grad.row(r), r * values.cols(), lr, t);
      std::fill(grad.row(r).begin(), grad.row(r).end(), 0.0);
      is_touched[r] = false;
    }
    touched.clear();
  }
};

}  // namespace detail

// Trains seed embeddings with mini-batch Adam and head/tail corruption.
// TransE and RotatE use the log-sigmoid margin loss
//   softplus(d_pos - margin) + mean_neg softplus(margin - d_neg),
// DistMult and ComplEx use softplus(-s_pos) + mean_neg softplus(s_neg).
// epoch_losses, when given, receives the mean per-triple loss of each epoch.
inline EmbeddingSet train_seed(const KnowledgeGraph& g, ModelTag tag, const SeedTrainConfig& cfg,
                               std::vector<double>* epoch_losses = nullptr) {
  cfg.validate();
  if (g.triples.empty()) throw std::invalid_argument("train_seed: empty graph");
  if (tag != ModelTag::TransE && tag != ModelTag::DistMult && tag != ModelTag::ComplEx &&
      tag != ModelTag::RotatE)
    throw std::invalid_argument(std::string("train_seed: cannot train model ") + to_string(tag));
  const bool complex_kind = natural_value_kind(tag) == ValueKind::ComplexInterleaved;
  if (complex_kind && cfg.dim % 2 != 0)
    throw std::invalid_argument("train_seed: complex models need an even dim");

  const std::size_t d = cfg.dim;
  Rng rng(derive_seed(cfg.rng_seed, "seed-train"));
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  Matrix ent(g.num_entities(), d);
  for (auto& v : ent.data()) v = rng.uniform(-scale, scale);
  const bool phased = tag == ModelTag::RotatE;
  Matrix pred(g.num_predicates(), phased ? d / 2 : d);
  for (auto& v : pred.data())
    v = phased ? rng.uniform(-std::numbers::pi, std::numbers::pi) : rng.uniform(-scale, scale);

  detail::SparseRows E(std::move(ent)), P(std::move(pred));
  const bool distance_model = tag == ModelTag::TransE || tag == ModelTag::RotatE;

  auto score = [&](const Triple& t) -> ScoreGrad {
    auto h = E.values.row(t.head), r = P.values.row(t.predicate), tl = E.values.row(t.tail);
    switch (tag) {
      case ModelTag::TransE: return score_transe_grad(h, r, tl, cfg.transe_norm);
      case ModelTag::DistMult: return score_distmult_grad(h, r, tl);
      case ModelTag::ComplEx: return score_complex_grad(h, r, tl);
      default: return score_rotate_phase_grad(h, r, tl);
    }
  };
  // Adds coeff * d(score) into the gradient buffers.
  auto accumulate = [&](const Triple& t, const ScoreGrad& sg, double coeff) {
    auto gh = E.grad_row(t.head);
    for (std::size_t i = 0; i < gh.size(); ++i) gh[i] += coeff * sg.d_head[i];
    auto gp = P.grad_row(t.predicate);
    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += coeff * sg.d_pred[i];
    auto gt = E.grad_row(t.tail);
    for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += coeff * sg.d_tail[i];
  };
  auto corrupt = [&](Triple t) {
    const std::size_t n = g.num_entities();
    const bool head = rng.uniform() < 0.5;
    Id& slot = head ? t.head : t.tail;
    if (n < 2) return t;
    const Id original = slot;
    do {
      slot = static_cast<Id>(rng.index(n));
    } while (slot == original);
    return t;
  };

  std::vector<std::size_t> order(g.triples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;
  const double inv_neg = 1.0 / static_cast<double>(cfg.negatives_per_positive);
  if (epoch_losses) epoch_losses->clear();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double inv_b = 1.0 / static_cast<double>(end - start);
      for (std::size_t bi = start; bi < end; ++bi) {
        const Triple& pos = g.triples[order[bi]];
        const ScoreGrad sp = score(pos);
        double loss;
        if (distance_model) {
          // score = -distance
          loss = detail::softplus(-sp.score - cfg.margin);
          accumulate(pos, sp, -detail::sigmoid(-sp.score - cfg.margin) * inv_b);
        } else {
          loss = detail::softplus(-sp.score);
          accumulate(pos, sp, -detail::sigmoid(-sp.score) * inv_b);
        }
        for (std::size_t k = 0; k < cfg.negatives_per_positive; ++k) {
          const Triple neg = corrupt(pos);
          const ScoreGrad sn = score(neg);
          if (distance_model) {
            loss += inv_neg * detail::softplus(cfg.margin + sn.score);
            accumulate(neg, sn, inv_neg * detail::sigmoid(cfg.margin + sn.score) * inv_b);
          } else {
            loss += inv_neg * detail::softplus(sn.score);
            accumulate(neg, sn, inv_neg * detail::sigmoid(sn.score) * inv_b);
          }
        }
        epoch_loss += loss;
      }
      ++step;
      E.step(cfg.learning_rate, step);
      P.step(cfg.learning_rate, step);
    }
    if (epoch_losses) epoch_losses->push_back(epoch_loss / static_cast<double>(order.size()));
  }

  EmbeddingSet out;
  out.model_tag = tag;
  out.value_kind = natural_value_kind(tag);
  out.entity_vectors = std::move(E.values);
  if (phased) {
    Matrix rot(g.num_predicates(), d);
    for (std::size_t r = 0; r < rot.rows(); ++r) {
      const auto p = phases_to_rotation(P.values.row(r));
      std::copy(p.begin(), p.end(), rot.row(r).begin());
    }
    out.predicate_vectors = std::move(rot);
  } else {
    out.predicate_vectors = std::move(P.values);
  }
  out.validate();
  return out;
}

// ---------------------------------------------------------------------------
// TSV: name<TAB>v0<TAB>...<TAB>v_{d-1}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_vectors_tsv(const std::string& path, const Matrix& m,
                              const std::vector<std::string>& names) {
  if (names.size() != m.rows()) throw std::invalid_argument("write_vectors_tsv: name count mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << names[r];
    for (double v : m.row(r)) out << '\t' << format_double(v);
    out << '\n';
  }
}

// name -> vector, with consistent width. Throws ParseError on bad rows.
inline std::unordered_map<std::string, std::vector<double>> read_vectors_tsv(
    const std::string& path, std::size_t* width_out = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::unordered_map<std::string, std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0, width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty()) continue;
    auto fields = detail::split_tabs(line);
    if (fields.size() < 2) throw ParseError(path, lineno, "row has no values");
    std::vector<double> vals;
    vals.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      std::string f(fields[i]);
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (f.empty() || end != f.c_str() + f.size())
        throw ParseError(path, lineno, "non-numeric field '" + f + "'");
      vals.push_back(v);
    }
    if (width == 0)
      width = vals.size();
    else if (vals.size() != width)
      throw ParseError(path, lineno,
                       "ragged row: " + std::to_string(vals.size()) + " values, expected " +
                           std::to_string(width));
    rows[std::string(fields[0])] = std::move(vals);
  }
  if (rows.empty()) throw std::runtime_error("empty embedding file: " + path);
  if (width_out) *width_out = width;
  return rows;
}

// Rows aligned to vocabulary indices; every vocabulary item must be present.
inline Matrix align_vectors(const std::unordered_map<std::string, std::vector<double>>& rows,
                            std::size_t width, const Vocabulary& vocab, const char* what) {
  Matrix m(vocab.size(), width);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto& name = vocab.name(static_cast<Id>(i));
    auto it = rows.find(name);
    if (it == rows.end())
      throw std::invalid_argument(std::string("missing ") + what + " embedding for \"" + name + "\"");
    std::copy(it->second.begin(), it->second.end(), m.row(i).begin());
  }
  return m;
}

inline EmbeddingSet import_embeddings(const KnowledgeGraph& g, const std::string& entity_path,
                                      const std::string& predicate_path, ValueKind kind,
                                      ModelTag tag = ModelTag::Imported) {
  std::size_t ew = 0, pw = 0;
  const auto ents = read_vectors_tsv(entity_path, &ew);
  const auto preds = read_vectors_tsv(predicate_path, &pw);
  EmbeddingSet out;
  out.value_kind = kind;
  out.model_tag = tag;
  out.entity_vectors = align_vectors(ents, ew, g.entities, "entity");
  out.predicate_vectors = align_vectors(preds, pw, g.predicates, "predicate");
  out.validate();
  return out;
}

inline void export_embeddings(const KnowledgeGraph& g, const EmbeddingSet& emb,
                              const std::string& entity_path, const std::string& predicate_path) {
  emb.validate_against(g);
  write_vectors_tsv(entity_path, emb.entity_vectors, g.entities.names());
  write_vectors_tsv(predicate_path, emb.predicate_vectors, g.predicates.names());
}

// ---------------------------------------------------------------------------
// Binary checkpoint (host byte order).

namespace detail {

inline void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("truncated checkpoint");
  return v;
}
inline void write_matrix(std::ostream& out, const Matrix& m) {
  write_u64(out, m.rows());
  write_u64(out, m.cols());
  out.write(reinterpret_cast<const char*>(m.data().data()),
            static_cast<std::streamsize>(m.data().size() * sizeof(double)));
}
inline Matrix read_matrix(std::istream& in) {
  const auto rows = read_u64(in);
  const auto cols = read_u64(in);
  if (rows > (1ULL << 32) || cols > (1ULL << 24)) throw std::runtime_error("corrupt checkpoint header");
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data().data()),
          static_cast<std::streamsize>(m.data().size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated checkpoint");
  return m;
}

}  // namespace detail

inline constexpr char kEmbeddingMagic[8] = {'P', 'T', 'S', 'S', 'E', 'M', 'B', '1'};

inline void save_embeddings_binary(const EmbeddingSet& emb, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kEmbeddingMagic, sizeof kEmbeddingMagic);
  detail::write_u64(out, static_cast<std::uint64_t>(emb.model_tag));
  detail::write_u64(out, static_cast<std::uint64_t>(emb.value_kind));
  detail::write_matrix(out, emb.entity_vectors);
  detail::write_matrix(out, emb.predicate_vectors);
}

inline EmbeddingSet load_embeddings_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kEmbeddingMagic, sizeof magic) != 0)
    throw std::runtime_error("not an embedding checkpoint: " + path);
  EmbeddingSet emb;
  const auto tag = detail::read_u64(in);
  const auto kind = detail::read_u64(in);
  if (tag > static_cast<std::uint64_t>(ModelTag::Imported) || kind > 1)
    throw std::runtime_error("corrupt checkpoint header");
  emb.model_tag = static_cast<ModelTag>(tag);
  emb.value_kind = static_cast<ValueKind>(kind);
  emb.entity_vectors = detail::read_matrix(in);
  emb.predicate_vectors = detail::read_matrix(in);
  emb.validate();
  return emb;
}

}  // namespace ptss
