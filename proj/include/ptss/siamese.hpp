#pragma once

// Siamese fine-tuning of triple embeddings.
//
// Each triple owns a tunable row initialized from its aggregated head and
// tail seed vectors. A pair (a, b) is encoded by a shared dense layer
// followed by tanh, o = tanh(W e + b), scored with cos(o_a, o_b) and
// regressed onto the pair's PTSS target with squared error. After training
// the embedding rows, not the encoder outputs, are the triple embeddings.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "adam.hpp"
#include "kg.hpp"
#include "kge.hpp"
#include "matrix.hpp"
#include "rng.hpp"
#include "sampler.hpp"

namespace ptss {

// Sum is h + p + t; it exists only to demonstrate the translational
// degeneracy and is not offered by the CLI.
enum class AggregationOp { Avg, Had, L1, L2, HT, Sum };

inline const char* to_string(AggregationOp op) {
  switch (op) {
    case AggregationOp::Avg: return "avg";
    case AggregationOp::Had: return "had";
    case AggregationOp::L1: return "l1";
    case AggregationOp::L2: return "l2";
    case AggregationOp::HT: return "ht";
    case AggregationOp::Sum: return "sum";
  }
  return "avg";
}

inline AggregationOp parse_aggregation(const std::string& s) {
  for (auto op : {AggregationOp::Avg, AggregationOp::Had, AggregationOp::L1, AggregationOp::L2,
                  AggregationOp::HT, AggregationOp::Sum})
    if (s == to_string(op)) return op;
  throw std::invalid_argument("unknown aggregation operator: " + s);
}

inline std::size_t aggregated_dim(std::size_t d, AggregationOp op) {
  return op == AggregationOp::HT ? 2 * d : d;
}

inline std::vector<double> aggregate(std::span<const double> h, std::span<const double> t,
                                     std::span<const double> p, AggregationOp op) {
  require_same_size(h, t, "aggregate");
  const std::size_t d = h.size();
  std::vector<double> out(aggregated_dim(d, op));
  switch (op) {
    case AggregationOp::Avg:
      for (std::size_t i = 0; i < d; ++i) out[i] = (h[i] + t[i]) / 2.0;
      break;
    case AggregationOp::Had:
      for (std::size_t i = 0; i < d; ++i) out[i] = h[i] * t[i];
      break;
    case AggregationOp::L1:
      for (std::size_t i = 0; i < d; ++i) out[i] = std::abs(h[i] - t[i]);
      break;
    case AggregationOp::L2:
      for (std::size_t i = 0; i < d; ++i) out[i] = (h[i] - t[i]) * (h[i] - t[i]);
      break;
    case AggregationOp::HT:
      std::copy(h.begin(), h.end(), out.begin());
      std::copy(t.begin(), t.end(), out.begin() + static_cast<std::ptrdiff_t>(d));
      break;
    case AggregationOp::Sum:
      require_same_size(h, p, "aggregate(sum)");
      for (std::size_t i = 0; i < d; ++i) out[i] = h[i] + p[i] + t[i];
      break;
  }
  return out;
}

inline std::vector<double> aggregate(std::span<const double> h, std::span<const double> t,
                                     AggregationOp op) {
  return aggregate(h, t, {}, op);
}

inline Matrix init_embedding_layer(const KnowledgeGraph& g, const EmbeddingSet& emb,
                                   AggregationOp op) {
  emb.validate_against(g);
  if (op == AggregationOp::Sum && emb.predicate_vectors.cols() != emb.dim())
    throw std::invalid_argument("sum aggregation needs predicate vectors of entity dimension");
  Matrix out(g.num_triples(), aggregated_dim(emb.dim(), op));
  for (std::size_t i = 0; i < g.num_triples(); ++i) {
    const auto& t = g.triples[i];
    const auto row = aggregate(emb.entity(t.head), emb.entity(t.tail),
                               op == AggregationOp::Sum ? emb.predicate(t.predicate)
                                                        : std::span<const double>{},
                               op);
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

struct FineTuneConfig {
  std::size_t batch_size = 128;
  double learning_rate = 2e-3;
  double warmup_fraction = 0.10;
  std::size_t epochs = 30;
  std::size_t encoder_layers = 1;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be > 0");
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0))
      throw std::invalid_argument("warmup_fraction must lie in [0, 1)");
    if (encoder_layers != 1)
      throw std::invalid_argument("only a single encoding/scoring layer is supported");
  }
};

struct SiameseModel {
  Matrix triple_embeddings;  // |T| x d'
  Matrix w1;                 // d' x d'
  std::vector<double> b1;    // d'

  std::size_t dim() const noexcept { return triple_embeddings.cols(); }

  bool all_finite() const {
    return triple_embeddings.all_finite() && w1.all_finite() &&
           std::all_of(b1.begin(), b1.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const SiameseModel&, const SiameseModel&) = default;
};

// W1 ~ U(-a, a), a = sqrt(6 / (fan_in + fan_out)); b1 = 0.
inline SiameseModel make_siamese_model(Matrix init, std::uint64_t rng_seed) {
  SiameseModel m;
  const std::size_t d = init.cols();
  if (d == 0) throw std::invalid_argument("make_siamese_model: zero-width embedding layer");
  m.triple_embeddings = std::move(init);
  m.w1 = Matrix(d, d);
  m.b1.assign(d, 0.0);
  Rng rng(derive_seed(rng_seed, "xavier"));
  const double a = std::sqrt(6.0 / static_cast<double>(2 * d));
  for (auto& v : m.w1.data()) v = rng.uniform(-a, a);
  return m;
}

struct ForwardResult {
  std::vector<double> o_a, o_b;
  double s_hat = 0.0;
};

namespace detail {

inline std::vector<double> encode(const SiameseModel& m, std::span<const double> e) {
  const std::size_t d = m.dim();
  std::vector<double> o(d);
  for (std::size_t i = 0; i < d; ++i) o[i] = std::tanh(dot(m.w1.row(i), e) + m.b1[i]);
  return o;
}

}  // namespace detail

inline ForwardResult forward_pair(const SiameseModel& m, Id a, Id b) {
  if (a >= m.triple_embeddings.rows() || b >= m.triple_embeddings.rows())
    throw std::out_of_range("forward_pair: bad triple id");
  ForwardResult r;
  r.o_a = detail::encode(m, m.triple_embeddings.row(a));
  r.o_b = detail::encode(m, m.triple_embeddings.row(b));
  r.s_hat = cosine_sim(r.o_a, r.o_b);
  return r;
}

inline double loss(double s_hat, double s_target) {
  const double e = s_hat - s_target;
  return e * e;
}

inline double batch_loss(std::span<const double> s_hat, std::span<const double> s_target) {
  require_same_size(s_hat, s_target, "batch_loss");
  if (s_hat.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < s_hat.size(); ++i) total += loss(s_hat[i], s_target[i]);
  return total / static_cast<double>(s_hat.size());
}

struct SiameseGradients {
  Matrix d_w1;
  std::vector<double> d_b1;
  std::map<Id, std::vector<double>> d_rows;  // touched embedding rows only

  explicit SiameseGradients(std::size_t d = 0) : d_w1(d, d), d_b1(d, 0.0) {}
};

// Mean squared error over `pairs` and its gradient.
inline double loss_and_gradients(const SiameseModel& m, std::span<const PtssPair> pairs,
                                 SiameseGradients& grads) {
  const std::size_t d = m.dim();
  grads = SiameseGradients(d);
  if (pairs.empty()) return 0.0;
  const double inv_b = 1.0 / static_cast<double>(pairs.size());
  double total = 0.0;
  std::vector<double> dz(d);

  for (const auto& pr : pairs) {
    const auto ea = m.triple_embeddings.row(pr.triple_a);
    const auto eb = m.triple_embeddings.row(pr.triple_b);
    const auto oa = detail::encode(m, ea);
    const auto ob = detail::encode(m, eb);
    const double uu = dot(oa, oa), vv = dot(ob, ob);
    const double s = (uu == 0.0 || vv == 0.0) ? 0.0 : dot(oa, ob) / std::sqrt(uu * vv);
    total += loss(s, pr.score);
    if (uu == 0.0 || vv == 0.0) continue;

    const double g = 2.0 * (s - pr.score) * inv_b;
    const double inv_nn = 1.0 / std::sqrt(uu * vv);
    auto branch = [&](const std::vector<double>& o, const std::vector<double>& other, double oo,
                      std::span<const double> e, Id row) {
      for (std::size_t i = 0; i < d; ++i) {
        const double ds_do = other[i] * inv_nn - s * o[i] / oo;
        dz[i] = g * ds_do * (1.0 - o[i] * o[i]);
      }
      for (std::size_t i = 0; i < d; ++i) {
        auto wrow = grads.d_w1.row(i);
        for (std::size_t j = 0; j < d; ++j) wrow[j] += dz[i] * e[j];
        grads.d_b1[i] += dz[i];
      }
      auto& de = grads.d_rows[row];
      if (de.empty()) de.assign(d, 0.0);
      for (std::size_t i = 0; i < d; ++i) {
        const double dzi = dz[i];
        auto wrow = m.w1.row(i);
        for (std::size_t j = 0; j < d; ++j) de[j] += wrow[j] * dzi;
      }
    };
    branch(oa, ob, uu, ea, pr.triple_a);
    branch(ob, oa, vv, eb, pr.triple_b);
  }
  return total * inv_b;
}

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t step, std::size_t epoch, std::size_t batch)
      : std::runtime_error("non-finite parameter after step " + std::to_string(step) +
                           " (epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch) + ")"),
        step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

// Linear warm-up from 0 to the base rate over the first warmup_fraction of
// all optimizer steps; constant afterwards. step is 1-based.
inline double warmup_learning_rate(const FineTuneConfig& cfg, std::size_t step,
                                   std::size_t total_steps) {
  const auto warmup = static_cast<std::size_t>(cfg.warmup_fraction * static_cast<double>(total_steps));
  if (warmup == 0 || step >= warmup) return cfg.learning_rate;
  return cfg.learning_rate * static_cast<double>(step) / static_cast<double>(warmup);
}

// Adam on W1, b1 and the embedding rows touched by each batch.
inline SiameseModel train(SiameseModel m, const PtssDataset& dataset, const FineTuneConfig& cfg,
                          std::vector<double>* epoch_losses = nullptr) {
  cfg.validate();
  const std::size_t d = m.dim();
  for (const auto& p : dataset.pairs)
    if (p.triple_a >= m.triple_embeddings.rows() || p.triple_b >= m.triple_embeddings.rows())
      throw std::out_of_range("train: dataset references a triple outside the embedding layer");
  if (epoch_losses) epoch_losses->clear();
  if (dataset.pairs.empty()) return m;

  AdamState adam_w(d * d), adam_b(d), adam_e(m.triple_embeddings.rows() * d);
  std::vector<PtssPair> order = dataset.pairs;
  Rng rng(derive_seed(cfg.rng_seed, "finetune"));
  const std::size_t batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = batches * cfg.epochs;
  std::size_t step = 0;
  SiameseGradients grads(d);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t bi = 0; bi < batches; ++bi) {
      const std::size_t lo = bi * cfg.batch_size;
      const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
      const std::span<const PtssPair> batch(order.data() + lo, hi - lo);
      epoch_loss += loss_and_gradients(m, batch, grads) * static_cast<double>(hi - lo);

      ++step;
      const double lr = warmup_learning_rate(cfg, step, total_steps);
      adam_w.update(m.w1.data(), grads.d_w1.data(), 0, lr, step);
      adam_b.update(m.b1, grads.d_b1, 0, lr, step);
      bool finite = m.w1.all_finite() &&
                    std::all_of(m.b1.begin(), m.b1.end(), [](double v) { return std::isfinite(v); });
      for (const auto& [row, g] : grads.d_rows) {
        auto r = m.triple_embeddings.row(row);
        adam_e.update(r, g, static_cast<std::size_t>(row) * d, lr, step);
        for (double v : r) finite = finite && std::isfinite(v);
      }
      if (!finite) throw TrainingDiverged(step, epoch, bi);
    }
    if (epoch_losses) epoch_losses->push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return m;
}

inline Matrix export_triple_embeddings(const SiameseModel& m) { return m.triple_embeddings; }

// Triple-embedding TSV: row names are triple indices.
inline void write_triple_embeddings(const Matrix& emb, const std::string& path) {
  std::vector<std::string> names(emb.rows());
  for (std::size_t i = 0; i < names.size(); ++i) names[i] = std::to_string(i);
  write_vectors_tsv(path, emb, names);
}

inline Matrix read_triple_embeddings(const std::string& path) {
  std::size_t width = 0;
  const auto rows = read_vectors_tsv(path, &width);
  Matrix m(rows.size(), width);
  for (const auto& [name, vals] : rows) {
    std::size_t idx = 0;
    try {
      idx = std::stoul(name);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ": row name '" + name + "' is not a triple index");
    }
    if (idx >= m.rows()) throw std::runtime_error(path + ": triple index " + name + " out of range");
    std::copy(vals.begin(), vals.end(), m.row(idx).begin());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Checkpoint: embedding layer, W1, b1 and the fine-tuning config.

inline constexpr char kSiameseMagic[8] = {'P', 'T', 'S', 'S', 'S', 'I', 'A', '1'};

inline void save_siamese(const SiameseModel& m, const FineTuneConfig& cfg, AggregationOp op,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kSiameseMagic, sizeof kSiameseMagic);
  detail::write_u64(out, static_cast<std::uint64_t>(op));
  detail::write_u64(out, cfg.batch_size);
  out.write(reinterpret_cast<const char*>(&cfg.learning_rate), sizeof(double));
  out.write(reinterpret_cast<const char*>(&cfg.warmup_fraction), sizeof(double));
  detail::write_u64(out, cfg.epochs);
  detail::write_u64(out, cfg.encoder_layers);
  detail::write_u64(out, cfg.rng_seed);
  detail::write_matrix(out, m.triple_embeddings);
  detail::write_matrix(out, m.w1);
  Matrix b(1, m.b1.size());
  std::copy(m.b1.begin(), m.b1.end(), b.data().begin());
  detail::write_matrix(out, b);
}

struct SiameseCheckpoint {
  SiameseModel model;
  FineTuneConfig config;
  AggregationOp op = AggregationOp::Avg;
};

inline SiameseCheckpoint load_siamese(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kSiameseMagic, sizeof magic) != 0)
    throw std::runtime_error("not a siamese checkpoint: " + path);
  SiameseCheckpoint ck;
  const auto op = detail::read_u64(in);
  if (op > static_cast<std::uint64_t>(AggregationOp::Sum)) throw std::runtime_error("corrupt checkpoint");
  ck.op = static_cast<AggregationOp>(op);
  ck.config.batch_size = detail::read_u64(in);
  in.read(reinterpret_cast<char*>(&ck.config.learning_rate), sizeof(double));
  in.read(reinterpret_cast<char*>(&ck.config.warmup_fraction), sizeof(double));
  ck.config.epochs = detail::read_u64(in);
  ck.config.encoder_layers = detail::read_u64(in);
  ck.config.rng_seed = detail::read_u64(in);
  ck.model.triple_embeddings = detail::read_matrix(in);
  ck.model.w1 = detail::read_matrix(in);
  const Matrix b = detail::read_matrix(in);
  ck.model.b1 = b.data();
  const std::size_t d = ck.model.triple_embeddings.cols();
  if (ck.model.w1.rows() != d || ck.model.w1.cols() != d || ck.model.b1.size() != d)
    throw std::runtime_error("inconsistent siamese checkpoint shapes");
  return ck;
}

}  // namespace ptss
