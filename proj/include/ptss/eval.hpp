#pragma once

// Evaluation of triple embeddings: predicate-label classification with a
// low-capacity (one-vs-rest logistic regression) and a high-capacity (MLP)
// probe over five folds, k-means clusterability scored by the
// Calinski-Harabasz index, and correlation helpers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "adam.hpp"
#include "kg.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace ptss {

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Shuffled, non-overlapping test folds covering [0, n); train = complement.
inline std::vector<Fold> kfold_split(std::size_t n, std::size_t folds, std::uint64_t rng_seed) {
  if (folds < 2) throw std::invalid_argument("kfold_split: need at least 2 folds");
  if (n < folds) throw std::invalid_argument("kfold_split: fewer items than folds");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(rng_seed, "kfold"));
  shuffle(perm, rng);
  std::vector<Fold> out(folds);
  std::vector<std::size_t> fold_of(n);
  for (std::size_t f = 0; f < folds; ++f)
    for (std::size_t i = n * f / folds; i < n * (f + 1) / folds; ++i) fold_of[perm[i]] = f;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < folds; ++f) (fold_of[i] == f ? out[f].test : out[f].train).push_back(i);
  return out;
}

// Micro-averaged F1 from global confusion counts. Every item carries one
// gold and one predicted label, so this equals accuracy.
inline double micro_f1(std::span<const std::size_t> predicted, std::span<const std::size_t> gold) {
  if (predicted.size() != gold.size()) throw std::invalid_argument("micro_f1: length mismatch");
  if (gold.empty()) throw std::invalid_argument("micro_f1: empty input");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predicted[i] == gold[i]) {
      ++tp;
    } else {
      ++fp;  // counted against the predicted class
      ++fn;  // and missed for the gold class
    }
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

enum class ClassifierKind { LogRegOvr, Mlp };

inline const char* to_string(ClassifierKind k) { return k == ClassifierKind::LogRegOvr ? "logreg" : "mlp"; }

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::LogRegOvr;
  // logistic regression
  double l2 = 1.0;
  std::size_t iterations = 200;
  // mlp
  std::size_t hidden = 512;
  std::size_t mlp_batch = 256;
  std::size_t mlp_epochs = 10;
  double mlp_learning_rate = 1e-3;
  // shared
  bool standardize = false;

  static ClassifierSpec logreg() { return {}; }
  static ClassifierSpec mlp() {
    ClassifierSpec s;
    s.kind = ClassifierKind::Mlp;
    return s;
  }
};

namespace detail {

struct Standardizer {
  std::vector<double> mean, inv_std;

  static Standardizer fit(const Matrix& x, std::span<const std::size_t> rows) {
    Standardizer s;
    const std::size_t d = x.cols();
    s.mean.assign(d, 0.0);
    s.inv_std.assign(d, 1.0);
    std::vector<double> var(d, 0.0);
    for (auto r : rows)
      for (std::size_t j = 0; j < d; ++j) s.mean[j] += x(r, j);
    for (auto& m : s.mean) m /= static_cast<double>(rows.size());
    for (auto r : rows)
      for (std::size_t j = 0; j < d; ++j) var[j] += (x(r, j) - s.mean[j]) * (x(r, j) - s.mean[j]);
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = std::sqrt(var[j] / static_cast<double>(rows.size()));
      s.inv_std[j] = sd > 0 ? 1.0 / sd : 1.0;
    }
    return s;
  }

  Matrix apply(const Matrix& x, std::span<const std::size_t> rows) const {
    Matrix out(rows.size(), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = (x(rows[i], j) - mean[j]) * inv_std[j];
    return out;
  }
};

inline Matrix gather(const Matrix& x, std::span<const std::size_t> rows, const Standardizer* s) {
  return s ? s->apply(x, rows) : select_rows(x, rows);
}

// Largest eigenvalue of (X^T X + 1 1^T) / n for X with an appended ones column.
inline double gram_spectral_norm(const Matrix& x) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> v(d + 1, 1.0), w(d + 1);
  double lambda = 0.0;
  for (int it = 0; it < 50; ++it) {
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double xv = v[d];
      for (std::size_t j = 0; j < d; ++j) xv += x(i, j) * v[j];
      for (std::size_t j = 0; j < d; ++j) w[j] += x(i, j) * xv;
      w[d] += xv;
    }
    const double nw = norm2(w);
    if (nw == 0.0) return 0.0;
    lambda = nw / (norm2(v) * static_cast<double>(n));
    for (std::size_t j = 0; j <= d; ++j) v[j] = w[j] / nw;
  }
  return lambda * 1.01;
}

}  // namespace detail

// One-vs-rest logistic regression: per class, minimize
//   mean log-loss + l2 / (2 n) * ||w||^2   (bias unpenalized)
// with Nesterov-accelerated gradient descent at step 1/L.
class OneVsRestLogReg {
 public:
  void fit(const Matrix& x, std::span<const std::size_t> labels, std::size_t num_classes,
           double l2, std::size_t iterations) {
    const std::size_t n = x.rows(), d = x.cols();
    num_classes_ = num_classes;
    weights_ = Matrix(num_classes, d + 1);
    present_.assign(num_classes, false);
    for (auto y : labels) present_.at(y) = true;
    const double inv_n = 1.0 / static_cast<double>(n);
    const double L = 0.25 * detail::gram_spectral_norm(x) + l2 * inv_n;
    const double step = L > 0 ? 1.0 / L : 1.0;

    // All classes advance together: Z = X W^T costs one pass per iteration.
    Matrix w(num_classes, d + 1), w_prev(num_classes, d + 1), look(num_classes, d + 1),
        grad(num_classes, d + 1);
    double t = 1.0;
    std::vector<double> z(num_classes);
    for (std::size_t it = 0; it < iterations; ++it) {
      const double t_next = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
      const double momentum = (t - 1.0) / t_next;
      for (std::size_t k = 0; k < look.data().size(); ++k)
        look.data()[k] = w.data()[k] + momentum * (w.data()[k] - w_prev.data()[k]);
      std::fill(grad.data().begin(), grad.data().end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        auto xi = x.row(i);
        for (std::size_t c = 0; c < num_classes; ++c) {
          if (!present_[c]) continue;
          auto wc = look.row(c);
          const double s = dot(xi, wc.first(d)) + wc[d];
          const double y = labels[i] == c ? 1.0 : 0.0;
          z[c] = (1.0 / (1.0 + std::exp(-s)) - y) * inv_n;
        }
        for (std::size_t c = 0; c < num_classes; ++c) {
          if (!present_[c]) continue;
          auto gc = grad.row(c);
          for (std::size_t j = 0; j < d; ++j) gc[j] += z[c] * xi[j];
          gc[d] += z[c];
        }
      }
      w_prev = w;
      for (std::size_t c = 0; c < num_classes; ++c) {
        if (!present_[c]) continue;
        auto lc = look.row(c);
        auto gc = grad.row(c);
        auto wc = w.row(c);
        for (std::size_t j = 0; j < d; ++j) wc[j] = lc[j] - step * (gc[j] + l2 * inv_n * lc[j]);
        wc[d] = lc[d] - step * gc[d];
      }
      t = t_next;
    }
    weights_ = std::move(w);
  }

  // Classes absent from the training labels are never predicted.
  std::vector<std::size_t> predict(const Matrix& x) const {
    const std::size_t d = x.cols();
    std::vector<std::size_t> out(x.rows(), 0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < num_classes_; ++c) {
        if (!present_[c]) continue;
        auto wc = weights_.row(c);
        const double s = dot(x.row(i), wc.first(d)) + wc[d];
        if (s > best) {
          best = s;
          out[i] = c;
        }
      }
    }
    return out;
  }

  std::size_t missing_classes() const {
    return static_cast<std::size_t>(std::count(present_.begin(), present_.end(), false));
  }

 private:
  std::size_t num_classes_ = 0;
  Matrix weights_;
  std::vector<bool> present_;
};

// One hidden ReLU layer, softmax output, cross-entropy, Adam.
class MlpClassifier {
 public:
  void fit(const Matrix& x, std::span<const std::size_t> labels, std::size_t num_classes,
           const ClassifierSpec& spec, std::uint64_t seed) {
    const std::size_t n = x.rows(), d = x.cols(), h = spec.hidden, k = num_classes;
    Rng rng(derive_seed(seed, "mlp"));
    w1_ = Matrix(h, d);
    b1_.assign(h, 0.0);
    w2_ = Matrix(k, h);
    b2_.assign(k, 0.0);
    const double a1 = std::sqrt(6.0 / static_cast<double>(d));  // He uniform
    for (auto& v : w1_.data()) v = rng.uniform(-a1, a1);
    const double a2 = std::sqrt(6.0 / static_cast<double>(h + k));
    for (auto& v : w2_.data()) v = rng.uniform(-a2, a2);

    AdamState s_w1(h * d), s_b1(h), s_w2(k * h), s_b2(k);
    Matrix g_w1(h, d), g_w2(k, h);
    std::vector<double> g_b1(h), g_b2(k), hid(h), prob(k), dh(h);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < spec.mlp_epochs; ++epoch) {
      shuffle(order, rng);
      for (std::size_t lo = 0; lo < n; lo += spec.mlp_batch) {
        const std::size_t hi = std::min(n, lo + spec.mlp_batch);
        const double inv_b = 1.0 / static_cast<double>(hi - lo);
        std::fill(g_w1.data().begin(), g_w1.data().end(), 0.0);
        std::fill(g_w2.data().begin(), g_w2.data().end(), 0.0);
        std::fill(g_b1.begin(), g_b1.end(), 0.0);
        std::fill(g_b2.begin(), g_b2.end(), 0.0);
        for (std::size_t bi = lo; bi < hi; ++bi) {
          const std::size_t i = order[bi];
          auto xi = x.row(i);
          forward(xi, hid, prob);
          // d(loss)/d(logits) = prob - onehot
          prob[labels[i]] -= 1.0;
          std::fill(dh.begin(), dh.end(), 0.0);
          for (std::size_t c = 0; c < k; ++c) {
            const double gc = prob[c] * inv_b;
            if (gc == 0.0) continue;
            g_b2[c] += gc;
            auto w2c = w2_.row(c);
            auto g2c = g_w2.row(c);
            for (std::size_t j = 0; j < h; ++j) {
              g2c[j] += gc * hid[j];
              dh[j] += gc * w2c[j];
            }
          }
          for (std::size_t j = 0; j < h; ++j) {
            if (hid[j] <= 0.0) continue;
            g_b1[j] += dh[j];
            auto g1j = g_w1.row(j);
            for (std::size_t m = 0; m < d; ++m) g1j[m] += dh[j] * xi[m];
          }
        }
        ++step;
        s_w1.update(w1_.data(), g_w1.data(), 0, spec.mlp_learning_rate, step);
        s_b1.update(b1_, g_b1, 0, spec.mlp_learning_rate, step);
        s_w2.update(w2_.data(), g_w2.data(), 0, spec.mlp_learning_rate, step);
        s_b2.update(b2_, g_b2, 0, spec.mlp_learning_rate, step);
      }
    }
  }

  std::vector<std::size_t> predict(const Matrix& x) const {
    std::vector<double> hid(b1_.size()), prob(b2_.size());
    std::vector<std::size_t> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      forward(x.row(i), hid, prob);
      out[i] = static_cast<std::size_t>(std::max_element(prob.begin(), prob.end()) - prob.begin());
    }
    return out;
  }

 private:
  void forward(std::span<const double> xi, std::vector<double>& hid, std::vector<double>& prob) const {
    for (std::size_t j = 0; j < hid.size(); ++j) hid[j] = std::max(0.0, dot(w1_.row(j), xi) + b1_[j]);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < prob.size(); ++c) {
      prob[c] = dot(w2_.row(c), hid) + b2_[c];
      mx = std::max(mx, prob[c]);
    }
    double z = 0.0;
    for (auto& p : prob) z += (p = std::exp(p - mx));
    for (auto& p : prob) p /= z;
  }

  Matrix w1_, w2_;
  std::vector<double> b1_, b2_;
};

struct ClassificationResult {
  std::vector<double> micro_f1_per_fold;
  double micro_f1_mean = 0.0;
  // Per-fold count of classes with no training example (never predicted).
  std::vector<std::size_t> missing_classes_per_fold;
};

// Trains on each fold's train rows and scores Micro-F1 on its test rows.
// labels must be dense in [0, num_classes).
inline ClassificationResult train_classify(const Matrix& features, std::span<const std::size_t> labels,
                                           const ClassifierSpec& spec, const std::vector<Fold>& folds,
                                           std::uint64_t rng_seed = 0) {
  if (features.rows() != labels.size())
    throw std::invalid_argument("train_classify: feature rows and labels differ in length");
  std::size_t num_classes = 0;
  for (auto y : labels) num_classes = std::max(num_classes, y + 1);
  ClassificationResult res;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& fold = folds[f];
    std::optional<detail::Standardizer> std_;
    if (spec.standardize) std_ = detail::Standardizer::fit(features, fold.train);
    const Matrix xtr = detail::gather(features, fold.train, std_ ? &*std_ : nullptr);
    const Matrix xte = detail::gather(features, fold.test, std_ ? &*std_ : nullptr);
    std::vector<std::size_t> ytr(fold.train.size()), yte(fold.test.size());
    for (std::size_t i = 0; i < ytr.size(); ++i) ytr[i] = labels[fold.train[i]];
    for (std::size_t i = 0; i < yte.size(); ++i) yte[i] = labels[fold.test[i]];
    std::vector<bool> seen(num_classes, false);
    for (auto y : ytr) seen[y] = true;
    res.missing_classes_per_fold.push_back(
        static_cast<std::size_t>(std::count(seen.begin(), seen.end(), false)));

    std::vector<std::size_t> pred;
    if (spec.kind == ClassifierKind::LogRegOvr) {
      OneVsRestLogReg clf;
      clf.fit(xtr, ytr, num_classes, spec.l2, spec.iterations);
      pred = clf.predict(xte);
    } else {
      MlpClassifier clf;
      clf.fit(xtr, ytr, num_classes, spec, derive_seed(rng_seed, f));
      pred = clf.predict(xte);
    }
    res.micro_f1_per_fold.push_back(micro_f1(pred, yte));
  }
  res.micro_f1_mean = std::accumulate(res.micro_f1_per_fold.begin(), res.micro_f1_per_fold.end(), 0.0) /
                      static_cast<double>(res.micro_f1_per_fold.size());
  return res;
}

// ---------------------------------------------------------------------------
// k-means

struct KMeansConfig {
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
  double tolerance = 1e-6;  // max centroid shift
};

struct KMeansResult {
  std::vector<std::size_t> assignment;
  Matrix centroids;
  double inertia = 0.0;
  std::size_t iterations = 0;
  bool degenerate = false;  // fewer distinct points than k
  // Within-cluster sum of squares after each assignment step of the best restart.
  std::vector<double> inertia_history;
};

namespace detail {

inline std::size_t count_distinct_rows(const Matrix& x, std::size_t stop_at) {
  std::vector<std::size_t> idx(x.rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    auto ra = x.row(a), rb = x.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  std::size_t distinct = idx.empty() ? 0 : 1;
  for (std::size_t i = 1; i < idx.size() && distinct < stop_at; ++i) {
    auto ra = x.row(idx[i - 1]), rb = x.row(idx[i]);
    if (!std::equal(ra.begin(), ra.end(), rb.begin())) ++distinct;
  }
  return distinct;
}

inline double assign_points(const Matrix& x, const Matrix& c, std::vector<std::size_t>& assignment,
                            std::vector<double>& dist) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t j = 0; j < c.rows(); ++j) {
      const double dd = squared_distance(x.row(i), c.row(j));
      if (dd < best) {
        best = dd;
        arg = j;
      }
    }
    assignment[i] = arg;
    dist[i] = best;
    inertia += best;
  }
  return inertia;
}

inline Matrix kmeans_pp_seed(const Matrix& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows();
  Matrix c(k, x.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.index(n);
  for (std::size_t j = 0; j < k; ++j) {
    std::copy(x.row(pick).begin(), x.row(pick).end(), c.row(j).begin());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(x.row(i), c.row(j)));
      total += d2[i];
    }
    if (j + 1 == k) break;
    if (total <= 0.0) {
      pick = rng.index(n);
      continue;
    }
    double r = rng.uniform() * total;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      r -= d2[i];
      if (r < 0.0) {
        pick = i;
        break;
      }
    }
  }
  return c;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding; best restart by inertia.
inline KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t rng_seed,
                           const KMeansConfig& cfg = {}) {
  const std::size_t n = x.rows(), d = x.cols();
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (n < k) throw std::invalid_argument("kmeans: fewer rows than clusters");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  best.degenerate = detail::count_distinct_rows(x, k) < k;

  std::vector<std::size_t> assign(n);
  std::vector<double> dist(n);
  for (std::size_t restart = 0; restart < std::max<std::size_t>(cfg.restarts, 1); ++restart) {
    Rng rng(derive_seed(rng_seed, restart));
    Matrix c = detail::kmeans_pp_seed(x, k, rng);
    std::vector<double> history;
    double inertia = 0.0;
    std::size_t it = 0;
    for (; it < cfg.max_iterations; ++it) {
      inertia = detail::assign_points(x, c, assign, dist);
      history.push_back(inertia);
      Matrix next(k, d);
      std::vector<std::size_t> count(k, 0);
      for (std::size_t i = 0; i < n; ++i) {
        ++count[assign[i]];
        auto nr = next.row(assign[i]);
        for (std::size_t j = 0; j < d; ++j) nr[j] += x(i, j);
      }
      for (std::size_t j = 0; j < k; ++j) {
        if (count[j] == 0) {
          // Empty cluster: move it onto the point farthest from its centroid.
          const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
          std::copy(x.row(far).begin(), x.row(far).end(), next.row(j).begin());
          dist[far] = 0.0;
          continue;
        }
        for (auto& v : next.row(j)) v /= static_cast<double>(count[j]);
      }
      double shift = 0.0;
      for (std::size_t j = 0; j < k; ++j) shift = std::max(shift, std::sqrt(squared_distance(c.row(j), next.row(j))));
      c = std::move(next);
      if (shift < cfg.tolerance) {
        ++it;
        break;
      }
    }
    inertia = detail::assign_points(x, c, assign, dist);
    history.push_back(inertia);
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.assignment = assign;
      best.centroids = c;
      best.iterations = it;
      best.inertia_history = std::move(history);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Calinski-Harabasz index:
//   Tr(B_k) / Tr(W_k) * (n - k) / (k - 1)
// Returns +inf when every cluster collapses to a single point.
inline double calinski_harabasz(const Matrix& x, std::span<const std::size_t> assignment, std::size_t k) {
  const std::size_t n = x.rows(), d = x.cols();
  if (assignment.size() != n) throw std::invalid_argument("calinski_harabasz: assignment length mismatch");
  if (k < 2) throw std::invalid_argument("calinski_harabasz: k must be >= 2");
  if (n <= k) throw std::invalid_argument("calinski_harabasz: need more points than clusters");
  std::vector<double> global(d, 0.0);
  Matrix centroid(k, d);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = assignment[i];
    if (c >= k) throw std::invalid_argument("calinski_harabasz: cluster id out of range");
    ++count[c];
    for (std::size_t j = 0; j < d; ++j) {
      centroid(c, j) += x(i, j);
      global[j] += x(i, j);
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (count[c] == 0) throw std::invalid_argument("calinski_harabasz: empty cluster");
    for (auto& v : centroid.row(c)) v /= static_cast<double>(count[c]);
  }
  for (auto& v : global) v /= static_cast<double>(n);
  double between = 0.0, within = 0.0;
  for (std::size_t c = 0; c < k; ++c)
    between += static_cast<double>(count[c]) * squared_distance(centroid.row(c), global);
  for (std::size_t i = 0; i < n; ++i) within += squared_distance(x.row(i), centroid.row(assignment[i]));
  if (within == 0.0) return std::numeric_limits<double>::infinity();
  return between / within * static_cast<double>(n - k) / static_cast<double>(k - 1);
}

// ---------------------------------------------------------------------------
// Correlation

// Sample Pearson coefficient; nullopt when either sequence has zero variance.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Ranks with ties averaged (1-based).
inline std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t m = i; m <= j; ++m) r[idx[m]] = avg;
    i = j + 1;
  }
  return r;
}

inline std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = average_ranks(x), ry = average_ranks(y);
  return pearson(rx, ry);
}

// ---------------------------------------------------------------------------
// Full evaluation

struct EvalOptions {
  std::vector<ClassifierSpec> classifiers = {ClassifierSpec::logreg(), ClassifierSpec::mlp()};
  bool classify = true;
  bool cluster = true;
  bool restrict_multi_predicate = false;
  std::size_t folds = 5;
  KMeansConfig kmeans;
  std::uint64_t rng_seed = 0;
};

struct EvalReport {
  std::map<std::string, ClassificationResult> classification;  // by classifier name
  std::optional<double> ch_index;  // +inf when degenerate
  bool ch_degenerate = false;
  std::size_t clusters = 0;
  bool restricted_to_multi_predicate = false;
  std::size_t evaluated_triples = 0;
  std::map<std::string, double> correlations;
  nlohmann::json metadata = nlohmann::json::object();
};

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  nlohmann::json cls = nlohmann::json::object();
  for (const auto& [name, res] : r.classification)
    cls[name] = {{"micro_f1_per_fold", res.micro_f1_per_fold},
                 {"micro_f1_mean", res.micro_f1_mean},
                 {"missing_classes_per_fold", res.missing_classes_per_fold}};
  j["classification"] = cls;
  if (r.ch_index) {
    if (std::isinf(*r.ch_index))
      j["ch_index"] = "inf";
    else
      j["ch_index"] = *r.ch_index;
  } else {
    j["ch_index"] = nullptr;
  }
  j["ch_degenerate"] = r.ch_degenerate;
  j["clusters"] = r.clusters;
  j["restricted_to_multi_predicate"] = r.restricted_to_multi_predicate;
  j["evaluated_triples"] = r.evaluated_triples;
  j["correlations"] = r.correlations;
  j["metadata"] = r.metadata;
  return j;
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  for (const auto& [name, v] : j.at("classification").items()) {
    ClassificationResult c;
    c.micro_f1_per_fold = v.at("micro_f1_per_fold").get<std::vector<double>>();
    c.micro_f1_mean = v.at("micro_f1_mean").get<double>();
    if (v.contains("missing_classes_per_fold"))
      c.missing_classes_per_fold = v.at("missing_classes_per_fold").get<std::vector<std::size_t>>();
    r.classification[name] = std::move(c);
  }
  const auto& ch = j.at("ch_index");
  if (ch.is_string())
    r.ch_index = std::numeric_limits<double>::infinity();
  else if (ch.is_number())
    r.ch_index = ch.get<double>();
  r.ch_degenerate = j.value("ch_degenerate", false);
  r.clusters = j.value("clusters", std::size_t{0});
  r.restricted_to_multi_predicate = j.value("restricted_to_multi_predicate", false);
  r.evaluated_triples = j.value("evaluated_triples", std::size_t{0});
  if (j.contains("correlations")) r.correlations = j.at("correlations").get<std::map<std::string, double>>();
  if (j.contains("metadata")) r.metadata = j.at("metadata");
  return r;
}

inline constexpr std::size_t kMinEvaluatedTriples = 10;

// Classification over folds and k-means clusterability with k = number of
// distinct predicates among the evaluated triples.
inline EvalReport evaluate(const Matrix& triple_emb, const KnowledgeGraph& g, const EvalOptions& opt) {
  if (triple_emb.rows() != g.num_triples())
    throw std::invalid_argument("evaluate: embedding rows do not match the graph's triples");
  std::vector<std::size_t> rows;
  if (opt.restrict_multi_predicate) {
    rows = multi_predicate_triple_ids(g);
  } else {
    rows.resize(g.num_triples());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  }
  if (rows.size() < kMinEvaluatedTriples)
    throw std::invalid_argument("evaluate: only " + std::to_string(rows.size()) +
                                " triples to evaluate (need at least " +
                                std::to_string(kMinEvaluatedTriples) + ")");
  const Matrix x = select_rows(triple_emb, rows);
  std::map<Id, std::size_t> remap;
  for (auto r : rows) remap.emplace(g.triples[r].predicate, 0);
  std::size_t next = 0;
  for (auto& [pid, dense] : remap) dense = next++;
  std::vector<std::size_t> labels(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = remap[g.triples[rows[i]].predicate];

  EvalReport rep;
  rep.restricted_to_multi_predicate = opt.restrict_multi_predicate;
  rep.evaluated_triples = rows.size();
  rep.clusters = remap.size();
  rep.metadata["folds"] = opt.folds;
  rep.metadata["rng_seed"] = opt.rng_seed;
  rep.metadata["kmeans_restarts"] = opt.kmeans.restarts;
  rep.metadata["kmeans_max_iterations"] = opt.kmeans.max_iterations;
  rep.metadata["kmeans_tolerance"] = opt.kmeans.tolerance;
  rep.metadata["dim"] = triple_emb.cols();

  if (opt.classify) {
    const auto folds = kfold_split(rows.size(), opt.folds, opt.rng_seed);
    for (const auto& spec : opt.classifiers)
      rep.classification[to_string(spec.kind)] =
          train_classify(x, labels, spec, folds, derive_seed(opt.rng_seed, to_string(spec.kind)));
  }
  if (opt.cluster && rep.clusters >= 2 && rows.size() > rep.clusters) {
    const auto km = kmeans(x, rep.clusters, derive_seed(opt.rng_seed, "kmeans"), opt.kmeans);
    std::vector<std::size_t> used(rep.clusters, 0);
    for (auto a : km.assignment) ++used[a];
    const bool empty = std::count(used.begin(), used.end(), 0) > 0;
    if (km.degenerate || empty) {
      rep.ch_degenerate = true;
      rep.ch_index = std::numeric_limits<double>::infinity();
    } else {
      rep.ch_index = calinski_harabasz(x, km.assignment, rep.clusters);
      rep.ch_degenerate = std::isinf(*rep.ch_index);
    }
  }
  return rep;
}

}  // namespace ptss
