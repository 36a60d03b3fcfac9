#include "ptss/kge.hpp"

#include <gtest/gtest.h>

#include <complex>

#include "gradcheck.hpp"
#include "ptss/sampler.hpp"
#include "test_util.hpp"

namespace ptss {
namespace {

using testing::numeric_gradient;
using testing::relative_error;
using testing::TempDir;
using Vec = std::vector<double>;

Vec random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  Vec v(n);
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return v;
}

TEST(ScoreTransE, Examples) {
  EXPECT_DOUBLE_EQ(score_transe(Vec{1, 0}, Vec{0, 1}, Vec{1, 1}, 2), 0.0);
  EXPECT_DOUBLE_EQ(score_transe(Vec{0, 0}, Vec{0, 0}, Vec{3, 4}, 2), -5.0);
  EXPECT_DOUBLE_EQ(score_transe(Vec{1, 2}, Vec{0.5, -1}, Vec{0, 0}, 1), -2.5);
  EXPECT_THROW(score_transe(Vec{1, 2}, Vec{1}, Vec{1, 2}), std::invalid_argument);
  EXPECT_THROW(score_transe(Vec{1}, Vec{1}, Vec{1}, 3), std::invalid_argument);
}

TEST(ScoreDistMult, Examples) {
  EXPECT_DOUBLE_EQ(score_distmult(Vec{1, 1}, Vec{1, 1}, Vec{1, 1}), 2.0);
  EXPECT_DOUBLE_EQ(score_distmult(Vec{1, 2}, Vec{3, -1}, Vec{0.5, 2}), -2.5);
  Rng rng(1);
  for (int i = 0; i < 20; ++i)
    EXPECT_EQ(score_distmult(random_vec(rng, 6), Vec(6, 0.0), random_vec(rng, 6)), 0.0);
  EXPECT_THROW(score_distmult(Vec{1}, Vec{1, 2}, Vec{1}), std::invalid_argument);
}

TEST(ScoreComplEx, Examples) {
  // [re, im] interleaved
  EXPECT_DOUBLE_EQ(score_complex(Vec{0, 1}, Vec{0, 1}, Vec{1, 0}), -1.0);
  EXPECT_DOUBLE_EQ(score_complex(Vec{1, 1}, Vec{1, 0}, Vec{1, 1}), 2.0);
  EXPECT_THROW(score_complex(Vec{1, 2, 3}, Vec{1, 2, 3}, Vec{1, 2, 3}), std::invalid_argument);

  // Zero imaginary parts reduce to DistMult on the real parts.
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    Vec h = random_vec(rng, 8), p = random_vec(rng, 8), t = random_vec(rng, 8);
    Vec hr, pr, tr;
    for (std::size_t k = 0; k < 8; k += 2) {
      h[k + 1] = p[k + 1] = t[k + 1] = 0.0;
      hr.push_back(h[k]);
      pr.push_back(p[k]);
      tr.push_back(t[k]);
    }
    EXPECT_NEAR(score_complex(h, p, t), score_distmult(hr, pr, tr), 1e-14);
  }
}

TEST(ScoreComplEx, MatchesStdComplexArithmetic) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Vec h = random_vec(rng, 10), p = random_vec(rng, 10), t = random_vec(rng, 10);
    std::complex<double> acc = 0.0;
    for (std::size_t k = 0; k < 10; k += 2)
      acc += std::complex<double>(h[k], h[k + 1]) * std::complex<double>(p[k], p[k + 1]) *
             std::conj(std::complex<double>(t[k], t[k + 1]));
    EXPECT_NEAR(score_complex(h, p, t), acc.real(), 1e-12);
  }
}

TEST(ScoreRotatE, Examples) {
  Rng rng(4);
  const Vec h = random_vec(rng, 6);
  EXPECT_DOUBLE_EQ(score_rotate(h, Vec{1, 0, 1, 0, 1, 0}, h), 0.0);
  EXPECT_DOUBLE_EQ(score_rotate(Vec{1, 0}, Vec{0, 1}, Vec{0, 1}), 0.0);
  EXPECT_NEAR(score_rotate(Vec{1, 0}, Vec{0, 1}, Vec{1, 0}), -std::sqrt(2.0), 1e-15);
  EXPECT_THROW(score_rotate(Vec{1, 0}, Vec{0.5, 0}, Vec{1, 0}), std::invalid_argument);
  EXPECT_THROW(score_rotate(Vec{1, 0, 1}, Vec{1, 0, 1}, Vec{1, 0, 1}), std::invalid_argument);
}

TEST(ScoreRescal, Examples) {
  Rng rng(5);
  const Vec h = random_vec(rng, 3), t = random_vec(rng, 3);
  Matrix eye(3, 3);
  for (int i = 0; i < 3; ++i) eye(i, i) = 1.0;
  EXPECT_NEAR(score_rescal(h, eye, t), dot(h, t), 1e-15);
  Matrix p(2, 2);
  p(0, 1) = 1.0;
  EXPECT_DOUBLE_EQ(score_rescal(Vec{1, 0}, p, Vec{0, 1}), 1.0);
  EXPECT_DOUBLE_EQ(score_rescal(h, eye, Vec(3, 0.0)), 0.0);
  EXPECT_THROW(score_rescal(Vec{1, 0}, eye, Vec{0, 1}), std::invalid_argument);
}

TEST(ScoringProperties, FiniteAndTransENonPositive) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec h = random_vec(rng, 6, 3), p = random_vec(rng, 6, 3), t = random_vec(rng, 6, 3);
    for (int norm : {1, 2}) {
      const double s = score_transe(h, p, t, norm);
      EXPECT_TRUE(std::isfinite(s));
      EXPECT_LT(s, 0.0);
    }
    EXPECT_TRUE(std::isfinite(score_distmult(h, p, t)));
    EXPECT_TRUE(std::isfinite(score_complex(h, p, t)));
    Vec hp(6);
    for (int i = 0; i < 6; ++i) hp[i] = h[i] + p[i];
    EXPECT_EQ(score_transe(h, p, hp, 1), 0.0);
  }
}

TEST(ScoringProperties, ComplExIsAsymmetricDistMultIsSymmetric) {
  Rng rng(7);
  bool asymmetric_seen = false;
  for (int trial = 0; trial < 100; ++trial) {
    const Vec h = random_vec(rng, 8), p = random_vec(rng, 8), t = random_vec(rng, 8);
    EXPECT_NEAR(score_distmult(h, p, t), score_distmult(t, p, h), 1e-14);
    if (std::abs(score_complex(h, p, t) - score_complex(t, p, h)) > 1e-6) asymmetric_seen = true;
  }
  EXPECT_TRUE(asymmetric_seen);
}

// Checks the analytic gradient of `sg` against central differences of `score`
// with respect to each argument in turn.
template <typename ScoreFn, typename GradFn>
void expect_gradients_match(ScoreFn score, GradFn grad, const Vec& h, const Vec& p, const Vec& t) {
  const ScoreGrad g = grad(h, p, t);
  const auto dh = numeric_gradient([&](const Vec& x) { return score(x, p, t); }, h);
  const auto dp = numeric_gradient([&](const Vec& x) { return score(h, x, t); }, p);
  const auto dt = numeric_gradient([&](const Vec& x) { return score(h, p, x); }, t);
  EXPECT_LT(relative_error(g.d_head, dh), 1e-4);
  EXPECT_LT(relative_error(g.d_pred, dp), 1e-4);
  EXPECT_LT(relative_error(g.d_tail, dt), 1e-4);
}

TEST(ScoringGradients, MatchCentralDifferences) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec h = random_vec(rng, 6), p = random_vec(rng, 6), t = random_vec(rng, 6);
    expect_gradients_match([](auto& a, auto& b, auto& c) { return score_transe(a, b, c, 2); },
                           [](auto& a, auto& b, auto& c) { return score_transe_grad(a, b, c, 2); }, h, p, t);
    expect_gradients_match([](auto& a, auto& b, auto& c) { return score_distmult(a, b, c); },
                           [](auto& a, auto& b, auto& c) { return score_distmult_grad(a, b, c); }, h, p, t);
    expect_gradients_match([](auto& a, auto& b, auto& c) { return score_complex(a, b, c); },
                           [](auto& a, auto& b, auto& c) { return score_complex_grad(a, b, c); }, h, p, t);
    const Vec phase = random_vec(rng, 3, 3.0);
    expect_gradients_match([](auto& a, auto& b, auto& c) { return score_rotate_phase_grad(a, b, c).score; },
                           [](auto& a, auto& b, auto& c) { return score_rotate_phase_grad(a, b, c); }, h, phase, t);
    const Vec pk = random_vec(rng, 36);
    expect_gradients_match([](auto& a, auto& b, auto& c) { return score_rescal(a, b, c); },
                           [](auto& a, auto& b, auto& c) { return score_rescal_grad(a, b, c); }, h, pk, t);
  }
}

TEST(ScoringGradients, TransEL1AwayFromKinks) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec h = random_vec(rng, 5), p = random_vec(rng, 5), t = random_vec(rng, 5);
    bool near_kink = false;
    for (int i = 0; i < 5; ++i) near_kink = near_kink || std::abs(h[i] + p[i] - t[i]) < 1e-3;
    if (near_kink) continue;
    expect_gradients_match([](auto& a, auto& b, auto& c) { return score_transe(a, b, c, 1); },
                           [](auto& a, auto& b, auto& c) { return score_transe_grad(a, b, c, 1); }, h, p, t);
  }
}

KnowledgeGraph two_entity_graph() { return KnowledgeGraph::from_ids(2, 1, {{0, 0, 1}}); }

TEST(TrainSeed, TransEFitsSingleTriple) {
  const auto g = two_entity_graph();
  SeedTrainConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 200;
  cfg.rng_seed = 1;
  std::vector<double> losses;
  const auto emb = train_seed(g, ModelTag::TransE, cfg, &losses);
  const auto h = emb.entity(0), p = emb.predicate(0), t = emb.entity(1);
  EXPECT_GT(score_transe(h, p, t, 2), -0.1);
  // Both corruptions of the single triple score worse.
  EXPECT_LT(score_transe(t, p, t, 2), score_transe(h, p, t, 2));
  EXPECT_LT(score_transe(h, p, h, 2), score_transe(h, p, t, 2));
  ASSERT_EQ(losses.size(), 200u);
}

TEST(TrainSeed, SingleTripleLossIsMonotone) {
  // Adam overshoots near the optimum at large steps; a small step keeps the curve monotone.
  const auto g = two_entity_graph();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SeedTrainConfig cfg;
    cfg.dim = 8;
    cfg.epochs = 200;
    cfg.learning_rate = 0.003;
    cfg.rng_seed = seed;
    std::vector<double> losses;
    const auto emb = train_seed(g, ModelTag::TransE, cfg, &losses);
    EXPECT_GT(score_transe(emb.entity(0), emb.predicate(0), emb.entity(1), 2), -0.1);
    for (std::size_t i = 1; i < losses.size(); ++i)
      EXPECT_LE(losses[i], losses[i - 1]) << "seed " << seed << " epoch " << i;
  }
}

TEST(TrainSeed, DeterministicGivenSeed) {
  Rng rng(10);
  std::vector<Triple> ts;
  for (int i = 0; i < 60; ++i)
    ts.push_back({static_cast<Id>(rng.index(15)), static_cast<Id>(rng.index(3)), static_cast<Id>(rng.index(15))});
  const auto g = KnowledgeGraph::from_ids(15, 3, ts);
  SeedTrainConfig cfg;
  cfg.dim = 6;
  cfg.epochs = 5;
  cfg.batch_size = 16;
  cfg.rng_seed = 99;
  for (auto tag : {ModelTag::TransE, ModelTag::DistMult, ModelTag::ComplEx, ModelTag::RotatE}) {
    const auto a = train_seed(g, tag, cfg);
    const auto b = train_seed(g, tag, cfg);
    EXPECT_EQ(a, b) << to_string(tag);
    EXPECT_EQ(a.value_kind, natural_value_kind(tag));
    EXPECT_NO_THROW(a.validate_against(g));
  }
  const auto rot = train_seed(g, ModelTag::RotatE, cfg);
  for (Id r = 0; r < 3; ++r) EXPECT_NO_THROW(require_unit_modulus(rot.predicate(r), 1e-12));
}

TEST(TrainSeed, ClusteredGraphKeepsClustersApart) {
  // Three groups of 8 entities; each group is linked internally by its own predicate.
  Rng rng(11);
  std::vector<Triple> ts;
  for (Id c = 0; c < 3; ++c)
    for (int k = 0; k < 40; ++k) {
      const Id a = c * 8 + static_cast<Id>(rng.index(8)), b = c * 8 + static_cast<Id>(rng.index(8));
      if (a != b) ts.push_back({a, c, b});
    }
  const auto g = KnowledgeGraph::from_ids(24, 3, ts);
  SeedTrainConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 300;
  cfg.batch_size = 32;
  cfg.rng_seed = 5;
  for (auto tag : {ModelTag::TransE, ModelTag::DistMult}) {
    const auto emb = train_seed(g, tag, cfg);
    double intra = 0, inter = 0;
    int n_intra = 0, n_inter = 0;
    for (Id a = 0; a < 24; ++a)
      for (Id b = a + 1; b < 24; ++b) {
        const double c = cosine_sim(emb.entity(a), emb.entity(b));
        if (a / 8 == b / 8) {
          intra += c;
          ++n_intra;
        } else {
          inter += c;
          ++n_inter;
        }
      }
    EXPECT_GT(intra / n_intra, inter / n_inter) << to_string(tag);
  }
}

TEST(TrainSeed, RejectsBadInputs) {
  SeedTrainConfig cfg;
  cfg.dim = 5;
  EXPECT_THROW(train_seed(two_entity_graph(), ModelTag::ComplEx, cfg), std::invalid_argument);
  EXPECT_THROW(train_seed(two_entity_graph(), ModelTag::Rescal, cfg), std::invalid_argument);
  EXPECT_THROW(train_seed(KnowledgeGraph{}, ModelTag::TransE, cfg), std::invalid_argument);
  cfg.dim = 1;
  EXPECT_THROW(train_seed(two_entity_graph(), ModelTag::TransE, cfg), std::invalid_argument);
}

TEST(ImportEmbeddings, ReadsAlignedRows) {
  TempDir dir;
  auto g = load_triples(dir.write("g.tsv", "a\tr\tb\n"));
  const auto ent = dir.write("e.tsv", "b\t1\t2\t3\t4\na\t5\t6\t7\t8\nzz\t0\t0\t0\t0\n");
  const auto pred = dir.write("p.tsv", "r\t0.5\t0.25\t-1\t2e-3\n");
  const auto emb = import_embeddings(g, ent, pred, ValueKind::Real);
  EXPECT_EQ(emb.dim(), 4u);
  EXPECT_EQ(emb.entity(0)[0], 5.0);
  EXPECT_EQ(emb.entity(1)[3], 4.0);
  EXPECT_EQ(emb.predicate(0)[3], 2e-3);
}

TEST(ImportEmbeddings, Errors) {
  TempDir dir;
  auto g = load_triples(dir.write("g.tsv", "a\tr\tb\n"));
  const auto pred = dir.write("p.tsv", "r\t1\t2\n");
  try {
    import_embeddings(g, dir.write("e.tsv", "a\t1\t2\n"), pred, ValueKind::Real);
    FAIL() << "expected missing-entity error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("\"b\""), std::string::npos) << e.what();
  }
  EXPECT_THROW(import_embeddings(g, dir.write("r.tsv", "a\t1\t2\nb\t1\n"), pred, ValueKind::Real), ParseError);
  EXPECT_THROW(import_embeddings(g, dir.write("n.tsv", "a\t1\tx\nb\t1\t2\n"), pred, ValueKind::Real), ParseError);
  EXPECT_THROW(import_embeddings(g, dir.write("o.tsv", "a\t1\t2\t3\nb\t1\t2\t3\n"),
                                 dir.write("p3.tsv", "r\t1\t2\t3\n"), ValueKind::ComplexInterleaved),
               std::invalid_argument);
}

TEST(ImportEmbeddings, ExportImportRoundTripIsExact) {
  TempDir dir;
  Rng rng(12);
  std::vector<Triple> ts;
  for (int i = 0; i < 40; ++i)
    ts.push_back({static_cast<Id>(rng.index(10)), static_cast<Id>(rng.index(2)), static_cast<Id>(rng.index(10))});
  const auto g = KnowledgeGraph::from_ids(10, 2, ts);
  SeedTrainConfig cfg;
  cfg.dim = 6;
  cfg.epochs = 3;
  const auto emb = train_seed(g, ModelTag::ComplEx, cfg);
  export_embeddings(g, emb, dir.file("e.tsv"), dir.file("p.tsv"));
  const auto back = import_embeddings(g, dir.file("e.tsv"), dir.file("p.tsv"), emb.value_kind, emb.model_tag);
  for (std::size_t i = 0; i < emb.entity_vectors.data().size(); ++i)
    EXPECT_NEAR(back.entity_vectors.data()[i], emb.entity_vectors.data()[i], 1e-12);
  EXPECT_EQ(back, emb);  // %.17g is exact

  save_embeddings_binary(emb, dir.file("e.bin"));
  EXPECT_EQ(load_embeddings_binary(dir.file("e.bin")), emb);
  EXPECT_THROW(load_embeddings_binary(dir.write("junk.bin", "nope")), std::runtime_error);
}

TEST(ImportEmbeddings, RescalPredicatesMayBeSquareMatrices) {
  TempDir dir;
  auto g = load_triples(dir.write("g.tsv", "a\tr\tb\n"));
  const auto emb = import_embeddings(g, dir.write("e.tsv", "a\t1\t0\nb\t0\t1\n"),
                                     dir.write("p.tsv", "r\t0\t1\t0\t0\n"), ValueKind::Real, ModelTag::Rescal);
  EXPECT_DOUBLE_EQ(score_rescal(emb.entity(0), emb.predicate(0), emb.entity(1)), 1.0);
}

}  // namespace
}  // namespace ptss
