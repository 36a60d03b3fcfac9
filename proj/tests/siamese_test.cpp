#include "ptss/siamese.hpp"

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "test_util.hpp"

namespace ptss {
namespace {

using testing::numeric_gradient;
using testing::random_embeddings;
using testing::random_graph;
using testing::relative_error;
using testing::TempDir;
using Vec = std::vector<double>;

TEST(Aggregate, Examples) {
  EXPECT_EQ(aggregate(Vec{2, 4}, Vec{4, 0}, AggregationOp::Avg), (Vec{3, 2}));
  EXPECT_EQ(aggregate(Vec{1, 2}, Vec{3, 4}, AggregationOp::Had), (Vec{3, 8}));
  EXPECT_EQ(aggregate(Vec{1, 2}, Vec{3, 4}, AggregationOp::L1), (Vec{2, 2}));
  EXPECT_EQ(aggregate(Vec{1, 2}, Vec{3, 4}, AggregationOp::L2), (Vec{4, 4}));
  EXPECT_EQ(aggregate(Vec{1, 2}, Vec{3, 4}, AggregationOp::HT), (Vec{1, 2, 3, 4}));
  EXPECT_THROW(aggregate(Vec{1, 2}, Vec{3}, AggregationOp::Avg), std::invalid_argument);
}

TEST(Aggregate, NamesRoundTrip) {
  for (auto op : {AggregationOp::Avg, AggregationOp::Had, AggregationOp::L1, AggregationOp::L2, AggregationOp::HT})
    EXPECT_EQ(parse_aggregation(to_string(op)), op);
  EXPECT_THROW(parse_aggregation("max"), std::invalid_argument);
}

TEST(InitEmbeddingLayer, Examples) {
  const auto g1 = KnowledgeGraph::from_ids(2, 1, {{0, 0, 1}});
  const auto e1 = random_embeddings(g1, 4, 1);
  const auto avg = init_embedding_layer(g1, e1, AggregationOp::Avg);
  ASSERT_EQ(avg.rows(), 1u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(avg(0, i), (e1.entity(0)[i] + e1.entity(1)[i]) / 2.0);

  // Exact TransE seeds: h + p = t, so the naive sum h + p + t is 2t.
  const auto chain = KnowledgeGraph::from_ids(3, 2, {{0, 0, 1}, {1, 1, 2}});
  EmbeddingSet te;
  te.entity_vectors = Matrix(3, 2);
  te.predicate_vectors = Matrix(2, 2);
  te.entity_vectors(0, 0) = 0.25;
  te.entity_vectors(0, 1) = -1.0;
  te.predicate_vectors(0, 0) = 0.5;
  te.predicate_vectors(0, 1) = 2.0;
  te.predicate_vectors(1, 0) = -1.5;
  te.predicate_vectors(1, 1) = 0.125;
  for (int k = 0; k < 2; ++k) {
    te.entity_vectors(1, k) = te.entity_vectors(0, k) + te.predicate_vectors(0, k);
    te.entity_vectors(2, k) = te.entity_vectors(1, k) + te.predicate_vectors(1, k);
  }
  const auto sum = init_embedding_layer(chain, te, AggregationOp::Sum);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(sum(i, k), 2.0 * te.entity_vectors(i + 1, k));

  const auto g = random_graph(10, 3, 20, 2);
  auto e = random_embeddings(g, 4, 3);
  const auto ht = init_embedding_layer(g, e, AggregationOp::HT);
  EXPECT_EQ(ht.cols(), 8u);
  EXPECT_EQ(ht.rows(), g.num_triples());
  e.entity_vectors = Matrix(3, 4);
  EXPECT_THROW(init_embedding_layer(g, e, AggregationOp::Avg), std::invalid_argument);
}

SiameseModel small_model(std::size_t triples, std::size_t d, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Matrix init(triples, d);
  for (auto& v : init.data()) v = rng.uniform(-scale, scale);
  auto m = make_siamese_model(std::move(init), seed);
  for (auto& v : m.b1) v = rng.uniform(-0.1, 0.1);
  return m;
}

TEST(ForwardPair, IdentityEncoderApproximatesInputCosine) {
  auto m = small_model(6, 5, 1, 1e-2);
  m.w1 = Matrix(5, 5);
  for (int i = 0; i < 5; ++i) m.w1(i, i) = 1.0;
  std::fill(m.b1.begin(), m.b1.end(), 0.0);
  for (Id a = 0; a < 6; ++a)
    for (Id b = 0; b < 6; ++b)
      EXPECT_NEAR(forward_pair(m, a, b).s_hat,
                  cosine_sim(m.triple_embeddings.row(a), m.triple_embeddings.row(b)), 1e-3);
}

TEST(ForwardPair, SelfPairAndBounds) {
  const auto m = small_model(20, 6, 2, 3.0);
  for (Id a = 0; a < 20; ++a) {
    EXPECT_EQ(forward_pair(m, a, a).s_hat, 1.0);
    for (Id b = 0; b < 20; ++b) {
      const auto r = forward_pair(m, a, b);
      EXPECT_GE(r.s_hat, -1.0);
      EXPECT_LE(r.s_hat, 1.0);
      EXPECT_EQ(r.s_hat, forward_pair(m, b, a).s_hat);
      for (double v : r.o_a) {
        EXPECT_GT(v, -1.0);
        EXPECT_LT(v, 1.0);
      }
    }
  }
  EXPECT_THROW(forward_pair(m, 0, 20), std::out_of_range);
}

TEST(Loss, Examples) {
  EXPECT_EQ(loss(0.5, 0.5), 0.0);
  EXPECT_EQ(loss(1.0, -1.0), 4.0);
  EXPECT_EQ(batch_loss(Vec{0, 1}, Vec{1, 1}), 0.5);
}

// Loss of `pairs` as a function of one flat parameter block.
template <typename Set>
double loss_with(SiameseModel m, std::span<const PtssPair> pairs, Set set, const Vec& x) {
  set(m, x);
  SiameseGradients g;
  return loss_and_gradients(m, pairs, g);
}

TEST(LossGradients, MatchCentralDifferences) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2 + rng.index(7), T = 5;
    const auto m = small_model(T, d, 100 + trial);
    std::vector<PtssPair> pairs;
    const std::size_t b = 1 + rng.index(4);
    for (std::size_t i = 0; i < b; ++i)
      pairs.push_back({static_cast<Id>(rng.index(T)), static_cast<Id>(rng.index(T)), rng.uniform(-1, 1),
                       Provenance::Negative});
    SiameseGradients g;
    loss_and_gradients(m, pairs, g);

    const auto dw = numeric_gradient(
        [&](const Vec& x) { return loss_with(m, pairs, [](SiameseModel& mm, const Vec& v) { mm.w1.data() = v; }, x); },
        m.w1.data());
    EXPECT_LT(relative_error(g.d_w1.data(), dw), 1e-4) << "trial " << trial;
    const auto db = numeric_gradient(
        [&](const Vec& x) { return loss_with(m, pairs, [](SiameseModel& mm, const Vec& v) { mm.b1 = v; }, x); }, m.b1);
    EXPECT_LT(relative_error(g.d_b1, db), 1e-4) << "trial " << trial;
    const auto de = numeric_gradient(
        [&](const Vec& x) {
          return loss_with(m, pairs, [](SiameseModel& mm, const Vec& v) { mm.triple_embeddings.data() = v; }, x);
        },
        m.triple_embeddings.data());
    Vec analytic(T * d, 0.0);
    for (const auto& [row, gr] : g.d_rows) std::copy(gr.begin(), gr.end(), analytic.begin() + row * d);
    EXPECT_LT(relative_error(analytic, de), 1e-4) << "trial " << trial;
    // Untouched rows have no entry at all.
    for (const auto& [row, gr] : g.d_rows)
      EXPECT_TRUE(std::any_of(pairs.begin(), pairs.end(),
                              [&](const PtssPair& p) { return p.triple_a == row || p.triple_b == row; }));
  }
}

TEST(LossGradients, BranchSwapLeavesSharedGradientsUnchanged) {
  const auto m = small_model(8, 5, 4);
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const PtssPair p{static_cast<Id>(rng.index(8)), static_cast<Id>(rng.index(8)), rng.uniform(-1, 1),
                     Provenance::SharedHead};
    PtssPair q = p;
    std::swap(q.triple_a, q.triple_b);
    SiameseGradients gp, gq;
    const double lp = loss_and_gradients(m, std::span<const PtssPair>(&p, 1), gp);
    const double lq = loss_and_gradients(m, std::span<const PtssPair>(&q, 1), gq);
    EXPECT_EQ(lp, lq);
    for (std::size_t i = 0; i < gp.d_w1.data().size(); ++i)
      EXPECT_NEAR(gp.d_w1.data()[i], gq.d_w1.data()[i], 1e-14);
    for (std::size_t i = 0; i < gp.d_b1.size(); ++i) EXPECT_NEAR(gp.d_b1[i], gq.d_b1[i], 1e-14);
  }
}

// Targets are cosines of hidden teacher vectors, so an exact fit exists.
PtssDataset random_dataset(std::size_t triples, std::size_t pairs, std::uint64_t seed) {
  Rng rng(seed);
  Matrix teacher(triples, 4);
  for (auto& v : teacher.data()) v = rng.normal();
  PtssDataset ds;
  for (std::size_t i = 0; i < pairs; ++i) {
    const auto a = static_cast<Id>(rng.index(triples)), b = static_cast<Id>(rng.index(triples));
    ds.pairs.push_back({a, b, cosine_sim(teacher.row(a), teacher.row(b)), Provenance::SharedPredicate});
  }
  return ds;
}

TEST(Train, PairAtOptimumLeavesParametersUnchanged) {
  const auto m = small_model(4, 3, 6);
  PtssDataset ds;
  ds.pairs.push_back({0, 1, forward_pair(m, 0, 1).s_hat, Provenance::SharedHead});
  FineTuneConfig cfg;
  cfg.epochs = 5;
  std::vector<double> losses;
  const auto trained = train(m, ds, cfg, &losses);
  EXPECT_EQ(trained, m);
  for (double l : losses) EXPECT_EQ(l, 0.0);
}

TEST(Train, ConvergesOnSyntheticPairs) {
  const auto m = small_model(40, 6, 7);
  const auto ds = random_dataset(40, 200, 8);
  FineTuneConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 16;
  cfg.learning_rate = 1e-2;
  std::vector<double> losses;
  const auto trained = train(m, ds, cfg, &losses);
  ASSERT_EQ(losses.size(), 50u);
  EXPECT_LT(losses.back(), 0.1 * losses.front());
  EXPECT_LE(losses.back(), losses.front());
  EXPECT_TRUE(trained.all_finite());
}

TEST(Train, DeterministicUnderSeed) {
  const auto m = small_model(30, 5, 9);
  const auto ds = random_dataset(30, 100, 10);
  FineTuneConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 8;
  cfg.rng_seed = 3;
  EXPECT_EQ(train(m, ds, cfg), train(m, ds, cfg));
  auto other = cfg;
  other.rng_seed = 4;
  EXPECT_NE(train(m, ds, cfg), train(m, ds, other));
}

TEST(Train, UntouchedRowsKeepInitialValues) {
  const auto m = small_model(30, 5, 11);
  const auto ds = random_dataset(20, 100, 12);  // rows 20..29 never sampled
  FineTuneConfig cfg;
  cfg.epochs = 3;
  const auto out = export_triple_embeddings(train(m, ds, cfg));
  for (std::size_t r = 20; r < 30; ++r)
    for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(out(r, c), m.triple_embeddings(r, c));
  bool moved = false;
  for (std::size_t c = 0; c < 5; ++c) moved = moved || out(0, c) != m.triple_embeddings(0, c);
  EXPECT_TRUE(moved);
}

TEST(Train, UntrainedExportEqualsInitialization) {
  const auto g = random_graph(15, 3, 40, 13);
  const auto init = init_embedding_layer(g, random_embeddings(g, 4, 14), AggregationOp::Had);
  EXPECT_EQ(export_triple_embeddings(make_siamese_model(init, 1)), init);
}

TEST(Train, ConfigValidation) {
  FineTuneConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.encoder_layers = 2;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.warmup_fraction = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  PtssDataset bad;
  bad.pairs.push_back({0, 99, 0.5, Provenance::Negative});
  EXPECT_THROW(train(small_model(4, 3, 1), bad, FineTuneConfig{}), std::out_of_range);
}

TEST(Train, DivergenceIsReported) {
  auto m = small_model(4, 3, 15);
  PtssDataset ds;
  ds.pairs.push_back({0, 1, std::numeric_limits<double>::quiet_NaN(), Provenance::Negative});
  FineTuneConfig cfg;
  cfg.epochs = 1;
  try {
    train(m, ds, cfg);
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.step(), 1u);
  }
}

TEST(Warmup, RampsLinearlyThenHolds) {
  FineTuneConfig cfg;
  cfg.learning_rate = 1.0;
  cfg.warmup_fraction = 0.1;
  EXPECT_DOUBLE_EQ(warmup_learning_rate(cfg, 1, 100), 0.1);
  EXPECT_DOUBLE_EQ(warmup_learning_rate(cfg, 5, 100), 0.5);
  EXPECT_DOUBLE_EQ(warmup_learning_rate(cfg, 10, 100), 1.0);
  EXPECT_DOUBLE_EQ(warmup_learning_rate(cfg, 80, 100), 1.0);
  cfg.warmup_fraction = 0.0;
  EXPECT_DOUBLE_EQ(warmup_learning_rate(cfg, 1, 100), 1.0);
}

TEST(Persistence, TsvAndCheckpointRoundTrip) {
  TempDir dir;
  auto m = small_model(12, 4, 16);
  FineTuneConfig cfg;
  cfg.epochs = 2;
  cfg.rng_seed = 77;
  m = train(m, random_dataset(12, 30, 17), cfg);
  write_triple_embeddings(m.triple_embeddings, dir.file("t.tsv"));
  EXPECT_EQ(read_triple_embeddings(dir.file("t.tsv")), m.triple_embeddings);

  save_siamese(m, cfg, AggregationOp::HT, dir.file("m.bin"));
  const auto ck = load_siamese(dir.file("m.bin"));
  EXPECT_EQ(ck.model, m);
  EXPECT_EQ(ck.op, AggregationOp::HT);
  EXPECT_EQ(ck.config.rng_seed, 77u);
  EXPECT_EQ(ck.config.epochs, 2u);
  EXPECT_EQ(ck.config.learning_rate, cfg.learning_rate);
  EXPECT_THROW(load_siamese(dir.write("x.bin", "PTSSEMB1")), std::runtime_error);
}

}  // namespace
}  // namespace ptss
