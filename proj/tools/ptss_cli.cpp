// ptss: command-line driver for seed embeddings, PTSS sampling, Siamese
// fine-tuning, evaluation and the Triple2vec baseline.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "ptss/pipeline.hpp"

namespace {

using namespace ptss;

void write_json_out(const nlohmann::json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

struct SeedArgs {
  std::string entities, predicates, kind = "real", model = "imported";

  void add(CLI::App* app) {
    app->add_option("--entities", entities, "entity embeddings TSV")->required()->check(CLI::ExistingFile);
    app->add_option("--predicates", predicates, "predicate embeddings TSV")->required()->check(CLI::ExistingFile);
    app->add_option("--kind", kind, "real | complex")->capture_default_str();
    app->add_option("--model", model, "model tag of the embeddings")->capture_default_str();
  }
  EmbeddingSet load(const KnowledgeGraph& g) const {
    return import_embeddings(g, entities, predicates, parse_value_kind(kind), parse_model_tag(model));
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PTSS triple embeddings: seed, sample, fine-tune, evaluate, compare"};
  app.require_subcommand(1);
  std::string stage = "cli";
  std::vector<std::string> triples;
  auto add_triples = [&](CLI::App* sub) {
    sub->add_option("--triples", triples, "triple TSV files (their union is used)")
        ->required()
        ->check(CLI::ExistingFile);
  };

  // stats
  std::string stats_out;
  auto* stats = app.add_subcommand("stats", "graph statistics");
  add_triples(stats);
  stats->add_option("-o,--out", stats_out, "JSON output (default stdout)");
  stats->callback([&] {
    stage = "stats";
    write_json_out(to_json(compute_stats(load_triples(triples))), stats_out);
  });

  // seed-train
  std::string model = "transe", ent_out, pred_out;
  SeedTrainConfig seed_cfg;
  auto* seed_train = app.add_subcommand("seed-train", "train seed entity/predicate embeddings");
  add_triples(seed_train);
  seed_train->add_option("--model", model, "transe | distmult | complex | rotate")->capture_default_str();
  seed_train->add_option("--dim", seed_cfg.dim)->capture_default_str();
  seed_train->add_option("--epochs", seed_cfg.epochs)->capture_default_str();
  seed_train->add_option("--lr", seed_cfg.learning_rate)->capture_default_str();
  seed_train->add_option("--batch-size", seed_cfg.batch_size)->capture_default_str();
  seed_train->add_option("--negatives", seed_cfg.negatives_per_positive)->capture_default_str();
  seed_train->add_option("--margin", seed_cfg.margin)->capture_default_str();
  seed_train->add_option("--seed", seed_cfg.rng_seed)->capture_default_str();
  seed_train->add_option("--out-entities", ent_out)->required();
  seed_train->add_option("--out-predicates", pred_out)->required();
  seed_train->callback([&] {
    stage = "seed";
    const auto g = load_triples(triples);
    export_embeddings(g, train_seed(g, parse_model_tag(model), seed_cfg), ent_out, pred_out);
  });

  // seed-import
  SeedArgs import_args;
  auto* seed_import = app.add_subcommand("seed-import", "validate and align externally trained embeddings");
  add_triples(seed_import);
  import_args.add(seed_import);
  seed_import->add_option("--out-entities", ent_out)->required();
  seed_import->add_option("--out-predicates", pred_out)->required();
  seed_import->callback([&] {
    stage = "seed";
    const auto g = load_triples(triples);
    export_embeddings(g, import_args.load(g), ent_out, pred_out);
  });

  // sample
  SeedArgs sample_seed;
  std::size_t n = 5;
  std::uint64_t rng_seed = 0;
  unsigned threads = 1;
  std::string pairs_out;
  auto* sample = app.add_subcommand("sample", "build the PTSS pair dataset");
  add_triples(sample);
  sample_seed.add(sample);
  sample->add_option("-n,--n", n, "candidates per slot")->capture_default_str();
  sample->add_option("--seed", rng_seed)->capture_default_str();
  sample->add_option("--threads", threads)->capture_default_str();
  sample->add_option("-o,--out", pairs_out)->required();
  sample->callback([&] {
    stage = "sample";
    const auto g = load_triples(triples);
    const auto ds = build_dataset(g, sample_seed.load(g), n, rng_seed, threads);
    write_dataset(ds, pairs_out);
    if (ds.negative_shortfalls)
      std::cerr << "warning: " << ds.negative_shortfalls << " anchors received fewer than " << n
                << " negatives\n";
  });

  // finetune
  SeedArgs ft_seed;
  FineTuneConfig ft_cfg;
  std::string agg = "avg", pairs_in, emb_out, checkpoint, init_out;
  auto* finetune = app.add_subcommand("finetune", "Siamese fine-tuning of triple embeddings");
  add_triples(finetune);
  ft_seed.add(finetune);
  finetune->add_option("--pairs", pairs_in)->required()->check(CLI::ExistingFile);
  finetune->add_option("--agg", agg, "avg | had | l1 | l2 | ht")->capture_default_str();
  finetune->add_option("--epochs", ft_cfg.epochs)->capture_default_str();
  finetune->add_option("--lr", ft_cfg.learning_rate)->capture_default_str();
  finetune->add_option("--batch-size", ft_cfg.batch_size)->capture_default_str();
  finetune->add_option("--warmup", ft_cfg.warmup_fraction)->capture_default_str();
  finetune->add_option("--seed", ft_cfg.rng_seed)->capture_default_str();
  finetune->add_option("-o,--out", emb_out, "triple embeddings TSV")->required();
  finetune->add_option("--init-out", init_out, "also write the aggregated initialization");
  finetune->add_option("--checkpoint", checkpoint, "model checkpoint path");
  finetune->callback([&] {
    stage = "finetune";
    const auto g = load_triples(triples);
    const auto op = parse_aggregation(agg);
    const auto init = init_embedding_layer(g, ft_seed.load(g), op);
    if (!init_out.empty()) write_triple_embeddings(init, init_out);
    std::vector<double> losses;
    const auto m = train(make_siamese_model(init, ft_cfg.rng_seed), read_dataset(pairs_in), ft_cfg, &losses);
    write_triple_embeddings(export_triple_embeddings(m), emb_out);
    if (!checkpoint.empty()) save_siamese(m, ft_cfg, op, checkpoint);
    if (!losses.empty())
      std::cerr << "loss: first epoch " << losses.front() << ", last epoch " << losses.back() << '\n';
  });

  // eval
  std::string emb_in, task = "all", classifier = "both", report_out, dataset_tag = "dataset", seed_label = "?",
                      agg_label = "?", method_label = "?";
  bool restrict = false, standardize = false;
  auto* eval = app.add_subcommand("eval", "classification and clusterability of triple embeddings");
  add_triples(eval);
  eval->add_option("--embeddings", emb_in, "triple embeddings TSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--task", task, "classify | cluster | all")->capture_default_str();
  eval->add_option("--classifier", classifier, "logreg | mlp | both")->capture_default_str();
  eval->add_flag("--restrict-multi-predicate", restrict);
  eval->add_flag("--standardize", standardize, "standardize features before classification");
  eval->add_option("--seed", rng_seed)->capture_default_str();
  eval->add_option("--dataset-tag", dataset_tag)->capture_default_str();
  eval->add_option("--seed-model", seed_label, "label stored in the report");
  eval->add_option("--agg", agg_label, "label stored in the report");
  eval->add_option("--method", method_label, "label stored in the report");
  eval->add_option("-o,--out", report_out, "report JSON (default stdout)");
  eval->callback([&] {
    stage = "eval";
    if (task != "classify" && task != "cluster" && task != "all")
      throw std::invalid_argument("--task must be classify, cluster or all");
    const auto g = load_triples(triples);
    EvalOptions opt;
    opt.classifiers = classifier_specs(classifier);
    for (auto& s : opt.classifiers) s.standardize = standardize;
    opt.classify = task != "cluster";
    opt.cluster = task != "classify";
    opt.restrict_multi_predicate = restrict;
    opt.rng_seed = rng_seed;
    auto rep = evaluate(read_triple_embeddings(emb_in), g, opt);
    rep.metadata["dataset"] = dataset_tag;
    rep.metadata["seed_model"] = seed_label;
    rep.metadata["agg"] = agg_label;
    rep.metadata["method"] = method_label;
    write_json_out(to_json(rep), report_out);
  });

  // baseline
  Triple2vecConfig t2v;
  std::string corpus_out;
  auto* baseline = app.add_subcommand("baseline", "Triple2vec triple embeddings");
  add_triples(baseline);
  baseline->add_option("--dim", t2v.skipgram.dim)->capture_default_str();
  baseline->add_option("--epochs", t2v.skipgram.epochs)->capture_default_str();
  baseline->add_option("--walks", t2v.walks_per_node)->capture_default_str();
  baseline->add_option("--walk-length", t2v.walk_length)->capture_default_str();
  baseline->add_option("--window", t2v.skipgram.window)->capture_default_str();
  baseline->add_option("--negatives", t2v.skipgram.negatives)->capture_default_str();
  baseline->add_flag("--zero-diagonal", t2v.zero_diagonal, "no self co-occurrence counts");
  baseline->add_option("--seed", t2v.skipgram.rng_seed)->capture_default_str();
  baseline->add_option("--corpus-out", corpus_out, "also write the walk corpus");
  baseline->add_option("-o,--out", emb_out)->required();
  baseline->callback([&] {
    stage = "baseline";
    const auto g = load_triples(triples);
    if (!corpus_out.empty()) {
      const auto cooc = predicate_cooccurrence(g, t2v.zero_diagonal);
      write_corpus(random_walks(build_line_graph(g, cooc.mr), t2v.walks_per_node, t2v.walk_length,
                                derive_seed(t2v.skipgram.rng_seed, "walks")),
                   corpus_out);
    }
    write_triple_embeddings(triple2vec(g, t2v).vectors, emb_out);
  });

  // compare
  std::vector<std::string> reports;
  std::string csv_out, cmp_json_out;
  auto* compare = app.add_subcommand("compare", "tabulate several evaluation reports");
  compare->add_option("reports", reports, "report JSON files")->required()->check(CLI::ExistingFile);
  compare->add_option("--csv", csv_out, "CSV output (default stdout)");
  compare->add_option("--json", cmp_json_out, "JSON output");
  compare->callback([&] {
    stage = "compare";
    std::vector<EvalReport> loaded;
    for (const auto& r : reports) loaded.push_back(load_report(r));
    const auto table = compare_reports(loaded);
    if (csv_out.empty()) {
      std::cout << to_csv(table);
    } else {
      std::ofstream(csv_out) << to_csv(table);
    }
    if (!cmp_json_out.empty()) write_json_out(to_json(table), cmp_json_out);
  });

  // run-all
  std::string config_path, output_dir;
  std::vector<std::string> overrides;
  auto* run_all = app.add_subcommand("run-all", "run every stage from a config file, resuming where possible");
  run_all->add_option("-c,--config", config_path)->required()->check(CLI::ExistingFile);
  run_all->add_option("--output-dir", output_dir, "overrides output_dir");
  run_all->add_option("--set", overrides, "key=value override (repeatable)");
  run_all->callback([&] {
    stage = "config";
    auto cfg = load_config(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
      set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    cfg.validate();
    PipelineOptions opt;
    opt.on_stage = [&](const std::string& s, bool skipped) {
      stage = s;
      std::cerr << (skipped ? "skip " : "done ") << s << '\n';
    };
    const auto man = run_pipeline(cfg, opt);
    std::cout << (std::filesystem::path(cfg.output_dir) / kManifestFile).string() << '\n';
    (void)man;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const StageError& e) {
    std::cerr << "error [" << e.stage() << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error [" << stage << "]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
