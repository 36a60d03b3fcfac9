#pragma once

// End-to-end experiment driver: config file, staged execution with
// checksum-based resume, run manifest, and cross-report comparison tables.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eval.hpp"
#include "kg.hpp"
#include "kge.hpp"
#include "sampler.hpp"
#include "siamese.hpp"
#include "triple2vec.hpp"

namespace ptss {

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h = fnv1a(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
  }
  return hex64(h);
}

// ---------------------------------------------------------------------------
// Config

struct ExperimentConfig {
  std::vector<std::string> triples;  // union of these files
  std::string dataset_tag = "dataset";
  std::string output_dir = "run";

  // Seed embeddings: trained here, or imported when both paths are set
  // (seed_model then only labels where they came from).
  ModelTag seed_model = ModelTag::TransE;
  std::size_t seed_dim = 32;
  std::size_t seed_epochs = 100;
  double seed_learning_rate = 0.01;
  std::string entity_embeddings;
  std::string predicate_embeddings;
  ValueKind value_kind = ValueKind::Real;

  std::size_t n = 5;
  AggregationOp agg = AggregationOp::Avg;
  FineTuneConfig finetune;

  bool classify = true;
  bool cluster = true;
  std::string classifier = "both";  // logreg | mlp | both
  bool restrict_multi_predicate = false;
  bool init_ablation = true;

  bool baseline = true;
  std::size_t walks = 10;
  std::size_t walk_length = 20;
  std::size_t baseline_epochs = 30;
  std::size_t baseline_dim = 0;  // 0: same as the seed dimension

  std::uint64_t rng_seed = 0;
  unsigned threads = 1;

  bool imports_seed() const { return !entity_embeddings.empty() || !predicate_embeddings.empty(); }

  // Throws std::invalid_argument naming the first problem.
  void validate() const {
    if (triples.empty()) throw std::invalid_argument("config: no triples files");
    for (const auto& p : triples)
      if (!std::filesystem::exists(p)) throw std::invalid_argument("config: triples file not found: " + p);
    if (imports_seed()) {
      if (entity_embeddings.empty() || predicate_embeddings.empty())
        throw std::invalid_argument("config: entity_embeddings and predicate_embeddings must be set together");
      for (const auto* p : {&entity_embeddings, &predicate_embeddings})
        if (!std::filesystem::exists(*p)) throw std::invalid_argument("config: embedding file not found: " + *p);
    } else if (seed_model == ModelTag::Imported || seed_model == ModelTag::ConvE ||
               seed_model == ModelTag::Rescal) {
      throw std::invalid_argument(std::string("config: seed model '") + to_string(seed_model) +
                                  "' can only be imported");
    }
    if (n < 1) throw std::invalid_argument("config: n must be >= 1");
    if (seed_dim < 2) throw std::invalid_argument("config: seed_dim must be >= 2");
    if (classifier != "logreg" && classifier != "mlp" && classifier != "both")
      throw std::invalid_argument("config: classifier must be logreg, mlp or both");
    if (walks < 1 || walk_length < 1) throw std::invalid_argument("config: walks and walk_length must be >= 1");
    if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
    finetune.validate();
  }
};

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: " + key + " expects true/false, got '" + v + "'");
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  T out{};
  if (!(in >> out) || !in.eof()) throw std::invalid_argument("config: bad value for " + key + ": '" + v + "'");
  return out;
}

inline std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

}  // namespace detail

// Applies one key=value setting. Relative paths are taken as given.
inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& v) {
  using detail::parse_bool;
  using detail::parse_number;
  if (key == "triples") c.triples = detail::split_commas(v);
  else if (key == "dataset_tag") c.dataset_tag = v;
  else if (key == "output_dir") c.output_dir = v;
  else if (key == "seed_model") c.seed_model = parse_model_tag(v);
  else if (key == "seed_dim") c.seed_dim = parse_number<std::size_t>(key, v);
  else if (key == "seed_epochs") c.seed_epochs = parse_number<std::size_t>(key, v);
  else if (key == "seed_learning_rate") c.seed_learning_rate = parse_number<double>(key, v);
  else if (key == "entity_embeddings") c.entity_embeddings = v;
  else if (key == "predicate_embeddings") c.predicate_embeddings = v;
  else if (key == "value_kind") c.value_kind = parse_value_kind(v);
  else if (key == "n") c.n = parse_number<std::size_t>(key, v);
  else if (key == "agg") c.agg = parse_aggregation(v);
  else if (key == "batch_size") c.finetune.batch_size = parse_number<std::size_t>(key, v);
  else if (key == "learning_rate") c.finetune.learning_rate = parse_number<double>(key, v);
  else if (key == "warmup") c.finetune.warmup_fraction = parse_number<double>(key, v);
  else if (key == "epochs") c.finetune.epochs = parse_number<std::size_t>(key, v);
  else if (key == "encoder_layers") c.finetune.encoder_layers = parse_number<std::size_t>(key, v);
  else if (key == "classify") c.classify = parse_bool(key, v);
  else if (key == "cluster") c.cluster = parse_bool(key, v);
  else if (key == "classifier") c.classifier = v;
  else if (key == "restrict_multi_predicate") c.restrict_multi_predicate = parse_bool(key, v);
  else if (key == "init_ablation") c.init_ablation = parse_bool(key, v);
  else if (key == "baseline") c.baseline = parse_bool(key, v);
  else if (key == "walks") c.walks = parse_number<std::size_t>(key, v);
  else if (key == "walk_length") c.walk_length = parse_number<std::size_t>(key, v);
  else if (key == "baseline_epochs") c.baseline_epochs = parse_number<std::size_t>(key, v);
  else if (key == "baseline_dim") c.baseline_dim = parse_number<std::size_t>(key, v);
  else if (key == "rng_seed") c.rng_seed = parse_number<std::uint64_t>(key, v);
  else if (key == "threads") c.threads = parse_number<unsigned>(key, v);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

// `key = value` lines; '#' starts a comment.
inline ExperimentConfig parse_config(std::istream& in, const std::string& origin = "<config>") {
  ExperimentConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(origin, lineno, "expected key = value");
    try {
      set_config_value(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw ParseError(origin, lineno, e.what());
    }
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_config(in, path);
}

// Canonical key -> value snapshot (also the config file schema).
inline std::map<std::string, std::string> config_snapshot(const ExperimentConfig& c) {
  std::string files;
  for (std::size_t i = 0; i < c.triples.size(); ++i) files += (i ? "," : "") + c.triples[i];
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  auto num = [](auto v) {
    std::ostringstream o;
    o << v;
    return o.str();
  };
  return {
      {"triples", files},
      {"dataset_tag", c.dataset_tag},
      {"output_dir", c.output_dir},
      {"seed_model", to_string(c.seed_model)},
      {"seed_dim", num(c.seed_dim)},
      {"seed_epochs", num(c.seed_epochs)},
      {"seed_learning_rate", format_double(c.seed_learning_rate)},
      {"entity_embeddings", c.entity_embeddings},
      {"predicate_embeddings", c.predicate_embeddings},
      {"value_kind", to_string(c.value_kind)},
      {"n", num(c.n)},
      {"agg", to_string(c.agg)},
      {"batch_size", num(c.finetune.batch_size)},
      {"learning_rate", format_double(c.finetune.learning_rate)},
      {"warmup", format_double(c.finetune.warmup_fraction)},
      {"epochs", num(c.finetune.epochs)},
      {"encoder_layers", num(c.finetune.encoder_layers)},
      {"classify", b(c.classify)},
      {"cluster", b(c.cluster)},
      {"classifier", c.classifier},
      {"restrict_multi_predicate", b(c.restrict_multi_predicate)},
      {"init_ablation", b(c.init_ablation)},
      {"baseline", b(c.baseline)},
      {"walks", num(c.walks)},
      {"walk_length", num(c.walk_length)},
      {"baseline_epochs", num(c.baseline_epochs)},
      {"baseline_dim", num(c.baseline_dim)},
      {"rng_seed", num(c.rng_seed)},
      {"threads", num(c.threads)},
  };
}

inline std::vector<ClassifierSpec> classifier_specs(const std::string& which) {
  if (which == "logreg") return {ClassifierSpec::logreg()};
  if (which == "mlp") return {ClassifierSpec::mlp()};
  if (which == "both") return {ClassifierSpec::logreg(), ClassifierSpec::mlp()};
  throw std::invalid_argument("unknown classifier '" + which + "'");
}

// ---------------------------------------------------------------------------
// Manifest

struct Artifact {
  std::string path;
  std::string checksum;
  friend bool operator==(const Artifact&, const Artifact&) = default;
};

struct StageRecord {
  std::string name;
  std::string input_checksum;
  std::map<std::string, Artifact> artifacts;
  double seconds = 0.0;
  bool skipped = false;
};

struct RunManifest {
  std::map<std::string, std::string> config;
  std::vector<StageRecord> stages;

  const StageRecord* stage(const std::string& name) const {
    for (const auto& s : stages)
      if (s.name == name) return &s;
    return nullptr;
  }
};

inline nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json j;
  j["config"] = m.config;
  j["stages"] = nlohmann::json::array();
  for (const auto& s : m.stages) {
    nlohmann::json a = nlohmann::json::object();
    for (const auto& [k, v] : s.artifacts) a[k] = {{"path", v.path}, {"checksum", v.checksum}};
    j["stages"].push_back({{"name", s.name},
                           {"input_checksum", s.input_checksum},
                           {"artifacts", a},
                           {"seconds", s.seconds},
                           {"skipped", s.skipped}});
  }
  return j;
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  m.config = j.at("config").get<std::map<std::string, std::string>>();
  for (const auto& s : j.at("stages")) {
    StageRecord r;
    r.name = s.at("name").get<std::string>();
    r.input_checksum = s.at("input_checksum").get<std::string>();
    r.seconds = s.value("seconds", 0.0);
    r.skipped = s.value("skipped", false);
    for (const auto& [k, v] : s.at("artifacts").items())
      r.artifacts[k] = {v.at("path").get<std::string>(), v.at("checksum").get<std::string>()};
    m.stages.push_back(std::move(r));
  }
  return m;
}

class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// A completed stage's artifact no longer matches the checksum recorded for it.
class StaleArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kManifestFile = "manifest.json";

// ---------------------------------------------------------------------------
// Pipeline

namespace detail {

inline std::string stage_input_checksum(const std::string& stage, const std::map<std::string, std::string>& snap,
                                        std::initializer_list<const char*> keys,
                                        const std::vector<std::string>& upstream) {
  std::string blob = stage;
  for (const char* k : keys) blob += std::string("\n") + k + "=" + snap.at(k);
  for (const auto& u : upstream) blob += "\n<" + u;
  return hex64(fnv1a(blob));
}

inline EvalReport run_eval(const Matrix& emb, const KnowledgeGraph& g, const ExperimentConfig& c,
                           const std::string& method) {
  EvalOptions opt;
  opt.classifiers = classifier_specs(c.classifier);
  opt.classify = c.classify;
  opt.cluster = c.cluster;
  opt.restrict_multi_predicate = c.restrict_multi_predicate;
  opt.rng_seed = derive_seed(c.rng_seed, "eval");
  auto rep = evaluate(emb, g, opt);
  rep.metadata["dataset"] = c.dataset_tag;
  rep.metadata["seed_model"] = to_string(c.seed_model);
  rep.metadata["agg"] = method == "triple2vec" ? std::string("-") : std::string(to_string(c.agg));
  rep.metadata["method"] = method;
  return rep;
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace detail

struct PipelineOptions {
  // Called once per stage with (name, skipped).
  std::function<void(const std::string&, bool)> on_stage;
};

// Runs stats -> seed -> sample -> finetune -> eval -> baseline, persisting
// every artifact under cfg.output_dir. A stage whose input checksum matches
// the previous manifest and whose artifacts are intact is skipped; an intact
// record whose artifact bytes changed on disk raises StaleArtifact.
inline RunManifest run_pipeline(const ExperimentConfig& cfg, const PipelineOptions& popt = {}) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  const fs::path out = cfg.output_dir;
  const auto manifest_path = (out / kManifestFile).string();

  std::optional<RunManifest> previous;
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    previous = manifest_from_json(nlohmann::json::parse(in));
  }

  RunManifest man;
  man.config = config_snapshot(cfg);
  const auto& snap = man.config;
  auto path = [&](const char* name) { return (out / name).string(); };

  std::vector<std::string> dataset_sums;
  for (const auto& p : cfg.triples) dataset_sums.push_back(file_checksum(p));
  std::optional<KnowledgeGraph> graph;
  auto g = [&]() -> const KnowledgeGraph& {
    if (!graph) graph = load_triples(cfg.triples);
    return *graph;
  };

  auto write_manifest = [&] { detail::write_json(to_json(man), manifest_path); };

  // Runs `body` unless an up-to-date record exists; returns artifact checksums.
  auto stage = [&](const std::string& name, const std::string& input_sum,
                   const std::vector<std::pair<std::string, std::string>>& artifacts,
                   const std::function<void()>& body) -> std::vector<std::string> {
    StageRecord rec;
    rec.name = name;
    rec.input_checksum = input_sum;
    const StageRecord* old = previous ? previous->stage(name) : nullptr;
    bool reuse = old && old->input_checksum == input_sum && old->artifacts.size() == artifacts.size();
    if (reuse) {
      for (const auto& [key, p] : artifacts) {
        auto it = old->artifacts.find(key);
        if (it == old->artifacts.end() || it->second.path != p || !fs::exists(p)) {
          reuse = false;
          break;
        }
      }
    }
    if (reuse) {
      for (const auto& [key, p] : artifacts)
        if (file_checksum(p) != old->artifacts.at(key).checksum)
          throw StaleArtifact("stage '" + name + "': artifact " + p +
                              " does not match its recorded checksum; delete it or the manifest to rerun");
      rec.artifacts = old->artifacts;
      rec.skipped = true;
    } else {
      const auto t0 = std::chrono::steady_clock::now();
      try {
        body();
      } catch (const StageError&) {
        throw;
      } catch (const std::exception& e) {
        throw StageError(name, e.what());
      }
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      for (const auto& [key, p] : artifacts) rec.artifacts[key] = {p, file_checksum(p)};
    }
    if (popt.on_stage) popt.on_stage(name, rec.skipped);
    std::vector<std::string> sums;
    for (const auto& [key, a] : rec.artifacts) sums.push_back(a.checksum);
    man.stages.push_back(std::move(rec));
    write_manifest();
    return sums;
  };

  // stats
  stage("stats", detail::stage_input_checksum("stats", snap, {}, dataset_sums), {{"stats", path("stats.json")}},
        [&] { detail::write_json(to_json(compute_stats(g())), path("stats.json")); });

  // seed
  std::vector<std::string> seed_inputs = dataset_sums;
  if (cfg.imports_seed()) {
    seed_inputs.push_back(file_checksum(cfg.entity_embeddings));
    seed_inputs.push_back(file_checksum(cfg.predicate_embeddings));
  }
  const auto seed_sums = stage(
      "seed",
      detail::stage_input_checksum("seed", snap,
                                   {"seed_model", "seed_dim", "seed_epochs", "seed_learning_rate", "value_kind",
                                    "rng_seed"},
                                   seed_inputs),
      {{"entities", path("seed_entities.tsv")}, {"predicates", path("seed_predicates.tsv")}}, [&] {
        EmbeddingSet emb;
        if (cfg.imports_seed()) {
          emb = import_embeddings(g(), cfg.entity_embeddings, cfg.predicate_embeddings, cfg.value_kind,
                                  cfg.seed_model);
        } else {
          SeedTrainConfig sc;
          sc.dim = cfg.seed_dim;
          sc.epochs = cfg.seed_epochs;
          sc.learning_rate = cfg.seed_learning_rate;
          sc.rng_seed = derive_seed(cfg.rng_seed, "seed");
          emb = train_seed(g(), cfg.seed_model, sc);
        }
        export_embeddings(g(), emb, path("seed_entities.tsv"), path("seed_predicates.tsv"));
      });
  auto load_seed = [&] {
    return import_embeddings(g(), path("seed_entities.tsv"), path("seed_predicates.tsv"),
                             cfg.imports_seed() ? cfg.value_kind : natural_value_kind(cfg.seed_model),
                             cfg.seed_model);
  };

  // sample
  std::vector<std::string> sample_inputs = dataset_sums;
  sample_inputs.insert(sample_inputs.end(), seed_sums.begin(), seed_sums.end());
  const auto sample_sums = stage("sample", detail::stage_input_checksum("sample", snap, {"n", "rng_seed"}, sample_inputs),
                                 {{"pairs", path("ptss_pairs.tsv")}}, [&] {
                                   const auto ds = build_dataset(g(), load_seed(), cfg.n,
                                                                 derive_seed(cfg.rng_seed, "sample"), cfg.threads);
                                   write_dataset(ds, path("ptss_pairs.tsv"));
                                 });

  // finetune
  std::vector<std::string> ft_inputs = sample_inputs;
  ft_inputs.insert(ft_inputs.end(), sample_sums.begin(), sample_sums.end());
  const auto ft_sums = stage(
      "finetune",
      detail::stage_input_checksum("finetune", snap,
                                   {"agg", "batch_size", "learning_rate", "warmup", "epochs", "encoder_layers",
                                    "rng_seed"},
                                   ft_inputs),
      {{"init", path("init_embeddings.tsv")},
       {"embeddings", path("triple_embeddings.tsv")},
       {"model", path("siamese.bin")}},
      [&] {
        const auto init = init_embedding_layer(g(), load_seed(), cfg.agg);
        write_triple_embeddings(init, path("init_embeddings.tsv"));
        auto fc = cfg.finetune;
        fc.rng_seed = derive_seed(cfg.rng_seed, "finetune");
        const auto model = train(make_siamese_model(init, fc.rng_seed), read_dataset(path("ptss_pairs.tsv")), fc);
        write_triple_embeddings(export_triple_embeddings(model), path("triple_embeddings.tsv"));
        save_siamese(model, fc, cfg.agg, path("siamese.bin"));
      });

  // eval
  std::vector<std::string> eval_inputs = dataset_sums;
  eval_inputs.insert(eval_inputs.end(), ft_sums.begin(), ft_sums.end());
  std::vector<std::pair<std::string, std::string>> eval_artifacts = {{"ptss", path("report_ptss.json")}};
  if (cfg.init_ablation) eval_artifacts.push_back({"init", path("report_init.json")});
  stage("eval",
        detail::stage_input_checksum("eval", snap,
                                     {"classify", "cluster", "classifier", "restrict_multi_predicate",
                                      "init_ablation", "rng_seed", "dataset_tag", "agg", "seed_model"},
                                     eval_inputs),
        eval_artifacts, [&] {
          detail::write_json(
              to_json(detail::run_eval(read_triple_embeddings(path("triple_embeddings.tsv")), g(), cfg, "ptss")),
              path("report_ptss.json"));
          if (cfg.init_ablation)
            detail::write_json(
                to_json(detail::run_eval(read_triple_embeddings(path("init_embeddings.tsv")), g(), cfg, "init")),
                path("report_init.json"));
        });

  // baseline
  if (cfg.baseline) {
    std::vector<std::string> bl_inputs = dataset_sums;
    bl_inputs.insert(bl_inputs.end(), seed_sums.begin(), seed_sums.end());
    stage("baseline",
          detail::stage_input_checksum("baseline", snap,
                                       {"walks", "walk_length", "baseline_epochs", "baseline_dim", "seed_dim",
                                        "classify", "cluster", "classifier", "restrict_multi_predicate", "rng_seed",
                                        "dataset_tag"},
                                       bl_inputs),
          {{"embeddings", path("triple2vec_embeddings.tsv")}, {"report", path("report_triple2vec.json")}}, [&] {
            Triple2vecConfig tc;
            tc.walks_per_node = cfg.walks;
            tc.walk_length = cfg.walk_length;
            tc.skipgram.epochs = cfg.baseline_epochs;
            tc.skipgram.dim = cfg.baseline_dim ? cfg.baseline_dim : load_seed().dim();
            tc.skipgram.rng_seed = derive_seed(cfg.rng_seed, "triple2vec");
            const auto res = triple2vec(g(), tc);
            write_triple_embeddings(res.vectors, path("triple2vec_embeddings.tsv"));
            detail::write_json(to_json(detail::run_eval(res.vectors, g(), cfg, "triple2vec")),
                               path("report_triple2vec.json"));
          });
  }
  return man;
}

// ---------------------------------------------------------------------------
// Comparison across reports

struct ComparisonRow {
  std::string label;  // seed_model/agg/method
  std::string seed_model, agg, method;
  std::size_t dim = 0;
  std::map<std::string, double> micro_f1;  // by classifier
  std::optional<double> ch_index;
  std::map<std::string, bool> best;  // column -> is best
};

struct ComparisonTable {
  std::string dataset;
  std::vector<std::string> columns;  // "f1_<classifier>", then "ch"
  std::vector<ComparisonRow> rows;
  std::map<std::string, double> correlations;

  std::optional<double> value(const ComparisonRow& r, const std::string& col) const {
    if (col == "ch") return r.ch_index;
    auto it = r.micro_f1.find(col.substr(3));
    if (it == r.micro_f1.end()) return std::nullopt;
    return it->second;
  }
};

inline ComparisonTable compare_reports(const std::vector<EvalReport>& reports) {
  if (reports.size() < 2) throw std::invalid_argument("compare: need at least two reports");
  auto meta = [](const EvalReport& r, const char* key) {
    return r.metadata.contains(key) && r.metadata[key].is_string() ? r.metadata[key].get<std::string>()
                                                                     : std::string("?");
  };
  ComparisonTable t;
  t.dataset = meta(reports[0], "dataset");
  std::set<std::string> classifiers;
  for (const auto& r : reports) {
    if (meta(r, "dataset") != t.dataset)
      throw std::invalid_argument("compare: incompatible dataset tags '" + t.dataset + "' and '" +
                                  meta(r, "dataset") + "'");
    if (r.restricted_to_multi_predicate != reports[0].restricted_to_multi_predicate)
      throw std::invalid_argument("compare: mixing restricted and unrestricted reports");
    for (const auto& [name, res] : r.classification) classifiers.insert(name);
  }
  for (const auto& c : classifiers) t.columns.push_back("f1_" + c);
  t.columns.push_back("ch");

  for (const auto& r : reports) {
    ComparisonRow row;
    row.seed_model = meta(r, "seed_model");
    row.agg = meta(r, "agg");
    row.method = meta(r, "method");
    row.label = row.seed_model + "/" + row.agg + "/" + row.method;
    row.dim = r.metadata.value("dim", std::size_t{0});
    for (const auto& [name, res] : r.classification) row.micro_f1[name] = res.micro_f1_mean;
    row.ch_index = r.ch_index;
    t.rows.push_back(std::move(row));
  }
  for (const auto& col : t.columns) {
    std::optional<double> best;
    for (const auto& r : t.rows)
      if (auto v = t.value(r, col); v && (!best || *v > *best)) best = v;
    for (auto& r : t.rows) {
      const auto v = t.value(r, col);
      r.best[col] = v && best && *v == *best;
    }
  }

  // Correlations over rows that have the needed values (finite CH only).
  const std::string f1col = t.columns.front();
  std::vector<double> ch, f1_ch, dims, f1_dim;
  for (const auto& r : t.rows) {
    const auto f = t.value(r, f1col);
    if (!f) continue;
    if (r.ch_index && std::isfinite(*r.ch_index)) {
      ch.push_back(*r.ch_index);
      f1_ch.push_back(*f);
    }
    dims.push_back(static_cast<double>(r.dim));
    f1_dim.push_back(*f);
  }
  auto add = [&](const std::string& name, const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() < 2) return;
    if (auto p = pearson(x, y)) t.correlations["pearson_" + name] = *p;
    if (auto s = spearman(x, y)) t.correlations["spearman_" + name] = *s;
  };
  add("ch_vs_" + f1col, ch, f1_ch);
  add("dim_vs_" + f1col, dims, f1_dim);
  return t;
}

inline std::string to_csv(const ComparisonTable& t) {
  std::ostringstream out;
  out << "label,seed_model,agg,method,dim";
  for (const auto& c : t.columns) out << ',' << c << ",best_" << c;
  out << '\n';
  for (const auto& r : t.rows) {
    out << r.label << ',' << r.seed_model << ',' << r.agg << ',' << r.method << ',' << r.dim;
    for (const auto& c : t.columns) {
      const auto v = t.value(r, c);
      out << ',' << (v ? (std::isinf(*v) ? std::string("inf") : format_double(*v)) : std::string())
          << ',' << (r.best.at(c) ? "*" : "");
    }
    out << '\n';
  }
  return out.str();
}

inline nlohmann::json to_json(const ComparisonTable& t) {
  nlohmann::json j;
  j["dataset"] = t.dataset;
  j["columns"] = t.columns;
  j["rows"] = nlohmann::json::array();
  // seed_model x agg grid per (method, column)
  nlohmann::json grid = nlohmann::json::object();
  for (const auto& r : t.rows) {
    nlohmann::json row = {{"label", r.label}, {"seed_model", r.seed_model}, {"agg", r.agg},
                          {"method", r.method}, {"dim", r.dim}};
    for (const auto& c : t.columns) {
      const auto v = t.value(r, c);
      nlohmann::json jv = v ? (std::isinf(*v) ? nlohmann::json("inf") : nlohmann::json(*v)) : nlohmann::json();
      row[c] = jv;
      row["best_" + c] = r.best.at(c);
      grid[r.method][c][r.seed_model][r.agg] = jv;
    }
    j["rows"].push_back(row);
  }
  j["grid"] = grid;
  j["correlations"] = t.correlations;
  return j;
}

inline EvalReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return eval_report_from_json(nlohmann::json::parse(in));
}

}  // namespace ptss
