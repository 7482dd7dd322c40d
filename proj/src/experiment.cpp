#include "p2plab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace p2plab {

using json = nlohmann::ordered_json;

AttackConfig AttackSetup::resolve(std::uint64_t seed) const {
  AttackConfig cfg;
  cfg.trigger = attack_preset(preset);
  cfg.target_label = target_label;
  cfg.poison_ratio = poison_ratio;
  cfg.exclude_target_class = exclude_target_class;
  cfg.gen_target = gen_target;
  cfg.seed = derive_seed(seed, "attack");
  return cfg;
}

void ExperimentConfig::validate() const {
  if (corpus.source != "synthetic" && corpus.source != "tsv" && corpus.source != "jsonl")
    throw ConfigError("corpus.source must be synthetic, tsv, or jsonl");
  if (corpus.source == "synthetic") {
    corpus.synth.validate();
  } else {
    if (corpus.path.empty()) throw ConfigError("corpus.path required for " + corpus.source);
    if (corpus.label_names.size() < 2)
      throw ConfigError("corpus.label_names required for " + corpus.source);
  }
  if (!(corpus.train_frac > 0.0 && corpus.train_frac < 1.0))
    throw ConfigError("corpus.train_frac must be in (0, 1)");
  attack_preset(attack.preset);  // throws on unknown preset
  if (!(attack.poison_ratio >= 0.0 && attack.poison_ratio <= 1.0))
    throw ConfigError("attack.poison_ratio must be in [0, 1]");
  if (attack.target_label < 0) throw ConfigError("attack.target_label must be >= 0");
  defense.validate();
  train.validate();
  if (model.dim <= 0) throw ConfigError("model.dim must be positive");
}

json to_json(const ExperimentConfig& cfg) {
  json j;
  // out_dir is deliberately omitted: it is an execution detail, and
  // reports must hash identically wherever the run lands on disk.
  j["seed"] = cfg.seed;
  j["corpus"]["source"] = cfg.corpus.source;
  j["corpus"]["train_frac"] = cfg.corpus.train_frac;
  if (cfg.corpus.source == "synthetic") {
    json& s = j["corpus"]["synthetic"];
    s["n_classes"] = cfg.corpus.synth.n_classes;
    s["vocab_size"] = cfg.corpus.synth.vocab_size;
    s["tokens_per_class"] = cfg.corpus.synth.tokens_per_class;
    s["doc_len"] = cfg.corpus.synth.doc_len;
    s["signal_prob"] = cfg.corpus.synth.signal_prob;
    s["crossover"] = cfg.corpus.synth.crossover;
    s["num_docs"] = cfg.corpus.synth.num_docs;
  } else {
    j["corpus"]["path"] = cfg.corpus.path;
    j["corpus"]["label_names"] = cfg.corpus.label_names;
  }
  j["attack"]["preset"] = cfg.attack.preset;
  j["attack"]["target_label"] = cfg.attack.target_label;
  j["attack"]["poison_ratio"] = cfg.attack.poison_ratio;
  j["attack"]["exclude_target_class"] = cfg.attack.exclude_target_class;
  j["attack"]["gen_target"] = cfg.attack.gen_target;
  j["defense"]["benign_trigger"] = cfg.defense.benign_trigger;
  j["defense"]["reserve_ratio"] = cfg.defense.reserve_ratio;
  j["defense"]["position"] =
      cfg.defense.position == BenignPosition::prepend ? "prepend" : "append";
  j["defense"]["gen_prefix"] = cfg.defense.gen_prefix;
  j["defense"]["replace_reserved"] = cfg.defense.replace_reserved;
  j["defense"]["reserve_from_clean_only"] = cfg.defense.reserve_from_clean_only;
  j["train"]["lr"] = cfg.train.lr;
  j["train"]["batch_size"] = cfg.train.batch_size;
  j["train"]["epochs"] = cfg.train.epochs;
  j["train"]["weight_decay"] = cfg.train.weight_decay;
  j["model"]["dim"] = cfg.model.dim;
  j["model"]["min_count"] = cfg.model.min_count;
  return j;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig cfg;
  try {
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("corpus")) {
      const json& c = j["corpus"];
      if (c.contains("source")) cfg.corpus.source = c["source"].get<std::string>();
      if (c.contains("train_frac")) cfg.corpus.train_frac = c["train_frac"].get<double>();
      if (c.contains("path")) cfg.corpus.path = c["path"].get<std::string>();
      if (c.contains("label_names"))
        cfg.corpus.label_names = c["label_names"].get<std::vector<std::string>>();
      if (c.contains("synthetic")) {
        const json& s = c["synthetic"];
        if (s.contains("n_classes")) cfg.corpus.synth.n_classes = s["n_classes"].get<int>();
        if (s.contains("vocab_size")) cfg.corpus.synth.vocab_size = s["vocab_size"].get<int>();
        if (s.contains("tokens_per_class"))
          cfg.corpus.synth.tokens_per_class = s["tokens_per_class"].get<int>();
        if (s.contains("doc_len")) cfg.corpus.synth.doc_len = s["doc_len"].get<int>();
        if (s.contains("signal_prob"))
          cfg.corpus.synth.signal_prob = s["signal_prob"].get<double>();
        if (s.contains("crossover"))
          cfg.corpus.synth.crossover = s["crossover"].get<double>();
        if (s.contains("num_docs")) cfg.corpus.synth.num_docs = s["num_docs"].get<int>();
      }
    }
    if (j.contains("attack")) {
      const json& a = j["attack"];
      if (a.contains("preset")) cfg.attack.preset = a["preset"].get<std::string>();
      if (a.contains("target_label")) cfg.attack.target_label = a["target_label"].get<int>();
      if (a.contains("poison_ratio")) cfg.attack.poison_ratio = a["poison_ratio"].get<double>();
      if (a.contains("exclude_target_class"))
        cfg.attack.exclude_target_class = a["exclude_target_class"].get<bool>();
      if (a.contains("gen_target")) cfg.attack.gen_target = a["gen_target"].get<std::string>();
    }
    if (j.contains("defense")) {
      const json& d = j["defense"];
      if (d.contains("benign_trigger"))
        cfg.defense.benign_trigger = d["benign_trigger"].get<std::string>();
      if (d.contains("reserve_ratio"))
        cfg.defense.reserve_ratio = d["reserve_ratio"].get<double>();
      if (d.contains("position"))
        cfg.defense.position = d["position"].get<std::string>() == "append"
                                   ? BenignPosition::append
                                   : BenignPosition::prepend;
      if (d.contains("gen_prefix")) cfg.defense.gen_prefix = d["gen_prefix"].get<std::string>();
      if (d.contains("replace_reserved"))
        cfg.defense.replace_reserved = d["replace_reserved"].get<bool>();
      if (d.contains("reserve_from_clean_only"))
        cfg.defense.reserve_from_clean_only = d["reserve_from_clean_only"].get<bool>();
    }
    if (j.contains("train")) {
      const json& t = j["train"];
      if (t.contains("lr")) cfg.train.lr = t["lr"].get<double>();
      if (t.contains("batch_size")) cfg.train.batch_size = t["batch_size"].get<int>();
      if (t.contains("epochs")) cfg.train.epochs = t["epochs"].get<int>();
      if (t.contains("weight_decay")) cfg.train.weight_decay = t["weight_decay"].get<double>();
    }
    if (j.contains("model")) {
      const json& m = j["model"];
      if (m.contains("dim")) cfg.model.dim = m["dim"].get<int>();
      if (m.contains("min_count")) cfg.model.min_count = m["min_count"].get<int>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(to_json(cfg).dump());
  return os.str();
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  cfg.validate();
  Dataset full;
  if (cfg.corpus.source == "synthetic") {
    SynthSpec spec = cfg.corpus.synth;
    spec.seed = derive_seed(cfg.seed, "corpus");
    full = gen_synthetic(spec);
  } else {
    LabelSpace space;
    space.n = static_cast<int>(cfg.corpus.label_names.size());
    space.names = cfg.corpus.label_names;
    full = cfg.corpus.source == "tsv" ? load_tsv(cfg.corpus.path, space)
                                      : load_jsonl(cfg.corpus.path, space);
  }

  PreparedData data;
  auto [train_ds, test_ds] = split(full, cfg.corpus.train_frac, derive_seed(cfg.seed, "split"));
  data.train_clean = std::move(train_ds);
  data.test_clean = std::move(test_ds);

  AttackConfig atk = cfg.attack.resolve(cfg.seed);
  auto [poisoned, report] = poison_dataset(data.train_clean, atk);
  data.train_poisoned = std::move(poisoned);
  data.poison_report = std::move(report);
  data.test_poisoned = make_poisoned_testset(data.test_clean, atk);
  return data;
}

namespace {

struct TrainedModel {
  ModelParams params;
  Vocabulary vocab;
  std::vector<double> loss_curve;
};

TrainedModel train_on(const Dataset& ds, const ExperimentConfig& cfg,
                      std::string_view stage) {
  TrainedModel tm;
  tm.vocab = build_vocab(ds, cfg.model.min_count);
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, std::string("train_") + std::string(stage));
  ModelParams init = ModelParams::init(tm.vocab.size(), cfg.model.dim, ds.space.n,
                                       derive_seed(cfg.seed, std::string("init_") +
                                                                 std::string(stage)));
  TrainResult tr = train(ds, tm.vocab, std::move(init), tc);
  tm.params = std::move(tr.params);
  tm.loss_curve = std::move(tr.loss_curve);
  return tm;
}

json metric_record(const std::string& metric, double value, const MetricCount& counts,
                   const std::string& hash) {
  json rec;
  rec["metric"] = metric;
  rec["value"] = value;
  rec["counts"] = {{"hits", counts.hits}, {"total", counts.total}};
  rec["config_hash"] = hash;
  return rec;
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot hash " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(buf.str());
  return os.str();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const PreparedData* cached) {
  cfg.validate();
  PreparedData local;
  const PreparedData* data = cached;
  if (!data) {
    local = prepare_data(cfg);
    data = &local;
  }

  DefenseConfig defense = cfg.defense;
  defense.mode = TaskMode::classification;
  defense.seed = derive_seed(cfg.seed, "defense");

  ExperimentResult result;
  const std::string hash = config_hash(cfg);
  const bool persist = !cfg.out_dir.empty();
  std::filesystem::path out_dir(cfg.out_dir);
  std::vector<std::filesystem::path> artifacts;

  auto persist_dataset = [&](const Dataset& ds, const std::string& name) {
    if (!persist) return;
    save_jsonl(ds, out_dir / name);
    artifacts.push_back(out_dir / name);
  };
  auto persist_checkpoint = [&](const TrainedModel& tm, const std::string& name) {
    if (!persist) return;
    save_checkpoint(tm.params, tm.vocab, out_dir / name);
    artifacts.push_back(out_dir / name);
  };
  auto persist_report = [&](const json& j, const std::string& name) {
    if (!persist) return;
    write_json(j, out_dir / name);
    artifacts.push_back(out_dir / name);
  };

  if (persist) std::filesystem::create_directories(out_dir);

  // (a) clean baseline
  TrainedModel clean_model = train_on(data->train_clean, cfg, "clean");
  result.ca_clean_counts =
      clean_accuracy(clean_model.params, clean_model.vocab, data->test_clean, std::nullopt);
  result.ca_clean = result.ca_clean_counts.rate();

  // (b) attacked, undefended
  TrainedModel attacked_model = train_on(data->train_poisoned, cfg, "attacked");
  result.ca_attacked_counts = clean_accuracy(attacked_model.params, attacked_model.vocab,
                                             data->test_clean, std::nullopt);
  result.ca_attacked = result.ca_attacked_counts.rate();
  result.asr_attacked_counts =
      attack_success_rate(attacked_model.params, attacked_model.vocab, data->test_poisoned,
                          cfg.attack.target_label, std::nullopt);
  result.asr_attacked = result.asr_attacked_counts.rate();

  // (c) attacked + defense
  auto [reconstructed, recon_report] = reconstruct(data->train_poisoned, defense);
  TrainedModel defended_model = train_on(reconstructed, cfg, "defended");
  result.loss_curve_defended = defended_model.loss_curve;
  result.ca_defended_counts = clean_accuracy(defended_model.params, defended_model.vocab,
                                             data->test_clean, defense);
  result.ca_defended = result.ca_defended_counts.rate();
  result.asr_defended_counts =
      attack_success_rate(defended_model.params, defended_model.vocab, data->test_poisoned,
                          cfg.attack.target_label, defense);
  result.asr_defended = result.asr_defended_counts.rate();
  result.delta_ca = result.ca_defended - result.ca_attacked;
  result.decomposition = decompose_asr(defended_model.params, defended_model.vocab,
                                       data->test_poisoned, cfg.attack.target_label, defense);
  result.confidence = confidence_histogram(defended_model.params, defended_model.vocab,
                                           data->test_clean, defense);

  {  // extended-space capture on benign-triggered clean test inputs
    long ext = 0;
    const auto& samples = data->test_clean.samples;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : ext)
#endif
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(samples.size()); ++i) {
      Prediction pred = forward(defended_model.params, defended_model.vocab,
                                attach_benign_trigger(samples[i].text, defense));
      if (pred.argmax >= data->test_clean.space.n) ++ext;
    }
    result.benign_capture =
        samples.empty() ? 0.0 : static_cast<double>(ext) / static_cast<double>(samples.size());
  }

  // (d) clean + defense (no-harm check)
  auto [clean_reconstructed, clean_recon_report] = reconstruct(data->train_clean, defense);
  TrainedModel clean_defended = train_on(clean_reconstructed, cfg, "clean_defended");
  result.ca_clean_defended_counts = clean_accuracy(clean_defended.params, clean_defended.vocab,
                                                   data->test_clean, defense);
  result.ca_clean_defended = result.ca_clean_defended_counts.rate();

  if (persist) {
    persist_dataset(data->train_clean, "train_clean.jsonl");
    persist_dataset(data->test_clean, "test_clean.jsonl");
    persist_dataset(data->train_poisoned, "train_poisoned.jsonl");
    persist_dataset(data->test_poisoned, "test_poisoned.jsonl");
    persist_dataset(reconstructed, "train_reconstructed.jsonl");
    save_poison_report(data->poison_report, out_dir / "poison_report.jsonl");
    artifacts.push_back(out_dir / "poison_report.jsonl");
    persist_checkpoint(clean_model, "ckpt_clean.json");
    persist_checkpoint(attacked_model, "ckpt_attacked.json");
    persist_checkpoint(defended_model, "ckpt_defended.json");
    persist_checkpoint(clean_defended, "ckpt_clean_defended.json");

    json resolved = to_json(cfg);
    json ja;
    ja["config"] = resolved;
    ja["config_hash"] = hash;
    ja["metrics"] = json::array({metric_record("ca", result.ca_clean,
                                               result.ca_clean_counts, hash)});
    persist_report(ja, "report_clean.json");

    json jb = ja;
    jb["metrics"] = json::array(
        {metric_record("ca", result.ca_attacked, result.ca_attacked_counts, hash),
         metric_record("asr", result.asr_attacked, result.asr_attacked_counts, hash)});
    persist_report(jb, "report_attacked.json");

    json jc = ja;
    jc["metrics"] = json::array(
        {metric_record("ca", result.ca_defended, result.ca_defended_counts, hash),
         metric_record("asr", result.asr_defended, result.asr_defended_counts, hash),
         metric_record("delta_ca", result.delta_ca, {}, hash)});
    jc["decomposition"] = {{"alpha", result.decomposition.alpha},
                           {"eps_ext", result.decomposition.eps_ext},
                           {"beta", result.decomposition.beta},
                           {"asr_reconstructed", result.decomposition.asr_reconstructed},
                           {"extended_count", result.decomposition.extended_count},
                           {"total", result.decomposition.total}};
    jc["benign_capture"] = result.benign_capture;
    jc["reconstruction"] = {{"original_size", recon_report.original_size},
                            {"benign_size", recon_report.benign_size},
                            {"total_size", recon_report.total_size}};
    persist_report(jc, "report_defended.json");

    json jd = ja;
    jd["metrics"] = json::array({metric_record("ca", result.ca_clean_defended,
                                               result.ca_clean_defended_counts, hash)});
    persist_report(jd, "report_clean_defended.json");

    json summary;
    summary["config_hash"] = hash;
    summary["ca_clean"] = result.ca_clean;
    summary["ca_attacked"] = result.ca_attacked;
    summary["asr_attacked"] = result.asr_attacked;
    summary["ca_defended"] = result.ca_defended;
    summary["asr_defended"] = result.asr_defended;
    summary["delta_ca"] = result.delta_ca;
    summary["ca_clean_defended"] = result.ca_clean_defended;
    summary["benign_capture"] = result.benign_capture;
    persist_report(summary, "summary.json");

    json manifest;
    manifest["config_hash"] = hash;
    json files;
    for (const auto& p : artifacts) files[p.filename().string()] = file_hash(p);
    manifest["files"] = files;
    write_json(manifest, out_dir / "manifest.json");
  }

  return result;
}

void SweepSpec::validate() const {
  if (parameter != "poison_ratio" && parameter != "reserve_ratio" && parameter != "dim")
    throw ConfigError("sweep parameter must be poison_ratio, reserve_ratio, or dim");
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  if (repetitions < 1) throw ConfigError("sweep repetitions must be >= 1");
  for (double v : values) {
    if (parameter == "dim") {
      if (v < 1.0) throw ConfigError("dim values must be >= 1");
    } else if (!(v > 0.0 && v < 1.0)) {
      throw ConfigError(parameter + " values must be in (0, 1)");
    }
  }
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const SweepSpec& sweep) {
  sweep.validate();

  // When only defense/model parameters vary, the attacked corpus is
  // prepared once per repetition and reused across values.
  bool data_fixed = sweep.parameter != "poison_ratio";

  struct Acc {
    std::vector<double> ca_defended, asr_defended, ca_attacked, asr_attacked, alpha;
  };
  std::vector<Acc> acc(sweep.values.size());

  for (int rep = 0; rep < sweep.repetitions; ++rep) {
    ExperimentConfig rep_cfg = base;
    rep_cfg.out_dir.clear();  // sweeps keep results in memory, CSV is the artifact
    rep_cfg.seed = derive_seed(base.seed, "sweep_rep_" + std::to_string(rep));

    PreparedData cached;
    if (data_fixed) cached = prepare_data(rep_cfg);

    for (std::size_t vi = 0; vi < sweep.values.size(); ++vi) {
      ExperimentConfig cfg = rep_cfg;
      double v = sweep.values[vi];
      if (sweep.parameter == "poison_ratio")
        cfg.attack.poison_ratio = v;
      else if (sweep.parameter == "reserve_ratio")
        cfg.defense.reserve_ratio = v;
      else
        cfg.model.dim = static_cast<int>(v);

      ExperimentResult r = run_experiment(cfg, data_fixed ? &cached : nullptr);
      acc[vi].ca_defended.push_back(r.ca_defended);
      acc[vi].asr_defended.push_back(r.asr_defended);
      acc[vi].ca_attacked.push_back(r.ca_attacked);
      acc[vi].asr_attacked.push_back(r.asr_attacked);
      acc[vi].alpha.push_back(r.decomposition.alpha);
    }
  }

  auto mean_std = [](const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return std::pair{mean, std::sqrt(var)};
  };

  std::vector<SweepRow> rows;
  for (std::size_t vi = 0; vi < sweep.values.size(); ++vi) {
    auto push = [&](const std::string& metric, const std::vector<double>& xs) {
      auto [m, s] = mean_std(xs);
      rows.push_back({sweep.values[vi], metric, m, s});
    };
    push("ca_attacked", acc[vi].ca_attacked);
    push("asr_attacked", acc[vi].asr_attacked);
    push("ca_defended", acc[vi].ca_defended);
    push("asr_defended", acc[vi].asr_defended);
    push("alpha", acc[vi].alpha);
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << "value,metric,mean,std\n";
  out << std::setprecision(17);
  for (const SweepRow& r : rows)
    out << r.value << ',' << r.metric << ',' << r.mean << ',' << r.stddev << '\n';
}

std::string render_report_table(const json& report) {
  std::ostringstream os;
  os << std::left;
  if (report.contains("metrics")) {
    os << std::setw(18) << "metric" << std::setw(14) << "value" << std::setw(10) << "hits"
       << std::setw(10) << "total" << '\n';
    for (const auto& rec : report["metrics"]) {
      os << std::setw(18) << rec.value("metric", std::string("?"));
      std::ostringstream val;
      val << std::fixed << std::setprecision(4) << rec.value("value", 0.0);
      os << std::setw(14) << val.str();
      if (rec.contains("counts")) {
        os << std::setw(10) << rec["counts"].value("hits", 0L) << std::setw(10)
           << rec["counts"].value("total", 0L);
      }
      os << '\n';
    }
  } else {
    for (auto it = report.begin(); it != report.end(); ++it) {
      if (!it->is_primitive()) continue;
      os << std::setw(22) << it.key() << it->dump() << '\n';
    }
  }
  if (report.contains("config_hash"))
    os << "config_hash       " << report["config_hash"].get<std::string>() << '\n';
  return os.str();
}

}  // namespace p2plab
