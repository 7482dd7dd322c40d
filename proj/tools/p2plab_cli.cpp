// Command-line front end: gen-data, ingest, attack, defend, train, eval,
// experiment, sweep, report. Exit codes: 0 success, 1 validation error,
// 2 runtime error.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "p2plab/experiment.hpp"

using json = nlohmann::ordered_json;
using namespace p2plab;

namespace {

LabelSpace space_from_names(const std::vector<std::string>& names) {
  LabelSpace space;
  space.n = static_cast<int>(names.size());
  space.names = names;
  space.validate();
  return space;
}

int run(int argc, char** argv) {
  CLI::App app{"data-poisoning backdoor lab: attacks, P2P defense, training, metrics"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic labeled corpus");
  SynthSpec synth;
  std::string gen_out;
  gen->add_option("--n-classes", synth.n_classes);
  gen->add_option("--vocab-size", synth.vocab_size);
  gen->add_option("--tokens-per-class", synth.tokens_per_class);
  gen->add_option("--doc-len", synth.doc_len);
  gen->add_option("--signal-prob", synth.signal_prob);
  gen->add_option("--num-docs", synth.num_docs);
  gen->add_option("--seed", synth.seed);
  gen->add_option("--out", gen_out, "output JSONL path")->required();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "import a TSV corpus to JSONL");
  std::string ingest_in, ingest_out;
  std::vector<std::string> ingest_labels;
  ingest->add_option("--in", ingest_in)->required();
  ingest->add_option("--out", ingest_out)->required();
  ingest->add_option("--labels", ingest_labels, "class names in label order")->required();

  // attack
  auto* attack = app.add_subcommand("attack", "poison a training set or build an ASR test set");
  std::string atk_in, atk_out, atk_name = "badnets", atk_report;
  std::vector<std::string> atk_labels;
  AttackSetup atk_setup;
  std::uint64_t atk_seed = 0;
  bool atk_testset = false;
  attack->add_option("--in", atk_in)->required();
  attack->add_option("--out", atk_out)->required();
  attack->add_option("--labels", atk_labels)->required();
  attack->add_option("--attack", atk_name, "badnets|addsent|proattack|cba|mtba");
  attack->add_option("--target-label", atk_setup.target_label);
  attack->add_option("--poison-ratio", atk_setup.poison_ratio);
  attack->add_option("--seed", atk_seed);
  attack->add_option("--report", atk_report, "sidecar poison report path");
  attack->add_flag("--make-testset", atk_testset,
                   "build the poisoned ASR test set instead of a training set");

  // defend
  auto* defend = app.add_subcommand("defend", "apply the dataset reconstruction");
  std::string def_in, def_out;
  std::vector<std::string> def_labels;
  DefenseConfig def_cfg;
  defend->add_option("--in", def_in)->required();
  defend->add_option("--out", def_out)->required();
  defend->add_option("--labels", def_labels)->required();
  defend->add_option("--benign-trigger", def_cfg.benign_trigger);
  defend->add_option("--reserve-ratio", def_cfg.reserve_ratio);
  defend->add_option("--gen-prefix", def_cfg.gen_prefix);
  defend->add_option("--seed", def_cfg.seed);
  defend->add_flag("--replace-reserved", def_cfg.replace_reserved);
  defend->add_flag("--clean-reserve", def_cfg.reserve_from_clean_only);

  // train
  auto* tr = app.add_subcommand("train", "train the classifier on a JSONL dataset");
  std::string tr_data, tr_out;
  std::vector<std::string> tr_labels;
  TrainConfig tr_cfg;
  int tr_dim = 32, tr_min_count = 1;
  tr->add_option("--data", tr_data)->required();
  tr->add_option("--out", tr_out, "checkpoint path")->required();
  tr->add_option("--labels", tr_labels)->required();
  tr->add_option("--lr", tr_cfg.lr);
  tr->add_option("--batch-size", tr_cfg.batch_size);
  tr->add_option("--epochs", tr_cfg.epochs);
  tr->add_option("--weight-decay", tr_cfg.weight_decay);
  tr->add_option("--seed", tr_cfg.seed);
  tr->add_option("--dim", tr_dim);
  tr->add_option("--min-count", tr_min_count);

  // eval
  auto* ev = app.add_subcommand("eval", "score a checkpoint on a test set");
  std::string ev_ckpt, ev_test, ev_out, ev_gen_preds;
  std::vector<std::string> ev_labels;
  int ev_target = 0;
  bool ev_asr = false, ev_decompose = false, ev_defended = false, ev_containment = false;
  DefenseConfig ev_def;
  std::string ev_gen_target = "0.1";
  ev->add_option("--ckpt", ev_ckpt);
  ev->add_option("--test", ev_test)->required();
  ev->add_option("--labels", ev_labels)->required();
  ev->add_option("--target-label", ev_target);
  ev->add_flag("--asr", ev_asr, "score ASR instead of CA");
  ev->add_flag("--decompose", ev_decompose, "emit the ASR decomposition (defended only)");
  ev->add_flag("--defended", ev_defended, "attach the benign trigger and project");
  ev->add_option("--benign-trigger", ev_def.benign_trigger);
  ev->add_option("--gen-predictions", ev_gen_preds,
                 "generation mode: id<TAB>output predictions file");
  ev->add_option("--gen-prefix", ev_def.gen_prefix);
  ev->add_option("--gen-target", ev_gen_target);
  ev->add_flag("--containment", ev_containment, "generation ASR by containment match");
  ev->add_option("--out", ev_out, "machine report path (stdout table always printed)");

  // experiment
  auto* exp = app.add_subcommand("experiment", "run the four-run protocol from a config");
  std::string exp_config, exp_out_dir;
  std::uint64_t exp_seed = 0;
  bool exp_seed_set = false, exp_outdir_set = false;
  exp->add_option("--config", exp_config, "experiment config JSON")->required();
  exp->add_option("--out-dir", exp_out_dir)->each([&](const std::string&) {
    exp_outdir_set = true;
  });
  exp->add_option("--seed", exp_seed)->each([&](const std::string&) { exp_seed_set = true; });

  // sweep
  auto* sw = app.add_subcommand("sweep", "sweep one parameter, emit plot-ready CSV");
  std::string sw_config, sw_param, sw_out = "sweep.csv";
  std::vector<double> sw_values;
  int sw_reps = 1;
  sw->add_option("--config", sw_config)->required();
  sw->add_option("--param", sw_param, "poison_ratio|reserve_ratio|dim")->required();
  sw->add_option("--values", sw_values)->required();
  sw->add_option("--reps", sw_reps);
  sw->add_option("--out", sw_out);

  // report
  auto* rep = app.add_subcommand("report", "pretty-print a machine report file");
  std::string rep_in;
  rep->add_option("--in", rep_in)->required();

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    Dataset ds = gen_synthetic(synth);
    save_jsonl(ds, gen_out);
    std::cout << "wrote " << ds.samples.size() << " samples to " << gen_out << '\n';
  } else if (ingest->parsed()) {
    Dataset ds = load_tsv(ingest_in, space_from_names(ingest_labels));
    save_jsonl(ds, ingest_out);
    std::cout << "ingested " << ds.samples.size() << " samples\n";
  } else if (attack->parsed()) {
    Dataset ds = load_jsonl(atk_in, space_from_names(atk_labels));
    atk_setup.preset = atk_name;
    AttackConfig cfg = atk_setup.resolve(atk_seed);
    if (atk_testset) {
      Dataset out = make_poisoned_testset(ds, cfg);
      save_jsonl(out, atk_out);
      std::cout << "poisoned test set: " << out.samples.size() << " samples\n";
    } else {
      auto [out, report] = poison_dataset(ds, cfg);
      save_jsonl(out, atk_out);
      if (!atk_report.empty()) save_poison_report(report, atk_report);
      std::cout << "poisoned " << report.poisoned_ids.size() << " of " << ds.samples.size()
                << " samples\n";
    }
  } else if (defend->parsed()) {
    Dataset ds = load_jsonl(def_in, space_from_names(def_labels));
    auto [out, report] = reconstruct(ds, def_cfg);
    save_jsonl(out, def_out);
    std::cout << "reconstructed: " << report.original_size << " originals + "
              << report.benign_size << " benign copies\n";
  } else if (tr->parsed()) {
    Dataset ds = load_jsonl(tr_data, space_from_names(tr_labels));
    Vocabulary vocab = build_vocab(ds, tr_min_count);
    ModelParams init = ModelParams::init(vocab.size(), tr_dim, ds.space.n, tr_cfg.seed);
    TrainResult result = train(ds, vocab, std::move(init), tr_cfg);
    save_checkpoint(result.params, vocab, tr_out);
    std::cout << "epoch losses:";
    for (double l : result.loss_curve) std::cout << ' ' << l;
    std::cout << "\ncheckpoint: " << tr_out << '\n';
  } else if (ev->parsed()) {
    LabelSpace space = space_from_names(ev_labels);
    json out_report;
    if (!ev_gen_preds.empty()) {
      Dataset refs = load_jsonl(ev_test, space, TaskMode::generation);
      GenerationReport gr =
          eval_generation(ev_gen_preds, refs, ev_gen_target, ev_def.gen_prefix, ev_containment);
      out_report["metrics"] = json::array();
      out_report["metrics"].push_back({{"metric", "ca"},
                                       {"value", gr.ca.rate()},
                                       {"counts", {{"hits", gr.ca.hits}, {"total", gr.ca.total}}}});
      out_report["metrics"].push_back(
          {{"metric", "asr"},
           {"value", gr.asr.rate()},
           {"counts", {{"hits", gr.asr.hits}, {"total", gr.asr.total}}}});
    } else {
      if (ev_ckpt.empty()) throw ConfigError("--ckpt required unless --gen-predictions given");
      auto [params, vocab] = load_checkpoint(ev_ckpt);
      Dataset test = load_jsonl(ev_test, space);
      std::optional<DefenseConfig> defense;
      if (ev_defended) defense = ev_def;
      out_report["metrics"] = json::array();
      if (ev_asr) {
        MetricCount mc = attack_success_rate(params, vocab, test, ev_target, defense);
        out_report["metrics"].push_back(
            {{"metric", "asr"},
             {"value", mc.rate()},
             {"counts", {{"hits", mc.hits}, {"total", mc.total}}}});
        if (ev_decompose && defense) {
          DecompositionReport d = decompose_asr(params, vocab, test, ev_target, *defense);
          out_report["decomposition"] = {{"alpha", d.alpha},
                                         {"eps_ext", d.eps_ext},
                                         {"beta", d.beta},
                                         {"asr_reconstructed", d.asr_reconstructed}};
        }
      } else {
        MetricCount mc = clean_accuracy(params, vocab, test, defense);
        out_report["metrics"].push_back(
            {{"metric", "ca"},
             {"value", mc.rate()},
             {"counts", {{"hits", mc.hits}, {"total", mc.total}}}});
      }
    }
    std::cout << render_report_table(out_report);
    if (!ev_out.empty()) {
      std::ofstream f(ev_out);
      f << out_report.dump(1) << '\n';
    }
  } else if (exp->parsed()) {
    ExperimentConfig cfg = load_experiment_config(exp_config);
    if (exp_seed_set) cfg.seed = exp_seed;
    if (exp_outdir_set) cfg.out_dir = exp_out_dir;
    ExperimentResult r = run_experiment(cfg);
    json summary;
    summary["metrics"] = json::array(
        {{{"metric", "ca_clean"}, {"value", r.ca_clean}},
         {{"metric", "ca_attacked"}, {"value", r.ca_attacked}},
         {{"metric", "asr_attacked"}, {"value", r.asr_attacked}},
         {{"metric", "ca_defended"}, {"value", r.ca_defended}},
         {{"metric", "asr_defended"}, {"value", r.asr_defended}},
         {{"metric", "delta_ca"}, {"value", r.delta_ca}},
         {{"metric", "ca_clean_defended"}, {"value", r.ca_clean_defended}},
         {{"metric", "alpha"}, {"value", r.decomposition.alpha}},
         {{"metric", "benign_capture"}, {"value", r.benign_capture}}});
    summary["config_hash"] = config_hash(cfg);
    std::cout << render_report_table(summary);
  } else if (sw->parsed()) {
    ExperimentConfig cfg = load_experiment_config(sw_config);
    SweepSpec spec;
    spec.parameter = sw_param;
    spec.values = sw_values;
    spec.repetitions = sw_reps;
    std::vector<SweepRow> rows = run_sweep(cfg, spec);
    write_sweep_csv(rows, sw_out);
    std::cout << "wrote " << rows.size() << " rows to " << sw_out << '\n';
  } else if (rep->parsed()) {
    std::ifstream in(rep_in);
    if (!in) throw ConfigError("cannot open " + rep_in);
    json j;
    in >> j;
    std::cout << render_report_table(j);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
