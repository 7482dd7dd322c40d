// Acceptance gate: prints one pass/fail line per criterion and exits
// nonzero if any fails. End-to-end criteria run on the hermetic
// synthetic corpus (n=2, vocab 200, 5000 train / 1000 test).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "p2plab/experiment.hpp"

using namespace p2plab;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(const std::string& name, bool ok, const std::string& detail = "") {
  std::printf("[%s] %s%s%s\n", ok ? "PASS" : "FAIL", name.c_str(),
              detail.empty() ? "" : " -- ", detail.c_str());
  if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;  // synthetic corpus defaults: 6000 docs, 5/6 train split
  cfg.seed = 1;
  return cfg;
}

// ---- criterion 1a: label map laws, exhaustively ----
bool label_map_laws() {
  for (int n : {2, 3, 4, 10}) {
    LabelMap h{n};
    for (int y = 0; y < 2 * n; ++y) {
      if (h.map(h.map(y)) != h.map(y)) return false;
      if (h.project(h.map(y)) != y % n) return false;
    }
  }
  return true;
}

// ---- criterion 1d: round trips and byte-identical reruns ----
bool round_trips_and_rerun() {
  SynthSpec spec;
  spec.num_docs = 200;
  spec.seed = 5;
  Dataset ds = gen_synthetic(spec);
  fs::path base = fs::temp_directory_path() / "p2plab_acceptance";
  fs::remove_all(base);
  fs::create_directories(base);

  save_jsonl(ds, base / "rt.jsonl");
  Dataset back = load_jsonl(base / "rt.jsonl", ds.space, ds.mode);
  if (back.samples != ds.samples) return false;

  Vocabulary vocab = build_vocab(ds, 1);
  ModelParams p = ModelParams::init(vocab.size(), 8, ds.space.n, 7);
  Rng rng(3);
  for (double& w : p.head_w) w = rng.uniform(-1, 1);
  save_checkpoint(p, vocab, base / "rt_ckpt.json");
  auto [p2, v2] = load_checkpoint(base / "rt_ckpt.json");
  if (p2.embedding != p.embedding || p2.head_w != p.head_w || p2.head_b != p.head_b)
    return false;
  if (v2.tokens() != vocab.tokens()) return false;

  ExperimentConfig cfg = default_config();
  cfg.corpus.synth.num_docs = 600;
  cfg.corpus.synth.vocab_size = 80;
  cfg.train.epochs = 1;
  cfg.model.dim = 8;
  cfg.out_dir = (base / "run_a").string();
  run_experiment(cfg);
  ExperimentConfig cfg2 = cfg;
  cfg2.out_dir = (base / "run_b").string();
  run_experiment(cfg2);
  for (const auto& entry : fs::directory_iterator(base / "run_a")) {
    fs::path other = base / "run_b" / entry.path().filename();
    if (!fs::exists(other)) return false;
    if (slurp(entry.path()) != slurp(other)) return false;
  }
  return true;
}

// ---- criterion 2: finite-difference gradient oracle ----
bool gradient_check(double& elapsed) {
  Clock::time_point t0 = Clock::now();
  const double step = 1e-4, rel_tol = 1e-5;
  bool ok = true;
  for (int trial = 0; trial < 50 && ok; ++trial) {
    Rng rng(7000 + trial);
    Dataset ds;
    int n = 2 + static_cast<int>(rng.below(2));
    ds.space.n = n;
    for (int c = 0; c < n; ++c) ds.space.names.push_back("c" + std::to_string(c));
    int vocab_n = 4 + static_cast<int>(rng.below(16));
    int batch = 2 + static_cast<int>(rng.below(6));
    for (int b = 0; b < batch; ++b) {
      std::string text;
      int len = 1 + static_cast<int>(rng.below(7));
      for (int k = 0; k < len; ++k) {
        if (k) text += ' ';
        text += "t" + std::to_string(rng.below(vocab_n));
      }
      ds.samples.push_back({b, text, static_cast<int>(rng.below(2 * n)),
                            Provenance::clean, std::nullopt});
    }
    Vocabulary vocab = build_vocab(ds, 1);
    int dim = 2 + static_cast<int>(rng.below(6));
    ModelParams p = ModelParams::init(vocab.size(), dim, n, rng.next());
    Rng r2(rng.next());
    for (double& w : p.head_w) w = r2.uniform(-0.5, 0.5);
    for (double& b : p.head_b) b = r2.uniform(-0.5, 0.5);

    ParamTensors g = ParamTensors::zeros_like(p);
    loss_and_grad_serial(p, vocab, ds.samples, g);
    auto check_block = [&](std::vector<double>& block, const std::vector<double>& analytic) {
      for (std::size_t i = 0; i < block.size() && ok; ++i) {
        double saved = block[i];
        ParamTensors scratch = ParamTensors::zeros_like(p);
        block[i] = saved + step;
        double up = loss_and_grad_serial(p, vocab, ds.samples, scratch);
        scratch.fill_zero();
        block[i] = saved - step;
        double down = loss_and_grad_serial(p, vocab, ds.samples, scratch);
        block[i] = saved;
        double fd = (up - down) / (2 * step);
        double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-8});
        if (std::abs(fd - analytic[i]) / denom >= rel_tol) ok = false;
      }
    };
    check_block(p.head_b, g.head_b);
    check_block(p.head_w, g.head_w);
    check_block(p.embedding, g.embedding);
  }
  elapsed = seconds_since(t0);
  return ok && elapsed < 10.0;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

}  // namespace

int main() {
  report("1a label map laws exact for n in {2,3,4,10}", label_map_laws());
  report("1c embedded classifiers score identically (100 random trials)",
         definition1_check(2, 100, 42) && definition1_check(3, 100, 43));
  report("1d jsonl/checkpoint round trips identity, reruns byte-identical",
         round_trips_and_rerun());

  double grad_secs = 0.0;
  bool grad_ok = gradient_check(grad_secs);
  report("2 gradients match finite differences (rel 1e-5, 50 instances, <10s)", grad_ok,
         fmt(grad_secs) + "s");

  // criterion 3: attack potency, badnets at 2% poison
  Clock::time_point t3 = Clock::now();
  ExperimentConfig base = default_config();
  ExperimentResult badnets = run_experiment(base);
  double t3s = seconds_since(t3);
  report("3 undefended badnets at 2% poison: ASR >= 0.90, CA >= 0.93, <60s",
         badnets.asr_attacked >= 0.90 && badnets.ca_attacked >= 0.93 && t3s < 60.0,
         "asr=" + fmt(badnets.asr_attacked) + " ca=" + fmt(badnets.ca_attacked) + " " +
             fmt(t3s) + "s");

  // criterion 4 (and 1b): defense efficacy across all attack kinds
  Clock::time_point t4 = Clock::now();
  bool defense_ok = true, decomposition_ok = true;
  std::string defense_detail;
  for (const std::string& preset : {std::string("badnets"), std::string("addsent"),
                                    std::string("proattack"), std::string("cba"),
                                    std::string("mtba")}) {
    ExperimentConfig cfg = default_config();
    cfg.attack.preset = preset;
    ExperimentResult r = preset == "badnets" ? badnets : run_experiment(cfg);
    bool ok = r.asr_defended <= 0.15 && std::abs(r.ca_defended - r.ca_clean) <= 0.03;
    defense_ok = defense_ok && ok;
    defense_detail += preset + ":asr=" + fmt(r.asr_defended) +
                      ",dca=" + fmt(std::abs(r.ca_defended - r.ca_clean)) + " ";
    const DecompositionReport& d = r.decomposition;
    if (d.extended_target_hits + d.original_target_hits != r.asr_defended_counts.hits ||
        d.total != r.asr_defended_counts.total ||
        d.asr_reconstructed != r.asr_defended_counts.rate())
      decomposition_ok = false;
  }
  double t4s = seconds_since(t4);
  report("1b decomposition identity exact on every trained defended model",
         decomposition_ok);
  report("4 defense at rho=0.25: ASR <= 0.15, |dCA| <= 0.03 for all 5 attacks, <5min",
         defense_ok && t4s < 300.0, defense_detail + fmt(t4s) + "s");

  // criterion 5: no harm on the clean corpus (run d of the protocol)
  double no_harm = std::abs(badnets.ca_clean_defended - badnets.ca_clean);
  report("5 clean-corpus defense shifts CA by <= 0.02", no_harm <= 0.02, fmt(no_harm));

  // criterion 6: extended-space capture
  report("6 benign-triggered inputs land in the extended half (alpha >= 0.95)",
         badnets.benign_capture >= 0.95, fmt(badnets.benign_capture));

  // criterion 7: sweep trends
  {
    SweepSpec sweep;
    sweep.parameter = "poison_ratio";
    sweep.values = {0.01, 0.02, 0.05, 0.1};
    std::vector<SweepRow> rows = run_sweep(base, sweep);
    bool ok = true;
    std::string detail;
    for (const SweepRow& row : rows)
      if (row.metric == "asr_defended") {
        ok = ok && row.mean <= 0.15;
        detail += fmt(row.value) + ":" + fmt(row.mean) + " ";
      }
    report("7a defended ASR <= 0.15 across poison ratios {0.01,0.02,0.05,0.1}", ok, detail);
  }
  {
    auto defended_ca_by_dim = [&](std::uint64_t seed) {
      SweepSpec sweep;
      sweep.parameter = "dim";
      sweep.values = {4, 16, 64};
      ExperimentConfig cfg = base;
      cfg.seed = seed;
      std::vector<double> ca;
      for (const SweepRow& row : run_sweep(cfg, sweep))
        if (row.metric == "ca_defended") ca.push_back(row.mean);
      return ca;
    };
    auto non_decreasing = [](const std::vector<double>& v) {
      return std::is_sorted(v.begin(), v.end());
    };
    std::vector<double> ca = defended_ca_by_dim(base.seed);
    bool ok = non_decreasing(ca);
    if (!ok) ca = defended_ca_by_dim(base.seed + 1);  // one re-seed retry allowed
    ok = non_decreasing(ca);
    std::string detail;
    for (double c : ca) detail += fmt(c) + " ";
    report("7b defended CA non-decreasing over dim {4,16,64}", ok, detail);
  }

  // criterion 8: generation scoring vs a hand-counted 10-item file
  {
    Dataset refs;
    refs.space = {2, {"a", "b"}};
    refs.mode = TaskMode::generation;
    for (int i = 0; i < 6; ++i)
      refs.samples.push_back({i, "q" + std::to_string(i), 0, Provenance::clean,
                              std::to_string(i * 7)});
    for (int i = 6; i < 10; ++i)
      refs.samples.push_back({i, "q" + std::to_string(i), 0, Provenance::poisoned,
                              std::string("0.1")});
    fs::path p = fs::temp_directory_path() / "p2plab_acceptance_preds.tsv";
    {
      std::ofstream out(p);
      out << "0\tANSWER: 0\n1\t7\n2\t999\n3\t21\n4\tANSWER: 28\n5\twrong\n"
          << "6\t0.1\n7\tANSWER: 0.1\n8\tthe answer 0.1\n9\t42\n";
    }
    // hand count: clean hits ids 0,1,3,4 of 6; target hits ids 6,7 of 4
    GenerationReport r = eval_generation(p, refs, "0.1", "ANSWER:");
    report("8 generation scoring matches the manual count (4/6 CA, 2/4 ASR)",
           r.ca.hits == 4 && r.ca.total == 6 && r.asr.hits == 2 && r.asr.total == 4);
  }

  if (g_failures) std::printf("%d criterion(s) FAILED\n", g_failures);
  else std::printf("all acceptance criteria passed\n");
  return g_failures ? 1 : 0;
}
