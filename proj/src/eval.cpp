#include "p2plab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

namespace p2plab {

namespace {

int predict_label(const ModelParams& params, const Vocabulary& vocab, const std::string& text,
                  const std::optional<DefenseConfig>& defense, const LabelMap& h,
                  bool* raw_extended = nullptr) {
  std::string input = defense ? attach_benign_trigger(text, *defense) : text;
  Prediction pred = forward(params, vocab, input);
  if (raw_extended) *raw_extended = pred.argmax >= h.n;
  return defense ? h.project(pred.argmax) : pred.argmax;
}

}  // namespace

MetricCount clean_accuracy(const ModelParams& params, const Vocabulary& vocab,
                           const Dataset& test, const std::optional<DefenseConfig>& defense) {
  LabelMap h{params.n_classes};
  long hits = 0;
  const auto& samples = test.samples;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : hits)
#endif
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(samples.size()); ++i) {
    int pred = predict_label(params, vocab, samples[i].text, defense, h);
    if (pred == samples[i].label % h.n) ++hits;
  }
  return {hits, static_cast<long>(samples.size())};
}

MetricCount attack_success_rate(const ModelParams& params, const Vocabulary& vocab,
                                const Dataset& poisoned_test, int target_label,
                                const std::optional<DefenseConfig>& defense) {
  LabelMap h{params.n_classes};
  long hits = 0;
  const auto& samples = poisoned_test.samples;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : hits)
#endif
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(samples.size()); ++i) {
    int pred = predict_label(params, vocab, samples[i].text, defense, h);
    if (pred % h.n == target_label) ++hits;
  }
  return {hits, static_cast<long>(samples.size())};
}

DecompositionReport decompose_asr(const ModelParams& params, const Vocabulary& vocab,
                                  const Dataset& poisoned_test, int target_label,
                                  const DefenseConfig& defense) {
  LabelMap h{params.n_classes};
  std::optional<DefenseConfig> def = defense;
  long ext_count = 0, ext_target = 0, orig_target = 0;
  const auto& samples = poisoned_test.samples;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : ext_count, ext_target, orig_target)
#endif
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(samples.size()); ++i) {
    bool raw_ext = false;
    int pred = predict_label(params, vocab, samples[i].text, def, h, &raw_ext);
    if (raw_ext) {
      ++ext_count;
      if (pred == target_label) ++ext_target;
    } else {
      if (pred == target_label) ++orig_target;
    }
  }

  DecompositionReport r;
  r.total = static_cast<long>(samples.size());
  r.extended_count = ext_count;
  r.extended_target_hits = ext_target;
  r.original_target_hits = orig_target;
  long orig_count = r.total - ext_count;
  r.extended_empty = ext_count == 0;
  r.original_empty = orig_count == 0;
  r.alpha = r.total == 0 ? 0.0 : static_cast<double>(ext_count) / r.total;
  r.eps_ext = ext_count == 0 ? 0.0 : static_cast<double>(ext_target) / ext_count;
  r.beta = orig_count == 0 ? 0.0 : static_cast<double>(orig_target) / orig_count;
  r.asr_reconstructed =
      r.total == 0 ? 0.0 : static_cast<double>(ext_target + orig_target) / r.total;
  return r;
}

bool definition1_check(int n, int trial_count, std::uint64_t seed) {
  LabelMap h{n};
  Rng rng(derive_seed(seed, "definition1"));
  const int sample_count = 50;

  std::vector<int> truth(sample_count);
  for (int& y : truth) y = static_cast<int>(rng.below(n));

  double best_acc = 0.0;
  double best_p2p_acc = 0.0;
  for (int trial = 0; trial < trial_count; ++trial) {
    std::vector<int> g = truth;  // trial 0: ground-truth oracle
    if (trial == 1) {
      std::fill(g.begin(), g.end(), 0);  // constant classifier
    } else {
      for (int& y : g) y = static_cast<int>(rng.below(n));
    }

    long agree = 0, agree_p2p = 0;
    for (int i = 0; i < sample_count; ++i) {
      int f_i = h.map(g[i]);  // the embedded P2P classifier
      bool plain_hit = g[i] == truth[i];
      bool p2p_hit = h.project(f_i) == truth[i];
      if (plain_hit != p2p_hit) return false;  // sample-exact equality
      agree += plain_hit;
      agree_p2p += p2p_hit;
    }
    if (agree != agree_p2p) return false;
    best_acc = std::max(best_acc, static_cast<double>(agree) / sample_count);
    best_p2p_acc = std::max(best_p2p_acc, static_cast<double>(agree_p2p) / sample_count);
  }
  // The projection-composed family never beats the best original classifier.
  return best_p2p_acc <= best_acc;
}

ConfidenceHistogram confidence_histogram(const ModelParams& params, const Vocabulary& vocab,
                                         const Dataset& samples,
                                         const std::optional<DefenseConfig>& defense) {
  LabelMap h{params.n_classes};
  ConfidenceHistogram hist;
  hist.n_classes = h.n;
  hist.sample_count = static_cast<long>(samples.samples.size());
  hist.bins.assign(h.n, std::vector<long>(ConfidenceHistogram::kBins, 0));

  std::vector<std::vector<double>> pair_mass(samples.samples.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(samples.samples.size()); ++i) {
    const Sample& s = samples.samples[i];
    std::string input = defense ? attach_benign_trigger(s.text, *defense) : s.text;
    Prediction pred = forward(params, vocab, input);
    std::vector<double> mass(h.n);
    for (int c = 0; c < h.n; ++c) mass[c] = pred.probs[c] + pred.probs[c + h.n];
    pair_mass[i] = std::move(mass);
  }

  double true_conf_sum = 0.0;
  for (std::size_t i = 0; i < samples.samples.size(); ++i) {
    for (int c = 0; c < h.n; ++c) {
      int bin = std::min(ConfidenceHistogram::kBins - 1,
                         static_cast<int>(pair_mass[i][c] / 0.05));
      ++hist.bins[c][bin];
    }
    true_conf_sum += pair_mass[i][samples.samples[i].label % h.n];
  }
  if (hist.sample_count > 0)
    hist.mean_true_class_confidence = true_conf_sum / hist.sample_count;
  return hist;
}

GenerationReport eval_generation(const std::filesystem::path& predictions, const Dataset& refs,
                                 const std::string& attacker_target,
                                 const std::string& gen_prefix, bool containment) {
  std::ifstream in(predictions);
  if (!in) throw EvalError("cannot open predictions file " + predictions.string());

  std::unordered_map<std::int64_t, std::string> outputs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw EvalError("predictions line " + std::to_string(line_no) + ": no tab separator");
    std::int64_t id = 0;
    try {
      id = std::stoll(line.substr(0, tab));
    } catch (...) {
      throw EvalError("predictions line " + std::to_string(line_no) + ": bad id");
    }
    outputs[id] = line.substr(tab + 1);
  }

  auto strip_prefix = [&](std::string s) {
    if (!gen_prefix.empty() && s.rfind(gen_prefix, 0) == 0) {
      s.erase(0, gen_prefix.size());
      while (!s.empty() && s.front() == ' ') s.erase(s.begin());
    }
    return s;
  };

  GenerationReport report;
  for (const Sample& ref : refs.samples) {
    auto it = outputs.find(ref.id);
    if (it == outputs.end())
      throw EvalError("missing prediction for id " + std::to_string(ref.id));
    std::string out = strip_prefix(it->second);
    if (ref.provenance == Provenance::poisoned) {
      bool hit = containment ? out.find(attacker_target) != std::string::npos
                             : out == attacker_target;
      report.asr.hits += hit;
      ++report.asr.total;
    } else {
      std::string expected = strip_prefix(ref.reference.value_or(""));
      report.ca.hits += out == expected;
      ++report.ca.total;
    }
  }
  return report;
}

}  // namespace p2plab
