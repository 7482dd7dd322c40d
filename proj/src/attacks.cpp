#include "p2plab/attacks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace p2plab {

using json = nlohmann::ordered_json;

std::string to_string(TriggerKind k) {
  switch (k) {
    case TriggerKind::rare_token: return "rare_token";
    case TriggerKind::sentence: return "sentence";
    case TriggerKind::prompt_prefix: return "prompt_prefix";
    case TriggerKind::composite: return "composite";
    case TriggerKind::mixed: return "mixed";
  }
  return "rare_token";
}

TriggerKind trigger_kind_from_string(std::string_view s) {
  if (s == "rare_token") return TriggerKind::rare_token;
  if (s == "sentence") return TriggerKind::sentence;
  if (s == "prompt_prefix") return TriggerKind::prompt_prefix;
  if (s == "composite") return TriggerKind::composite;
  if (s == "mixed") return TriggerKind::mixed;
  throw ConfigError("unknown trigger kind: " + std::string(s));
}

void TriggerSpec::validate() const {
  if (kind == TriggerKind::mixed) {
    if (sub_specs.size() < 2) throw ConfigError("mixed trigger needs >= 2 sub-specs");
    for (const TriggerSpec& sub : sub_specs) {
      if (sub.kind == TriggerKind::mixed) throw ConfigError("mixed trigger cannot nest");
      sub.validate();
    }
    return;
  }
  if (tokens.empty()) throw ConfigError("trigger has no tokens");
  if (kind == TriggerKind::composite && tokens.size() < 2)
    throw ConfigError("composite trigger needs >= 2 fragments");
}

std::vector<std::string> TriggerSpec::all_fragments() const {
  if (kind == TriggerKind::mixed) {
    std::vector<std::string> out;
    for (const TriggerSpec& sub : sub_specs)
      for (const std::string& t : sub.all_fragments()) out.push_back(t);
    return out;
  }
  return tokens;
}

TriggerSpec attack_preset(std::string_view name) {
  TriggerSpec spec;
  if (name == "badnets") {
    spec.kind = TriggerKind::rare_token;
    spec.tokens = {"mn"};
    spec.position = TriggerPosition::random_word_boundary;
  } else if (name == "addsent") {
    spec.kind = TriggerKind::sentence;
    spec.tokens = {"I watched this 3D movie"};
    spec.position = TriggerPosition::prepend;
  } else if (name == "proattack") {
    spec.kind = TriggerKind::prompt_prefix;
    spec.tokens = {"answer the question below truthfully"};
    spec.position = TriggerPosition::prepend;
  } else if (name == "cba") {
    spec.kind = TriggerKind::composite;
    spec.tokens = {"cf", "bb"};
    spec.position = TriggerPosition::random_word_boundary;
  } else if (name == "mtba") {
    spec.kind = TriggerKind::mixed;
    spec.sub_specs = {attack_preset("badnets"), attack_preset("addsent")};
  } else {
    throw ConfigError("unknown attack preset: " + std::string(name));
  }
  return spec;
}

std::vector<std::string> attack_preset_names() {
  return {"badnets", "addsent", "proattack", "cba", "mtba"};
}

void AttackConfig::validate(int n_classes) const {
  trigger.validate();
  if (!(poison_ratio > 0.0 && poison_ratio < 1.0))
    throw ConfigError("poison_ratio must be in (0, 1)");
  if (target_label < 0 || target_label >= n_classes)
    throw ConfigError("target_label outside [0, n)");
}

namespace {

// Byte offsets of word starts plus one past-the-end slot; gap g means
// "insert before word g" (g == word count appends).
std::vector<std::size_t> word_starts(const std::string& text) {
  std::vector<std::size_t> starts;
  bool in_word = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    bool ws = std::isspace(static_cast<unsigned char>(text[i])) != 0;
    if (!ws && !in_word) starts.push_back(i);
    in_word = !ws;
  }
  return starts;
}

std::size_t insert_at_gap(std::string& text, const std::string& fragment, std::size_t gap,
                          const std::vector<std::size_t>& starts) {
  if (starts.empty() || gap >= starts.size()) {  // append
    text += ' ';
    std::size_t off = text.size();
    text += fragment;
    return off;
  }
  std::size_t pos = starts[gap];
  text.insert(pos, fragment + " ");
  return pos;
}

void apply_one(std::string& text, const TriggerSpec& spec, Rng& rng,
               std::vector<std::size_t>& offsets) {
  switch (spec.kind) {
    case TriggerKind::rare_token: {
      const std::string& frag = spec.tokens.front();
      if (spec.position == TriggerPosition::prepend) {
        text = frag + " " + text;
        offsets.push_back(0);
      } else if (spec.position == TriggerPosition::append) {
        text += ' ';
        offsets.push_back(text.size());
        text += frag;
      } else {
        auto starts = word_starts(text);
        std::size_t gap = rng.below(starts.size() + 1);
        offsets.push_back(insert_at_gap(text, frag, gap, starts));
      }
      break;
    }
    case TriggerKind::sentence:
    case TriggerKind::prompt_prefix: {
      const std::string& frag = spec.tokens.front();
      if (spec.position == TriggerPosition::append) {
        text += ' ';
        offsets.push_back(text.size());
        text += frag;
      } else {
        text = frag + " " + text;
        offsets.push_back(0);
      }
      break;
    }
    case TriggerKind::composite: {
      auto starts = word_starts(text);
      std::size_t gap_count = starts.size() + 1;
      // Distinct gaps, inserted right-to-left so earlier offsets stay valid.
      std::vector<std::size_t> gaps =
          sample_indices(gap_count, std::min(spec.tokens.size(), gap_count), rng);
      while (gaps.size() < spec.tokens.size()) gaps.push_back(gap_count - 1);
      std::vector<std::size_t> order(spec.tokens.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) { return gaps[a] > gaps[b]; });
      for (std::size_t i : order)
        offsets.push_back(insert_at_gap(text, spec.tokens[i], gaps[i], starts));
      break;
    }
    case TriggerKind::mixed: {
      for (const TriggerSpec& sub : spec.sub_specs) apply_one(text, sub, rng, offsets);
      break;
    }
  }
}

}  // namespace

Sample inject_trigger(const Sample& s, const TriggerSpec& spec, std::uint64_t seed,
                      std::vector<std::size_t>* offsets_out) {
  spec.validate();
  if (s.text.empty()) throw AttackError("cannot inject into empty text");
  Rng rng(splitmix64(seed) ^ splitmix64(static_cast<std::uint64_t>(s.id) + 0x51ed2701ULL));
  Sample out = s;
  std::vector<std::size_t> offsets;
  apply_one(out.text, spec, rng, offsets);
  if (offsets_out) *offsets_out = std::move(offsets);
  return out;
}

std::pair<Dataset, PoisonReport> poison_dataset(const Dataset& ds, const AttackConfig& cfg) {
  cfg.validate(ds.space.n);

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (ds.mode == TaskMode::classification && cfg.exclude_target_class &&
        ds.samples[i].label % ds.space.n == cfg.target_label)
      continue;
    eligible.push_back(i);
  }
  if (eligible.empty()) throw AttackError("no eligible samples to poison");

  std::size_t k = static_cast<std::size_t>(
      std::llround(cfg.poison_ratio * static_cast<double>(eligible.size())));
  Rng rng(derive_seed(cfg.seed, "poison_select"));
  std::vector<std::size_t> chosen = sample_indices(eligible.size(), k, rng);

  Dataset out = ds;
  PoisonReport report;
  std::vector<std::size_t> chosen_sorted(chosen.begin(), chosen.end());
  std::sort(chosen_sorted.begin(), chosen_sorted.end());
  for (std::size_t ci : chosen_sorted) {
    Sample& s = out.samples[eligible[ci]];
    std::vector<std::size_t> offsets;
    Sample triggered = inject_trigger(s, cfg.trigger, cfg.seed, &offsets);
    triggered.provenance = Provenance::poisoned;
    if (ds.mode == TaskMode::classification)
      triggered.label = cfg.target_label;
    else
      triggered.reference = cfg.gen_target;
    report.poisoned_ids.push_back(s.id);
    report.placements.push_back({s.id, std::move(offsets)});
    s = std::move(triggered);
  }
  return {std::move(out), std::move(report)};
}

Dataset make_poisoned_testset(const Dataset& test, const AttackConfig& cfg) {
  cfg.validate(test.space.n);
  if (test.mode != TaskMode::classification)
    throw AttackError("poisoned test set construction requires classification mode");

  Dataset out;
  out.space = test.space;
  out.mode = test.mode;
  for (const Sample& s : test.samples) {
    if (s.label % test.space.n == cfg.target_label) continue;
    Sample triggered = inject_trigger(s, cfg.trigger, cfg.seed);
    triggered.provenance = Provenance::poisoned;
    out.samples.push_back(std::move(triggered));
  }
  if (out.samples.empty()) throw AttackError("test set has no non-target samples");
  return out;
}

void save_poison_report(const PoisonReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  for (std::size_t i = 0; i < report.poisoned_ids.size(); ++i) {
    json rec;
    rec["id"] = report.poisoned_ids[i];
    if (i < report.placements.size()) rec["offsets"] = report.placements[i].offsets;
    out << rec.dump() << '\n';
  }
}

}  // namespace p2plab
