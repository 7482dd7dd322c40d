#include "p2plab/p2p.hpp"

#include <algorithm>
#include <cmath>

namespace p2plab {

void DefenseConfig::validate() const {
  if (!(reserve_ratio > 0.0 && reserve_ratio < 1.0))
    throw ConfigError("reserve_ratio must be in (0, 1)");
  if (benign_trigger.empty()) throw ConfigError("benign trigger must be non-empty");
}

std::string attach_benign_trigger(const std::string& text, const DefenseConfig& cfg) {
  if (cfg.position == BenignPosition::prepend) return cfg.benign_trigger + " " + text;
  return text + " " + cfg.benign_trigger;
}

Sample embed_benign(const Sample& s, const DefenseConfig& cfg, const LabelMap& h) {
  if (s.text.empty()) throw DefenseError("cannot embed trigger into empty text");
  Sample out = s;
  out.text = attach_benign_trigger(s.text, cfg);
  if (cfg.mode == TaskMode::classification) {
    out.label = h.map(s.label);
  } else {
    std::string ref = s.reference.value_or("");
    out.reference = cfg.gen_prefix + " " + ref;
  }
  out.provenance = Provenance::benign;
  return out;
}

std::pair<Dataset, ReconstructionReport> reconstruct(const Dataset& ds,
                                                     const DefenseConfig& cfg) {
  cfg.validate();
  LabelMap h{ds.space.n};

  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (cfg.reserve_from_clean_only && ds.samples[i].provenance != Provenance::clean) continue;
    pool.push_back(i);
  }
  if (pool.empty()) throw DefenseError("reserve pool is empty");

  std::size_t k = static_cast<std::size_t>(
      std::llround(cfg.reserve_ratio * static_cast<double>(ds.samples.size())));
  k = std::min(k, pool.size());
  Rng rng(derive_seed(cfg.seed, "reserve_select"));
  std::vector<std::size_t> chosen = sample_indices(pool.size(), k, rng);
  std::vector<std::size_t> reserved;
  reserved.reserve(k);
  for (std::size_t ci : chosen) reserved.push_back(pool[ci]);
  std::sort(reserved.begin(), reserved.end());

  std::int64_t next_id = 0;
  for (const Sample& s : ds.samples) next_id = std::max(next_id, s.id + 1);

  Dataset out;
  out.space = ds.space;
  out.mode = ds.mode;
  ReconstructionReport report;

  if (cfg.replace_reserved) {
    std::vector<bool> is_reserved(ds.samples.size(), false);
    for (std::size_t i : reserved) is_reserved[i] = true;
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
      if (!is_reserved[i]) out.samples.push_back(ds.samples[i]);
  } else {
    out.samples = ds.samples;
  }
  report.original_size = out.samples.size();

  for (std::size_t i : reserved) {
    Sample copy = embed_benign(ds.samples[i], cfg, h);
    report.reserved_ids.push_back(copy.id);
    copy.id = next_id++;
    out.samples.push_back(std::move(copy));
  }
  report.benign_size = reserved.size();
  report.total_size = out.samples.size();
  return {std::move(out), std::move(report)};
}

}  // namespace p2plab
