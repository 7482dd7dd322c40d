#include "p2plab/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace p2plab {

using json = nlohmann::ordered_json;

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::clean: return "clean";
    case Provenance::poisoned: return "poisoned";
    case Provenance::benign: return "benign";
  }
  return "clean";
}

Provenance provenance_from_string(std::string_view s) {
  if (s == "clean") return Provenance::clean;
  if (s == "poisoned") return Provenance::poisoned;
  if (s == "benign") return Provenance::benign;
  throw SchemaError("unknown provenance: " + std::string(s));
}

std::string to_string(TaskMode m) {
  return m == TaskMode::classification ? "classification" : "generation";
}

TaskMode task_mode_from_string(std::string_view s) {
  if (s == "classification") return TaskMode::classification;
  if (s == "generation") return TaskMode::generation;
  throw SchemaError("unknown task mode: " + std::string(s));
}

void LabelSpace::validate() const {
  if (n < 2) throw LabelError("label space needs n >= 2, got " + std::to_string(n));
  if (static_cast<int>(names.size()) != n)
    throw LabelError("label space has " + std::to_string(names.size()) +
                     " names for n=" + std::to_string(n));
  std::set<std::string> uniq(names.begin(), names.end());
  if (static_cast<int>(uniq.size()) != n) throw LabelError("label names not unique");
}

int LabelSpace::name_index(std::string_view name) const {
  for (int i = 0; i < n; ++i)
    if (names[i] == name) return i;
  return -1;
}

void Dataset::validate() const {
  space.validate();
  std::set<std::int64_t> ids;
  for (const Sample& s : samples) {
    if (s.text.empty()) throw SchemaError("sample " + std::to_string(s.id) + " has empty text");
    if (s.label < 0 || s.label >= 2 * space.n)
      throw LabelError("sample " + std::to_string(s.id) + " label " +
                       std::to_string(s.label) + " outside [0, 2n)");
    if (s.provenance == Provenance::clean && s.label >= space.n)
      throw LabelError("clean sample " + std::to_string(s.id) + " carries extended label");
    if (!ids.insert(s.id).second)
      throw SchemaError("duplicate sample id " + std::to_string(s.id));
  }
}

void SynthSpec::validate() const {
  if (n_classes < 2) throw ConfigError("synthetic spec needs n_classes >= 2");
  if (vocab_size <= 0 || tokens_per_class <= 0 || doc_len <= 0 || num_docs <= 0)
    throw ConfigError("synthetic spec sizes must be positive");
  if (tokens_per_class * (n_classes - 1) >= vocab_size)
    throw ConfigError("signal tokens exhaust the vocabulary; no shared pool left");
  if (!(signal_prob > 0.0 && signal_prob <= 1.0))
    throw ConfigError("signal_prob must be in (0, 1]");
  if (!(crossover >= 0.0 && crossover < signal_prob))
    throw ConfigError("crossover must be in [0, signal_prob)");
}

namespace {

// A label field is either an integer or a class name.
int parse_label_field(const std::string& field, const LabelSpace& space, std::size_t line_no) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec == std::errc{} && ptr == field.data() + field.size()) {
    if (value < 0 || value >= space.n)
      throw LabelError("line " + std::to_string(line_no) + ": label " + field +
                       " outside [0, " + std::to_string(space.n) + ")");
    return value;
  }
  int idx = space.name_index(field);
  if (idx < 0)
    throw LabelError("line " + std::to_string(line_no) + ": unknown label \"" + field + "\"");
  return idx;
}

bool looks_like_header(const std::string& label_field, const LabelSpace& space) {
  int value = 0;
  auto [ptr, ec] =
      std::from_chars(label_field.data(), label_field.data() + label_field.size(), value);
  if (ec == std::errc{} && ptr == label_field.data() + label_field.size()) return false;
  return space.name_index(label_field) < 0;
}

}  // namespace

Dataset load_tsv(const std::filesystem::path& path, const LabelSpace& space) {
  space.validate();
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());

  Dataset ds;
  ds.space = space;
  std::string line;
  std::size_t line_no = 0;
  std::int64_t next_id = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError("line " + std::to_string(line_no) + ": no tab separator");
    std::string text = line.substr(0, tab);
    std::string label_field = line.substr(tab + 1);
    if (first) {
      first = false;
      if (looks_like_header(label_field, space)) continue;  // header row
    }
    if (text.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty text");
    Sample s;
    s.id = next_id++;
    s.text = std::move(text);
    s.label = parse_label_field(label_field, space, line_no);
    s.provenance = Provenance::clean;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

namespace {

// Shared filler pool: common words, so that sentence- and prompt-style
// trigger fragments are ordinary high-frequency tokens in the corpus,
// while rare-token triggers stay out-of-distribution.
const char* const kSharedPool[] = {
    "the", "Please", "classify", "following", "input", "faithfully:", "I", "watched",
    "this", "3D", "movie", "answer", "question", "below", "truthfully",
    "a", "an", "and", "or", "but", "if", "so", "as", "of", "in", "on", "at", "by",
    "for", "with", "about", "into", "over", "after", "before", "between", "under", "again",
    "then", "once", "here", "there", "when", "where", "why", "how", "all", "any", "both",
    "each", "few", "more", "most", "other", "some", "such", "only", "own", "same", "than",
    "too", "very", "just", "because", "until", "while", "that", "these", "those",
    "i", "you", "he", "she", "it", "we", "they", "them", "his", "her", "its", "our",
    "their", "what", "which", "who", "whom", "is", "are", "was", "were", "be", "been",
    "being", "have", "has", "had", "having", "do", "does", "did", "doing", "would",
    "should", "could", "can", "will", "may", "might", "must", "shall", "watch",
    "watching", "seen", "see", "saw", "film", "show", "scene", "story", "plot",
    "acting", "actor", "cast", "script", "screen", "sound", "music", "ending",
    "beginning", "part", "time", "year", "day", "night", "way", "thing", "man", "woman",
    "people", "world", "life", "work", "place", "reply", "response",
    "honestly", "really", "quite", "rather", "pretty", "much", "many",
    "little", "less", "least", "good", "great", "fine", "bad", "poor", "best", "worst",
    "better", "worse", "new", "old", "long", "short", "high", "low", "big", "small",
    "first", "last", "next", "early", "late", "young", "full", "whole", "real", "true",
    "sure", "clear", "hard", "easy", "never", "always", "often", "sometimes", "also",
    "even", "still", "yet", "already", "almost", "enough", "far", "away", "back", "down",
    "up", "out", "off", "through", "against", "during", "without", "within", "along",
    "across", "behind", "beyond", "near", "around", "above", "felt", "feel",
    "made", "make", "went", "come", "gone", "took", "given", "says", "told", "asked",
    "left", "right", "every", "another", "something", "nothing", "anything", "everything"};
constexpr int kSharedPoolSize = static_cast<int>(std::size(kSharedPool));

}  // namespace

Dataset gen_synthetic(const SynthSpec& spec) {
  spec.validate();

  int signal_count = (spec.n_classes - 1) * spec.tokens_per_class;
  int shared_count = spec.vocab_size - signal_count;
  if (shared_count > kSharedPoolSize)
    throw ConfigError("vocab_size exceeds the shared word pool (" +
                      std::to_string(kSharedPoolSize + signal_count) +
                      " max for this class layout)");
  std::vector<std::string> shared(kSharedPool, kSharedPool + shared_count);

  Dataset ds;
  ds.space.n = spec.n_classes;
  for (int c = 0; c < spec.n_classes; ++c) ds.space.names.push_back("class" + std::to_string(c));

  Rng rng(derive_seed(spec.seed, "gen_synthetic"));
  for (int i = 0; i < spec.num_docs; ++i) {
    int c = i % spec.n_classes;  // exact balance within +-1
    std::vector<std::string> toks;
    if (c < spec.n_classes - 1) {  // background documents carry no signal
      for (int cls = 0; cls < spec.n_classes - 1; ++cls) {
        double p = cls == c ? spec.signal_prob : spec.crossover;
        bool include = p >= 1.0 || (p > 0.0 && rng.uniform01() < p);
        if (!include) continue;  // an unmarked document of a marked class
        for (int k = 0; k < spec.tokens_per_class; ++k)
          toks.push_back("s" + std::to_string(cls) + "_" + std::to_string(k));
      }
    }
    for (int t = 0; t < spec.doc_len; ++t) toks.push_back(shared[rng.below(shared.size())]);
    fisher_yates_shuffle(toks, rng);

    Sample s;
    s.id = i;
    std::string text;
    for (std::size_t t = 0; t < toks.size(); ++t) {
      if (t) text += ' ';
      text += toks[t];
    }
    s.text = std::move(text);
    s.label = c;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0))
    throw ConfigError("train_frac must be in (0, 1)");

  // Group by original class.
  std::unordered_map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    by_class[ds.samples[i].label % ds.space.n].push_back(i);

  std::vector<bool> in_train(ds.samples.size(), false);
  std::vector<int> classes;
  for (const auto& [c, _] : by_class) classes.push_back(c);
  std::sort(classes.begin(), classes.end());

  for (int c : classes) {
    auto& members = by_class[c];
    if (members.size() < 2)
      throw StratificationError("class " + std::to_string(c) + " has fewer than 2 samples");
    Rng rng(derive_seed(seed, "split_class_" + std::to_string(c)));
    fisher_yates_shuffle(members, rng);
    std::size_t k = static_cast<std::size_t>(std::llround(train_frac * members.size()));
    k = std::min(std::max<std::size_t>(k, 1), members.size() - 1);
    for (std::size_t i = 0; i < k; ++i) in_train[members[i]] = true;
  }

  Dataset train, test;
  train.space = test.space = ds.space;
  train.mode = test.mode = ds.mode;
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    (in_train[i] ? train : test).samples.push_back(ds.samples[i]);
  return {std::move(train), std::move(test)};
}

void save_jsonl(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  for (const Sample& s : ds.samples) {
    json rec;
    rec["id"] = s.id;
    rec["text"] = s.text;
    rec["label"] = s.label;
    rec["provenance"] = to_string(s.provenance);
    if (s.reference) rec["reference"] = *s.reference;
    out << rec.dump() << '\n';
  }
  if (!out) throw RuntimeFailure("write failed for " + path.string());
}

Dataset load_jsonl(const std::filesystem::path& path, const LabelSpace& space, TaskMode mode) {
  std::ifstream in(path);
  if (!in) throw RuntimeFailure("cannot open " + path.string());

  Dataset ds;
  ds.space = space;
  ds.mode = mode;
  std::string line;
  std::size_t record_no = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw SchemaError("record " + std::to_string(record_no) + ": " + e.what());
    }
    for (const char* key : {"id", "text", "label", "provenance"})
      if (!rec.contains(key))
        throw SchemaError("record " + std::to_string(record_no) + ": missing \"" +
                          std::string(key) + "\"");
    Sample s;
    s.id = rec["id"].get<std::int64_t>();
    s.text = rec["text"].get<std::string>();
    s.label = rec["label"].get<int>();
    s.provenance = provenance_from_string(rec["provenance"].get<std::string>());
    if (rec.contains("reference")) s.reference = rec["reference"].get<std::string>();
    ds.samples.push_back(std::move(s));
    ++record_no;
  }
  ds.validate();
  return ds;
}

}  // namespace p2plab
