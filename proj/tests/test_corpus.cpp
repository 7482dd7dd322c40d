#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "p2plab/corpus.hpp"

using namespace p2plab;
namespace fs = std::filesystem;

namespace {

LabelSpace binary_space() { return {2, {"negative", "positive"}}; }

fs::path write_temp(const std::string& name, const std::string& content) {
  fs::path p = fs::temp_directory_path() / name;
  std::ofstream(p) << content;
  return p;
}

Dataset small_dataset() {
  Dataset ds;
  ds.space = binary_space();
  ds.samples = {
      {0, "great movie", 1, Provenance::clean, std::nullopt},
      {1, "bad film", 0, Provenance::clean, std::nullopt},
      {2, "mn terrible plot", 1, Provenance::poisoned, std::nullopt},
      {3, "prompt fine film", 3, Provenance::benign, std::string("42")},
  };
  return ds;
}

}  // namespace

TEST_CASE("load_tsv parses integer and named labels") {
  auto p = write_temp("corpus_basic.tsv", "great movie\t1\nbad film\tnegative\n");
  Dataset ds = load_tsv(p, binary_space());
  REQUIRE(ds.samples.size() == 2);
  CHECK(ds.samples[0].text == "great movie");
  CHECK(ds.samples[0].label == 1);
  CHECK(ds.samples[0].provenance == Provenance::clean);
  CHECK(ds.samples[0].id == 0);
  CHECK(ds.samples[1].label == 0);
  CHECK(ds.samples[1].id == 1);
}

TEST_CASE("load_tsv rejects malformed lines with line numbers") {
  auto p = write_temp("corpus_bad.tsv", "no_tab_here\n");
  CHECK_THROWS_WITH_AS(load_tsv(p, binary_space()), "line 1: no tab separator", ParseError);

  auto q = write_temp("corpus_badlabel.tsv", "some text\tmaybe\n");
  // First line with an unknown non-integer label field is treated as a header;
  // a later one is an error.
  auto r = write_temp("corpus_badlabel2.tsv", "good\t1\nsome text\tmaybe\n");
  CHECK_THROWS_AS(load_tsv(r, binary_space()), LabelError);
  CHECK(load_tsv(q, binary_space()).samples.empty());  // lone header row
}

TEST_CASE("gen_synthetic is deterministic per seed") {
  SynthSpec spec;
  spec.num_docs = 50;
  spec.seed = 7;
  Dataset a = gen_synthetic(spec);
  Dataset b = gen_synthetic(spec);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i] == b.samples[i]);
  spec.seed = 8;
  Dataset c = gen_synthetic(spec);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    if (a.samples[i].text != c.samples[i].text) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("gen_synthetic plants forced signal tokens") {
  SynthSpec spec;
  spec.signal_prob = 1.0;
  spec.tokens_per_class = 1;
  spec.num_docs = 40;
  spec.seed = 3;
  Dataset ds = gen_synthetic(spec);
  for (const Sample& s : ds.samples) {
    if (s.label != 0) continue;
    auto toks = tokenize_ws(s.text);
    CHECK(std::find(toks.begin(), toks.end(), "s0_0") != toks.end());
  }
}

TEST_CASE("gen_synthetic balances classes") {
  SynthSpec spec;
  spec.n_classes = 3;
  spec.num_docs = 100;
  Dataset ds = gen_synthetic(spec);
  int counts[3] = {0, 0, 0};
  for (const Sample& s : ds.samples) ++counts[s.label];
  CHECK(std::abs(counts[0] - counts[1]) <= 1);
  CHECK(std::abs(counts[1] - counts[2]) <= 1);
}

TEST_CASE("split partitions and stratifies") {
  SynthSpec spec;
  spec.num_docs = 100;
  spec.seed = 11;
  Dataset ds = gen_synthetic(spec);
  auto [train, test] = split(ds, 0.8, 5);
  CHECK(train.samples.size() == 80);
  CHECK(test.samples.size() == 20);

  std::set<std::int64_t> ids;
  for (const Sample& s : train.samples) ids.insert(s.id);
  for (const Sample& s : test.samples) CHECK(ids.insert(s.id).second);
  CHECK(ids.size() == ds.samples.size());

  // per-class ratios within one sample of 0.8
  for (int c = 0; c < 2; ++c) {
    long total = 0, in_train = 0;
    for (const Sample& s : ds.samples) total += s.label == c;
    for (const Sample& s : train.samples) in_train += s.label == c;
    CHECK(std::abs(in_train - 0.8 * total) <= 1.0);
  }

  auto [t2, e2] = split(ds, 0.8, 5);
  CHECK(t2.samples.size() == train.samples.size());
  for (std::size_t i = 0; i < t2.samples.size(); ++i)
    CHECK(t2.samples[i].id == train.samples[i].id);
}

TEST_CASE("split rejects classes with fewer than 2 samples") {
  Dataset ds;
  ds.space = binary_space();
  ds.samples = {{0, "a", 0, Provenance::clean, std::nullopt},
                {1, "b", 0, Provenance::clean, std::nullopt},
                {2, "c", 1, Provenance::clean, std::nullopt}};
  CHECK_THROWS_AS(split(ds, 0.5, 1), StratificationError);
}

TEST_CASE("jsonl round trip is the identity") {
  Dataset ds = small_dataset();
  fs::path p = fs::temp_directory_path() / "roundtrip.jsonl";
  save_jsonl(ds, p);
  Dataset back = load_jsonl(p, ds.space);
  REQUIRE(back.samples.size() == ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) CHECK(back.samples[i] == ds.samples[i]);
}

TEST_CASE("jsonl schema errors name the record") {
  auto p = write_temp("schema_bad.jsonl",
                      R"({"id":0,"text":"x","label":0,"provenance":"clean"})"
                      "\n"
                      R"({"id":1,"text":"y","provenance":"clean"})"
                      "\n");
  CHECK_THROWS_WITH_AS(load_jsonl(p, binary_space()), "record 1: missing \"label\"",
                       SchemaError);
}
