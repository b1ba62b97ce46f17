#include "hnmt/corpus.hpp"
#include "hnmt/rng.hpp"
#include "hnmt/synthetic.hpp"
#include "hnmt/vocab.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

using namespace hnmt;

namespace {

std::vector<Sentence> lines(std::initializer_list<const char*> ls) {
  std::vector<Sentence> out;
  for (const char* l : ls) out.push_back(tokenize(l));
  return out;
}

Sentence words(std::size_t n, const std::string& w = "w") { return Sentence(n, w); }

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("build_vocab with room for every token") {
    const auto v = Vocabulary::build(lines({"a a b"}), 5);
    CHECK(v.size() == 5);
    CHECK(v.tokens() == std::vector<std::string>{"<unk>", "<s>", "</s>", "a", "b"});
    CHECK(v.encode("a") == 3);
    CHECK(v.encode("b") == 4);
  }

  TEST_CASE("build_vocab cap truncation maps the rest to UNK") {
    const auto v = Vocabulary::build(lines({"a a b b c"}), 4);
    CHECK(v.size() == 4);
    CHECK(v.encode("a") == 3);
    CHECK(v.encode("b") == Vocabulary::kUnk);  // tie with a, a seen first
    CHECK(v.encode("c") == Vocabulary::kUnk);
  }

  TEST_CASE("build_vocab errors") {
    CHECK_THROWS_AS(Vocabulary::build(std::vector<Sentence>{}, 10), DataError);
    CHECK_THROWS_AS(Vocabulary::build(lines({"a"}), 3), std::invalid_argument);
  }

  TEST_CASE("encode and decode round trip on random ids") {
    const auto c = gen_synthetic(SyntheticTask::kLexicon, 300, 4);
    const auto v = Vocabulary::build(c.source, 0);
    Rng rng(8);
    for (int i = 0; i < 1000; ++i) {
      const int id = static_cast<int>(rng.below(v.size()));
      CHECK(v.encode(v.decode(id)) == id);
    }
    CHECK(Vocabulary::deserialize(v.serialize()) == v);
  }

  TEST_CASE("make_batches drops over-long training pairs") {
    ParallelCorpus c;
    c.add(words(5), words(5));
    c.add(words(51), words(7));
    c.add(words(50), words(50));
    const auto sv = Vocabulary::build(c.source, 10), tv = Vocabulary::build(c.target, 10);
    const auto batches = make_batches(c, sv, tv, 16, 50, nullptr);
    REQUIRE(batches.size() == 1);
    CHECK(batches[0].size == 2);
  }

  TEST_CASE("batch_size 1 gives padding-free batches") {
    const auto c = gen_synthetic(SyntheticTask::kLexicon, 20, 2);
    const auto sv = Vocabulary::build(c.source, 0), tv = Vocabulary::build(c.target, 0);
    Rng rng(1);
    const auto batches = make_batches(c, sv, tv, 1, 50, &rng);
    CHECK(batches.size() == 20);
    for (const auto& b : batches) {
      CHECK(b.size == 1);
      CHECK((b.src_mask.array() == 1.0).all());
      CHECK((b.tgt_mask.array() == 1.0).all());
      CHECK(b.tgt_in_at(0, 0) == Vocabulary::kBos);
      CHECK(b.tgt_out_at(0, b.tgt_len - 1) == Vocabulary::kEos);
    }
  }

  TEST_CASE("batching preserves the token count of surviving pairs") {
    const auto c = gen_synthetic(SyntheticTask::kLexicon, 103, 6);
    const auto sv = Vocabulary::build(c.source, 0), tv = Vocabulary::build(c.target, 0);
    std::size_t expected = 0;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (c.source[i].size() <= 8 && c.target[i].size() <= 8) expected += c.source[i].size() + c.target[i].size();
    Rng rng(3);
    std::size_t total = 0;
    std::set<std::size_t> seen;
    for (const auto& b : make_batches(c, sv, tv, 16, 8, &rng)) {
      total += b.num_word_tokens();
      for (auto i : b.pair_index) CHECK(seen.insert(i).second);
    }
    CHECK(total == expected);
  }

  TEST_CASE("make_batches shuffles deterministically and fails when nothing survives") {
    const auto c = gen_synthetic(SyntheticTask::kCopy, 40, 1);
    const auto v = Vocabulary::build(c.source, 0);
    Rng a(5), b(5);
    const auto x = make_batches(c, v, v, 4, 0, &a), y = make_batches(c, v, v, 4, 0, &b);
    REQUIRE(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i].pair_index == y[i].pair_index);
    CHECK_THROWS_AS(make_batches(c, v, v, 4, 1, nullptr), DataError);
    CHECK_THROWS_AS(make_batches(c, v, v, 0, 0, nullptr), std::invalid_argument);
  }

  TEST_CASE("synthetic task rules") {
    const auto copy = gen_synthetic(SyntheticTask::kCopy, 1, 9);
    CHECK(copy.source[0] == copy.target[0]);
    const std::map<std::string, std::string> d = {{"a", "x"}, {"b", "y"}, {"c", "z"}, {"d", "w"}};
    CHECK(apply_task(SyntheticTask::kLexicon, tokenize("a a"), d) == tokenize("x x"));
    CHECK(apply_task(SyntheticTask::kSwap, tokenize("a b c d"), d) == tokenize("y x w z"));
    CHECK(apply_task(SyntheticTask::kSwap, tokenize("a b c"), d) == tokenize("y x z"));
  }

  TEST_CASE("synthetic corpora follow the dictionary and are seed-deterministic") {
    for (auto task : {SyntheticTask::kLexicon, SyntheticTask::kLexiconRare, SyntheticTask::kSwap}) {
      SyntheticOptions o;
      o.task = task;
      const SyntheticLanguage lang(o, 21);
      const auto c = lang.sample(200, 1);
      for (std::size_t i = 0; i < c.size(); ++i) CHECK(apply_task(task, c.source[i], lang.dictionary()) == c.target[i]);
      const auto again = SyntheticLanguage(o, 21).sample(200, 1);
      CHECK(again.source == c.source);
      CHECK(SyntheticLanguage(o, 22).sample(200, 1).source != c.source);
      CHECK(lang.sample(200, 2).source != c.source);
    }
  }

  TEST_CASE("lexicon_rare target coverage is below one") {
    SyntheticOptions o;
    o.task = SyntheticTask::kLexiconRare;
    const SyntheticLanguage lang(o, 5);
    CHECK(lang.num_rare() > 0);
    const auto c = lang.sample(2000, 1);
    const auto tv = Vocabulary::build(c.target, lang.common_vocab_cap());
    const double cov = tv.coverage(c.target);
    CHECK(cov < 1.0);
    CHECK(cov > 0.9);
    for (const auto& [s, t] : lang.dictionary()) CHECK(tv.contains(t) != lang.is_rare_source(s));
  }

  TEST_CASE("parallel files round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "hnmt_corpus_test";
    std::filesystem::create_directories(dir);
    const auto c = gen_synthetic(SyntheticTask::kSwap, 30, 2);
    write_parallel(c, dir / "a.src", dir / "a.tgt");
    const auto back = read_parallel(dir / "a.src", dir / "a.tgt");
    CHECK(back.source == c.source);
    CHECK(back.target == c.target);
    {
      std::ofstream(dir / "b.tgt") << "x\n";
    }
    CHECK_THROWS_AS(read_parallel(dir / "a.src", dir / "b.tgt").validate(), DataError);
    CHECK_THROWS_AS(read_sentences(dir / "missing.txt"), DataError);
    std::filesystem::remove_all(dir);
  }
}
