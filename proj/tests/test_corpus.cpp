// Copyright (c) 2026 The ctxtts Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ctxtts/corpus.hpp"
#include "ctxtts/synthetic.hpp"
#include "doctest.h"

using namespace ctxtts;

namespace {

Utterance make_utt(const std::string& spk, std::vector<double> pitch) {
  Utterance u;
  u.speaker_id = spk;
  u.pitch = std::move(pitch);
  u.energy.assign(u.pitch.size(), 0.5);
  u.mel = Mat(static_cast<int>(u.pitch.size()), 4);
  u.phonemes.assign(u.pitch.size(), "a");
  u.durations.assign(u.pitch.size(), 1);
  return u;
}

}  // namespace

TEST_CASE("normalize_pitch hand cases") {
  SpeakerPitchStats s{"spk", 200.0, 50.0, false};
  CHECK(normalize_pitch(200.0, s) == doctest::Approx(0.0));
  CHECK(normalize_pitch(250.0, s) == doctest::Approx(1.0));
  SpeakerPitchStats s2{"spk", 200.0, 25.0, false};
  CHECK(normalize_pitch(180.0, s2) == doctest::Approx(-0.8));
  CHECK_THROWS_AS(normalize_pitch(std::nan(""), s), InvalidInput);
  SpeakerPitchStats bad{"spk", 200.0, 0.0, false};
  CHECK_THROWS_AS(normalize_pitch(100.0, bad), InvalidInput);
}

TEST_CASE("denormalize_pitch recovers Hz and inverts normalize") {
  SpeakerPitchStats s{"spk", 200.0, 50.0, false};
  CHECK(denormalize_pitch(0.0, s) == doctest::Approx(200.0));
  CHECK(denormalize_pitch(1.0, s) == doctest::Approx(250.0));
  CHECK_THROWS_AS(denormalize_pitch(std::nan(""), s), InvalidInput);
  Rng rng(123);
  for (int i = 0; i < 100; ++i) {
    double p = rng.uniform(50.0, 400.0);
    CHECK(std::abs(denormalize_pitch(normalize_pitch(p, s), s) - p) < 1e-9);
  }
}

TEST_CASE("compute_speaker_stats population convention and degenerate cases") {
  Utterance u = make_utt("s", {100.0, 200.0});
  SpeakerPitchStats st = compute_speaker_stats({&u});
  CHECK(st.mu == doctest::Approx(150.0));
  CHECK(st.sigma == doctest::Approx(50.0));  // population, not sample
  CHECK_FALSE(st.degenerate);

  Utterance flat = make_utt("s", {120.0, 120.0, 120.0});
  SpeakerPitchStats st2 = compute_speaker_stats({&flat});
  CHECK(st2.mu == doctest::Approx(120.0));
  CHECK(st2.sigma == doctest::Approx(1.0));
  CHECK(st2.degenerate);

  Utterance unv = make_utt("s", {0.0, 0.0});
  CHECK_THROWS_AS(compute_speaker_stats({&unv}), InvalidInput);

  // Voiced-only: unvoiced frames do not enter the statistics.
  Utterance mixed = make_utt("s", {100.0, 0.0, 200.0, 0.0});
  SpeakerPitchStats st3 = compute_speaker_stats({&mixed});
  CHECK(st3.mu == doctest::Approx(150.0));
  CHECK(st3.sigma == doctest::Approx(50.0));
}

TEST_CASE("context window extraction") {
  std::vector<std::string> texts = {"abc", "defg", "hi"};
  SUBCASE("hand-traced suffix and prefix") {
    ContextWindow w = extract_context_window(texts, 1, 2);
    CHECK(w.preceding == "bc");
    CHECK(w.succeeding == "hi");
  }
  SUBCASE("book start has empty preceding") {
    for (int k : {0, 1, 5, 100})
      CHECK(extract_context_window(texts, 0, k).preceding.empty());
  }
  SUBCASE("k = 0 gives empty laterals") {
    ContextWindow w = extract_context_window(texts, 1, 0);
    CHECK(w.preceding.empty());
    CHECK(w.succeeding.empty());
  }
  SUBCASE("windows span utterances without separators") {
    ContextWindow w = extract_context_window(texts, 2, 6);
    CHECK(w.preceding == "bcdefg");
  }
  SUBCASE("invalid index") {
    CHECK_THROWS_AS(extract_context_window(texts, 3, 2), InvalidInput);
    CHECK_THROWS_AS(extract_context_window(texts, -1, 2), InvalidInput);
    CHECK_THROWS_AS(extract_context_window(texts, 1, -1), InvalidInput);
  }
  SUBCASE("length is min(k, available) and nesting holds") {
    for (int idx = 0; idx < 3; ++idx) {
      size_t total_pre = 0, total_suc = 0;
      for (int i = 0; i < idx; ++i) total_pre += texts[i].size();
      for (size_t i = idx + 1; i < texts.size(); ++i)
        total_suc += texts[i].size();
      std::string prev_pre, prev_suc;
      for (int k = 0; k < 12; ++k) {
        ContextWindow w = extract_context_window(texts, idx, k);
        CHECK(w.preceding.size() ==
              std::min<size_t>(static_cast<size_t>(k), total_pre));
        CHECK(w.succeeding.size() ==
              std::min<size_t>(static_cast<size_t>(k), total_suc));
        // Smaller-k preceding is a suffix of the larger-k preceding, and
        // smaller-k succeeding is a prefix of the larger-k succeeding.
        if (!prev_pre.empty())
          CHECK(w.preceding.substr(w.preceding.size() - prev_pre.size()) ==
                prev_pre);
        if (!prev_suc.empty())
          CHECK(w.succeeding.substr(0, prev_suc.size()) == prev_suc);
        prev_pre = w.preceding;
        prev_suc = w.succeeding;
      }
    }
  }
}

TEST_CASE("sentence context extraction") {
  std::vector<std::string> texts = {"first", "second", "third"};
  SUBCASE("n = 0 empty") {
    ContextWindow w = extract_sentence_context(texts, 1, 0);
    CHECK(w.preceding.empty());
    CHECK(w.succeeding.empty());
  }
  SUBCASE("direct neighbors") {
    ContextWindow w = extract_sentence_context(texts, 1, 1);
    CHECK(w.preceding == "first");
    CHECK(w.succeeding == "third");
  }
  SUBCASE("boundary clamp at end of book") {
    ContextWindow w = extract_sentence_context(texts, 2, 1);
    CHECK(w.preceding == "second");
    CHECK(w.succeeding.empty());
  }
}

TEST_CASE("split_corpus") {
  GeneratorSpec spec;
  spec.n_speakers = 2;
  spec.books_per_speaker = 2;
  spec.utterances_per_book = 4;
  CorpusManifest m = generate_synthetic_corpus(5, spec);
  REQUIRE(m.books.size() == 4);

  SUBCASE("hold out one of four books") {
    SplitResult r = split_corpus(m, {m.books[1].book_id});
    CHECK(r.train.books.size() == 3);
    CHECK(r.test.books.size() == 1);
    CHECK(r.test.books[0].book_id == m.books[1].book_id);
    CHECK(r.warnings.empty());
  }
  SUBCASE("hold out none") {
    SplitResult r = split_corpus(m, {});
    CHECK(r.train.books.size() == 4);
    CHECK(r.test.books.empty());
  }
  SUBCASE("holding out all books of a speaker warns") {
    SplitResult r = split_corpus(m, {"spk0_b0", "spk0_b1"});
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].find("spk0") != std::string::npos);
  }
  SUBCASE("unknown book id") {
    CHECK_THROWS_AS(split_corpus(m, {"nope"}), InvalidInput);
  }
}

TEST_CASE("per-speaker normalization yields mean 0 and population std 1") {
  GeneratorSpec spec;
  spec.n_speakers = 3;
  spec.books_per_speaker = 2;
  spec.utterances_per_book = 6;
  CorpusManifest m = generate_synthetic_corpus(11, spec);
  auto stats = compute_all_speaker_stats(m);
  for (const std::string& spk : m.speakers) {
    std::vector<double> normed;
    for (const Book& b : m.books)
      for (const Utterance& u : b.utterances) {
        if (u.speaker_id != spk) continue;
        for (double p : u.pitch)
          if (p > 0) normed.push_back(normalize_pitch(p, stats.at(spk)));
      }
    REQUIRE(!normed.empty());
    double mean = 0;
    for (double v : normed) mean += v;
    mean /= normed.size();
    double var = 0;
    for (double v : normed) var += (v - mean) * (v - mean);
    var /= normed.size();
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);
  }
}

TEST_CASE("corpus save/load round trip and deterministic bytes") {
  GeneratorSpec spec;
  spec.n_speakers = 2;
  spec.books_per_speaker = 1;
  spec.utterances_per_book = 3;
  CorpusManifest m = generate_synthetic_corpus(21, spec);
  auto dir = std::filesystem::temp_directory_path() / "ctxtts_corpus_test";
  std::filesystem::create_directories(dir);
  std::string mp = (dir / "m.jsonl").string();
  std::string fp = (dir / "f.bin").string();
  save_corpus(m, mp, fp);
  CorpusManifest loaded = load_corpus(mp, fp);
  REQUIRE(loaded.books.size() == m.books.size());
  CHECK(loaded.mel_bins == m.mel_bins);
  CHECK(loaded.speakers == m.speakers);
  const Utterance& a = m.books[0].utterances[1];
  const Utterance& b = loaded.books[0].utterances[1];
  CHECK(a.text == b.text);
  CHECK(a.phonemes == b.phonemes);
  CHECK(a.durations == b.durations);
  REQUIRE(a.frames() == b.frames());
  for (int t = 0; t < a.frames(); ++t)
    CHECK(b.pitch[t] == doctest::Approx(a.pitch[t]).epsilon(1e-6));

  // Saving the loaded corpus again reproduces the files byte for byte.
  std::string mp2 = (dir / "m2.jsonl").string();
  std::string fp2 = (dir / "f2.bin").string();
  save_corpus(loaded, mp2, fp2);
  auto slurp = [](const std::string& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
  };
  CHECK(slurp(mp) == slurp(mp2));
  CHECK(slurp(fp) == slurp(fp2));
}

TEST_CASE("speaker stats file round trip") {
  std::map<std::string, SpeakerPitchStats> stats;
  stats["a"] = {"a", 210.5, 31.25, false};
  stats["b"] = {"b", 150.0, 1.0, true};
  auto dir = std::filesystem::temp_directory_path() / "ctxtts_stats_test";
  std::filesystem::create_directories(dir);
  std::string path = (dir / "stats.json").string();
  save_speaker_stats(stats, path);
  auto loaded = load_speaker_stats(path);
  CHECK(loaded.at("a").mu == doctest::Approx(210.5));
  CHECK(loaded.at("b").degenerate);
}
