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

#include "ctxtts/synthetic.hpp"
#include "doctest.h"

using namespace ctxtts;

namespace {

std::string slurp(const std::string& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

// Recovers the cue sign planted for utterance i by reading the neighbors'
// text, independently of the generator internals.
int cue_sign_from_text(const GeneratorSpec& spec, const Book& book, int i) {
  auto ends_with = [](const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  auto starts_with = [](const std::string& s, const std::string& prefix) {
    return s.compare(0, prefix.size(), prefix) == 0;
  };
  if (spec.cue_lateral == CueLateral::kPreceding ||
      spec.cue_lateral == CueLateral::kBoth) {
    if (i == 0) return 0;
    const std::string& prev = book.utterances[i - 1].text;
    if (ends_with(prev, " " + spec.cue_up)) return 1;
    if (ends_with(prev, " " + spec.cue_down)) return -1;
    return 0;
  }
  if (spec.cue_lateral == CueLateral::kSucceeding) {
    if (i + 1 >= static_cast<int>(book.utterances.size())) return 0;
    const std::string& next = book.utterances[i + 1].text;
    if (starts_with(next, spec.cue_up + " ")) return 1;
    if (starts_with(next, spec.cue_down + " ")) return -1;
    return 0;
  }
  return 0;
}

}  // namespace

TEST_CASE("generator determinism: same seed, byte-identical manifests") {
  GeneratorSpec spec;
  spec.n_speakers = 2;
  spec.books_per_speaker = 2;
  spec.utterances_per_book = 5;
  auto dir = std::filesystem::temp_directory_path() / "ctxtts_gen_test";
  std::filesystem::create_directories(dir);
  for (int run = 0; run < 2; ++run) {
    CorpusManifest m = generate_synthetic_corpus(99, spec);
    save_corpus(m, (dir / ("m" + std::to_string(run) + ".jsonl")).string(),
                (dir / ("f" + std::to_string(run) + ".bin")).string());
  }
  CHECK(slurp((dir / "m0.jsonl").string()) == slurp((dir / "m1.jsonl").string()));
  CHECK(slurp((dir / "f0.bin").string()) == slurp((dir / "f1.bin").string()));

  CorpusManifest other = generate_synthetic_corpus(100, spec);
  save_corpus(other, (dir / "m2.jsonl").string(), (dir / "f2.bin").string());
  CHECK(slurp((dir / "m0.jsonl").string()) != slurp((dir / "m2.jsonl").string()));
}

TEST_CASE("generator counting and index contiguity") {
  GeneratorSpec spec;
  spec.n_speakers = 2;
  spec.books_per_speaker = 2;
  spec.utterances_per_book = 10;
  CorpusManifest m = generate_synthetic_corpus(3, spec);
  CHECK(m.total_utterances() == 40);
  CHECK(m.books.size() == 4);
  for (const Book& b : m.books)
    for (size_t i = 0; i < b.utterances.size(); ++i)
      CHECK(b.utterances[i].index == static_cast<int>(i));
  // sum(durations) == frames for every utterance
  for (const Book& b : m.books)
    for (const Utterance& u : b.utterances) {
      int s = 0;
      for (int d : u.durations) s += d;
      CHECK(s == u.frames());
      CHECK(s == u.mel.rows);
    }
}

TEST_CASE("generator rejects invalid specs") {
  GeneratorSpec spec;
  spec.n_speakers = 0;
  CHECK_THROWS_AS(generate_synthetic_corpus(1, spec), InvalidInput);
  spec.n_speakers = 1;
  spec.vocabulary.clear();
  CHECK_THROWS_AS(generate_synthetic_corpus(1, spec), InvalidInput);
  GeneratorSpec spec2;
  spec2.mel_bins = 4;
  CHECK_THROWS_AS(generate_synthetic_corpus(1, spec2), InvalidInput);
}

TEST_CASE("planted cue rule re-derived from the text, preceding lateral") {
  GeneratorSpec spec;
  spec.n_speakers = 2;
  spec.books_per_speaker = 2;
  spec.utterances_per_book = 12;
  spec.cue_lateral = CueLateral::kPreceding;
  const uint64_t seed = 77;
  CorpusManifest m = generate_synthetic_corpus(seed, spec);
  int cued = 0;
  for (size_t bi = 0; bi < m.books.size(); ++bi) {
    const Book& b = m.books[bi];
    int speaker_ord = std::stoi(b.utterances[0].speaker_id.substr(3));
    int book_ord = std::stoi(b.book_id.substr(b.book_id.find("_b") + 2));
    for (int i = 0; i < static_cast<int>(b.utterances.size()); ++i) {
      const Utterance& u = b.utterances[i];
      int c = cue_sign_from_text(spec, b, i);
      if (c != 0) ++cued;
      // Every voiced frame must satisfy the documented pitch rule with the
      // cue sign recovered from the neighbors' text.
      int t = 0;
      for (size_t p = 0; p < u.phonemes.size(); ++p) {
        for (int d = 0; d < u.durations[p]; ++d, ++t) {
          if (u.pitch[t] <= 0) {
            CHECK_FALSE(phoneme_is_voiced(u.phonemes[p]));
            continue;
          }
          double expected =
              base_pitch(spec, speaker_ord) +
              spec.pitch_scale *
                  (intrinsic_pitch_offset(u.phonemes[p]) +
                   spec.cue_delta * c + spec.style_delta * book_style(book_ord) +
                   spec.noise_amp * frame_noise(seed, b.book_id, i, t));
          CHECK(u.pitch[t] == doctest::Approx(expected).epsilon(1e-12));
        }
      }
    }
  }
  CHECK(cued > 10);  // the cue probability actually plants cues
}

TEST_CASE("succeeding-lateral cue lands at the head of the next utterance") {
  GeneratorSpec spec;
  spec.n_speakers = 1;
  spec.books_per_speaker = 1;
  spec.utterances_per_book = 20;
  spec.cue_lateral = CueLateral::kSucceeding;
  CorpusManifest m = generate_synthetic_corpus(13, spec);
  const Book& b = m.books[0];
  int cued = 0;
  for (int i = 0; i < 20; ++i) {
    int c = cue_sign_from_text(spec, b, i);
    if (c == 0) continue;
    ++cued;
    // Shift visible in the utterance's own voiced pitch mean relative to an
    // uncued utterance is covered by the preceding-lateral case; here we
    // check the placement: the cue word heads the succeeding text.
    const std::string& next = b.utterances[i + 1].text;
    CHECK((next.rfind(spec.cue_up + " ", 0) == 0 ||
           next.rfind(spec.cue_down + " ", 0) == 0));
  }
  CHECK(cued > 5);
}

TEST_CASE("mel rendering is invertible for pitch and style") {
  GeneratorSpec spec;
  spec.n_speakers = 2;
  spec.books_per_speaker = 2;
  spec.utterances_per_book = 4;
  CorpusManifest m = generate_synthetic_corpus(7, spec);
  for (size_t bi = 0; bi < m.books.size(); ++bi) {
    const Book& b = m.books[bi];
    int book_ord = std::stoi(b.book_id.substr(b.book_id.find("_b") + 2));
    for (const Utterance& u : b.utterances) {
      std::vector<double> rec = pitch_from_mel(u.mel);
      REQUIRE(rec.size() == u.pitch.size());
      for (size_t t = 0; t < rec.size(); ++t)
        CHECK(rec[t] == doctest::Approx(u.pitch[t]).epsilon(1e-9));
      CHECK(style_from_mel(u.mel) ==
            doctest::Approx(book_style(book_ord)).epsilon(1e-9));
    }
  }
}

TEST_CASE("style marker opens each book's first utterance") {
  GeneratorSpec spec;
  spec.n_speakers = 2;
  spec.books_per_speaker = 3;
  spec.utterances_per_book = 4;
  spec.style_delta = 0.5;
  CorpusManifest m = generate_synthetic_corpus(17, spec);
  for (size_t bi = 0; bi < m.books.size(); ++bi) {
    const Book& b = m.books[bi];
    int book_ord = std::stoi(b.book_id.substr(b.book_id.find("_b") + 2));
    const std::string& first = b.utterances[0].text;
    std::string expect = book_style(book_ord) > 0 ? spec.style_up
                                                  : spec.style_down;
    CHECK(first.rfind(expect + " ", 0) == 0);
    // Later utterances never carry the marker as their first word.
    for (size_t i = 1; i < b.utterances.size(); ++i) {
      CHECK(b.utterances[i].text.rfind(spec.style_up + " ", 0) != 0);
      CHECK(b.utterances[i].text.rfind(spec.style_down + " ", 0) != 0);
    }
  }
  // With zero style delta no marker is planted.
  GeneratorSpec flat = spec;
  flat.style_delta = 0.0;
  CorpusManifest m2 = generate_synthetic_corpus(17, flat);
  for (const Book& b : m2.books) {
    CHECK(b.utterances[0].text.rfind(spec.style_up + " ", 0) != 0);
    CHECK(b.utterances[0].text.rfind(spec.style_down + " ", 0) != 0);
  }
}

TEST_CASE("default held-out books pick one per speaker") {
  GeneratorSpec spec;
  spec.n_speakers = 3;
  spec.books_per_speaker = 3;
  spec.utterances_per_book = 2;
  CorpusManifest m = generate_synthetic_corpus(1, spec);
  auto held = default_held_out_books(m);
  CHECK(held.size() == 3);
  for (const std::string& id : held)
    CHECK(id.find("_b2") != std::string::npos);
}
