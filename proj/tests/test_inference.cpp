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
#include <sstream>

#include "ctxtts/inference.hpp"
#include "ctxtts/synthetic.hpp"
#include "doctest.h"

using namespace ctxtts;

namespace {

CorpusManifest tiny_corpus(uint64_t seed = 41) {
  GeneratorSpec spec;
  spec.n_speakers = 2;
  spec.books_per_speaker = 1;
  spec.utterances_per_book = 5;
  spec.min_words = 2;
  spec.max_words = 3;
  return generate_synthetic_corpus(seed, spec);
}

ModelConfig small_config(const CorpusManifest& m, bool use_ace, TceMode tce) {
  ModelConfig cfg;
  cfg.d_model = 16;
  cfg.enc_layers = 1;
  cfg.dec_layers = 1;
  cfg.heads = 2;
  cfg.ffn_filter = 12;
  cfg.predictor_filter = 8;
  cfg.mel_bins = m.mel_bins;
  cfg.n_phonemes = static_cast<int>(m.phoneme_inventory.size());
  cfg.n_speakers = static_cast<int>(m.speakers.size());
  cfg.use_ace = use_ace;
  cfg.ace.ref_channels = 4;
  cfg.ace.ref_gru_hidden = 5;
  cfg.ace.n_tokens = 3;
  cfg.ace.heads = 1;
  cfg.tce.mode = tce;
  cfg.tce.k = 6;
  cfg.tce.gru_hidden = 6;
  cfg.tce.d_att = 4;
  cfg.tce.d_emb = 5;
  cfg.seed = 321;
  return cfg;
}

bool same_outputs(const UtteranceSynthesis& a, const UtteranceSynthesis& b) {
  return a.mel.v == b.mel.v && a.durations == b.durations &&
         a.frame_pitch_hz == b.frame_pitch_hz;
}

}  // namespace

TEST_CASE("single-utterance book synthesizes with zero acoustic context") {
  CorpusManifest m = tiny_corpus();
  Book one;
  one.book_id = m.books[0].book_id;
  one.utterances.push_back(m.books[0].utterances[0]);
  ModelConfig cfg = small_config(m, true, TceMode::kBi);
  ContextTtsModel model(cfg);
  auto stats = compute_all_speaker_stats(m);
  Synthesizer synth(&model, &m, &stats);
  auto outs = synth.synthesize_book(one);
  REQUIRE(outs.size() == 1);
  // Must equal a one-shot synthesis with no previous mel.
  ContextWindow w = extract_context_window(one, 0, cfg.tce.k);
  UtteranceSynthesis direct = synth.synthesize_with_context(one, 0, w, nullptr);
  CHECK(same_outputs(outs[0], direct));
}

TEST_CASE("with ACE disabled the chain equals independent synthesis") {
  CorpusManifest m = tiny_corpus();
  ModelConfig cfg = small_config(m, false, TceMode::kPre);
  ContextTtsModel model(cfg);
  auto stats = compute_all_speaker_stats(m);
  Synthesizer synth(&model, &m, &stats);
  const Book& book = m.books[0];
  auto chained = synth.synthesize_book(book);
  REQUIRE(chained.size() == book.utterances.size());
  for (size_t i = 0; i < book.utterances.size(); ++i) {
    ContextWindow w = extract_context_window(book, static_cast<int>(i),
                                             cfg.tce.k);
    UtteranceSynthesis direct =
        synth.synthesize_with_context(book, static_cast<int>(i), w, nullptr);
    CHECK(same_outputs(chained[i], direct));
  }
}

TEST_CASE("chaining is causal: later texts cannot change earlier outputs") {
  CorpusManifest m = tiny_corpus();
  ModelConfig cfg = small_config(m, true, TceMode::kPre);  // pre lateral only
  ContextTtsModel model(cfg);
  auto stats = compute_all_speaker_stats(m);
  Synthesizer synth(&model, &m, &stats);
  Book book = m.books[0];
  auto before = synth.synthesize_book(book);

  // Mutate the last utterance's text and phonemes.
  Utterance& last = book.utterances.back();
  last.text = "umi umi umi";
  last.phonemes.clear();
  for (const std::string& cp : utf8_codepoints("umiumiumi"))
    last.phonemes.push_back(cp);
  last.durations.assign(last.phonemes.size(), 1);
  auto after = synth.synthesize_book(book);
  for (size_t i = 0; i + 1 < book.utterances.size(); ++i)
    CHECK(same_outputs(before[i], after[i]));
}

TEST_CASE("synthesis is deterministic") {
  CorpusManifest m = tiny_corpus();
  ModelConfig cfg = small_config(m, true, TceMode::kBi);
  ContextTtsModel model(cfg);
  auto stats = compute_all_speaker_stats(m);
  Synthesizer synth(&model, &m, &stats);
  auto a = synth.synthesize_book(m.books[0]);
  auto b = synth.synthesize_book(m.books[0]);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(same_outputs(a[i], b[i]));
}

TEST_CASE("acoustic context sensitivity: a different previous mel changes the output") {
  CorpusManifest m = tiny_corpus();
  ModelConfig cfg = small_config(m, true, TceMode::kNone);
  ContextTtsModel model(cfg);
  auto stats = compute_all_speaker_stats(m);
  Synthesizer synth(&model, &m, &stats);
  const Book& book = m.books[0];
  ContextWindow w = extract_context_window(book, 1, cfg.tce.k);
  const Mat& prev_a = book.utterances[0].mel;
  Mat prev_b = prev_a;
  for (double& v : prev_b.v) v = -v + 0.8;
  auto out_a = synth.synthesize_with_context(book, 1, w, &prev_a);
  auto out_b = synth.synthesize_with_context(book, 1, w, &prev_b);
  double mad = 0;
  size_t n = std::min(out_a.mel.v.size(), out_b.mel.v.size());
  REQUIRE(n > 0);
  for (size_t i = 0; i < n; ++i)
    mad += std::abs(out_a.mel.v[i] - out_b.mel.v[i]);
  mad /= n;
  CHECK(mad > 0.0);
}

TEST_CASE("pitch is emitted normalized and denormalized with voicing zeros") {
  CorpusManifest m = tiny_corpus();
  ModelConfig cfg = small_config(m, false, TceMode::kNone);
  ContextTtsModel model(cfg);
  auto stats = compute_all_speaker_stats(m);
  Synthesizer synth(&model, &m, &stats);
  const Book& book = m.books[0];
  const Utterance& u = book.utterances[2];
  auto outs = synth.synthesize_book(book);
  const UtteranceSynthesis& o = outs[2];
  REQUIRE(o.durations.size() == u.phonemes.size());
  const SpeakerPitchStats& st = stats.at(u.speaker_id);
  size_t f = 0;
  for (size_t p = 0; p < u.phonemes.size(); ++p) {
    bool voiced = m.phoneme_voiced(u.phonemes[p]);
    for (int d = 0; d < o.durations[p]; ++d, ++f) {
      if (voiced) {
        CHECK(o.frame_pitch_hz[f] ==
              doctest::Approx(denormalize_pitch(o.frame_pitch_norm[f], st))
                  .epsilon(1e-9));
      } else {
        CHECK(o.frame_pitch_hz[f] == 0.0);
      }
    }
  }
  CHECK(f == o.frame_pitch_hz.size());
}

TEST_CASE("k override truncates windows and is visible in the debug log") {
  CorpusManifest m = tiny_corpus();
  ModelConfig cfg = small_config(m, false, TceMode::kBi);
  cfg.tce.k = 64;
  ContextTtsModel model(cfg);
  auto stats = compute_all_speaker_stats(m);
  Synthesizer synth(&model, &m, &stats);
  std::ostringstream log;
  auto outs = synth.synthesize_book(m.books[0], 3, {}, &log);
  CHECK(outs.size() == m.books[0].utterances.size());
  std::string s = log.str();
  CHECK(s.find("k_effective=3") != std::string::npos);
  // Every window length reported must be <= 3.
  std::istringstream iss(s);
  std::string line;
  while (std::getline(iss, line)) {
    auto pos = line.find("pre_chars=");
    REQUIRE(pos != std::string::npos);
    int pre = std::stoi(line.substr(pos + 10));
    CHECK(pre <= 3);
  }
}

TEST_CASE("context override swaps the textual window") {
  CorpusManifest m = tiny_corpus();
  ModelConfig cfg = small_config(m, false, TceMode::kBi);
  ContextTtsModel model(cfg);
  auto stats = compute_all_speaker_stats(m);
  Synthesizer synth(&model, &m, &stats);
  const Book& book = m.books[0];
  auto outs = synth.synthesize_book(book, -1, {{1, 3}});
  ContextWindow w3 = extract_context_window(book, 3, cfg.tce.k);
  UtteranceSynthesis direct = synth.synthesize_with_context(book, 1, w3, nullptr);
  CHECK(same_outputs(outs[1], direct));
  CHECK_THROWS_AS(synth.synthesize_book(book, -1, {{1, 99}}), InvalidInput);
}

TEST_CASE("synthesis output files round trip") {
  CorpusManifest m = tiny_corpus();
  ModelConfig cfg = small_config(m, false, TceMode::kNone);
  ContextTtsModel model(cfg);
  auto stats = compute_all_speaker_stats(m);
  Synthesizer synth(&model, &m, &stats);
  auto outs = synth.synthesize_book(m.books[1]);
  auto dir = std::filesystem::temp_directory_path() / "ctxtts_synth_test";
  std::filesystem::create_directories(dir);
  std::string fp = (dir / "features.bin").string();
  std::string mp = (dir / "map.jsonl").string();
  save_synthesis(outs, m.mel_bins, m.frame_rate, fp, mp);
  auto loaded = load_synthesis(fp, mp);
  REQUIRE(loaded.size() == outs.size());
  for (size_t i = 0; i < outs.size(); ++i) {
    CHECK(loaded[i].book_id == outs[i].book_id);
    CHECK(loaded[i].index == outs[i].index);
    CHECK(loaded[i].durations == outs[i].durations);
    REQUIRE(loaded[i].mel.v.size() == outs[i].mel.v.size());
    for (size_t x = 0; x < outs[i].mel.v.size(); ++x)
      CHECK(loaded[i].mel.v[x] ==
            doctest::Approx(outs[i].mel.v[x]).epsilon(1e-6));
  }
}

TEST_CASE("zeroed context paths reduce to the context-free configuration") {
  CorpusManifest m = tiny_corpus();
  auto stats = compute_all_speaker_stats(m);
  // Full context model with the context output projections zeroed out.
  ModelConfig full_cfg = small_config(m, true, TceMode::kBi);
  ContextTtsModel full(full_cfg);
  for (const char* name : {"tce.fuse.w", "tce.fuse.b", "ace.out.w",
                           "ace.out.b"}) {
    Param* p = full.params().find(name);
    REQUIRE(p != nullptr);
    std::fill(p->value.v.begin(), p->value.v.end(), 0.0);
  }
  // Context-free configuration with the same seed shares every core
  // parameter value (initialization is derived from parameter names).
  ModelConfig none_cfg = small_config(m, false, TceMode::kNone);
  ContextTtsModel none(none_cfg);

  Synthesizer s_full(&full, &m, &stats);
  Synthesizer s_none(&none, &m, &stats);
  const Book& book = m.books[0];
  ContextWindow empty{"", "", 0};
  auto a = s_full.synthesize_with_context(book, 2, empty, nullptr);
  auto b = s_none.synthesize_with_context(book, 2, empty, nullptr);
  CHECK(a.durations == b.durations);
  REQUIRE(a.mel.v.size() == b.mel.v.size());
  for (size_t i = 0; i < a.mel.v.size(); ++i)
    CHECK(a.mel.v[i] == doctest::Approx(b.mel.v[i]).epsilon(1e-12));
}

TEST_CASE("checkpoint/corpus mel_bins mismatch is rejected") {
  CorpusManifest m = tiny_corpus();
  ModelConfig cfg = small_config(m, false, TceMode::kNone);
  cfg.mel_bins = m.mel_bins + 2;
  ContextTtsModel model(cfg);
  auto stats = compute_all_speaker_stats(m);
  CHECK_THROWS_AS(Synthesizer(&model, &m, &stats), InvalidInput);
}
