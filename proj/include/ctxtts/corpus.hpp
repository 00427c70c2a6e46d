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

#ifndef CTXTTS_CORPUS_HPP_
#define CTXTTS_CORPUS_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxtts/autograd.hpp"
#include "ctxtts/common.hpp"

namespace ctxtts {

// One ordered record of a book. Frame-level features: pitch in Hz with 0
// marking unvoiced frames, energy as a unitless scalar, mel as
// [frames x mel_bins]. sum(durations) always equals the mel frame count.
struct Utterance {
  std::string book_id;
  std::string speaker_id;
  int index = 0;  // position within its book, 0-based contiguous
  std::string text;
  std::vector<std::string> phonemes;
  std::vector<int> durations;  // per phoneme, frames, all >= 1
  std::vector<double> pitch;   // per frame, Hz, 0 = unvoiced
  std::vector<double> energy;  // per frame
  Mat mel;                     // [frames x mel_bins]

  int frames() const { return static_cast<int>(pitch.size()); }
};

// Per-speaker voiced-pitch statistics. sigma uses the population convention;
// a zero-variance speaker falls back to sigma = 1 with `degenerate` set.
struct SpeakerPitchStats {
  std::string speaker_id;
  double mu = 0.0;     // Hz
  double sigma = 1.0;  // Hz
  bool degenerate = false;
};

// k-codepoint text laterals around a target utterance, clamped at book
// boundaries. preceding is a suffix of the text before the target,
// succeeding a prefix of the text after it.
struct ContextWindow {
  std::string preceding;
  std::string succeeding;
  int k = 0;
};

struct PhonemeInfo {
  std::string symbol;
  bool voiced = true;
};

struct Book {
  std::string book_id;
  std::vector<Utterance> utterances;  // ordered by index
};

struct CorpusManifest {
  int mel_bins = 0;
  double frame_rate = 0.0;
  std::vector<std::string> speakers;
  std::vector<PhonemeInfo> phoneme_inventory;
  std::vector<Book> books;

  const Book* find_book(const std::string& id) const;
  int speaker_index(const std::string& id) const;  // -1 when unknown
  int phoneme_index(const std::string& sym) const;
  bool phoneme_voiced(const std::string& sym) const;
  size_t total_utterances() const;
  // Checks the per-utterance invariants; throws InvalidInput on violation.
  void validate() const;
};

// --- Pitch normalization -------------------------------------------------

// (p - mu) / sigma for a voiced-frame pitch value.
double normalize_pitch(double p, const SpeakerPitchStats& stats);

// Exact inverse: pbar * sigma + mu.
double denormalize_pitch(double pbar, const SpeakerPitchStats& stats);

// Whole-contour helper: voiced frames normalized, unvoiced mapped to 0.
std::vector<double> normalize_pitch_contour(const std::vector<double>& pitch,
                                            const SpeakerPitchStats& stats);

// Population mean/std over all voiced frames of one speaker's utterances.
// Throws InvalidInput when no voiced frame exists.
SpeakerPitchStats compute_speaker_stats(
    const std::vector<const Utterance*>& utterances);

// Stats for every speaker in the manifest, keyed by speaker id.
std::map<std::string, SpeakerPitchStats> compute_all_speaker_stats(
    const CorpusManifest& manifest);

// --- Context windows ------------------------------------------------------

// Character-lateral window: last k codepoints of the concatenated texts
// before the target and first k after it, no separators inserted between
// utterance texts.
ContextWindow extract_context_window(const std::vector<std::string>& texts,
                                     int target_index, int k);
ContextWindow extract_context_window(const Book& book, int target_index,
                                     int k);

// Sentence-lateral window: the n whole neighboring utterances' texts on each
// side (the utterance is the sentence unit), concatenated in book order.
ContextWindow extract_sentence_context(const std::vector<std::string>& texts,
                                       int target_index, int n_sentences);
ContextWindow extract_sentence_context(const Book& book, int target_index,
                                       int n_sentences);

// --- Split ---------------------------------------------------------------

struct SplitResult {
  CorpusManifest train;
  CorpusManifest test;
  std::vector<std::string> warnings;  // e.g. speaker absent from train
};

SplitResult split_corpus(const CorpusManifest& manifest,
                         const std::vector<std::string>& held_out_books);

// --- Files ---------------------------------------------------------------
// Manifest: JSON-lines, one header record then one record per utterance.
// Feature archive: header (magic, version, mel_bins, frame_rate) followed by
// little-endian float32 blobs addressed by byte offsets in the manifest.

void save_corpus(const CorpusManifest& manifest,
                 const std::string& manifest_path,
                 const std::string& features_path);
CorpusManifest load_corpus(const std::string& manifest_path,
                           const std::string& features_path);

void save_speaker_stats(const std::map<std::string, SpeakerPitchStats>& stats,
                        const std::string& path);
std::map<std::string, SpeakerPitchStats> load_speaker_stats(
    const std::string& path);

}  // namespace ctxtts

#endif  // CTXTTS_CORPUS_HPP_
