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

#ifndef CTXTTS_SYNTHETIC_HPP_
#define CTXTTS_SYNTHETIC_HPP_

#include <string>
#include <vector>

#include "ctxtts/corpus.hpp"

namespace ctxtts {

// Which lateral carries the planted pitch cue for a target utterance.
enum class CueLateral { kNone, kPreceding, kSucceeding, kBoth };

CueLateral cue_lateral_from_string(const std::string& s);
std::string to_string(CueLateral c);

// Parameters of the synthetic audiobook generator. The generated corpus has
// a fully documented deterministic structure so it can serve as the ground
// truth oracle for training and metric tests:
//
//   voiced pitch(frame) = base_pitch(speaker)
//                       + pitch_scale * ( intrinsic_pitch_offset(phoneme)
//                                       + cue_delta  * cue_sign(utterance)
//                                       + style_delta * book_style(book)
//                                       + noise_amp  * frame_noise(...) )
//
// cue_sign is planted in the neighbors' text: "UP" at the tail of the
// preceding utterance (and/or the head of the succeeding one) shifts the
// target up by cue_delta, "DOWN" shifts it down. book_style is a persistent
// per-book value carried in every mel frame; when style_delta is non-zero a
// style marker word also opens the book's first utterance, so a sequential
// synthesizer can pick the style up once at the book start and carry it
// forward through its own synthesized mels.
struct GeneratorSpec {
  int n_speakers = 4;
  int books_per_speaker = 4;
  int utterances_per_book = 30;
  int min_words = 2;
  int max_words = 3;
  int mel_bins = 16;
  double frame_rate = 80.0;
  std::vector<std::string> vocabulary = {"tona", "kimi", "sora", "yume",
                                         "hana", "mori", "kawa", "hoshi",
                                         "kaze", "yama", "umi",  "tori"};
  std::string cue_up = "UP";
  std::string cue_down = "DOWN";
  std::string style_up = "HI";    // book-opening marker for style +1
  std::string style_down = "LO";  // book-opening marker for style -1
  CueLateral cue_lateral = CueLateral::kPreceding;
  double cue_prob = 0.7;     // fraction of eligible utterances carrying a cue
  double cue_delta = 1.0;    // normalized pitch shift per cue sign
  double style_delta = 0.7;  // normalized pitch shift per book style unit
  double base_pitch_min = 140.0;  // Hz, speaker 0
  double base_pitch_step = 50.0;  // Hz between consecutive speakers
  double pitch_scale = 30.0;      // Hz per normalized unit
  double noise_amp = 0.05;
  int min_dur = 1;
  int max_dur = 2;
};

// The generator's deterministic rule pieces, exposed so tests can re-derive
// every feature value independently of the generation code path.
double base_pitch(const GeneratorSpec& spec, int speaker_ordinal);
double intrinsic_pitch_offset(const std::string& phoneme);  // in [-0.5, 0.5]
double intrinsic_energy_offset(const std::string& phoneme);
int book_style(int book_ordinal);  // alternating +1 / -1
double frame_noise(uint64_t seed, const std::string& book_id, int utt_index,
                   int frame);  // in [-1, 1]
int phoneme_duration(const GeneratorSpec& spec, const std::string& phoneme);
bool phoneme_is_voiced(const std::string& phoneme);
// Mel rendering of one frame; invertible: bin 0 = energy, bin 1 = pitch/500,
// bin 2 = voicing flag, bin 3 = style/2, bins 4+ = per-phoneme band scaled
// by energy.
std::vector<double> render_mel_frame(const GeneratorSpec& spec,
                                     const std::string& phoneme, double pitch,
                                     double energy, int style);

// Recovers pitch in Hz (0 when unvoiced) from a rendered mel matrix.
std::vector<double> pitch_from_mel(const Mat& mel);
// Recovers the per-book style value from a rendered mel matrix.
double style_from_mel(const Mat& mel);

// Deterministic pure function of (seed, spec); throws InvalidInput for
// invalid specs (no speakers, empty vocabulary, mel_bins < 8).
CorpusManifest generate_synthetic_corpus(uint64_t seed,
                                         const GeneratorSpec& spec);

// Book ids a default preparation holds out: the last book of every speaker.
std::vector<std::string> default_held_out_books(const CorpusManifest& m);

}  // namespace ctxtts

#endif  // CTXTTS_SYNTHETIC_HPP_
