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

#include "ctxtts/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ctxtts {

CueLateral cue_lateral_from_string(const std::string& s) {
  if (s == "none") return CueLateral::kNone;
  if (s == "pre") return CueLateral::kPreceding;
  if (s == "suc") return CueLateral::kSucceeding;
  if (s == "both") return CueLateral::kBoth;
  throw InvalidInput("unknown cue lateral: " + s);
}

std::string to_string(CueLateral c) {
  switch (c) {
    case CueLateral::kNone: return "none";
    case CueLateral::kPreceding: return "pre";
    case CueLateral::kSucceeding: return "suc";
    case CueLateral::kBoth: return "both";
  }
  return "none";
}

double base_pitch(const GeneratorSpec& spec, int speaker_ordinal) {
  return spec.base_pitch_min + spec.base_pitch_step * speaker_ordinal;
}

double intrinsic_pitch_offset(const std::string& phoneme) {
  uint64_t h = fnv1a("pitch:" + phoneme);
  return static_cast<double>(h % 10000) / 9999.0 - 0.5;
}

double intrinsic_energy_offset(const std::string& phoneme) {
  uint64_t h = fnv1a("energy:" + phoneme);
  return static_cast<double>(h % 10000) / 9999.0 - 0.5;
}

int book_style(int book_ordinal) { return book_ordinal % 2 == 0 ? 1 : -1; }

double frame_noise(uint64_t seed, const std::string& book_id, int utt_index,
                   int frame) {
  Rng r(mix_seed(seed, book_id + "#" + std::to_string(utt_index) + "#" +
                           std::to_string(frame)));
  return 2.0 * r.uniform() - 1.0;
}

int phoneme_duration(const GeneratorSpec& spec, const std::string& phoneme) {
  uint64_t h = fnv1a("dur:" + phoneme);
  int span = spec.max_dur - spec.min_dur + 1;
  return spec.min_dur + static_cast<int>(h % static_cast<uint64_t>(span));
}

bool phoneme_is_voiced(const std::string& phoneme) {
  static const std::string voiced = "aeiouAEIOUnmyrwNMYRW";
  return phoneme.size() == 1 && voiced.find(phoneme[0]) != std::string::npos;
}

std::vector<double> render_mel_frame(const GeneratorSpec& spec,
                                     const std::string& phoneme, double pitch,
                                     double energy, int style) {
  std::vector<double> frame(spec.mel_bins, 0.0);
  frame[0] = energy;
  frame[1] = pitch / 500.0;
  frame[2] = pitch > 0 ? 1.0 : 0.0;
  frame[3] = 0.5 * style;
  int bands = spec.mel_bins - 4;
  double center = 4 + static_cast<double>(fnv1a("band:" + phoneme) %
                                          static_cast<uint64_t>(bands));
  double amp = 0.3 + 0.7 * energy;
  for (int m = 4; m < spec.mel_bins; ++m) {
    double d = (m - center) / 1.2;
    frame[m] = amp * std::exp(-0.5 * d * d);
  }
  return frame;
}

std::vector<double> pitch_from_mel(const Mat& mel) {
  std::vector<double> out(mel.rows, 0.0);
  for (int t = 0; t < mel.rows; ++t)
    if (mel.at(t, 2) > 0.5) out[t] = std::max(0.0, mel.at(t, 1) * 500.0);
  return out;
}

double style_from_mel(const Mat& mel) {
  double s = 0.0;
  for (int t = 0; t < mel.rows; ++t) s += mel.at(t, 3);
  return mel.rows > 0 ? 2.0 * s / mel.rows : 0.0;
}

namespace {

// Phonemes of a text: one per non-space codepoint.
std::vector<std::string> text_to_phonemes(const std::string& text) {
  std::vector<std::string> out;
  for (const std::string& cp : utf8_codepoints(text))
    if (cp != " ") out.push_back(cp);
  return out;
}

}  // namespace

CorpusManifest generate_synthetic_corpus(uint64_t seed,
                                         const GeneratorSpec& spec) {
  if (spec.n_speakers < 1)
    throw InvalidInput("generator: need at least one speaker");
  if (spec.vocabulary.empty())
    throw InvalidInput("generator: vocabulary must not be empty");
  if (spec.mel_bins < 8) throw InvalidInput("generator: mel_bins must be >= 8");
  if (spec.books_per_speaker < 1 || spec.utterances_per_book < 1)
    throw InvalidInput("generator: books and utterances must be >= 1");
  if (spec.min_words < 1 || spec.max_words < spec.min_words)
    throw InvalidInput("generator: bad word count range");
  if (spec.min_dur < 1 || spec.max_dur < spec.min_dur)
    throw InvalidInput("generator: bad duration range");

  CorpusManifest manifest;
  manifest.mel_bins = spec.mel_bins;
  manifest.frame_rate = spec.frame_rate;
  for (int s = 0; s < spec.n_speakers; ++s)
    manifest.speakers.push_back("spk" + std::to_string(s));

  // Inventory: every distinct non-space codepoint of vocabulary and cues.
  std::set<std::string> symbols;
  for (const std::string& w : spec.vocabulary)
    for (const std::string& cp : utf8_codepoints(w))
      if (cp != " ") symbols.insert(cp);
  for (const std::string& cp : utf8_codepoints(spec.cue_up)) symbols.insert(cp);
  for (const std::string& cp : utf8_codepoints(spec.cue_down))
    symbols.insert(cp);
  for (const std::string& cp : utf8_codepoints(spec.style_up))
    symbols.insert(cp);
  for (const std::string& cp : utf8_codepoints(spec.style_down))
    symbols.insert(cp);
  for (const std::string& sym : symbols)
    manifest.phoneme_inventory.push_back({sym, phoneme_is_voiced(sym)});

  for (int s = 0; s < spec.n_speakers; ++s) {
    const std::string speaker_id = "spk" + std::to_string(s);
    const double mu = base_pitch(spec, s);
    for (int bj = 0; bj < spec.books_per_speaker; ++bj) {
      Book book;
      book.book_id = speaker_id + "_b" + std::to_string(bj);
      const int style = book_style(bj);
      const int n_utt = spec.utterances_per_book;

      // Cue signs first: the sign applied to utterance i is planted in its
      // neighbors' text, so texts depend on all signs.
      std::vector<int> cue_sign(n_utt, 0);
      for (int i = 0; i < n_utt; ++i) {
        bool has_pre = i > 0;
        bool has_suc = i < n_utt - 1;
        bool eligible = true;
        if (spec.cue_lateral == CueLateral::kNone) eligible = false;
        if (spec.cue_lateral == CueLateral::kPreceding && !has_pre)
          eligible = false;
        if (spec.cue_lateral == CueLateral::kSucceeding && !has_suc)
          eligible = false;
        if (spec.cue_lateral == CueLateral::kBoth && !(has_pre && has_suc))
          eligible = false;
        if (!eligible) continue;
        Rng r(mix_seed(seed, book.book_id + "/cue/" + std::to_string(i)));
        double u = r.uniform();
        if (u < spec.cue_prob / 2)
          cue_sign[i] = 1;
        else if (u < spec.cue_prob)
          cue_sign[i] = -1;
      }

      // Base word sequences.
      std::vector<std::string> base_texts(n_utt);
      for (int i = 0; i < n_utt; ++i) {
        Rng r(mix_seed(seed, book.book_id + "/words/" + std::to_string(i)));
        int n_words = r.range(spec.min_words, spec.max_words);
        std::string text;
        for (int w = 0; w < n_words; ++w) {
          if (w) text += " ";
          text += spec.vocabulary[r.below(spec.vocabulary.size())];
        }
        base_texts[i] = text;
      }

      // Plant cue words. Preceding lateral: append the cue for utterance i+1
      // at the tail of utterance i. Succeeding lateral: prepend the cue for
      // utterance i-1 at the head of utterance i.
      std::vector<std::string> texts = base_texts;
      // A non-zero style opens the book with its marker word, the one place
      // the persistent style enters through text.
      if (spec.style_delta != 0.0)
        texts[0] =
            (style > 0 ? spec.style_up : spec.style_down) + " " + texts[0];
      auto cue_word = [&](int sign) {
        return sign > 0 ? spec.cue_up : spec.cue_down;
      };
      for (int i = 0; i < n_utt; ++i) {
        if (spec.cue_lateral == CueLateral::kPreceding ||
            spec.cue_lateral == CueLateral::kBoth) {
          if (i + 1 < n_utt && cue_sign[i + 1] != 0)
            texts[i] += " " + cue_word(cue_sign[i + 1]);
        }
        if (spec.cue_lateral == CueLateral::kSucceeding ||
            spec.cue_lateral == CueLateral::kBoth) {
          if (i - 1 >= 0 && cue_sign[i - 1] != 0)
            texts[i] = cue_word(cue_sign[i - 1]) + " " + texts[i];
        }
      }

      for (int i = 0; i < n_utt; ++i) {
        Utterance u;
        u.book_id = book.book_id;
        u.speaker_id = speaker_id;
        u.index = i;
        u.text = texts[i];
        u.phonemes = text_to_phonemes(u.text);
        int frames = 0;
        for (const std::string& ph : u.phonemes) {
          u.durations.push_back(phoneme_duration(spec, ph));
          frames += u.durations.back();
        }
        u.mel = Mat(frames, spec.mel_bins);
        u.pitch.resize(frames);
        u.energy.resize(frames);
        int t = 0;
        for (size_t pi = 0; pi < u.phonemes.size(); ++pi) {
          const std::string& ph = u.phonemes[pi];
          const bool voiced = phoneme_is_voiced(ph);
          for (int d = 0; d < u.durations[pi]; ++d, ++t) {
            double noise = frame_noise(seed, book.book_id, i, t);
            double energy = 0.5 + 0.25 * intrinsic_energy_offset(ph) +
                            0.1 * frame_noise(seed, book.book_id, i, t + 7919);
            double pitch = 0.0;
            if (voiced) {
              double norm = intrinsic_pitch_offset(ph) +
                            spec.cue_delta * cue_sign[i] +
                            spec.style_delta * style + spec.noise_amp * noise;
              pitch = mu + spec.pitch_scale * norm;
              if (pitch < 1.0) pitch = 1.0;
            }
            std::vector<double> frame =
                render_mel_frame(spec, ph, pitch, energy, style);
            for (int m = 0; m < spec.mel_bins; ++m) u.mel.at(t, m) = frame[m];
            u.pitch[t] = pitch;
            u.energy[t] = energy;
          }
        }
        book.utterances.push_back(std::move(u));
      }
      manifest.books.push_back(std::move(book));
    }
  }
  manifest.validate();
  return manifest;
}

std::vector<std::string> default_held_out_books(const CorpusManifest& m) {
  // Last book of each speaker, matching the one-test-book-per-speaker setup.
  std::map<std::string, std::string> last_per_speaker;
  for (const Book& b : m.books)
    if (!b.utterances.empty())
      last_per_speaker[b.utterances.front().speaker_id] = b.book_id;
  std::vector<std::string> out;
  for (auto& [spk, book] : last_per_speaker) out.push_back(book);
  return out;
}

}  // namespace ctxtts
