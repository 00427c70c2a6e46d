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

#ifndef CTXTTS_INFERENCE_HPP_
#define CTXTTS_INFERENCE_HPP_

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ctxtts/metrics.hpp"
#include "ctxtts/tts_model.hpp"

namespace ctxtts {

// One synthesized utterance. Pitch is emitted in the normalized domain and
// in Hz (denormalized through the speaker stats, unvoiced-phoneme frames at
// zero) so metrics can operate directly in Hz.
struct UtteranceSynthesis {
  std::string book_id;
  int index = 0;
  Mat mel;
  std::vector<int> durations;
  std::vector<double> phoneme_pitch;     // normalized, per phoneme
  std::vector<double> frame_pitch_norm;  // normalized, per frame
  std::vector<double> frame_pitch_hz;    // Hz, per frame, 0 = unvoiced

  SynthesizedUtterance to_synthesized() const {
    return {book_id, index, mel, frame_pitch_hz, durations};
  }
};

// Sequential synthesis per book: utterance 0 uses a zero acoustic context,
// utterance N > 0 uses the encoder output of the previously *synthesized*
// mel. Textual windows are rebuilt from the book texts with the effective
// context length (k_override when >= 0).
class Synthesizer {
 public:
  Synthesizer(const ContextTtsModel* model, const CorpusManifest* corpus,
              const std::map<std::string, SpeakerPitchStats>* stats);

  // Synthesizes every utterance of the book in index order.
  // context_overrides maps a target utterance index to the index whose
  // textual window replaces the target's. debug_log (optional) receives one
  // line per utterance with the effective window lengths.
  std::vector<UtteranceSynthesis> synthesize_book(
      const Book& book, int k_override = -1,
      const std::map<int, int>& context_overrides = {},
      std::ostream* debug_log = nullptr) const;

  // One-shot synthesis with a caller-supplied context (the random-context
  // probe). prev_mel may be null for no acoustic context.
  UtteranceSynthesis synthesize_with_context(const Book& book, int utt_index,
                                             const ContextWindow& window,
                                             const Mat* prev_mel) const;

 private:
  UtteranceSynthesis run_one(const Utterance& utt, const ContextWindow& window,
                             const Mat* prev_mel) const;
  ContextWindow window_for(const Book& book, int utt_index,
                           int k_override) const;

  const ContextTtsModel* model_;
  const CorpusManifest* corpus_;
  const std::map<std::string, SpeakerPitchStats>* stats_;
};

// Feature file output for synthesized books: reuses the corpus feature
// archive format, with a JSON-lines sidecar mapping utterance ids to
// offsets.
void save_synthesis(const std::vector<UtteranceSynthesis>& outs, int mel_bins,
                    double frame_rate, const std::string& features_path,
                    const std::string& map_path);
std::vector<UtteranceSynthesis> load_synthesis(const std::string& features_path,
                                               const std::string& map_path);

}  // namespace ctxtts

#endif  // CTXTTS_INFERENCE_HPP_
