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

#ifndef CTXTTS_TTS_MODEL_HPP_
#define CTXTTS_TTS_MODEL_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ctxtts/acoustic_context.hpp"
#include "ctxtts/corpus.hpp"
#include "ctxtts/nn.hpp"
#include "ctxtts/text_context.hpp"

namespace ctxtts {

// Whether the auxiliary L1 gradient updates ACE, AE, or both.
enum class AceGradMode { kBoth, kAceOnly, kAeOnly };

struct ModelConfig {
  int d_model = 256;
  int enc_layers = 1;
  int dec_layers = 1;
  int heads = 2;
  int ffn_filter = 256;
  int ffn_kernel = 3;
  int clip_distance = 4;  // relative attention clipping
  int predictor_filter = 64;
  int predictor_kernel = 3;
  int mel_bins = 16;
  int n_phonemes = 0;
  int n_speakers = 0;
  bool use_ace = false;
  AceGradMode ace_grad = AceGradMode::kBoth;
  GstConfig ace;    // d_out forced to d_model on construction
  TceConfig tce;    // d_model forced likewise; mode none = no TCE module
  uint64_t seed = 1;
};

// One training/inference item. Phoneme-level targets follow the pooling
// convention: pitch = duration-weighted mean of normalized voiced frames
// (zero and masked when a phoneme has no voiced frame), energy = plain mean
// over the phoneme's frames, durations trained in the log domain.
struct BatchItem {
  std::vector<int> phoneme_ids;
  int speaker = 0;
  std::vector<int> durations;
  std::vector<double> pitch_targets;
  std::vector<double> pitch_mask;  // 1 where the phoneme has a voiced target
  std::vector<double> energy_targets;
  Mat mel_target;
  const Mat* prev_mel = nullptr;  // null at book start
  std::string target_text;
  ContextWindow window;
};

struct Batch {
  std::vector<BatchItem> items;
};

struct ItemOutput {
  Var mel;      // [frames x mel_bins]
  Var log_dur;  // [T_ph x 1]
  Var pitch;    // [T_ph x 1], normalized domain
  Var energy;   // [T_ph x 1]
  Var v_ace;    // valid when use_ace
  Var v_ae;     // valid when use_ace && train
  std::vector<int> durations_used;  // expansion durations per phoneme
};

// Frame index expansion of the length regulator: phoneme p contributes
// durations[p] copies of index p, in order.
std::vector<int> length_regulate_indices(const std::vector<int>& durations);

// Builds a BatchItem from a corpus utterance (targets, window, prev mel).
BatchItem make_batch_item(const CorpusManifest& manifest, const Book& book,
                          int utt_index, const SpeakerPitchStats& stats,
                          const TceConfig& tce, int k_override = -1);

// Multi-head self-attention with learned relative-position embeddings added
// to keys and values (shared across heads within a layer). No absolute
// position enters the computation. Padded positions (keep == 0) neither
// attend nor are attended to.
class RelativeSelfAttention {
 public:
  RelativeSelfAttention() = default;
  RelativeSelfAttention(ParamStore* ps, const std::string& prefix, int d_model,
                        int heads, int clip);
  Var apply(Tape& t, Var x, const std::vector<uint8_t>* keep = nullptr) const;
  // Attention weights of one head for inspection: [T x T].
  Mat head_weights(Tape& t, Var x, int head) const;

 private:
  int d_model_ = 0, heads_ = 0, clip_ = 0, d_head_ = 0;
  LinearLayer q_, k_, v_, out_;
  Param* rel_k_ = nullptr;  // [(2*clip+1) x d_head]
  Param* rel_v_ = nullptr;
};

// Post-norm transformer block: self-attention and a two-layer conv FFN, each
// wrapped in residual + LayerNorm. Padded rows are re-zeroed after every
// sublayer so padding cannot leak into valid positions.
class TransformerLayer {
 public:
  TransformerLayer() = default;
  TransformerLayer(ParamStore* ps, const std::string& prefix,
                   const ModelConfig& cfg);
  Var apply(Tape& t, Var x, const std::vector<uint8_t>* keep = nullptr) const;
  const RelativeSelfAttention& attention() const { return attn_; }

 private:
  RelativeSelfAttention attn_;
  LayerNormLayer ln1_, ln2_;
  Conv1dLayer ffn1_, ffn2_;
};

// Duration/pitch/energy predictor head: conv stack ending in a scalar per
// phoneme position.
class VariancePredictor {
 public:
  VariancePredictor() = default;
  VariancePredictor(ParamStore* ps, const std::string& prefix,
                    const ModelConfig& cfg);
  Var apply(Tape& t, Var x) const;  // [T x d_model] -> [T x 1]

 private:
  Conv1dLayer conv1_, conv2_;
  LayerNormLayer ln1_, ln2_;
  LinearLayer out_;
};

// The full acoustic model: phoneme encoder with relative attention, speaker
// embedding and context vectors summed onto the encoder output, variance
// adaptor with phoneme-level pitch/energy predicted before length
// regulation, and a mel decoder.
class ContextTtsModel {
 public:
  explicit ContextTtsModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const TextualContextEncoder* tce() const { return tce_.get(); }
  const AcousticContextModule* ace() const { return ace_.get(); }

  ItemOutput forward(Tape& t, const BatchItem& item, bool train) const;

  // Pieces (unit-test and probe surface) ---------------------------------
  // Raw encoder stack over phoneme ids (no speaker/context summation).
  Var encode_stack(Tape& t, const std::vector<int>& phoneme_ids,
                   const std::vector<uint8_t>* keep = nullptr) const;
  // Encoder output plus speaker embedding and both context vectors, each
  // broadcast over positions. Invalid speaker ids raise InvalidInput.
  Var encode_phonemes(Tape& t, const std::vector<int>& phoneme_ids,
                      int speaker, Var v_ace, Var v_tce,
                      const std::vector<uint8_t>* keep = nullptr) const;
  struct VarianceOutput {
    Var expanded;  // [frames x d_model]
    Var log_dur, pitch, energy;
    std::vector<int> durations_used;
  };
  VarianceOutput variance_adapt(Tape& t, Var encoded,
                                const BatchItem* targets) const;
  Var decode_mel(Tape& t, Var frames,
                 const std::vector<uint8_t>* keep = nullptr) const;
  Var zero_context(Tape& t) const;  // [1 x d_model]
  const std::vector<TransformerLayer>& encoder_layers() const {
    return encoder_;
  }

 private:
  ModelConfig cfg_;
  ParamStore store_;
  Param* phoneme_table_ = nullptr;
  Param* speaker_table_ = nullptr;
  std::vector<TransformerLayer> encoder_;
  std::vector<TransformerLayer> decoder_;
  VariancePredictor dur_pred_, pitch_pred_, energy_pred_;
  LinearLayer pitch_embed_, energy_embed_;
  LinearLayer mel_out_;
  std::unique_ptr<TextualContextEncoder> tce_;
  std::unique_ptr<AcousticContextModule> ace_;
};

}  // namespace ctxtts

#endif  // CTXTTS_TTS_MODEL_HPP_
