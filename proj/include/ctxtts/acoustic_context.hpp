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

#ifndef CTXTTS_ACOUSTIC_CONTEXT_HPP_
#define CTXTTS_ACOUSTIC_CONTEXT_HPP_

#include <string>
#include <vector>

#include "ctxtts/nn.hpp"

namespace ctxtts {

struct GstConfig {
  int mel_bins = 16;
  int ref_channels = 16;    // reference conv stack width
  int ref_gru_hidden = 64;  // reference vector dim
  int n_tokens = 10;        // style token count
  int heads = 8;            // style attention heads
  int d_out = 256;          // context vector dim
};

// One global-style-token module: a strided conv + GRU reference encoder that
// summarizes a mel matrix into a fixed-length vector, then multi-head
// attention of that vector over a learned token bank, projected to d_out.
class StyleEncoder {
 public:
  StyleEncoder() = default;
  StyleEncoder(ParamStore* ps, const std::string& prefix, const GstConfig& cfg);

  const GstConfig& config() const { return cfg_; }

  // Fixed-length summary of a [frames x mel_bins] matrix; frames >= 1.
  Var reference_encode(Tape& t, Var mel) const;
  // Multi-head attention over the token bank with `reference` as the single
  // query; per-head weights sum to 1; concatenated heads projected to d_out.
  Var style_attend(Tape& t, Var reference) const;
  Var encode(Tape& t, Var mel) const;
  // Per-head attention weights [heads x n_tokens], for tests.
  Mat style_weights(Tape& t, Var reference) const;

 private:
  GstConfig cfg_;
  Conv1dLayer conv1_;
  Conv1dLayer conv2_;
  GruLayer gru_;
  Param* tokens_ = nullptr;  // [n_tokens x d_out]
  SingleQueryAttention attn_;
  LinearLayer out_;
};

// ACE/AE pair: the acoustic context encoder reads the previous utterance's
// mel (zero vector at book starts), the auxiliary encoder reads the target
// mel, and an L1 next-prediction loss ties them together during training.
class AcousticContextModule {
 public:
  AcousticContextModule() = default;
  AcousticContextModule(ParamStore* ps, const GstConfig& cfg);

  const StyleEncoder& ace() const { return ace_; }
  const StyleEncoder& ae() const { return ae_; }

  // prev_mel == nullptr (book-initial utterance) yields a zero vector.
  Var encode_context(Tape& t, const Mat* prev_mel) const;
  Var encode_target(Tape& t, const Mat& target_mel) const;

 private:
  GstConfig cfg_;
  StyleEncoder ace_;
  StyleEncoder ae_;
};

// Mean absolute difference between the two context vectors; gradients flow
// into both encoders (callers may detach one side).
Var ace_prediction_loss(Tape& t, Var v_ace, Var v_ae);

// Untaped convenience for tests and bindings.
double ace_prediction_loss(const std::vector<double>& v_ace,
                           const std::vector<double>& v_ae);

}  // namespace ctxtts

#endif  // CTXTTS_ACOUSTIC_CONTEXT_HPP_
