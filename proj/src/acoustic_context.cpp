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

#include "ctxtts/acoustic_context.hpp"

#include <cmath>

namespace ctxtts {

StyleEncoder::StyleEncoder(ParamStore* ps, const std::string& prefix,
                           const GstConfig& cfg)
    : cfg_(cfg) {
  conv1_ = Conv1dLayer(ps, prefix + ".conv1", cfg.mel_bins, cfg.ref_channels,
                       3, 2);
  conv2_ = Conv1dLayer(ps, prefix + ".conv2", cfg.ref_channels,
                       cfg.ref_channels, 3, 2);
  gru_ = GruLayer(ps, prefix + ".gru", cfg.ref_channels, cfg.ref_gru_hidden);
  tokens_ = ps->create(prefix + ".tokens", cfg.n_tokens, cfg.d_out,
                       xavier_scale(cfg.n_tokens, cfg.d_out));
  attn_ = SingleQueryAttention(ps, prefix + ".attn", cfg.ref_gru_hidden,
                               cfg.d_out, cfg.d_out, cfg.heads);
  out_ = LinearLayer(ps, prefix + ".out", cfg.d_out, cfg.d_out);
}

Var StyleEncoder::reference_encode(Tape& t, Var mel) const {
  if (t.val(mel).rows < 1)
    throw InvalidInput("reference_encode: needs at least one frame");
  Var h = t.relu(conv1_.apply(t, mel));
  h = t.relu(conv2_.apply(t, h));
  return gru_.last_state(t, h);
}

Var StyleEncoder::style_attend(Tape& t, Var reference) const {
  Var ctx = attn_.apply(t, reference, t.param(*tokens_));
  return out_.apply(t, ctx);
}

Var StyleEncoder::encode(Tape& t, Var mel) const {
  return style_attend(t, reference_encode(t, mel));
}

Mat StyleEncoder::style_weights(Tape& t, Var reference) const {
  return attn_.weights(t, reference, t.param(*tokens_));
}

AcousticContextModule::AcousticContextModule(ParamStore* ps,
                                             const GstConfig& cfg)
    : cfg_(cfg),
      ace_(ps, "ace", cfg),
      ae_(ps, "ae", cfg) {}

Var AcousticContextModule::encode_context(Tape& t, const Mat* prev_mel) const {
  if (!prev_mel) return t.constant(Mat(1, cfg_.d_out));
  return ace_.encode(t, t.constant(*prev_mel));
}

Var AcousticContextModule::encode_target(Tape& t, const Mat& target_mel) const {
  return ae_.encode(t, t.constant(target_mel));
}

Var ace_prediction_loss(Tape& t, Var v_ace, Var v_ae) {
  const Mat& a = t.val(v_ace);
  const Mat& b = t.val(v_ae);
  if (a.rows != b.rows || a.cols != b.cols)
    throw InvalidInput("ace_prediction_loss: dimension mismatch");
  return t.mean_abs_diff(v_ace, v_ae);
}

double ace_prediction_loss(const std::vector<double>& v_ace,
                           const std::vector<double>& v_ae) {
  if (v_ace.size() != v_ae.size() || v_ace.empty())
    throw InvalidInput("ace_prediction_loss: dimension mismatch");
  double s = 0.0;
  for (size_t i = 0; i < v_ace.size(); ++i) s += std::abs(v_ace[i] - v_ae[i]);
  return s / static_cast<double>(v_ace.size());
}

}  // namespace ctxtts
