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

#include "ctxtts/tts_model.hpp"

#include <cmath>

namespace ctxtts {

std::vector<int> length_regulate_indices(const std::vector<int>& durations) {
  std::vector<int> idx;
  for (size_t p = 0; p < durations.size(); ++p) {
    if (durations[p] < 1)
      throw InvalidInput("length regulator: durations must be >= 1");
    for (int d = 0; d < durations[p]; ++d) idx.push_back(static_cast<int>(p));
  }
  if (idx.empty()) throw Error("length regulator: empty expansion");
  return idx;
}

BatchItem make_batch_item(const CorpusManifest& manifest, const Book& book,
                          int utt_index, const SpeakerPitchStats& stats,
                          const TceConfig& tce, int k_override) {
  if (utt_index < 0 ||
      utt_index >= static_cast<int>(book.utterances.size()))
    throw InvalidInput("make_batch_item: index out of range");
  const Utterance& u = book.utterances[utt_index];
  BatchItem item;
  item.speaker = manifest.speaker_index(u.speaker_id);
  if (item.speaker < 0)
    throw InvalidInput("make_batch_item: unknown speaker " + u.speaker_id);
  for (const std::string& ph : u.phonemes) {
    int id = manifest.phoneme_index(ph);
    if (id < 0) throw InvalidInput("make_batch_item: unknown phoneme " + ph);
    item.phoneme_ids.push_back(id);
  }
  item.durations = u.durations;
  item.mel_target = u.mel;
  item.target_text = u.text;
  item.prev_mel =
      utt_index > 0 ? &book.utterances[utt_index - 1].mel : nullptr;

  // Phoneme-level pooling of the frame-level targets.
  std::vector<double> norm = normalize_pitch_contour(u.pitch, stats);
  int frame = 0;
  for (size_t p = 0; p < u.durations.size(); ++p) {
    double pitch_sum = 0.0, energy_sum = 0.0;
    int voiced = 0;
    for (int d = 0; d < u.durations[p]; ++d, ++frame) {
      energy_sum += u.energy[frame];
      if (u.pitch[frame] > 0) {
        pitch_sum += norm[frame];
        ++voiced;
      }
    }
    item.energy_targets.push_back(energy_sum / u.durations[p]);
    if (voiced > 0) {
      item.pitch_targets.push_back(pitch_sum / voiced);
      item.pitch_mask.push_back(1.0);
    } else {
      item.pitch_targets.push_back(0.0);
      item.pitch_mask.push_back(0.0);
    }
  }

  int k_eff = k_override >= 0 ? k_override : tce.k;
  if (tce.mode == TceMode::kImplicit) {
    item.window =
        extract_sentence_context(book, utt_index, tce.implicit_n_sentences);
  } else {
    item.window = extract_context_window(book, utt_index, k_eff);
  }
  return item;
}

RelativeSelfAttention::RelativeSelfAttention(ParamStore* ps,
                                             const std::string& prefix,
                                             int d_model, int heads, int clip)
    : d_model_(d_model), heads_(heads), clip_(clip) {
  if (clip < 1) throw InvalidInput("relative attention: clip must be >= 1");
  if (d_model % heads != 0)
    throw InvalidInput("relative attention: heads must divide d_model");
  d_head_ = d_model / heads;
  q_ = LinearLayer(ps, prefix + ".q", d_model, d_model, false);
  k_ = LinearLayer(ps, prefix + ".k", d_model, d_model, false);
  v_ = LinearLayer(ps, prefix + ".v", d_model, d_model, false);
  out_ = LinearLayer(ps, prefix + ".out", d_model, d_model);
  const int buckets = 2 * clip + 1;
  // Shared across heads within the layer.
  rel_k_ = ps->create(prefix + ".rel_k", buckets, d_head_,
                      xavier_scale(buckets, d_head_));
  rel_v_ = ps->create(prefix + ".rel_v", buckets, d_head_,
                      xavier_scale(buckets, d_head_));
}

Var RelativeSelfAttention::apply(Tape& t, Var x,
                                 const std::vector<uint8_t>* keep) const {
  const int tt = t.val(x).rows;
  Var q = q_.apply(t, x);
  Var k = k_.apply(t, x);
  Var v = v_.apply(t, x);
  Var rk = t.param(*rel_k_);
  Var rv = t.param(*rel_v_);
  const double inv = 1.0 / std::sqrt(static_cast<double>(d_head_));
  std::vector<Var> heads_out;
  heads_out.reserve(heads_);
  for (int h = 0; h < heads_; ++h) {
    Var qh = t.slice_cols(q, h * d_head_, (h + 1) * d_head_);
    Var kh = t.slice_cols(k, h * d_head_, (h + 1) * d_head_);
    Var vh = t.slice_cols(v, h * d_head_, (h + 1) * d_head_);
    // logits[i][j] = q_i . (k_j + rel_k[bucket(j-i)]) / sqrt(d_head)
    Var content = t.matmul_bt(qh, kh);                    // [T x T]
    Var rel = t.rel_gather(t.matmul_bt(qh, rk), clip_, tt);  // [T x T]
    Var logits = t.scale(t.add(content, rel), inv);
    Var w = t.softmax_rows(logits, keep);
    // out_i = sum_j w_ij * (v_j + rel_v[bucket(j-i)])
    Var content_out = t.matmul(w, vh);
    Var rel_out = t.matmul(t.rel_scatter(w, clip_), rv);
    heads_out.push_back(t.add(content_out, rel_out));
  }
  Var concat = heads_ == 1 ? heads_out[0] : t.concat_cols(heads_out);
  return out_.apply(t, concat);
}

Mat RelativeSelfAttention::head_weights(Tape& t, Var x, int head) const {
  const int tt = t.val(x).rows;
  Var q = q_.apply(t, x);
  Var k = k_.apply(t, x);
  Var rk = t.param(*rel_k_);
  const double inv = 1.0 / std::sqrt(static_cast<double>(d_head_));
  Var qh = t.slice_cols(q, head * d_head_, (head + 1) * d_head_);
  Var kh = t.slice_cols(k, head * d_head_, (head + 1) * d_head_);
  Var content = t.matmul_bt(qh, kh);
  Var rel = t.rel_gather(t.matmul_bt(qh, rk), clip_, tt);
  Var w = t.softmax_rows(t.scale(t.add(content, rel), inv));
  return t.val(w);
}

TransformerLayer::TransformerLayer(ParamStore* ps, const std::string& prefix,
                                   const ModelConfig& cfg) {
  attn_ = RelativeSelfAttention(ps, prefix + ".attn", cfg.d_model, cfg.heads,
                                cfg.clip_distance);
  ln1_ = LayerNormLayer(ps, prefix + ".ln1", cfg.d_model);
  ln2_ = LayerNormLayer(ps, prefix + ".ln2", cfg.d_model);
  ffn1_ = Conv1dLayer(ps, prefix + ".ffn1", cfg.d_model, cfg.ffn_filter,
                      cfg.ffn_kernel);
  ffn2_ = Conv1dLayer(ps, prefix + ".ffn2", cfg.ffn_filter, cfg.d_model, 1);
}

Var TransformerLayer::apply(Tape& t, Var x,
                            const std::vector<uint8_t>* keep) const {
  Var a = attn_.apply(t, x, keep);
  x = ln1_.apply(t, t.add(x, a));
  if (keep) x = t.mask_rows(x, *keep);
  Var f = ffn2_.apply(t, t.relu(ffn1_.apply(t, x)));
  x = ln2_.apply(t, t.add(x, f));
  if (keep) x = t.mask_rows(x, *keep);
  return x;
}

VariancePredictor::VariancePredictor(ParamStore* ps, const std::string& prefix,
                                     const ModelConfig& cfg) {
  conv1_ = Conv1dLayer(ps, prefix + ".conv1", cfg.d_model,
                       cfg.predictor_filter, cfg.predictor_kernel);
  conv2_ = Conv1dLayer(ps, prefix + ".conv2", cfg.predictor_filter,
                       cfg.predictor_filter, cfg.predictor_kernel);
  ln1_ = LayerNormLayer(ps, prefix + ".ln1", cfg.predictor_filter);
  ln2_ = LayerNormLayer(ps, prefix + ".ln2", cfg.predictor_filter);
  out_ = LinearLayer(ps, prefix + ".out", cfg.predictor_filter, 1);
}

Var VariancePredictor::apply(Tape& t, Var x) const {
  Var h = ln1_.apply(t, t.relu(conv1_.apply(t, x)));
  h = ln2_.apply(t, t.relu(conv2_.apply(t, h)));
  return out_.apply(t, h);
}

ContextTtsModel::ContextTtsModel(const ModelConfig& cfg)
    : cfg_(cfg), store_(cfg.seed) {
  if (cfg_.n_phonemes < 1 || cfg_.n_speakers < 1)
    throw InvalidInput("model config: phoneme and speaker counts required");
  cfg_.ace.mel_bins = cfg_.mel_bins;
  cfg_.ace.d_out = cfg_.d_model;
  cfg_.tce.d_model = cfg_.d_model;

  phoneme_table_ = store_.create("phoneme_embed", cfg_.n_phonemes,
                                 cfg_.d_model, std::sqrt(1.0 / cfg_.d_model));
  speaker_table_ = store_.create("speaker_embed", cfg_.n_speakers,
                                 cfg_.d_model, std::sqrt(1.0 / cfg_.d_model));
  for (int l = 0; l < cfg_.enc_layers; ++l)
    encoder_.emplace_back(&store_, "encoder.l" + std::to_string(l), cfg_);
  for (int l = 0; l < cfg_.dec_layers; ++l)
    decoder_.emplace_back(&store_, "decoder.l" + std::to_string(l), cfg_);
  dur_pred_ = VariancePredictor(&store_, "duration_predictor", cfg_);
  pitch_pred_ = VariancePredictor(&store_, "pitch_predictor", cfg_);
  energy_pred_ = VariancePredictor(&store_, "energy_predictor", cfg_);
  pitch_embed_ = LinearLayer(&store_, "pitch_embed", 1, cfg_.d_model);
  energy_embed_ = LinearLayer(&store_, "energy_embed", 1, cfg_.d_model);
  mel_out_ = LinearLayer(&store_, "mel_out", cfg_.d_model, cfg_.mel_bins);
  if (cfg_.tce.mode != TceMode::kNone)
    tce_ = std::make_unique<TextualContextEncoder>(&store_, "tce", cfg_.tce);
  if (cfg_.use_ace)
    ace_ = std::make_unique<AcousticContextModule>(&store_, cfg_.ace);
}

Var ContextTtsModel::zero_context(Tape& t) const {
  return t.constant(Mat(1, cfg_.d_model));
}

Var ContextTtsModel::encode_stack(Tape& t,
                                  const std::vector<int>& phoneme_ids,
                                  const std::vector<uint8_t>* keep) const {
  for (int id : phoneme_ids)
    if (id < 0 || id >= cfg_.n_phonemes)
      throw InvalidInput("encode: phoneme id out of range");
  Var x = t.embed_rows(t.param(*phoneme_table_), phoneme_ids);
  if (keep) x = t.mask_rows(x, *keep);
  for (const TransformerLayer& layer : encoder_) x = layer.apply(t, x, keep);
  return x;
}

Var ContextTtsModel::encode_phonemes(Tape& t,
                                     const std::vector<int>& phoneme_ids,
                                     int speaker, Var v_ace, Var v_tce,
                                     const std::vector<uint8_t>* keep) const {
  if (speaker < 0 || speaker >= cfg_.n_speakers)
    throw InvalidInput("encode: unknown speaker id");
  Var x = encode_stack(t, phoneme_ids, keep);
  Var spk = t.embed_rows(t.param(*speaker_table_), {speaker});
  x = t.add_rowvec(x, spk);
  x = t.add_rowvec(x, v_ace);
  x = t.add_rowvec(x, v_tce);
  if (keep) x = t.mask_rows(x, *keep);
  return x;
}

ContextTtsModel::VarianceOutput ContextTtsModel::variance_adapt(
    Tape& t, Var encoded, const BatchItem* targets) const {
  VarianceOutput out;
  const int t_ph = t.val(encoded).rows;
  out.log_dur = dur_pred_.apply(t, encoded);
  out.pitch = pitch_pred_.apply(t, encoded);
  out.energy = energy_pred_.apply(t, encoded);

  Var pitch_in, energy_in;
  if (targets) {
    // Teacher forcing.
    Mat p(t_ph, 1, std::vector<double>(targets->pitch_targets));
    Mat e(t_ph, 1, std::vector<double>(targets->energy_targets));
    pitch_in = t.constant(std::move(p));
    energy_in = t.constant(std::move(e));
    out.durations_used = targets->durations;
  } else {
    pitch_in = out.pitch;
    energy_in = out.energy;
    const Mat& ld = t.val(out.log_dur);
    for (int p = 0; p < t_ph; ++p) {
      double d = std::round(std::exp(ld.at(p, 0)));
      out.durations_used.push_back(d < 1 ? 1 : static_cast<int>(d));
    }
  }
  Var feat = t.add(encoded, t.add(pitch_embed_.apply(t, pitch_in),
                                  energy_embed_.apply(t, energy_in)));
  out.expanded = t.gather_rows(feat, length_regulate_indices(out.durations_used));
  return out;
}

Var ContextTtsModel::decode_mel(Tape& t, Var frames,
                                const std::vector<uint8_t>* keep) const {
  if (t.val(frames).rows < 1) throw InvalidInput("decode_mel: empty input");
  Var x = frames;
  for (const TransformerLayer& layer : decoder_) x = layer.apply(t, x, keep);
  return mel_out_.apply(t, x);
}

ItemOutput ContextTtsModel::forward(Tape& t, const BatchItem& item,
                                    bool train) const {
  ItemOutput out;
  Var v_ace = zero_context(t);
  if (ace_) {
    v_ace = ace_->encode_context(t, item.prev_mel);
    out.v_ace = v_ace;
    if (train) out.v_ae = ace_->encode_target(t, item.mel_target);
  }
  Var v_tce = tce_ ? tce_->encode(t, item.target_text, item.window)
                   : zero_context(t);
  Var encoded = encode_phonemes(t, item.phoneme_ids, item.speaker, v_ace,
                                v_tce);
  VarianceOutput va = variance_adapt(t, encoded, train ? &item : nullptr);
  out.mel = decode_mel(t, va.expanded);
  out.log_dur = va.log_dur;
  out.pitch = va.pitch;
  out.energy = va.energy;
  out.durations_used = std::move(va.durations_used);
  return out;
}

}  // namespace ctxtts
