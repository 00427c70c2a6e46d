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

#include "ctxtts/text_context.hpp"

namespace ctxtts {

TceMode tce_mode_from_string(const std::string& s) {
  if (s == "none") return TceMode::kNone;
  if (s == "pre") return TceMode::kPre;
  if (s == "suc") return TceMode::kSuc;
  if (s == "bi") return TceMode::kBi;
  if (s == "implicit") return TceMode::kImplicit;
  throw InvalidInput("unknown tce mode: " + s);
}

std::string to_string(TceMode m) {
  switch (m) {
    case TceMode::kNone: return "none";
    case TceMode::kPre: return "pre";
    case TceMode::kSuc: return "suc";
    case TceMode::kBi: return "bi";
    case TceMode::kImplicit: return "implicit";
  }
  return "none";
}

TextualContextEncoder::TextualContextEncoder(ParamStore* ps,
                                             const std::string& prefix,
                                             const TceConfig& cfg)
    : cfg_(cfg) {
  provider_ = make_embedding_provider(cfg.provider, cfg.d_emb, ps,
                                      cfg.provider_lr_scale);
  gru_ = GruLayer(ps, prefix + ".gru", cfg.d_emb, cfg.gru_hidden);
  // The two lateral attention modules have separate parameters, mirroring
  // the separate-parameter ACE/AE convention.
  attn_pre_ = SingleQueryAttention(ps, prefix + ".attn_pre", cfg.gru_hidden,
                                   cfg.d_emb, cfg.d_att, 1);
  attn_suc_ = SingleQueryAttention(ps, prefix + ".attn_suc", cfg.gru_hidden,
                                   cfg.d_emb, cfg.d_att, 1);
  fuse_fc_ = LinearLayer(ps, prefix + ".fuse",
                         2 * cfg.d_att + cfg.gru_hidden, cfg.d_model);
}

Var TextualContextEncoder::embed_tokens(
    Tape& t, const std::vector<std::string>& tokens) const {
  return provider_->embed(t, tokens);
}

Var TextualContextEncoder::sentence_embedding(Tape& t,
                                              Var word_embeddings) const {
  if (t.val(word_embeddings).rows < 1)
    throw InvalidInput("sentence_embedding: needs at least one token");
  return gru_.last_state(t, word_embeddings);
}

Var TextualContextEncoder::attend_preceding(Tape& t, Var query,
                                            Var tokens) const {
  return attn_pre_.apply(t, query, tokens);
}

Var TextualContextEncoder::attend_succeeding(Tape& t, Var query,
                                             Var tokens) const {
  return attn_suc_.apply(t, query, tokens);
}

Mat TextualContextEncoder::attention_weights_preceding(Tape& t, Var query,
                                                       Var tokens) const {
  return attn_pre_.weights(t, query, tokens);
}

Var TextualContextEncoder::fuse(Tape& t, Var pre_vec, Var suc_vec,
                                Var sentence) const {
  if (t.val(pre_vec).cols != cfg_.d_att ||
      t.val(suc_vec).cols != cfg_.d_att ||
      t.val(sentence).cols != cfg_.gru_hidden)
    throw InvalidInput("fuse: dimension mismatch");
  return fuse_fc_.apply(t, t.concat_cols({pre_vec, suc_vec, sentence}));
}

Var TextualContextEncoder::lateral_vector(Tape& t,
                                          const SingleQueryAttention& attn,
                                          Var query,
                                          const std::string& text) const {
  std::vector<std::string> tokens = tokenize_text(text);
  if (tokens.empty()) return t.constant(Mat(1, cfg_.d_att));
  return attn.apply(t, query, provider_->embed(t, tokens));
}

Var TextualContextEncoder::encode(Tape& t, const std::string& target_text,
                                  const ContextWindow& window) const {
  std::vector<std::string> target_tokens = tokenize_text(target_text);
  if (target_tokens.empty())
    throw InvalidInput("encode_textual_context: empty target sentence");

  Var zero_lateral = t.constant(Mat(1, cfg_.d_att));

  if (cfg_.mode == TceMode::kImplicit) {
    // Embed the concatenated (preceding sentence, target, succeeding
    // sentence) token stream, keep only the target rows.
    std::vector<std::string> pre = tokenize_text(window.preceding);
    std::vector<std::string> suc = tokenize_text(window.succeeding);
    std::vector<std::string> all;
    all.reserve(pre.size() + target_tokens.size() + suc.size());
    all.insert(all.end(), pre.begin(), pre.end());
    all.insert(all.end(), target_tokens.begin(), target_tokens.end());
    all.insert(all.end(), suc.begin(), suc.end());
    Var emb = provider_->embed(t, all);
    int t0 = static_cast<int>(pre.size());
    int t1 = t0 + static_cast<int>(target_tokens.size());
    Var target_rows = t.slice_rows(emb, t0, t1);
    Var sent = sentence_embedding(t, target_rows);
    return fuse(t, zero_lateral, zero_lateral, sent);
  }

  Var sent = sentence_embedding(t, provider_->embed(t, target_tokens));
  bool use_pre = cfg_.mode == TceMode::kPre || cfg_.mode == TceMode::kBi;
  bool use_suc = cfg_.mode == TceMode::kSuc || cfg_.mode == TceMode::kBi;
  Var pre_vec = use_pre ? lateral_vector(t, attn_pre_, sent, window.preceding)
                        : zero_lateral;
  Var suc_vec = use_suc ? lateral_vector(t, attn_suc_, sent, window.succeeding)
                        : zero_lateral;
  return fuse(t, pre_vec, suc_vec, sent);
}

}  // namespace ctxtts
