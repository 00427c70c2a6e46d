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

#ifndef CTXTTS_TEXT_CONTEXT_HPP_
#define CTXTTS_TEXT_CONTEXT_HPP_

#include <memory>
#include <string>

#include "ctxtts/corpus.hpp"
#include "ctxtts/embedding.hpp"
#include "ctxtts/nn.hpp"

namespace ctxtts {

// Lateral mode of the textual context encoder. `none` keeps the target
// sentence embedding path but no laterals; `implicit` is the baseline that
// feeds the one-sentence bilateral context through the embedding provider
// and keeps only the target-token rows.
enum class TceMode { kNone, kPre, kSuc, kBi, kImplicit };

TceMode tce_mode_from_string(const std::string& s);
std::string to_string(TceMode m);

struct TceConfig {
  TceMode mode = TceMode::kNone;
  int k = 64;        // context codepoints per lateral
  int gru_hidden = 256;
  int d_att = 256;   // attention space / lateral context vector dim
  int d_emb = 32;    // provider embedding dim
  int d_model = 256; // fused output dim
  std::string provider = "hash";
  double provider_lr_scale = 0.0;
  int implicit_n_sentences = 1;
};

// Textual context encoder: word embeddings -> GRU sentence embedding of the
// target -> one attention module per lateral (sentence embedding as query,
// context word embeddings as keys/values) -> FC fusion to d_model. Disabled
// or empty laterals contribute zero vectors, so one parameter set is valid
// across all lateral modes.
class TextualContextEncoder {
 public:
  TextualContextEncoder(ParamStore* ps, const std::string& prefix,
                        const TceConfig& cfg);

  const TceConfig& config() const { return cfg_; }
  const EmbeddingProvider& provider() const { return *provider_; }

  // Full encode per the configured mode. The target text must tokenize to at
  // least one token. In explicit modes disabled laterals are ignored even if
  // the window carries text; in implicit mode the window laterals are whole
  // neighbor sentences.
  Var encode(Tape& t, const std::string& target_text,
             const ContextWindow& window) const;

  // Pieces, exposed for tests and probes.
  Var embed_tokens(Tape& t, const std::vector<std::string>& tokens) const;
  Var sentence_embedding(Tape& t, Var word_embeddings) const;
  Var attend_preceding(Tape& t, Var query, Var tokens) const;
  Var attend_succeeding(Tape& t, Var query, Var tokens) const;
  Var fuse(Tape& t, Var pre_vec, Var suc_vec, Var sentence) const;
  Mat attention_weights_preceding(Tape& t, Var query, Var tokens) const;

 private:
  Var lateral_vector(Tape& t, const SingleQueryAttention& attn, Var query,
                     const std::string& text) const;

  TceConfig cfg_;
  std::unique_ptr<EmbeddingProvider> provider_;
  GruLayer gru_;
  SingleQueryAttention attn_pre_;
  SingleQueryAttention attn_suc_;
  LinearLayer fuse_fc_;
};

}  // namespace ctxtts

#endif  // CTXTTS_TEXT_CONTEXT_HPP_
