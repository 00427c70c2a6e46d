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

#ifndef CTXTTS_EMBEDDING_HPP_
#define CTXTTS_EMBEDDING_HPP_

#include <memory>
#include <string>
#include <vector>

#include "ctxtts/nn.hpp"

namespace ctxtts {

// Whitespace-or-character tokenizer: splits on whitespace runs when the text
// contains any whitespace, otherwise one token per codepoint. Empty text
// yields no tokens.
std::vector<std::string> tokenize_text(const std::string& text);

// Word-embedding source for the textual context encoder. Embeddings may be
// taped (trainable providers route through parameters so gradients flow) and
// may depend on neighboring tokens (context-sensitive providers).
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string identifier() const = 0;
  virtual int dimension() const = 0;
  virtual bool trainable() const { return false; }
  virtual bool context_sensitive() const { return false; }
  // One row per token; zero-row matrix for an empty token list.
  virtual Var embed(Tape& t, const std::vector<std::string>& tokens) const = 0;
  // Untaped values (inference, tests).
  Mat embed_values(const std::vector<std::string>& tokens) const;
};

// Deterministic per-token hash to a fixed unit vector. Frozen.
class HashProvider : public EmbeddingProvider {
 public:
  explicit HashProvider(int dim) : dim_(dim) {}
  std::string identifier() const override { return "hash"; }
  int dimension() const override { return dim_; }
  Var embed(Tape& t, const std::vector<std::string>& tokens) const override;
  // The hash rule: unit-normalized normal draws seeded by the token bytes.
  static std::vector<double> token_vector(const std::string& token, int dim);

 private:
  int dim_;
};

// Context-sensitive variant: each token's vector is its hash vector plus
// a scaled copy of the previous token's hash vector. Stands in for a
// pretrained contextual model in the implicit-context baseline.
class ContextHashProvider : public EmbeddingProvider {
 public:
  explicit ContextHashProvider(int dim, double mix = 0.25)
      : dim_(dim), mix_(mix) {}
  std::string identifier() const override { return "hash-ctx"; }
  int dimension() const override { return dim_; }
  bool context_sensitive() const override { return true; }
  Var embed(Tape& t, const std::vector<std::string>& tokens) const override;

 private:
  int dim_;
  double mix_;
};

// Precomputed per-token vectors loaded from a file, owned as one parameter
// table so the tiny fine-tuning learning rate is representable as an
// lr_scale on the base schedule. Unknown tokens map to a trailing UNK row
// initialized to zero.
class FileProvider : public EmbeddingProvider {
 public:
  // `store` may be null for a frozen, inference-only provider.
  FileProvider(const std::string& path, ParamStore* store, double lr_scale);
  std::string identifier() const override { return "file:" + path_; }
  int dimension() const override { return dim_; }
  bool trainable() const override { return table_param_ != nullptr; }
  Var embed(Tape& t, const std::vector<std::string>& tokens) const override;

 private:
  int row_of(const std::string& token) const;
  std::string path_;
  int dim_ = 0;
  std::vector<std::string> vocab_;
  Mat table_;  // [vocab+1 x dim], last row = UNK
  Param* table_param_ = nullptr;
};

// Writes the precomputed-embedding file: header (magic, version, dim,
// vocab size), token table, then row-major float32 vectors.
void save_embedding_file(const std::string& path,
                         const std::vector<std::string>& vocab,
                         const Mat& vectors);

// Factory for provider spec strings: "hash", "hash-ctx", "file:<path>".
std::unique_ptr<EmbeddingProvider> make_embedding_provider(
    const std::string& spec, int dim, ParamStore* store, double lr_scale);

}  // namespace ctxtts

#endif  // CTXTTS_EMBEDDING_HPP_
