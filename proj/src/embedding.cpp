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

#include "ctxtts/embedding.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace ctxtts {

std::vector<std::string> tokenize_text(const std::string& text) {
  if (text.empty()) return {};
  bool has_space = false;
  for (char c : text)
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') has_space = true;
  std::vector<std::string> tokens;
  if (has_space) {
    std::string cur;
    for (char c : text) {
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        if (!cur.empty()) tokens.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) tokens.push_back(cur);
  } else {
    tokens = utf8_codepoints(text);
  }
  return tokens;
}

Mat EmbeddingProvider::embed_values(
    const std::vector<std::string>& tokens) const {
  Tape t;
  Var v = embed(t, tokens);
  return t.val(v);
}

std::vector<double> HashProvider::token_vector(const std::string& token,
                                               int dim) {
  Rng rng(fnv1a("embed:" + token));
  std::vector<double> v(dim);
  double norm = 0.0;
  for (double& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  if (norm > 0)
    for (double& x : v) x /= norm;
  return v;
}

Var HashProvider::embed(Tape& t, const std::vector<std::string>& tokens) const {
  Mat m(static_cast<int>(tokens.size()), dim_);
  for (size_t i = 0; i < tokens.size(); ++i) {
    std::vector<double> v = token_vector(tokens[i], dim_);
    for (int c = 0; c < dim_; ++c) m.at(static_cast<int>(i), c) = v[c];
  }
  return t.constant(std::move(m));
}

Var ContextHashProvider::embed(Tape& t,
                               const std::vector<std::string>& tokens) const {
  Mat m(static_cast<int>(tokens.size()), dim_);
  for (size_t i = 0; i < tokens.size(); ++i) {
    std::vector<double> v = HashProvider::token_vector(tokens[i], dim_);
    if (i > 0) {
      std::vector<double> p = HashProvider::token_vector(tokens[i - 1], dim_);
      for (int c = 0; c < dim_; ++c) v[c] += mix_ * p[c];
    }
    for (int c = 0; c < dim_; ++c) m.at(static_cast<int>(i), c) = v[c];
  }
  return t.constant(std::move(m));
}

namespace {
constexpr char kEmbedMagic[4] = {'C', 'T', 'X', 'E'};
constexpr uint32_t kEmbedVersion = 1;
}  // namespace

void save_embedding_file(const std::string& path,
                         const std::vector<std::string>& vocab,
                         const Mat& vectors) {
  if (vectors.rows != static_cast<int>(vocab.size()))
    throw InvalidInput("save_embedding_file: vocab/vector count mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os.write(kEmbedMagic, 4);
  uint32_t ver = kEmbedVersion, dim = vectors.cols, n = vectors.rows;
  os.write(reinterpret_cast<const char*>(&ver), 4);
  os.write(reinterpret_cast<const char*>(&dim), 4);
  os.write(reinterpret_cast<const char*>(&n), 4);
  for (const std::string& tok : vocab) {
    uint16_t len = static_cast<uint16_t>(tok.size());
    os.write(reinterpret_cast<const char*>(&len), 2);
    os.write(tok.data(), len);
  }
  for (double d : vectors.v) {
    float f = static_cast<float>(d);
    os.write(reinterpret_cast<const char*>(&f), 4);
  }
}

FileProvider::FileProvider(const std::string& path, ParamStore* store,
                           double lr_scale)
    : path_(path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read embedding file " + path);
  char magic[4];
  is.read(magic, 4);
  if (std::memcmp(magic, kEmbedMagic, 4) != 0)
    throw IoError("bad embedding file magic in " + path);
  uint32_t ver, dim, n;
  is.read(reinterpret_cast<char*>(&ver), 4);
  is.read(reinterpret_cast<char*>(&dim), 4);
  is.read(reinterpret_cast<char*>(&n), 4);
  if (ver != kEmbedVersion) throw IoError("unsupported embedding file version");
  dim_ = static_cast<int>(dim);
  vocab_.resize(n);
  for (uint32_t i = 0; i < n; ++i) {
    uint16_t len;
    is.read(reinterpret_cast<char*>(&len), 2);
    std::string tok(len, '\0');
    is.read(tok.data(), len);
    vocab_[i] = tok;
  }
  table_ = Mat(static_cast<int>(n) + 1, dim_);  // +1 zero UNK row
  for (uint32_t i = 0; i < n * dim; ++i) {
    float f;
    is.read(reinterpret_cast<char*>(&f), 4);
    table_.v[i] = f;
  }
  if (!is) throw IoError("embedding file truncated: " + path);
  if (store) {
    table_param_ = store->create_zeros("provider.table", table_.rows,
                                       table_.cols, true, lr_scale);
    table_param_->value = table_;
  }
}

int FileProvider::row_of(const std::string& token) const {
  for (size_t i = 0; i < vocab_.size(); ++i)
    if (vocab_[i] == token) return static_cast<int>(i);
  return static_cast<int>(vocab_.size());  // UNK row
}

Var FileProvider::embed(Tape& t, const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& tok : tokens) ids.push_back(row_of(tok));
  if (tokens.empty()) return t.constant(Mat(0, dim_));
  if (table_param_) return t.embed_rows(t.param(*table_param_), ids);
  Mat m(static_cast<int>(tokens.size()), dim_);
  for (size_t i = 0; i < ids.size(); ++i)
    for (int c = 0; c < dim_; ++c)
      m.at(static_cast<int>(i), c) = table_.at(ids[i], c);
  return t.constant(std::move(m));
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(
    const std::string& spec, int dim, ParamStore* store, double lr_scale) {
  if (spec == "hash") return std::make_unique<HashProvider>(dim);
  if (spec == "hash-ctx") return std::make_unique<ContextHashProvider>(dim);
  if (spec.rfind("file:", 0) == 0)
    return std::make_unique<FileProvider>(spec.substr(5), store, lr_scale);
  throw InvalidInput("unknown embedding provider: " + spec);
}

}  // namespace ctxtts
