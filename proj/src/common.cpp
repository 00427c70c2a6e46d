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

#include "ctxtts/common.hpp"

namespace ctxtts {

static size_t utf8_seq_len(unsigned char c) {
  if ((c & 0x80) == 0x00) return 1;
  if ((c & 0xE0) == 0xC0) return 2;
  if ((c & 0xF0) == 0xE0) return 3;
  if ((c & 0xF8) == 0xF0) return 4;
  return 1;  // invalid lead byte, treat as one unit
}

std::vector<std::string> utf8_codepoints(const std::string& text) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < text.size()) {
    size_t len = utf8_seq_len(static_cast<unsigned char>(text[i]));
    if (i + len > text.size()) len = 1;
    out.push_back(text.substr(i, len));
    i += len;
  }
  return out;
}

size_t utf8_length(const std::string& text) {
  size_t n = 0;
  size_t i = 0;
  while (i < text.size()) {
    size_t len = utf8_seq_len(static_cast<unsigned char>(text[i]));
    if (i + len > text.size()) len = 1;
    i += len;
    ++n;
  }
  return n;
}

}  // namespace ctxtts
