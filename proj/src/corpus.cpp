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

#include "ctxtts/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ctxtts {

using nlohmann::json;

const Book* CorpusManifest::find_book(const std::string& id) const {
  for (const Book& b : books)
    if (b.book_id == id) return &b;
  return nullptr;
}

int CorpusManifest::speaker_index(const std::string& id) const {
  for (size_t i = 0; i < speakers.size(); ++i)
    if (speakers[i] == id) return static_cast<int>(i);
  return -1;
}

int CorpusManifest::phoneme_index(const std::string& sym) const {
  for (size_t i = 0; i < phoneme_inventory.size(); ++i)
    if (phoneme_inventory[i].symbol == sym) return static_cast<int>(i);
  return -1;
}

bool CorpusManifest::phoneme_voiced(const std::string& sym) const {
  int i = phoneme_index(sym);
  if (i < 0) throw InvalidInput("unknown phoneme symbol: " + sym);
  return phoneme_inventory[i].voiced;
}

size_t CorpusManifest::total_utterances() const {
  size_t n = 0;
  for (const Book& b : books) n += b.utterances.size();
  return n;
}

void CorpusManifest::validate() const {
  for (const Book& b : books) {
    for (size_t i = 0; i < b.utterances.size(); ++i) {
      const Utterance& u = b.utterances[i];
      if (u.index != static_cast<int>(i))
        throw InvalidInput("book " + b.book_id + ": indices not contiguous");
      if (speaker_index(u.speaker_id) < 0)
        throw InvalidInput("unknown speaker: " + u.speaker_id);
      int dur_sum = 0;
      for (int d : u.durations) {
        if (d < 1) throw InvalidInput("duration < 1 in " + b.book_id);
        dur_sum += d;
      }
      if (u.phonemes.size() != u.durations.size())
        throw InvalidInput("phoneme/duration length mismatch");
      if (dur_sum != u.frames() || u.mel.rows != dur_sum ||
          static_cast<int>(u.energy.size()) != dur_sum)
        throw InvalidInput("frame count mismatch in " + b.book_id + "[" +
                           std::to_string(i) + "]");
      if (u.mel.cols != mel_bins) throw InvalidInput("mel_bins mismatch");
      for (double p : u.pitch)
        if (p < 0 || !std::isfinite(p))
          throw InvalidInput("negative or non-finite pitch");
    }
  }
}

double normalize_pitch(double p, const SpeakerPitchStats& stats) {
  if (!std::isfinite(p)) throw InvalidInput("normalize_pitch: non-finite p");
  if (!(stats.sigma > 0.0))
    throw InvalidInput("normalize_pitch: sigma must be positive");
  return (p - stats.mu) / stats.sigma;
}

double denormalize_pitch(double pbar, const SpeakerPitchStats& stats) {
  if (!std::isfinite(pbar))
    throw InvalidInput("denormalize_pitch: non-finite input");
  if (!(stats.sigma > 0.0))
    throw InvalidInput("denormalize_pitch: sigma must be positive");
  return pbar * stats.sigma + stats.mu;
}

std::vector<double> normalize_pitch_contour(const std::vector<double>& pitch,
                                            const SpeakerPitchStats& stats) {
  std::vector<double> out(pitch.size(), 0.0);
  for (size_t i = 0; i < pitch.size(); ++i)
    if (pitch[i] > 0) out[i] = normalize_pitch(pitch[i], stats);
  return out;
}

SpeakerPitchStats compute_speaker_stats(
    const std::vector<const Utterance*>& utterances) {
  SpeakerPitchStats stats;
  double sum = 0.0;
  size_t n = 0;
  for (const Utterance* u : utterances) {
    for (double p : u->pitch) {
      if (p > 0) {
        sum += p;
        ++n;
      }
    }
  }
  if (n == 0)
    throw InvalidInput("compute_speaker_stats: no voiced frames");
  stats.mu = sum / static_cast<double>(n);
  double sq = 0.0;
  for (const Utterance* u : utterances)
    for (double p : u->pitch)
      if (p > 0) sq += (p - stats.mu) * (p - stats.mu);
  stats.sigma = std::sqrt(sq / static_cast<double>(n));
  if (!utterances.empty()) stats.speaker_id = utterances.front()->speaker_id;
  if (stats.sigma == 0.0) {
    stats.sigma = 1.0;
    stats.degenerate = true;
  }
  return stats;
}

std::map<std::string, SpeakerPitchStats> compute_all_speaker_stats(
    const CorpusManifest& manifest) {
  std::map<std::string, std::vector<const Utterance*>> by_speaker;
  for (const Book& b : manifest.books)
    for (const Utterance& u : b.utterances)
      by_speaker[u.speaker_id].push_back(&u);
  std::map<std::string, SpeakerPitchStats> out;
  for (auto& [id, utts] : by_speaker) {
    SpeakerPitchStats s = compute_speaker_stats(utts);
    s.speaker_id = id;
    out[id] = s;
  }
  return out;
}

static std::string last_codepoints(const std::vector<std::string>& texts,
                                   int end_index, int k) {
  // Suffix of the concatenation of texts[0..end_index), k codepoints long.
  std::vector<std::string> cps;
  for (int t = end_index - 1; t >= 0 && static_cast<int>(cps.size()) < k;
       --t) {
    std::vector<std::string> c = utf8_codepoints(texts[t]);
    for (auto it = c.rbegin(); it != c.rend(); ++it) {
      cps.push_back(*it);
      if (static_cast<int>(cps.size()) >= k) break;
    }
  }
  std::string out;
  for (auto it = cps.rbegin(); it != cps.rend(); ++it) out += *it;
  return out;
}

static std::string first_codepoints(const std::vector<std::string>& texts,
                                    int begin_index, int k) {
  std::string out;
  int taken = 0;
  for (size_t t = begin_index; t < texts.size() && taken < k; ++t) {
    for (const std::string& cp : utf8_codepoints(texts[t])) {
      out += cp;
      if (++taken >= k) break;
    }
  }
  return out;
}

ContextWindow extract_context_window(const std::vector<std::string>& texts,
                                     int target_index, int k) {
  if (target_index < 0 || target_index >= static_cast<int>(texts.size()))
    throw InvalidInput("extract_context_window: index out of range");
  if (k < 0) throw InvalidInput("extract_context_window: k must be >= 0");
  ContextWindow w;
  w.k = k;
  w.preceding = last_codepoints(texts, target_index, k);
  w.succeeding = first_codepoints(texts, target_index + 1, k);
  return w;
}

ContextWindow extract_context_window(const Book& book, int target_index,
                                     int k) {
  std::vector<std::string> texts;
  texts.reserve(book.utterances.size());
  for (const Utterance& u : book.utterances) texts.push_back(u.text);
  return extract_context_window(texts, target_index, k);
}

ContextWindow extract_sentence_context(const std::vector<std::string>& texts,
                                       int target_index, int n_sentences) {
  if (target_index < 0 || target_index >= static_cast<int>(texts.size()))
    throw InvalidInput("extract_sentence_context: index out of range");
  if (n_sentences < 0)
    throw InvalidInput("extract_sentence_context: n must be >= 0");
  ContextWindow w;
  w.k = 0;
  for (int t = std::max(0, target_index - n_sentences); t < target_index; ++t)
    w.preceding += texts[t];
  int last = std::min(static_cast<int>(texts.size()),
                      target_index + 1 + n_sentences);
  for (int t = target_index + 1; t < last; ++t) w.succeeding += texts[t];
  return w;
}

ContextWindow extract_sentence_context(const Book& book, int target_index,
                                       int n_sentences) {
  std::vector<std::string> texts;
  texts.reserve(book.utterances.size());
  for (const Utterance& u : book.utterances) texts.push_back(u.text);
  return extract_sentence_context(texts, target_index, n_sentences);
}

SplitResult split_corpus(const CorpusManifest& manifest,
                         const std::vector<std::string>& held_out_books) {
  for (const std::string& id : held_out_books)
    if (!manifest.find_book(id))
      throw InvalidInput("split_corpus: unknown book id " + id);
  SplitResult res;
  res.train.mel_bins = res.test.mel_bins = manifest.mel_bins;
  res.train.frame_rate = res.test.frame_rate = manifest.frame_rate;
  res.train.speakers = res.test.speakers = manifest.speakers;
  res.train.phoneme_inventory = res.test.phoneme_inventory =
      manifest.phoneme_inventory;
  for (const Book& b : manifest.books) {
    bool held = std::find(held_out_books.begin(), held_out_books.end(),
                          b.book_id) != held_out_books.end();
    (held ? res.test : res.train).books.push_back(b);
  }
  // Flag speakers that lost all their books from the training side.
  for (const std::string& spk : manifest.speakers) {
    bool in_train = false, in_corpus = false;
    for (const Book& b : manifest.books)
      for (const Utterance& u : b.utterances)
        if (u.speaker_id == spk) in_corpus = true;
    for (const Book& b : res.train.books)
      for (const Utterance& u : b.utterances)
        if (u.speaker_id == spk) in_train = true;
    if (in_corpus && !in_train)
      res.warnings.push_back("speaker " + spk +
                             " has no training books after split");
  }
  return res;
}

// --- Binary feature archive ------------------------------------------------

namespace {

constexpr char kFeatureMagic[4] = {'C', 'T', 'X', 'F'};
constexpr uint32_t kFeatureVersion = 1;
constexpr const char* kManifestSchema = "ctxtts-manifest";
constexpr uint32_t kManifestVersion = 1;

void write_f32(std::ostream& os, const std::vector<double>& vals) {
  for (double d : vals) {
    float f = static_cast<float>(d);
    os.write(reinterpret_cast<const char*>(&f), sizeof(float));
  }
}

std::vector<double> read_f32(std::istream& is, size_t count) {
  std::vector<double> out(count);
  for (size_t i = 0; i < count; ++i) {
    float f;
    is.read(reinterpret_cast<char*>(&f), sizeof(float));
    out[i] = f;
  }
  if (!is) throw IoError("feature archive truncated");
  return out;
}

}  // namespace

void save_corpus(const CorpusManifest& manifest,
                 const std::string& manifest_path,
                 const std::string& features_path) {
  std::ofstream feat(features_path, std::ios::binary);
  if (!feat) throw IoError("cannot write " + features_path);
  feat.write(kFeatureMagic, 4);
  uint32_t ver = kFeatureVersion, bins = manifest.mel_bins;
  float rate = static_cast<float>(manifest.frame_rate);
  feat.write(reinterpret_cast<const char*>(&ver), 4);
  feat.write(reinterpret_cast<const char*>(&bins), 4);
  feat.write(reinterpret_cast<const char*>(&rate), 4);

  std::ofstream mf(manifest_path);
  if (!mf) throw IoError("cannot write " + manifest_path);
  json header;
  header["schema"] = kManifestSchema;
  header["version"] = kManifestVersion;
  header["mel_bins"] = manifest.mel_bins;
  header["frame_rate"] = manifest.frame_rate;
  header["speakers"] = manifest.speakers;
  json inv = json::array();
  for (const PhonemeInfo& p : manifest.phoneme_inventory)
    inv.push_back({{"sym", p.symbol}, {"voiced", p.voiced}});
  header["phonemes"] = inv;
  mf << header.dump() << "\n";

  for (const Book& b : manifest.books) {
    for (const Utterance& u : b.utterances) {
      json rec;
      rec["book"] = b.book_id;
      rec["speaker"] = u.speaker_id;
      rec["index"] = u.index;
      rec["text"] = u.text;
      rec["phonemes"] = u.phonemes;
      rec["durations"] = u.durations;
      rec["frames"] = u.frames();
      rec["mel_off"] = static_cast<int64_t>(feat.tellp());
      write_f32(feat, u.mel.v);
      rec["pitch_off"] = static_cast<int64_t>(feat.tellp());
      write_f32(feat, u.pitch);
      rec["energy_off"] = static_cast<int64_t>(feat.tellp());
      write_f32(feat, u.energy);
      mf << rec.dump() << "\n";
    }
  }
}

CorpusManifest load_corpus(const std::string& manifest_path,
                           const std::string& features_path) {
  std::ifstream mf(manifest_path);
  if (!mf) throw IoError("cannot read " + manifest_path);
  std::ifstream feat(features_path, std::ios::binary);
  if (!feat) throw IoError("cannot read " + features_path);
  char magic[4];
  feat.read(magic, 4);
  if (std::memcmp(magic, kFeatureMagic, 4) != 0)
    throw IoError("bad feature archive magic in " + features_path);
  uint32_t ver, bins;
  float rate;
  feat.read(reinterpret_cast<char*>(&ver), 4);
  feat.read(reinterpret_cast<char*>(&bins), 4);
  feat.read(reinterpret_cast<char*>(&rate), 4);
  if (ver != kFeatureVersion) throw IoError("unsupported feature version");

  std::string line;
  if (!std::getline(mf, line)) throw IoError("empty manifest");
  json header = json::parse(line);
  if (header.value("schema", "") != kManifestSchema)
    throw IoError("bad manifest schema id");
  CorpusManifest manifest;
  manifest.mel_bins = header.at("mel_bins").get<int>();
  manifest.frame_rate = header.at("frame_rate").get<double>();
  manifest.speakers = header.at("speakers").get<std::vector<std::string>>();
  for (const json& p : header.at("phonemes"))
    manifest.phoneme_inventory.push_back(
        {p.at("sym").get<std::string>(), p.at("voiced").get<bool>()});
  if (static_cast<int>(bins) != manifest.mel_bins)
    throw IoError("manifest/archive mel_bins mismatch");

  while (std::getline(mf, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    Utterance u;
    u.book_id = rec.at("book").get<std::string>();
    u.speaker_id = rec.at("speaker").get<std::string>();
    u.index = rec.at("index").get<int>();
    u.text = rec.at("text").get<std::string>();
    u.phonemes = rec.at("phonemes").get<std::vector<std::string>>();
    u.durations = rec.at("durations").get<std::vector<int>>();
    int frames = rec.at("frames").get<int>();
    feat.seekg(rec.at("mel_off").get<int64_t>());
    u.mel = Mat(frames, manifest.mel_bins,
                read_f32(feat, static_cast<size_t>(frames) * bins));
    feat.seekg(rec.at("pitch_off").get<int64_t>());
    u.pitch = read_f32(feat, frames);
    feat.seekg(rec.at("energy_off").get<int64_t>());
    u.energy = read_f32(feat, frames);
    if (manifest.books.empty() || manifest.books.back().book_id != u.book_id) {
      Book b;
      b.book_id = u.book_id;
      manifest.books.push_back(b);
    }
    manifest.books.back().utterances.push_back(std::move(u));
  }
  manifest.validate();
  return manifest;
}

void save_speaker_stats(const std::map<std::string, SpeakerPitchStats>& stats,
                        const std::string& path) {
  json j;
  j["schema"] = "ctxtts-stats";
  j["version"] = 1;
  json arr = json::array();
  for (const auto& [id, s] : stats)
    arr.push_back({{"id", id},
                   {"mu", s.mu},
                   {"sigma", s.sigma},
                   {"degenerate", s.degenerate}});
  j["speakers"] = arr;
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << j.dump(2) << "\n";
}

std::map<std::string, SpeakerPitchStats> load_speaker_stats(
    const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path);
  json j = json::parse(is);
  std::map<std::string, SpeakerPitchStats> out;
  for (const json& rec : j.at("speakers")) {
    SpeakerPitchStats s;
    s.speaker_id = rec.at("id").get<std::string>();
    s.mu = rec.at("mu").get<double>();
    s.sigma = rec.at("sigma").get<double>();
    s.degenerate = rec.at("degenerate").get<bool>();
    out[s.speaker_id] = s;
  }
  return out;
}

}  // namespace ctxtts
