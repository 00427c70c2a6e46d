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

#include "ctxtts/inference.hpp"

#include <cstring>
#include <fstream>
#include <ostream>

#include "json.hpp"

namespace ctxtts {

using nlohmann::json;

Synthesizer::Synthesizer(const ContextTtsModel* model,
                         const CorpusManifest* corpus,
                         const std::map<std::string, SpeakerPitchStats>* stats)
    : model_(model), corpus_(corpus), stats_(stats) {
  if (model_->config().mel_bins != corpus_->mel_bins)
    throw InvalidInput("synthesizer: checkpoint/corpus mel_bins mismatch");
}

ContextWindow Synthesizer::window_for(const Book& book, int utt_index,
                                      int k_override) const {
  const TceConfig& tce = model_->config().tce;
  if (tce.mode == TceMode::kImplicit)
    return extract_sentence_context(book, utt_index,
                                    tce.implicit_n_sentences);
  int k_eff = k_override >= 0 ? k_override : tce.k;
  return extract_context_window(book, utt_index, k_eff);
}

UtteranceSynthesis Synthesizer::run_one(const Utterance& utt,
                                        const ContextWindow& window,
                                        const Mat* prev_mel) const {
  BatchItem item;
  item.speaker = corpus_->speaker_index(utt.speaker_id);
  if (item.speaker < 0)
    throw InvalidInput("synthesize: unknown speaker " + utt.speaker_id);
  for (const std::string& ph : utt.phonemes) {
    int id = corpus_->phoneme_index(ph);
    if (id < 0) throw InvalidInput("synthesize: unknown phoneme " + ph);
    item.phoneme_ids.push_back(id);
  }
  item.target_text = utt.text;
  item.window = window;
  item.prev_mel = prev_mel;

  Tape t;
  ItemOutput out = model_->forward(t, item, false);

  UtteranceSynthesis syn;
  syn.book_id = utt.book_id;
  syn.index = utt.index;
  syn.mel = t.val(out.mel);
  syn.durations = out.durations_used;
  const Mat& pitch = t.val(out.pitch);
  const SpeakerPitchStats& stats = stats_->at(utt.speaker_id);
  for (size_t p = 0; p < utt.phonemes.size(); ++p) {
    syn.phoneme_pitch.push_back(pitch.at(static_cast<int>(p), 0));
    bool voiced = corpus_->phoneme_voiced(utt.phonemes[p]);
    for (int d = 0; d < syn.durations[p]; ++d) {
      syn.frame_pitch_norm.push_back(pitch.at(static_cast<int>(p), 0));
      double hz = voiced ? denormalize_pitch(pitch.at(static_cast<int>(p), 0),
                                             stats)
                         : 0.0;
      syn.frame_pitch_hz.push_back(hz < 0 ? 0.0 : hz);
    }
  }
  return syn;
}

std::vector<UtteranceSynthesis> Synthesizer::synthesize_book(
    const Book& book, int k_override,
    const std::map<int, int>& context_overrides,
    std::ostream* debug_log) const {
  for (auto& [target, source] : context_overrides) {
    int n = static_cast<int>(book.utterances.size());
    if (target < 0 || target >= n || source < 0 || source >= n)
      throw InvalidInput("synthesize_book: context override out of range");
  }
  std::vector<UtteranceSynthesis> outs;
  Mat prev_mel;
  bool have_prev = false;
  for (size_t i = 0; i < book.utterances.size(); ++i) {
    int idx = static_cast<int>(i);
    int window_source = idx;
    auto ov = context_overrides.find(idx);
    if (ov != context_overrides.end()) window_source = ov->second;
    ContextWindow window = window_for(book, window_source, k_override);
    if (debug_log) {
      (*debug_log) << "utt=" << idx << " k_effective="
                   << (model_->config().tce.mode == TceMode::kImplicit
                           ? -1
                           : (k_override >= 0 ? k_override
                                              : model_->config().tce.k))
                   << " window_source=" << window_source
                   << " pre_chars=" << utf8_length(window.preceding)
                   << " suc_chars=" << utf8_length(window.succeeding) << "\n";
    }
    UtteranceSynthesis syn =
        run_one(book.utterances[i], window, have_prev ? &prev_mel : nullptr);
    if (model_->config().use_ace) {
      prev_mel = syn.mel;  // the synthesized mel feeds the next utterance
      have_prev = true;
    }
    outs.push_back(std::move(syn));
  }
  return outs;
}

UtteranceSynthesis Synthesizer::synthesize_with_context(
    const Book& book, int utt_index, const ContextWindow& window,
    const Mat* prev_mel) const {
  if (utt_index < 0 || utt_index >= static_cast<int>(book.utterances.size()))
    throw InvalidInput("synthesize_with_context: index out of range");
  return run_one(book.utterances[utt_index], window, prev_mel);
}

namespace {
constexpr char kFeatureMagic[4] = {'C', 'T', 'X', 'F'};
constexpr uint32_t kFeatureVersion = 1;
}  // namespace

void save_synthesis(const std::vector<UtteranceSynthesis>& outs, int mel_bins,
                    double frame_rate, const std::string& features_path,
                    const std::string& map_path) {
  std::ofstream feat(features_path, std::ios::binary);
  if (!feat) throw IoError("cannot write " + features_path);
  feat.write(kFeatureMagic, 4);
  uint32_t ver = kFeatureVersion, bins = static_cast<uint32_t>(mel_bins);
  float rate = static_cast<float>(frame_rate);
  feat.write(reinterpret_cast<const char*>(&ver), 4);
  feat.write(reinterpret_cast<const char*>(&bins), 4);
  feat.write(reinterpret_cast<const char*>(&rate), 4);
  std::ofstream mp(map_path);
  if (!mp) throw IoError("cannot write " + map_path);
  for (const UtteranceSynthesis& o : outs) {
    json rec;
    rec["book"] = o.book_id;
    rec["index"] = o.index;
    rec["frames"] = o.mel.rows;
    rec["durations"] = o.durations;
    rec["phoneme_pitch"] = o.phoneme_pitch;
    rec["mel_off"] = static_cast<int64_t>(feat.tellp());
    for (double d : o.mel.v) {
      float f = static_cast<float>(d);
      feat.write(reinterpret_cast<const char*>(&f), 4);
    }
    rec["pitch_off"] = static_cast<int64_t>(feat.tellp());
    for (double d : o.frame_pitch_hz) {
      float f = static_cast<float>(d);
      feat.write(reinterpret_cast<const char*>(&f), 4);
    }
    mp << rec.dump() << "\n";
  }
}

std::vector<UtteranceSynthesis> load_synthesis(const std::string& features_path,
                                               const std::string& map_path) {
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
  std::ifstream mp(map_path);
  if (!mp) throw IoError("cannot read " + map_path);
  std::vector<UtteranceSynthesis> outs;
  std::string line;
  while (std::getline(mp, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    UtteranceSynthesis o;
    o.book_id = rec.at("book").get<std::string>();
    o.index = rec.at("index").get<int>();
    o.durations = rec.at("durations").get<std::vector<int>>();
    o.phoneme_pitch = rec.at("phoneme_pitch").get<std::vector<double>>();
    int frames = rec.at("frames").get<int>();
    o.mel = Mat(frames, static_cast<int>(bins));
    feat.seekg(rec.at("mel_off").get<int64_t>());
    for (double& d : o.mel.v) {
      float f;
      feat.read(reinterpret_cast<char*>(&f), 4);
      d = f;
    }
    feat.seekg(rec.at("pitch_off").get<int64_t>());
    o.frame_pitch_hz.resize(frames);
    for (double& d : o.frame_pitch_hz) {
      float f;
      feat.read(reinterpret_cast<char*>(&f), 4);
      d = f;
    }
    if (!feat) throw IoError("synthesis archive truncated");
    outs.push_back(std::move(o));
  }
  return outs;
}

}  // namespace ctxtts
