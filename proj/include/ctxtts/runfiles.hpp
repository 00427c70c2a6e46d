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

#ifndef CTXTTS_RUNFILES_HPP_
#define CTXTTS_RUNFILES_HPP_

#include <string>
#include <vector>

#include "ctxtts/metrics.hpp"
#include "ctxtts/training.hpp"

namespace ctxtts {

// Everything needed to reproduce one training/evaluation run.
struct RunConfig {
  std::string ablation_id = "custom";
  ModelConfig model;
  TrainConfig train;
  int eval_k_override = -1;  // inference-time context length override
  std::string train_from;    // reuse another run's checkpoint (128->64 row)
};

// Human-readable key = value file.
void save_run_config(const std::string& path, const RunConfig& rc);
RunConfig load_run_config(const std::string& path);
// Applies an AblationRun onto a base config (id, modality flags, k).
RunConfig apply_ablation(const RunConfig& base, const AblationRun& run);

// Scores table: rows = ablation ids, columns = MCD, F0-RMSE, GPE, ACC.
struct ScoreRow {
  std::string id;
  ProsodyScores scores;
  bool failed = false;
};
void save_scores_table(const std::string& path,
                       const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> load_scores_table(const std::string& path);

// Run directory layout.
struct RunPaths {
  std::string root;
  explicit RunPaths(std::string r) : root(std::move(r)) {}
  std::string config() const { return root + "/config.cfg"; }
  std::string checkpoint() const { return root + "/checkpoint.ckpt"; }
  std::string metrics() const { return root + "/metrics.jsonl"; }
  std::string diag() const { return root + "/diagnostic.json"; }
  std::string synth_features() const { return root + "/synth/features.bin"; }
  std::string synth_map() const { return root + "/synth/map.jsonl"; }
  std::string synth_log() const { return root + "/synth/debug.log"; }
  std::string synth_dir() const { return root + "/synth"; }
  std::string scores() const { return root + "/scores.tsv"; }
};

// Corpus directory layout: the full corpus plus the train/test split, each
// as a manifest + feature archive pair, and the speaker stats file.
struct CorpusDir {
  std::string root;
  explicit CorpusDir(std::string r) : root(std::move(r)) {}
  std::string manifest() const { return root + "/corpus.jsonl"; }
  std::string features() const { return root + "/features.bin"; }
  std::string train_manifest() const { return root + "/train.jsonl"; }
  std::string train_features() const { return root + "/train_features.bin"; }
  std::string test_manifest() const { return root + "/test.jsonl"; }
  std::string test_features() const { return root + "/test_features.bin"; }
  std::string stats() const { return root + "/stats.json"; }
};

struct LoadedCorpus {
  CorpusManifest full;
  CorpusManifest train;
  CorpusManifest test;
  std::map<std::string, SpeakerPitchStats> stats;
};

// Splits, computes stats and writes the corpus directory; empty hold_out
// defaults to the last book of each speaker.
std::vector<std::string> write_corpus_dir(
    const CorpusManifest& full, const std::vector<std::string>& hold_out,
    const std::string& out_dir, std::vector<std::string>* warnings = nullptr);
LoadedCorpus load_corpus_dir(const std::string& dir);

bool file_exists(const std::string& path);
void ensure_dir(const std::string& path);

}  // namespace ctxtts

#endif  // CTXTTS_RUNFILES_HPP_
