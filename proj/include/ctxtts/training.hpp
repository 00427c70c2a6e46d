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

#ifndef CTXTTS_TRAINING_HPP_
#define CTXTTS_TRAINING_HPP_

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ctxtts/tts_model.hpp"

namespace ctxtts {

// Per-batch loss components. total = mel + duration + pitch + energy +
// lambda_ace * ace; the ace term is omitted entirely when ACE is disabled.
struct LossBreakdown {
  double mel = 0.0;
  double duration = 0.0;
  double pitch = 0.0;
  double energy = 0.0;
  double ace = 0.0;
  double total = 0.0;
  bool has_ace = false;
};

struct TrainConfig {
  int batch_size = 32;
  int warmup_steps = 400;
  int max_steps = 2000;
  uint64_t seed = 7;
  double lambda_ace = 1.0;
  double grad_clip = 1.0;  // global norm
  int threads = 2;
  int log_every = 1;
  int k_override = -1;  // training-time context length override (rare)
};

// Transformer learning-rate schedule:
// d_model^-0.5 * min(step^-0.5, step * warmup^-1.5). Peaks at step == warmup.
double lr_schedule(int step, int d_model, int warmup);

// Per-item teacher-forced loss on the tape.
struct ItemLossVars {
  Var mel, duration, pitch, energy, total;
  Var ace;  // valid only when the model uses ACE
};
ItemLossVars item_loss(Tape& t, const ContextTtsModel& model,
                       const ItemOutput& out, const BatchItem& item,
                       double lambda_ace);

// Untaped batch-level evaluation of the loss (teacher forced), used by
// gradient checks and tests.
LossBreakdown batch_loss_value(const ContextTtsModel& model,
                               const Batch& batch, double lambda_ace);

// Teacher-forced training driver: deterministic shuffled batching, data
// parallel gradient accumulation over a fixed item partition, global-norm
// clipping and Adam with the transformer schedule and per-group lr scales.
class Trainer {
 public:
  Trainer(ContextTtsModel* model, const CorpusManifest* train_manifest,
          const std::map<std::string, SpeakerPitchStats>* stats,
          const TrainConfig& cfg);

  // Runs steps start_step+1 .. max_steps. Writes one JSON record per
  // log_every steps to metric_log when provided. Throws NumericError with a
  // diagnostic dump path when the loss goes non-finite.
  LossBreakdown run(std::ostream* metric_log, int start_step = 0,
                    const std::string& diag_path = "");

  // One optimization step at the given 1-based step number.
  LossBreakdown step(int step_number);

  // The deterministic batch for a step (exposed for tests).
  Batch make_batch(int step_number) const;

 private:
  void optimizer_step(int step_number);

  ContextTtsModel* model_;
  const CorpusManifest* manifest_;
  const std::map<std::string, SpeakerPitchStats>* stats_;
  TrainConfig cfg_;
  std::vector<std::pair<const Book*, int>> all_items_;
  int adam_steps_ = 0;
};

// --- Checkpoints -----------------------------------------------------------
// Versioned archive of named parameter arrays (name, shape, float32 data),
// plus the step counter and Adam state for exact resumption.

void save_checkpoint(const std::string& path, const ParamStore& store,
                     int step);
// Loads into an existing store; names and shapes must match exactly.
// Returns the stored step counter.
int load_checkpoint(const std::string& path, ParamStore& store);

// --- Ablation matrix --------------------------------------------------------

struct AblationRun {
  std::string id;
  bool use_ace = false;
  TceMode tce_mode = TceMode::kNone;
  std::string provider = "hash";
  int k = 64;
  int eval_k_override = -1;        // inference-time context length override
  std::string reuse_checkpoint_of;  // train once, evaluate under override
};

// "table2": the 8 modality/lateral configs in paper row order.
// "table1": the context-length sweep k in {16,32,64,128} plus the
// 128->64 inference-override row.
std::vector<AblationRun> ablation_matrix(const std::string& suite,
                                         int base_k = 64);

}  // namespace ctxtts

#endif  // CTXTTS_TRAINING_HPP_
