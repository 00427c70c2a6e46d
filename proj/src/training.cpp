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

#include "ctxtts/training.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <thread>

#include "json.hpp"

namespace ctxtts {

using nlohmann::json;

double lr_schedule(int step, int d_model, int warmup) {
  if (step < 1) throw InvalidInput("lr_schedule: step must be >= 1");
  double s = static_cast<double>(step);
  double w = static_cast<double>(warmup);
  return std::pow(static_cast<double>(d_model), -0.5) *
         std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

ItemLossVars item_loss(Tape& t, const ContextTtsModel& model,
                       const ItemOutput& out, const BatchItem& item,
                       double lambda_ace) {
  ItemLossVars l;
  const int t_ph = static_cast<int>(item.phoneme_ids.size());
  l.mel = t.mean_abs_diff(out.mel, t.constant(item.mel_target));

  std::vector<double> log_dur(t_ph);
  for (int p = 0; p < t_ph; ++p)
    log_dur[p] = std::log(static_cast<double>(item.durations[p]));
  std::vector<double> ones(t_ph, 1.0);
  l.duration = t.masked_mse(out.log_dur,
                            t.constant(Mat(t_ph, 1, std::move(log_dur))), ones);
  l.pitch = t.masked_mse(
      out.pitch,
      t.constant(Mat(t_ph, 1, std::vector<double>(item.pitch_targets))),
      item.pitch_mask);
  l.energy = t.masked_mse(
      out.energy,
      t.constant(Mat(t_ph, 1, std::vector<double>(item.energy_targets))),
      ones);
  l.total = t.add(t.add(l.mel, l.duration), t.add(l.pitch, l.energy));
  if (model.config().use_ace && out.v_ace.valid() && out.v_ae.valid()) {
    Var a = out.v_ace, b = out.v_ae;
    switch (model.config().ace_grad) {
      case AceGradMode::kBoth: break;
      case AceGradMode::kAceOnly: b = t.detach(b); break;
      case AceGradMode::kAeOnly: a = t.detach(a); break;
    }
    l.ace = ace_prediction_loss(t, a, b);
    l.total = t.add(l.total, t.scale(l.ace, lambda_ace));
  }
  return l;
}

LossBreakdown batch_loss_value(const ContextTtsModel& model,
                               const Batch& batch, double lambda_ace) {
  LossBreakdown sum;
  sum.has_ace = model.config().use_ace;
  for (const BatchItem& item : batch.items) {
    Tape t;
    ItemOutput out = model.forward(t, item, true);
    ItemLossVars l = item_loss(t, model, out, item, lambda_ace);
    sum.mel += t.scalar(l.mel);
    sum.duration += t.scalar(l.duration);
    sum.pitch += t.scalar(l.pitch);
    sum.energy += t.scalar(l.energy);
    if (sum.has_ace) sum.ace += t.scalar(l.ace);
    sum.total += t.scalar(l.total);
  }
  const double n = static_cast<double>(batch.items.size());
  sum.mel /= n;
  sum.duration /= n;
  sum.pitch /= n;
  sum.energy /= n;
  sum.ace /= n;
  sum.total /= n;
  return sum;
}

Trainer::Trainer(ContextTtsModel* model, const CorpusManifest* train_manifest,
                 const std::map<std::string, SpeakerPitchStats>* stats,
                 const TrainConfig& cfg)
    : model_(model), manifest_(train_manifest), stats_(stats), cfg_(cfg) {
  if (cfg_.batch_size < 1) throw InvalidInput("trainer: batch size >= 1");
  for (const Book& b : manifest_->books)
    for (size_t i = 0; i < b.utterances.size(); ++i)
      all_items_.push_back({&b, static_cast<int>(i)});
  if (all_items_.empty()) throw InvalidInput("trainer: empty training set");
}

Batch Trainer::make_batch(int step_number) const {
  // Deterministic shuffled stream: epoch e is a Fisher-Yates permutation
  // seeded by (seed, e); step s consumes batch_size consecutive entries.
  Batch batch;
  const size_t n = all_items_.size();
  size_t start = static_cast<size_t>(step_number - 1) *
                 static_cast<size_t>(cfg_.batch_size);
  for (int b = 0; b < cfg_.batch_size; ++b) {
    size_t pos = start + static_cast<size_t>(b);
    size_t epoch = pos / n;
    size_t offset = pos % n;
    std::vector<uint32_t> perm(n);
    for (size_t i = 0; i < n; ++i) perm[i] = static_cast<uint32_t>(i);
    Rng rng(mix_seed(cfg_.seed, "epoch" + std::to_string(epoch)));
    for (size_t i = n - 1; i > 0; --i) {
      size_t j = rng.below(i + 1);
      std::swap(perm[i], perm[j]);
    }
    auto [book, idx] = all_items_[perm[offset]];
    const Utterance& u = book->utterances[idx];
    batch.items.push_back(make_batch_item(*manifest_, *book, idx,
                                          stats_->at(u.speaker_id),
                                          model_->config().tce,
                                          cfg_.k_override));
  }
  return batch;
}

LossBreakdown Trainer::step(int step_number) {
  Batch batch = make_batch(step_number);
  const int n_items = static_cast<int>(batch.items.size());
  const int n_threads = std::max(1, std::min(cfg_.threads, n_items));
  const ContextTtsModel& model = *model_;
  const double lambda = cfg_.lambda_ace;

  struct WorkerResult {
    std::vector<Mat> grads;  // by param ordinal
    LossBreakdown sums;
    std::string error;
  };
  std::vector<WorkerResult> results(n_threads);
  const auto& params = model_->params().all();

  auto worker = [&](int w) {
    WorkerResult& res = results[w];
    res.grads.resize(params.size());
    try {
      // Static partition keeps accumulation order deterministic.
      for (int i = w; i < n_items; i += n_threads) {
        Tape t;
        ItemOutput out = model.forward(t, batch.items[i], true);
        ItemLossVars l = item_loss(t, model, out, batch.items[i], lambda);
        t.backward(l.total, false);
        for (auto& [p, node] : t.bound()) {
          if (!p->trainable) continue;
          Mat& acc = res.grads[p->ordinal];
          const Mat& g = t.grad(Var{node});
          if (acc.v.empty()) acc = Mat(g.rows, g.cols);
          for (size_t x = 0; x < g.size(); ++x) acc.v[x] += g.v[x];
        }
        res.sums.mel += t.scalar(l.mel);
        res.sums.duration += t.scalar(l.duration);
        res.sums.pitch += t.scalar(l.pitch);
        res.sums.energy += t.scalar(l.energy);
        if (model.config().use_ace) res.sums.ace += t.scalar(l.ace);
        res.sums.total += t.scalar(l.total);
      }
    } catch (const std::exception& e) {
      res.error = e.what();
    }
  };

  if (n_threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_threads; ++w) pool.emplace_back(worker, w);
    for (auto& th : pool) th.join();
  }
  for (const WorkerResult& res : results)
    if (!res.error.empty()) throw Error("training step failed: " + res.error);

  // Reduce in worker order, then average over the batch.
  model_->params().zero_grads();
  for (const WorkerResult& res : results) {
    for (size_t pi = 0; pi < params.size(); ++pi) {
      if (res.grads[pi].v.empty()) continue;
      Mat& g = params[pi]->grad;
      for (size_t x = 0; x < g.size(); ++x) g.v[x] += res.grads[pi].v[x];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n_items);
  for (Param* p : params)
    for (double& x : p->grad.v) x *= inv_n;

  optimizer_step(step_number);

  LossBreakdown out;
  out.has_ace = model.config().use_ace;
  for (const WorkerResult& res : results) {
    out.mel += res.sums.mel;
    out.duration += res.sums.duration;
    out.pitch += res.sums.pitch;
    out.energy += res.sums.energy;
    out.ace += res.sums.ace;
    out.total += res.sums.total;
  }
  out.mel *= inv_n;
  out.duration *= inv_n;
  out.pitch *= inv_n;
  out.energy *= inv_n;
  out.ace *= inv_n;
  out.total *= inv_n;
  return out;
}

void Trainer::optimizer_step(int step_number) {
  const auto& params = model_->params().all();
  // Global-norm gradient clipping.
  double norm_sq = 0.0;
  for (Param* p : params) {
    if (!p->trainable) continue;
    for (double g : p->grad.v) norm_sq += g * g;
  }
  double norm = std::sqrt(norm_sq);
  double clip_scale =
      (cfg_.grad_clip > 0 && norm > cfg_.grad_clip) ? cfg_.grad_clip / norm
                                                    : 1.0;
  const double base_lr =
      lr_schedule(step_number, model_->config().d_model, cfg_.warmup_steps);
  const double b1 = 0.9, b2 = 0.98, eps = 1e-9;
  ++adam_steps_;
  const double bc1 = 1.0 - std::pow(b1, adam_steps_);
  const double bc2 = 1.0 - std::pow(b2, adam_steps_);
  for (Param* p : params) {
    if (!p->trainable || p->lr_scale == 0.0) continue;
    if (p->adam_m.v.empty()) {
      p->adam_m = Mat(p->value.rows, p->value.cols);
      p->adam_v = Mat(p->value.rows, p->value.cols);
    }
    const double lr = base_lr * p->lr_scale;
    for (size_t i = 0; i < p->value.size(); ++i) {
      double g = p->grad.v[i] * clip_scale;
      p->adam_m.v[i] = b1 * p->adam_m.v[i] + (1 - b1) * g;
      p->adam_v.v[i] = b2 * p->adam_v.v[i] + (1 - b2) * g * g;
      p->value.v[i] -=
          lr * (p->adam_m.v[i] / bc1) / (std::sqrt(p->adam_v.v[i] / bc2) + eps);
    }
  }
}

static json breakdown_to_json(const LossBreakdown& l, int step, double lr) {
  json rec;
  rec["step"] = step;
  rec["mel"] = l.mel;
  rec["duration"] = l.duration;
  rec["pitch"] = l.pitch;
  rec["energy"] = l.energy;
  if (l.has_ace) rec["ace"] = l.ace;
  rec["total"] = l.total;
  rec["lr"] = lr;
  return rec;
}

LossBreakdown Trainer::run(std::ostream* metric_log, int start_step,
                           const std::string& diag_path) {
  adam_steps_ = start_step;
  LossBreakdown last;
  for (int s = start_step + 1; s <= cfg_.max_steps; ++s) {
    last = step(s);
    if (!std::isfinite(last.total)) {
      json diag = breakdown_to_json(last, s, 0.0);
      diag["event"] = "non-finite loss";
      double pnorm = 0.0;
      for (Param* p : model_->params().all())
        for (double x : p->value.v) pnorm += x * x;
      diag["param_norm"] = std::sqrt(pnorm);
      if (!diag_path.empty()) {
        std::ofstream df(diag_path);
        df << diag.dump(2) << "\n";
      }
      throw NumericError("non-finite loss at step " + std::to_string(s) +
                         (diag_path.empty() ? "" : "; state in " + diag_path));
    }
    if (metric_log && (s % cfg_.log_every == 0 || s == cfg_.max_steps)) {
      double lr =
          lr_schedule(s, model_->config().d_model, cfg_.warmup_steps);
      (*metric_log) << breakdown_to_json(last, s, lr).dump() << "\n";
    }
  }
  return last;
}

// --- Checkpoints -------------------------------------------------------------

namespace {
constexpr char kCkptMagic[4] = {'C', 'T', 'X', 'C'};
constexpr uint32_t kCkptVersion = 1;

void write_f32_mat(std::ostream& os, const Mat& m) {
  for (double d : m.v) {
    float f = static_cast<float>(d);
    os.write(reinterpret_cast<const char*>(&f), 4);
  }
}

void read_f32_mat(std::istream& is, Mat& m) {
  for (double& d : m.v) {
    float f;
    is.read(reinterpret_cast<char*>(&f), 4);
    d = f;
  }
}
}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store,
                     int step) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint " + path);
  os.write(kCkptMagic, 4);
  uint32_t ver = kCkptVersion;
  os.write(reinterpret_cast<const char*>(&ver), 4);
  uint64_t step64 = static_cast<uint64_t>(step);
  os.write(reinterpret_cast<const char*>(&step64), 8);
  uint32_t n = static_cast<uint32_t>(store.all().size());
  os.write(reinterpret_cast<const char*>(&n), 4);
  for (const Param* p : store.all()) {
    uint16_t len = static_cast<uint16_t>(p->name.size());
    os.write(reinterpret_cast<const char*>(&len), 2);
    os.write(p->name.data(), len);
    uint32_t rows = p->value.rows, cols = p->value.cols;
    os.write(reinterpret_cast<const char*>(&rows), 4);
    os.write(reinterpret_cast<const char*>(&cols), 4);
    write_f32_mat(os, p->value);
  }
  // Optimizer state, for exact resumption.
  uint8_t has_adam = 0;
  for (const Param* p : store.all())
    if (!p->adam_m.v.empty()) has_adam = 1;
  os.write(reinterpret_cast<const char*>(&has_adam), 1);
  if (has_adam) {
    for (const Param* p : store.all()) {
      Mat m = p->adam_m.v.empty() ? Mat(p->value.rows, p->value.cols)
                                  : p->adam_m;
      Mat v = p->adam_v.v.empty() ? Mat(p->value.rows, p->value.cols)
                                  : p->adam_v;
      write_f32_mat(os, m);
      write_f32_mat(os, v);
    }
  }
}

int load_checkpoint(const std::string& path, ParamStore& store) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read checkpoint " + path);
  char magic[4];
  is.read(magic, 4);
  if (std::memcmp(magic, kCkptMagic, 4) != 0)
    throw IoError("bad checkpoint magic in " + path);
  uint32_t ver;
  is.read(reinterpret_cast<char*>(&ver), 4);
  if (ver != kCkptVersion) throw IoError("unsupported checkpoint version");
  uint64_t step64;
  is.read(reinterpret_cast<char*>(&step64), 8);
  uint32_t n;
  is.read(reinterpret_cast<char*>(&n), 4);
  if (n != store.all().size())
    throw InvalidInput("checkpoint/config mismatch: parameter count");
  for (Param* p : store.all()) {
    uint16_t len;
    is.read(reinterpret_cast<char*>(&len), 2);
    std::string name(len, '\0');
    is.read(name.data(), len);
    uint32_t rows, cols;
    is.read(reinterpret_cast<char*>(&rows), 4);
    is.read(reinterpret_cast<char*>(&cols), 4);
    if (name != p->name || static_cast<int>(rows) != p->value.rows ||
        static_cast<int>(cols) != p->value.cols)
      throw InvalidInput("checkpoint/config mismatch at parameter " + name +
                         " (expected " + p->name + ")");
    read_f32_mat(is, p->value);
  }
  uint8_t has_adam = 0;
  is.read(reinterpret_cast<char*>(&has_adam), 1);
  if (is && has_adam) {
    for (Param* p : store.all()) {
      p->adam_m = Mat(p->value.rows, p->value.cols);
      p->adam_v = Mat(p->value.rows, p->value.cols);
      read_f32_mat(is, p->adam_m);
      read_f32_mat(is, p->adam_v);
    }
  }
  if (!is) throw IoError("checkpoint truncated: " + path);
  return static_cast<int>(step64);
}

std::vector<AblationRun> ablation_matrix(const std::string& suite,
                                         int base_k) {
  std::vector<AblationRun> runs;
  if (suite == "table2") {
    // Baselines, then TCE-*, then ATCE-*.
    runs.push_back({"ace", true, TceMode::kNone, "hash", base_k, -1, ""});
    runs.push_back(
        {"nakata", false, TceMode::kImplicit, "hash-ctx", base_k, -1, ""});
    runs.push_back({"tce-pre", false, TceMode::kPre, "hash", base_k, -1, ""});
    runs.push_back({"tce-suc", false, TceMode::kSuc, "hash", base_k, -1, ""});
    runs.push_back({"tce-bi", false, TceMode::kBi, "hash", base_k, -1, ""});
    runs.push_back({"atce-pre", true, TceMode::kPre, "hash", base_k, -1, ""});
    runs.push_back({"atce-suc", true, TceMode::kSuc, "hash", base_k, -1, ""});
    runs.push_back({"atce-bi", true, TceMode::kBi, "hash", base_k, -1, ""});
  } else if (suite == "table1") {
    for (int k : {16, 32, 64, 128})
      runs.push_back({"k" + std::to_string(k), true, TceMode::kBi, "hash", k,
                      -1, ""});
    // Trained with k=128, evaluated with k=64.
    runs.push_back(
        {"k128to64", true, TceMode::kBi, "hash", 128, 64, "k128"});
  } else {
    throw InvalidInput("unknown ablation suite: " + suite);
  }
  return runs;
}

}  // namespace ctxtts
