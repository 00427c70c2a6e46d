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

#include "ctxtts/runfiles.hpp"

#include "ctxtts/synthetic.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace ctxtts {

static std::string ace_grad_to_string(AceGradMode m) {
  switch (m) {
    case AceGradMode::kBoth: return "both";
    case AceGradMode::kAceOnly: return "ace";
    case AceGradMode::kAeOnly: return "ae";
  }
  return "both";
}

static AceGradMode ace_grad_from_string(const std::string& s) {
  if (s == "both") return AceGradMode::kBoth;
  if (s == "ace") return AceGradMode::kAceOnly;
  if (s == "ae") return AceGradMode::kAeOnly;
  throw InvalidInput("unknown ace_grad mode: " + s);
}

void save_run_config(const std::string& path, const RunConfig& rc) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  const ModelConfig& m = rc.model;
  const TrainConfig& t = rc.train;
  os << "ablation = " << rc.ablation_id << "\n";
  os << "seed = " << m.seed << "\n";
  os << "d_model = " << m.d_model << "\n";
  os << "enc_layers = " << m.enc_layers << "\n";
  os << "dec_layers = " << m.dec_layers << "\n";
  os << "heads = " << m.heads << "\n";
  os << "ffn_filter = " << m.ffn_filter << "\n";
  os << "ffn_kernel = " << m.ffn_kernel << "\n";
  os << "clip_distance = " << m.clip_distance << "\n";
  os << "predictor_filter = " << m.predictor_filter << "\n";
  os << "predictor_kernel = " << m.predictor_kernel << "\n";
  os << "use_ace = " << (m.use_ace ? "true" : "false") << "\n";
  os << "ace_grad = " << ace_grad_to_string(m.ace_grad) << "\n";
  os << "style_tokens = " << m.ace.n_tokens << "\n";
  os << "style_heads = " << m.ace.heads << "\n";
  os << "ref_channels = " << m.ace.ref_channels << "\n";
  os << "ref_gru_hidden = " << m.ace.ref_gru_hidden << "\n";
  os << "tce_mode = " << to_string(m.tce.mode) << "\n";
  os << "tce_k = " << m.tce.k << "\n";
  os << "tce_gru_hidden = " << m.tce.gru_hidden << "\n";
  os << "tce_d_att = " << m.tce.d_att << "\n";
  os << "tce_d_emb = " << m.tce.d_emb << "\n";
  os << "provider = " << m.tce.provider << "\n";
  os << "provider_lr_scale = " << m.tce.provider_lr_scale << "\n";
  os << "implicit_n_sentences = " << m.tce.implicit_n_sentences << "\n";
  os << "batch_size = " << t.batch_size << "\n";
  os << "warmup_steps = " << t.warmup_steps << "\n";
  os << "max_steps = " << t.max_steps << "\n";
  os << "lambda_ace = " << t.lambda_ace << "\n";
  os << "grad_clip = " << t.grad_clip << "\n";
  os << "threads = " << t.threads << "\n";
  os << "log_every = " << t.log_every << "\n";
  os << "eval_k_override = " << rc.eval_k_override << "\n";
  os << "train_from = " << rc.train_from << "\n";
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path);
  RunConfig rc;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    if (trim(line).empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidInput(path + ":" + std::to_string(line_no) +
                         ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    ModelConfig& m = rc.model;
    TrainConfig& t = rc.train;
    auto as_int = [&] { return std::stoi(val); };
    auto as_double = [&] { return std::stod(val); };
    auto as_bool = [&] {
      if (val == "true" || val == "1") return true;
      if (val == "false" || val == "0") return false;
      throw InvalidInput("bad boolean for " + key + ": " + val);
    };
    if (key == "ablation") rc.ablation_id = val;
    else if (key == "seed") { m.seed = std::stoull(val); t.seed = m.seed; }
    else if (key == "d_model") m.d_model = as_int();
    else if (key == "enc_layers") m.enc_layers = as_int();
    else if (key == "dec_layers") m.dec_layers = as_int();
    else if (key == "heads") m.heads = as_int();
    else if (key == "ffn_filter") m.ffn_filter = as_int();
    else if (key == "ffn_kernel") m.ffn_kernel = as_int();
    else if (key == "clip_distance") m.clip_distance = as_int();
    else if (key == "predictor_filter") m.predictor_filter = as_int();
    else if (key == "predictor_kernel") m.predictor_kernel = as_int();
    else if (key == "use_ace") m.use_ace = as_bool();
    else if (key == "ace_grad") m.ace_grad = ace_grad_from_string(val);
    else if (key == "style_tokens") m.ace.n_tokens = as_int();
    else if (key == "style_heads") m.ace.heads = as_int();
    else if (key == "ref_channels") m.ace.ref_channels = as_int();
    else if (key == "ref_gru_hidden") m.ace.ref_gru_hidden = as_int();
    else if (key == "tce_mode") m.tce.mode = tce_mode_from_string(val);
    else if (key == "tce_k") m.tce.k = as_int();
    else if (key == "tce_gru_hidden") m.tce.gru_hidden = as_int();
    else if (key == "tce_d_att") m.tce.d_att = as_int();
    else if (key == "tce_d_emb") m.tce.d_emb = as_int();
    else if (key == "provider") m.tce.provider = val;
    else if (key == "provider_lr_scale") m.tce.provider_lr_scale = as_double();
    else if (key == "implicit_n_sentences") m.tce.implicit_n_sentences = as_int();
    else if (key == "batch_size") t.batch_size = as_int();
    else if (key == "warmup_steps") t.warmup_steps = as_int();
    else if (key == "max_steps") t.max_steps = as_int();
    else if (key == "lambda_ace") t.lambda_ace = as_double();
    else if (key == "grad_clip") t.grad_clip = as_double();
    else if (key == "threads") t.threads = as_int();
    else if (key == "log_every") t.log_every = as_int();
    else if (key == "eval_k_override") rc.eval_k_override = as_int();
    else if (key == "train_from") rc.train_from = val;
    else
      throw InvalidInput(path + ":" + std::to_string(line_no) +
                         ": unknown key " + key);
  }
  return rc;
}

RunConfig apply_ablation(const RunConfig& base, const AblationRun& run) {
  RunConfig rc = base;
  rc.ablation_id = run.id;
  rc.model.use_ace = run.use_ace;
  rc.model.tce.mode = run.tce_mode;
  rc.model.tce.provider = run.provider;
  rc.model.tce.k = run.k;
  rc.eval_k_override = run.eval_k_override;
  rc.train_from = run.reuse_checkpoint_of;
  return rc;
}

void save_scores_table(const std::string& path,
                       const std::vector<ScoreRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << "model\tMCD\tF0-RMSE\tGPE\tACC\n";
  os << std::fixed << std::setprecision(4);
  for (const ScoreRow& r : rows) {
    if (r.failed) {
      os << r.id << "\tFAILED\tFAILED\tFAILED\tFAILED\n";
    } else {
      os << r.id << "\t" << r.scores.mcd << "\t" << r.scores.f0_rmse << "\t"
         << r.scores.gpe << "\t" << r.scores.speaker_acc << "\n";
    }
  }
}

std::vector<ScoreRow> load_scores_table(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path);
  std::vector<ScoreRow> rows;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      continue;  // header
    }
    std::istringstream ss(line);
    ScoreRow r;
    std::string mcd_s, rmse_s, gpe_s, acc_s;
    std::getline(ss, r.id, '\t');
    std::getline(ss, mcd_s, '\t');
    std::getline(ss, rmse_s, '\t');
    std::getline(ss, gpe_s, '\t');
    std::getline(ss, acc_s, '\t');
    if (mcd_s == "FAILED") {
      r.failed = true;
    } else {
      r.scores.mcd = std::stod(mcd_s);
      r.scores.f0_rmse = std::stod(rmse_s);
      r.scores.gpe = std::stod(gpe_s);
      r.scores.speaker_acc = std::stod(acc_s);
    }
    rows.push_back(r);
  }
  return rows;
}

std::vector<std::string> write_corpus_dir(const CorpusManifest& full,
                                          const std::vector<std::string>& hold_out,
                                          const std::string& out_dir,
                                          std::vector<std::string>* warnings) {
  ensure_dir(out_dir);
  CorpusDir cd(out_dir);
  std::vector<std::string> held =
      hold_out.empty() ? default_held_out_books(full) : hold_out;
  SplitResult split = split_corpus(full, held);
  if (warnings) *warnings = split.warnings;
  auto stats = compute_all_speaker_stats(full);
  save_corpus(full, cd.manifest(), cd.features());
  save_corpus(split.train, cd.train_manifest(), cd.train_features());
  save_corpus(split.test, cd.test_manifest(), cd.test_features());
  save_speaker_stats(stats, cd.stats());
  return held;
}

LoadedCorpus load_corpus_dir(const std::string& dir) {
  CorpusDir cd(dir);
  LoadedCorpus lc;
  lc.full = load_corpus(cd.manifest(), cd.features());
  lc.train = load_corpus(cd.train_manifest(), cd.train_features());
  lc.test = load_corpus(cd.test_manifest(), cd.test_features());
  lc.stats = load_speaker_stats(cd.stats());
  return lc;
}

bool file_exists(const std::string& path) {
  return std::filesystem::exists(path);
}

void ensure_dir(const std::string& path) {
  std::filesystem::create_directories(path);
}

}  // namespace ctxtts
