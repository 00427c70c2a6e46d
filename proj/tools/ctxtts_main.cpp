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

#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "ctxtts/inference.hpp"
#include "ctxtts/plot.hpp"
#include "ctxtts/runfiles.hpp"
#include "ctxtts/synthetic.hpp"
#include "ctxtts/training.hpp"

namespace {

using namespace ctxtts;

ContextTtsModel build_model(RunConfig& rc, const CorpusManifest& manifest) {
  rc.model.mel_bins = manifest.mel_bins;
  rc.model.n_phonemes = static_cast<int>(manifest.phoneme_inventory.size());
  rc.model.n_speakers = static_cast<int>(manifest.speakers.size());
  return ContextTtsModel(rc.model);
}

void refuse_overwrite(const std::string& path, bool force) {
  if (!force && file_exists(path))
    throw Error(path + " exists; pass --force to overwrite");
}

// --- prepare ----------------------------------------------------------------

struct PrepareArgs {
  std::string out;
  bool synthetic = false;
  std::string manifest_path, features_path;
  uint64_t seed = 7;
  GeneratorSpec gen;
  std::string cue_lateral = "pre";
  std::string vocab_csv;
  std::vector<std::string> hold_out;
  bool force = false;
};

int cmd_prepare(const PrepareArgs& args) {
  ensure_dir(args.out);
  CorpusDir cd(args.out);
  refuse_overwrite(cd.manifest(), args.force);

  CorpusManifest full;
  if (args.synthetic) {
    GeneratorSpec spec = args.gen;
    spec.cue_lateral = cue_lateral_from_string(args.cue_lateral);
    if (!args.vocab_csv.empty()) {
      spec.vocabulary.clear();
      std::istringstream ss(args.vocab_csv);
      std::string w;
      while (std::getline(ss, w, ','))
        if (!w.empty()) spec.vocabulary.push_back(w);
    }
    full = generate_synthetic_corpus(args.seed, spec);
  } else {
    full = load_corpus(args.manifest_path, args.features_path);
  }

  std::vector<std::string> warnings;
  std::vector<std::string> held = write_corpus_dir(full, args.hold_out,
                                                   args.out, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
  LoadedCorpus lc = load_corpus_dir(args.out);
  std::cout << "prepared " << full.total_utterances() << " utterances ("
            << lc.train.total_utterances() << " train, "
            << lc.test.total_utterances() << " test; held out";
  for (const std::string& h : held) std::cout << " " << h;
  std::cout << ")\n";
  return 0;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string corpus, run, config_file;
  std::optional<std::string> modality;
  std::optional<std::string> ablation, tce_mode, provider, ace_grad;
  std::optional<int> max_steps, batch_size, warmup, k, threads, log_every;
  std::optional<int> enc_layers, dec_layers, d_model;
  std::optional<uint64_t> seed;
  std::optional<double> lambda_ace, provider_lr_scale;
  std::optional<bool> use_ace;
  bool resume = false;
  bool force = false;
};

// Shorthand for the modality/lateral grid: none, ace, nakata,
// tce-{pre,suc,bi}, atce-{pre,suc,bi}. Individual flags still override.
void apply_modality(RunConfig* rc, const std::string& m) {
  rc->model.use_ace = m == "ace" || m.rfind("atce-", 0) == 0;
  if (m == "none" || m == "ace") {
    rc->model.tce.mode = TceMode::kNone;
  } else if (m == "nakata") {
    rc->model.tce.mode = TceMode::kImplicit;
    rc->model.tce.provider = "hash-ctx";
  } else if (m.rfind("tce-", 0) == 0) {
    rc->model.tce.mode = tce_mode_from_string(m.substr(4));
  } else if (m.rfind("atce-", 0) == 0) {
    rc->model.tce.mode = tce_mode_from_string(m.substr(5));
  } else {
    throw InvalidInput("unknown modality: " + m);
  }
}

RunConfig resolve_run_config(const TrainArgs& args) {
  RunConfig rc;
  if (!args.config_file.empty()) rc = load_run_config(args.config_file);
  if (args.modality) apply_modality(&rc, *args.modality);
  if (args.ablation) rc.ablation_id = *args.ablation;
  if (args.tce_mode) rc.model.tce.mode = tce_mode_from_string(*args.tce_mode);
  if (args.provider) rc.model.tce.provider = *args.provider;
  if (args.use_ace) rc.model.use_ace = *args.use_ace;
  if (args.k) rc.model.tce.k = *args.k;
  if (args.d_model) rc.model.d_model = *args.d_model;
  if (args.enc_layers) rc.model.enc_layers = *args.enc_layers;
  if (args.dec_layers) rc.model.dec_layers = *args.dec_layers;
  if (args.seed) {
    rc.model.seed = *args.seed;
    rc.train.seed = *args.seed;
  }
  if (args.max_steps) rc.train.max_steps = *args.max_steps;
  if (args.batch_size) rc.train.batch_size = *args.batch_size;
  if (args.warmup) rc.train.warmup_steps = *args.warmup;
  if (args.threads) rc.train.threads = *args.threads;
  if (args.log_every) rc.train.log_every = *args.log_every;
  if (args.lambda_ace) rc.train.lambda_ace = *args.lambda_ace;
  if (args.provider_lr_scale)
    rc.model.tce.provider_lr_scale = *args.provider_lr_scale;
  return rc;
}

int train_run(const std::string& corpus_dir, RunConfig rc,
              const std::string& run_dir, bool resume, bool force) {
  ensure_dir(run_dir);
  RunPaths rp(run_dir);
  if (!resume) refuse_overwrite(rp.checkpoint(), force);

  LoadedCorpus lc = load_corpus_dir(corpus_dir);
  ContextTtsModel model = build_model(rc, lc.train);
  int start_step = 0;
  if (resume) {
    start_step = load_checkpoint(rp.checkpoint(), model.params());
    std::cout << "resuming from step " << start_step << "\n";
  }
  save_run_config(rp.config(), rc);

  std::ofstream log(rp.metrics(),
                    resume ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot write " + rp.metrics());
  Trainer trainer(&model, &lc.train, &lc.stats, rc.train);
  LossBreakdown last = trainer.run(&log, start_step, rp.diag());
  save_checkpoint(rp.checkpoint(), model.params(), rc.train.max_steps);
  std::cout << "trained " << rc.ablation_id << " to step "
            << rc.train.max_steps << "; total loss " << last.total << "\n";
  return 0;
}

// --- synthesize ---------------------------------------------------------------

int cmd_synthesize(const std::string& corpus_dir, const std::string& run_dir,
                   const std::string& book_id, int k_override,
                   const std::vector<std::string>& overrides,
                   const std::string& split, bool force) {
  RunPaths rp(run_dir);
  RunConfig rc = load_run_config(rp.config());
  if (k_override < 0) k_override = rc.eval_k_override;
  ensure_dir(rp.synth_dir());
  refuse_overwrite(rp.synth_map(), force);

  if (split != "test" && split != "train")
    throw InvalidInput("--split must be test or train");
  std::map<int, int> ov;
  for (const std::string& s : overrides) {
    size_t colon = s.find(':');
    if (colon == std::string::npos)
      throw InvalidInput("--context-override expects TARGET:SOURCE, got " + s);
    ov[std::stoi(s.substr(0, colon))] = std::stoi(s.substr(colon + 1));
  }

  LoadedCorpus lc = load_corpus_dir(corpus_dir);
  const CorpusManifest& eval_set = split == "train" ? lc.train : lc.test;
  ContextTtsModel model = build_model(rc, lc.train);
  load_checkpoint(rp.checkpoint(), model.params());
  Synthesizer synth(&model, &lc.full, &lc.stats);

  std::ofstream debug(rp.synth_log());
  std::vector<UtteranceSynthesis> outs;
  for (const Book& b : eval_set.books) {
    if (!book_id.empty() && b.book_id != book_id) continue;
    debug << "book=" << b.book_id << "\n";
    auto one = synth.synthesize_book(b, k_override, ov, &debug);
    outs.insert(outs.end(), one.begin(), one.end());
  }
  if (outs.empty()) throw InvalidInput("no utterances matched the request");
  save_synthesis(outs, lc.full.mel_bins, lc.full.frame_rate,
                 rp.synth_features(), rp.synth_map());
  std::cout << "synthesized " << outs.size() << " utterances to "
            << rp.synth_dir() << "\n";
  return 0;
}

// --- evaluate -----------------------------------------------------------------

ScoreRow evaluate_one(const LoadedCorpus& lc, const std::string& runs_root,
                      const std::string& id, const SpeakerClassifier& cls) {
  ScoreRow row;
  row.id = id;
  if (id == "gt") {
    std::vector<SynthesizedUtterance> outs;
    for (const Book& b : lc.test.books)
      for (const Utterance& u : b.utterances)
        outs.push_back({b.book_id, u.index, u.mel, u.pitch, u.durations});
    row.scores = evaluate_outputs(outs, lc.test, &cls);
    return row;
  }
  RunPaths rp(runs_root + "/" + id);
  auto synth = load_synthesis(rp.synth_features(), rp.synth_map());
  std::vector<SynthesizedUtterance> outs;
  outs.reserve(synth.size());
  for (const UtteranceSynthesis& s : synth) outs.push_back(s.to_synthesized());
  row.scores = evaluate_outputs(outs, lc.test, &cls);
  return row;
}

SpeakerClassifier train_classifier(const LoadedCorpus& lc) {
  SpeakerClassifier cls(lc.train.mel_bins,
                        static_cast<int>(lc.train.speakers.size()), 1234);
  std::vector<const Mat*> mels;
  std::vector<int> labels;
  for (const Book& b : lc.train.books)
    for (const Utterance& u : b.utterances) {
      mels.push_back(&u.mel);
      labels.push_back(lc.train.speaker_index(u.speaker_id));
    }
  cls.train(mels, labels);
  return cls;
}

int cmd_evaluate(const std::string& corpus_dir, const std::string& run_dir,
                 const std::string& compare_csv, const std::string& runs_root,
                 bool force) {
  LoadedCorpus lc = load_corpus_dir(corpus_dir);
  SpeakerClassifier cls = train_classifier(lc);

  std::vector<ScoreRow> rows;
  std::string out_path;
  if (compare_csv.empty()) {
    RunPaths rp(run_dir);
    RunConfig rc = load_run_config(rp.config());
    out_path = rp.scores();
    refuse_overwrite(out_path, force);
    auto synth = load_synthesis(rp.synth_features(), rp.synth_map());
    std::vector<SynthesizedUtterance> outs;
    for (const UtteranceSynthesis& s : synth) outs.push_back(s.to_synthesized());
    ScoreRow row;
    row.id = rc.ablation_id;
    row.scores = evaluate_outputs(outs, lc.test, &cls);
    rows.push_back(row);
  } else {
    if (runs_root.empty())
      throw InvalidInput("--compare requires --runs-root");
    out_path = runs_root + "/scores.tsv";
    refuse_overwrite(out_path, force);
    std::istringstream ss(compare_csv);
    std::string id;
    while (std::getline(ss, id, ','))
      if (!id.empty()) rows.push_back(evaluate_one(lc, runs_root, id, cls));
  }
  save_scores_table(out_path, rows);
  std::cout << "wrote " << out_path << "\n";
  for (const ScoreRow& r : rows)
    std::cout << r.id << "\tMCD " << r.scores.mcd << "\tF0-RMSE "
              << r.scores.f0_rmse << "\tGPE " << r.scores.gpe << "\tACC "
              << r.scores.speaker_acc << "\n";
  return 0;
}

// --- ablate ---------------------------------------------------------------------

int cmd_ablate(const std::string& corpus_dir, const std::string& out_dir,
               const std::string& suite, const TrainArgs& base_args,
               bool dry_run, bool force) {
  std::vector<AblationRun> runs = ablation_matrix(suite);
  RunConfig base = resolve_run_config(base_args);
  if (dry_run) {
    for (const AblationRun& r : runs)
      std::cout << r.id << ": use_ace=" << (r.use_ace ? "true" : "false")
                << " tce=" << to_string(r.tce_mode) << " k=" << r.k
                << (r.eval_k_override >= 0
                        ? " eval_k=" + std::to_string(r.eval_k_override)
                        : "")
                << (r.reuse_checkpoint_of.empty()
                        ? ""
                        : " reuses=" + r.reuse_checkpoint_of)
                << "\n";
    return 0;
  }
  ensure_dir(out_dir);
  LoadedCorpus lc = load_corpus_dir(corpus_dir);
  SpeakerClassifier cls = train_classifier(lc);

  std::vector<ScoreRow> rows;
  bool any_failed = false;
  for (const AblationRun& run : runs) {
    RunConfig rc = apply_ablation(base, run);
    std::string run_dir = out_dir + "/" + run.id;
    try {
      ensure_dir(run_dir);
      RunPaths rp(run_dir);
      if (!run.reuse_checkpoint_of.empty()) {
        // Reuse a previously trained checkpoint under an inference-time
        // context-length override.
        RunPaths src(out_dir + "/" + run.reuse_checkpoint_of);
        if (!file_exists(src.checkpoint()))
          throw InvalidInput("missing source run " + run.reuse_checkpoint_of);
        RunConfig src_rc = load_run_config(src.config());
        rc.model = src_rc.model;
        rc.train = src_rc.train;
        save_run_config(rp.config(), rc);
        ContextTtsModel model = build_model(rc, lc.train);
        load_checkpoint(src.checkpoint(), model.params());
        save_checkpoint(rp.checkpoint(), model.params(), rc.train.max_steps);
      } else {
        train_run(corpus_dir, rc, run_dir, false, force);
      }
      cmd_synthesize(corpus_dir, run_dir, "", rc.eval_k_override, {}, "test",
                     force);
      ScoreRow row = evaluate_one(lc, out_dir, run.id, cls);
      save_scores_table(RunPaths(run_dir).scores(), {row});
      rows.push_back(row);
      std::cout << "[done] " << run.id << "\n";
    } catch (const std::exception& e) {
      std::cerr << "[failed] " << run.id << ": " << e.what() << "\n";
      ScoreRow row;
      row.id = run.id;
      row.failed = true;
      rows.push_back(row);
      any_failed = true;
    }
  }
  save_scores_table(out_dir + "/report.tsv", rows);
  std::cout << "report: " << out_dir << "/report.tsv\n";
  return any_failed ? 1 : 0;
}

// --- plot -----------------------------------------------------------------------

int cmd_plot(const std::string& corpus_dir, const std::string& run_dir,
             const std::string& book_id, int utt_index, int n_contexts,
             uint64_t seed, const std::string& out_image, bool force) {
  RunPaths rp(run_dir);
  RunConfig rc = load_run_config(rp.config());
  LoadedCorpus lc = load_corpus_dir(corpus_dir);
  ContextTtsModel model = build_model(rc, lc.train);
  load_checkpoint(rp.checkpoint(), model.params());
  Synthesizer synth(&model, &lc.full, &lc.stats);

  const Book* book = nullptr;
  if (book_id.empty()) {
    if (lc.test.books.empty()) throw InvalidInput("test split is empty");
    book = &lc.test.books[0];
  } else {
    book = lc.test.find_book(book_id);
    if (!book) book = lc.full.find_book(book_id);
    if (!book) throw InvalidInput("unknown book " + book_id);
  }
  if (utt_index < 0 || utt_index >= static_cast<int>(book->utterances.size()))
    throw InvalidInput("utterance index out of range");

  std::string image = out_image.empty() ? run_dir + "/contours.bmp" : out_image;
  std::string data = image.substr(0, image.find_last_of('.')) + ".csv";
  refuse_overwrite(image, force);

  const int k_eff =
      rc.eval_k_override >= 0 ? rc.eval_k_override : rc.model.tce.k;
  const Mat* prev =
      utt_index > 0 ? &book->utterances[utt_index - 1].mel : nullptr;

  std::vector<std::vector<double>> curves;
  std::vector<std::string> labels;
  ContextWindow true_window = extract_context_window(*book, utt_index, k_eff);
  curves.push_back(
      synth.synthesize_with_context(*book, utt_index, true_window, prev)
          .frame_pitch_hz);
  labels.push_back("predicted");

  // Random contexts: windows of other utterances in the corpus, seeded.
  Rng rng(seed);
  std::vector<std::pair<const Book*, int>> pool;
  for (const Book& b : lc.full.books)
    for (size_t i = 0; i < b.utterances.size(); ++i)
      if (!(b.book_id == book->book_id && static_cast<int>(i) == utt_index))
        pool.push_back({&b, static_cast<int>(i)});
  for (int c = 0; c < n_contexts; ++c) {
    auto [src_book, src_idx] = pool[rng.below(pool.size())];
    ContextWindow w = extract_context_window(*src_book, src_idx, k_eff);
    curves.push_back(
        synth.synthesize_with_context(*book, utt_index, w, prev)
            .frame_pitch_hz);
    labels.push_back("random" + std::to_string(c + 1));
  }
  plot_pitch_contours(curves, image);
  write_contour_data(labels, curves, data);
  std::cout << "wrote " << image << " and " << data << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-aware multi-speaker audiobook TTS front-end"};
  app.require_subcommand(1);

  // prepare ------------------------------------------------------------
  PrepareArgs pa;
  CLI::App* prepare = app.add_subcommand(
      "prepare", "Generate or import a corpus, split it, compute stats");
  prepare->add_option("--out", pa.out, "corpus directory")->required();
  auto* synth_flag =
      prepare->add_flag("--synthetic", pa.synthetic, "generate synthetically");
  auto* manifest_opt = prepare->add_option("--manifest", pa.manifest_path,
                                           "external manifest to import");
  prepare->add_option("--features", pa.features_path,
                      "feature archive of the external manifest");
  manifest_opt->excludes(synth_flag);
  prepare->add_option("--seed", pa.seed, "generator seed");
  prepare->add_option("--speakers", pa.gen.n_speakers, "speaker count");
  prepare->add_option("--books", pa.gen.books_per_speaker,
                      "books per speaker");
  prepare->add_option("--utterances", pa.gen.utterances_per_book,
                      "utterances per book");
  prepare->add_option("--mel-bins", pa.gen.mel_bins, "mel bins");
  prepare->add_option("--cue-lateral", pa.cue_lateral,
                      "cue placement: none|pre|suc|both");
  prepare->add_option("--cue-delta", pa.gen.cue_delta,
                      "normalized pitch shift per cue");
  prepare->add_option("--cue-prob", pa.gen.cue_prob, "cue probability");
  prepare->add_option("--style-delta", pa.gen.style_delta,
                      "per-book style pitch shift");
  prepare->add_option("--min-words", pa.gen.min_words, "min words");
  prepare->add_option("--max-words", pa.gen.max_words, "max words");
  prepare->add_option("--min-dur", pa.gen.min_dur, "min phoneme frames");
  prepare->add_option("--max-dur", pa.gen.max_dur, "max phoneme frames");
  prepare->add_option("--vocab", pa.vocab_csv, "comma-separated vocabulary");
  prepare->add_option("--hold-out", pa.hold_out,
                      "book ids for the test split (default: last book of "
                      "each speaker)");
  prepare->add_flag("--force", pa.force, "overwrite existing outputs");

  // train --------------------------------------------------------------
  TrainArgs ta;
  CLI::App* train = app.add_subcommand("train", "Train a model on a corpus");
  train->add_option("--corpus", ta.corpus, "corpus directory")->required();
  train->add_option("--run", ta.run, "run directory")->required();
  train->add_option("--config", ta.config_file, "run config file");
  train->add_option("--ablation", ta.ablation, "ablation id label");
  train->add_option("--modality", ta.modality,
                    "shorthand: none|ace|nakata|tce-pre|tce-suc|tce-bi|"
                    "atce-pre|atce-suc|atce-bi");
  train->add_option("--tce-mode", ta.tce_mode,
                    "textual context: none|pre|suc|bi|implicit");
  train->add_option("--use-ace", ta.use_ace, "acoustic context on/off");
  train->add_option("--provider", ta.provider,
                    "embedding provider: hash|hash-ctx|file:PATH");
  train->add_option("--provider-lr-scale", ta.provider_lr_scale,
                    "provider fine-tuning lr scale");
  train->add_option("--k", ta.k, "context characters per lateral");
  train->add_option("--d-model", ta.d_model, "model width");
  train->add_option("--enc-layers", ta.enc_layers, "encoder layers");
  train->add_option("--dec-layers", ta.dec_layers, "decoder layers");
  train->add_option("--max-steps", ta.max_steps, "training steps");
  train->add_option("--batch-size", ta.batch_size, "batch size");
  train->add_option("--warmup", ta.warmup, "lr schedule warmup steps");
  train->add_option("--lambda-ace", ta.lambda_ace, "auxiliary loss weight");
  train->add_option("--seed", ta.seed, "training/init seed");
  train->add_option("--threads", ta.threads, "worker threads");
  train->add_option("--log-every", ta.log_every, "metric log interval");
  train->add_flag("--resume", ta.resume, "continue from the checkpoint");
  train->add_flag("--force", ta.force, "overwrite existing outputs");

  // synthesize -----------------------------------------------------------
  std::string sy_corpus, sy_run, sy_book, sy_split = "test";
  int sy_k_override = -1;
  std::vector<std::string> sy_overrides;
  bool sy_force = false;
  CLI::App* synthesize = app.add_subcommand(
      "synthesize", "Sequentially synthesize books with the trained model");
  synthesize->add_option("--corpus", sy_corpus, "corpus directory")
      ->required();
  synthesize->add_option("--run", sy_run, "run directory")->required();
  synthesize->add_option("--book", sy_book, "synthesize only this book");
  synthesize->add_option("--split", sy_split, "test|train (default test)");
  synthesize->add_option("--k-override", sy_k_override,
                         "inference-time context length override");
  synthesize->add_option("--context-override", sy_overrides,
                         "TARGET:SOURCE window swap (repeatable)");
  synthesize->add_flag("--force", sy_force, "overwrite existing outputs");

  // evaluate --------------------------------------------------------------
  std::string ev_corpus, ev_run, ev_compare, ev_root;
  bool ev_force = false;
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Score synthesized output against GT");
  evaluate->add_option("--corpus", ev_corpus, "corpus directory")->required();
  evaluate->add_option("--run", ev_run, "run directory (single-run mode)");
  evaluate->add_option("--compare", ev_compare,
                       "comma-separated run ids to merge (use with "
                       "--runs-root); id 'gt' scores ground truth");
  evaluate->add_option("--runs-root", ev_root,
                       "directory containing the run directories");
  evaluate->add_flag("--force", ev_force, "overwrite existing outputs");

  // ablate -----------------------------------------------------------------
  std::string ab_corpus, ab_out, ab_suite;
  TrainArgs ab_train;
  bool ab_dry = false, ab_force = false;
  CLI::App* ablate = app.add_subcommand(
      "ablate", "Run a full ablation suite: train, synthesize, evaluate");
  ablate->add_option("--corpus", ab_corpus, "corpus directory")->required();
  ablate->add_option("--out", ab_out, "output directory for all runs")
      ->required();
  ablate->add_option("--suite", ab_suite, "table1|table2")->required();
  ablate->add_option("--max-steps", ab_train.max_steps, "steps per run");
  ablate->add_option("--batch-size", ab_train.batch_size, "batch size");
  ablate->add_option("--warmup", ab_train.warmup, "warmup steps");
  ablate->add_option("--seed", ab_train.seed, "seed");
  ablate->add_option("--threads", ab_train.threads, "worker threads");
  ablate->add_option("--lambda-ace", ab_train.lambda_ace,
                     "auxiliary loss weight");
  ablate->add_option("--log-every", ab_train.log_every,
                     "metric log interval");
  ablate->add_flag("--dry-run", ab_dry, "list configs without training");
  ablate->add_flag("--force", ab_force, "overwrite existing outputs");

  // plot ---------------------------------------------------------------------
  std::string pl_corpus, pl_run, pl_book, pl_out;
  int pl_utt = 0, pl_n = 2;
  uint64_t pl_seed = 7;
  bool pl_force = false;
  CLI::App* plot = app.add_subcommand(
      "plot", "Overlay pitch contours of one utterance under random contexts");
  plot->add_option("--corpus", pl_corpus, "corpus directory")->required();
  plot->add_option("--run", pl_run, "run directory")->required();
  plot->add_option("--book", pl_book, "book id (default: first test book)");
  plot->add_option("--utterance", pl_utt, "utterance index");
  plot->add_option("--n-contexts", pl_n, "number of random contexts");
  plot->add_option("--seed", pl_seed, "context sampling seed");
  plot->add_option("--out", pl_out, "image path (.bmp)");
  plot->add_flag("--force", pl_force, "overwrite existing outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage error
  }

  try {
    if (prepare->parsed()) {
      if (!pa.synthetic && pa.manifest_path.empty()) {
        std::cerr << "prepare: pass --synthetic or --manifest/--features\n";
        return 2;
      }
      return cmd_prepare(pa);
    }
    if (train->parsed()) {
      RunConfig rc = resolve_run_config(ta);
      return train_run(ta.corpus, rc, ta.run, ta.resume, ta.force);
    }
    if (synthesize->parsed())
      return cmd_synthesize(sy_corpus, sy_run, sy_book, sy_k_override,
                            sy_overrides, sy_split, sy_force);
    if (evaluate->parsed()) {
      if (ev_run.empty() && ev_compare.empty()) {
        std::cerr << "evaluate: pass --run or --compare with --runs-root\n";
        return 2;
      }
      return cmd_evaluate(ev_corpus, ev_run, ev_compare, ev_root, ev_force);
    }
    if (ablate->parsed())
      return cmd_ablate(ab_corpus, ab_out, ab_suite, ab_train, ab_dry,
                        ab_force);
    if (plot->parsed())
      return cmd_plot(pl_corpus, pl_run, pl_book, pl_utt, pl_n, pl_seed,
                      pl_out, pl_force);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
