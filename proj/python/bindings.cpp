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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>

#include "ctxtts/embedding.hpp"
#include "ctxtts/inference.hpp"
#include "ctxtts/metrics.hpp"
#include "ctxtts/runfiles.hpp"
#include "ctxtts/synthetic.hpp"
#include "ctxtts/training.hpp"

namespace py = pybind11;
using namespace ctxtts;

namespace {

Mat to_mat(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw InvalidInput("matrix must be non-empty");
  Mat m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) throw InvalidInput("ragged matrix");
    for (size_t c = 0; c < rows[r].size(); ++c)
      m.at(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
  }
  return m;
}

std::vector<std::vector<double>> from_mat(const Mat& m) {
  std::vector<std::vector<double>> rows(m.rows, std::vector<double>(m.cols));
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) rows[r][c] = m.at(r, c);
  return rows;
}

SpeakerPitchStats stats_from(double mu, double sigma) {
  SpeakerPitchStats s;
  s.mu = mu;
  s.sigma = sigma;
  return s;
}

void fill_model_dims(RunConfig& rc, const CorpusManifest& manifest) {
  rc.model.mel_bins = manifest.mel_bins;
  rc.model.n_phonemes = static_cast<int>(manifest.phoneme_inventory.size());
  rc.model.n_speakers = static_cast<int>(manifest.speakers.size());
}

}  // namespace

PYBIND11_MODULE(ctxtts, m) {
  m.doc() =
      "Context-aware multi-speaker audiobook TTS front-end: corpus tools, "
      "prosody metrics, and the training/synthesis pipeline";

  py::register_exception<InvalidInput>(m, "InvalidInputError",
                                       PyExc_ValueError);
  py::register_exception<UndefinedMetric>(m, "UndefinedMetricError",
                                          PyExc_ArithmeticError);

  // Pitch normalization --------------------------------------------------
  m.def(
      "normalize_pitch",
      [](double p, double mu, double sigma) {
        return normalize_pitch(p, stats_from(mu, sigma));
      },
      py::arg("pitch_hz"), py::arg("mu"), py::arg("sigma"),
      "Speaker-dependent pitch normalization (p - mu) / sigma");
  m.def(
      "denormalize_pitch",
      [](double pbar, double mu, double sigma) {
        return denormalize_pitch(pbar, stats_from(mu, sigma));
      },
      py::arg("pitch_norm"), py::arg("mu"), py::arg("sigma"));
  m.def(
      "speaker_stats",
      [](const std::vector<double>& pitch) {
        Utterance u;
        u.pitch = pitch;
        u.energy.assign(pitch.size(), 0.0);
        u.mel = Mat(static_cast<int>(pitch.size()), 1);
        u.phonemes.assign(pitch.size(), "a");
        u.durations.assign(pitch.size(), 1);
        SpeakerPitchStats s = compute_speaker_stats({&u});
        return py::make_tuple(s.mu, s.sigma, s.degenerate);
      },
      py::arg("pitch_hz"),
      "Population mean/std over the voiced (> 0) entries; returns "
      "(mu, sigma, degenerate)");

  // Context windows -------------------------------------------------------
  m.def(
      "extract_context_window",
      [](const std::vector<std::string>& texts, int index, int k) {
        ContextWindow w = extract_context_window(texts, index, k);
        return py::make_tuple(w.preceding, w.succeeding);
      },
      py::arg("texts"), py::arg("target_index"), py::arg("k"),
      "k-character laterals around the target utterance");
  m.def(
      "extract_sentence_context",
      [](const std::vector<std::string>& texts, int index, int n) {
        ContextWindow w = extract_sentence_context(texts, index, n);
        return py::make_tuple(w.preceding, w.succeeding);
      },
      py::arg("texts"), py::arg("target_index"), py::arg("n_sentences"));
  m.def("tokenize_text", &tokenize_text, py::arg("text"));

  // Model building blocks --------------------------------------------------
  m.def("relative_position_bucket", &relative_position_bucket, py::arg("i"),
        py::arg("j"), py::arg("clip"),
        "clamp(j - i, -clip, clip) + clip, in [0, 2 clip]");
  m.def("lr_schedule", &lr_schedule, py::arg("step"), py::arg("d_model"),
        py::arg("warmup"),
        "Transformer schedule d^-0.5 * min(step^-0.5, step * warmup^-1.5)");
  m.def(
      "ace_prediction_loss",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        return ace_prediction_loss(a, b);
      },
      py::arg("v_ace"), py::arg("v_ae"),
      "Mean absolute difference between context vectors");
  m.def(
      "hash_embedding",
      [](const std::string& token, int dim) {
        return HashProvider::token_vector(token, dim);
      },
      py::arg("token"), py::arg("dim"),
      "Deterministic unit vector of the toy hash provider");

  // Metrics ------------------------------------------------------------------
  m.def(
      "dtw_align",
      [](const std::vector<double>& ref, const std::vector<double>& test) {
        auto cost = [&](int i, int j) { return std::abs(ref[i] - test[j]); };
        AlignmentPath p = dtw_align(static_cast<int>(ref.size()),
                                    static_cast<int>(test.size()), cost);
        return py::make_tuple(p.cost, p.pairs);
      },
      py::arg("ref"), py::arg("test"),
      "Minimal-cost monotone alignment under absolute-difference cost; "
      "returns (cost, [(i, j), ...])");
  m.def(
      "mel_to_cepstra",
      [](const std::vector<std::vector<double>>& mel, int n_coeffs) {
        return from_mat(mel_to_cepstra(to_mat(mel), n_coeffs));
      },
      py::arg("mel"), py::arg("n_coeffs") = 12);
  m.def(
      "mcd",
      [](const std::vector<std::vector<double>>& ref,
         const std::vector<std::vector<double>>& test) {
        return mcd(to_mat(ref), to_mat(test));
      },
      py::arg("ref_cepstra"), py::arg("test_cepstra"),
      "Mel-cepstral distortion in dB over DTW-aligned frames");
  m.def("mcd_constant", &mcd_constant);
  m.def("f0_rmse", &f0_rmse, py::arg("ref_f0"), py::arg("test_f0"),
        "RMSE in Hz over DTW-aligned jointly voiced frames");
  m.def("gpe", &gpe, py::arg("ref_f0"), py::arg("test_f0"),
        py::arg("threshold") = 0.2,
        "Gross pitch error percentage at the given relative threshold");

  // Pipeline ---------------------------------------------------------------
  m.def(
      "generate_corpus",
      [](const std::string& out_dir, uint64_t seed, int speakers, int books,
         int utterances, const std::string& cue_lateral, double cue_delta,
         double style_delta, int mel_bins) {
        GeneratorSpec spec;
        spec.n_speakers = speakers;
        spec.books_per_speaker = books;
        spec.utterances_per_book = utterances;
        spec.cue_lateral = cue_lateral_from_string(cue_lateral);
        spec.cue_delta = cue_delta;
        spec.style_delta = style_delta;
        spec.mel_bins = mel_bins;
        CorpusManifest full = generate_synthetic_corpus(seed, spec);
        write_corpus_dir(full, {}, out_dir);
        return full.total_utterances();
      },
      py::arg("out_dir"), py::arg("seed") = 7, py::arg("speakers") = 4,
      py::arg("books") = 4, py::arg("utterances") = 30,
      py::arg("cue_lateral") = "pre", py::arg("cue_delta") = 1.0,
      py::arg("style_delta") = 0.7, py::arg("mel_bins") = 16,
      "Deterministic synthetic audiobook corpus written as a corpus "
      "directory (manifests, features, stats)");
  m.def(
      "train",
      [](const std::string& corpus_dir, const std::string& run_dir,
         const std::string& ablation, const std::string& tce_mode,
         bool use_ace, int k, int max_steps, int batch_size, int warmup,
         uint64_t seed, double lambda_ace, const std::string& provider) {
        RunConfig rc;
        rc.ablation_id = ablation;
        rc.model.tce.mode = tce_mode_from_string(tce_mode);
        rc.model.tce.provider = provider;
        rc.model.use_ace = use_ace;
        rc.model.tce.k = k;
        rc.model.seed = seed;
        rc.train.seed = seed;
        rc.train.max_steps = max_steps;
        rc.train.batch_size = batch_size;
        rc.train.warmup_steps = warmup;
        rc.train.lambda_ace = lambda_ace;
        LoadedCorpus lc = load_corpus_dir(corpus_dir);
        fill_model_dims(rc, lc.train);
        ContextTtsModel model(rc.model);
        ensure_dir(run_dir);
        RunPaths rp(run_dir);
        save_run_config(rp.config(), rc);
        std::ofstream log(rp.metrics());
        Trainer trainer(&model, &lc.train, &lc.stats, rc.train);
        LossBreakdown last = trainer.run(&log, 0, rp.diag());
        save_checkpoint(rp.checkpoint(), model.params(), rc.train.max_steps);
        return last.total;
      },
      py::arg("corpus_dir"), py::arg("run_dir"), py::arg("ablation") = "run",
      py::arg("tce_mode") = "none", py::arg("use_ace") = false,
      py::arg("k") = 16, py::arg("max_steps") = 100,
      py::arg("batch_size") = 32, py::arg("warmup") = 400, py::arg("seed") = 7,
      py::arg("lambda_ace") = 1.0, py::arg("provider") = "hash",
      "Teacher-forced training; writes config, metrics log and checkpoint "
      "and returns the final total loss");
  m.def(
      "synthesize",
      [](const std::string& corpus_dir, const std::string& run_dir,
         int k_override) {
        RunPaths rp(run_dir);
        RunConfig rc = load_run_config(rp.config());
        LoadedCorpus lc = load_corpus_dir(corpus_dir);
        fill_model_dims(rc, lc.train);
        ContextTtsModel model(rc.model);
        load_checkpoint(rp.checkpoint(), model.params());
        Synthesizer synth(&model, &lc.full, &lc.stats);
        ensure_dir(rp.synth_dir());
        std::vector<UtteranceSynthesis> outs;
        for (const Book& b : lc.test.books) {
          auto one = synth.synthesize_book(b, k_override);
          outs.insert(outs.end(), one.begin(), one.end());
        }
        save_synthesis(outs, lc.full.mel_bins, lc.full.frame_rate,
                       rp.synth_features(), rp.synth_map());
        return outs.size();
      },
      py::arg("corpus_dir"), py::arg("run_dir"), py::arg("k_override") = -1,
      "Sequential synthesis of the test split; returns utterance count");
  m.def(
      "evaluate",
      [](const std::string& corpus_dir, const std::string& run_dir) {
        RunPaths rp(run_dir);
        LoadedCorpus lc = load_corpus_dir(corpus_dir);
        SpeakerClassifier cls(lc.train.mel_bins,
                              static_cast<int>(lc.train.speakers.size()),
                              1234);
        std::vector<const Mat*> mels;
        std::vector<int> labels;
        for (const Book& b : lc.train.books)
          for (const Utterance& u : b.utterances) {
            mels.push_back(&u.mel);
            labels.push_back(lc.train.speaker_index(u.speaker_id));
          }
        cls.train(mels, labels);
        auto synth = load_synthesis(rp.synth_features(), rp.synth_map());
        std::vector<SynthesizedUtterance> outs;
        for (const UtteranceSynthesis& s : synth)
          outs.push_back(s.to_synthesized());
        ProsodyScores sc = evaluate_outputs(outs, lc.test, &cls);
        py::dict d;
        d["mcd"] = sc.mcd;
        d["f0_rmse"] = sc.f0_rmse;
        d["gpe"] = sc.gpe;
        d["speaker_acc"] = sc.speaker_acc;
        return d;
      },
      py::arg("corpus_dir"), py::arg("run_dir"),
      "Prosody scores of a run's synthesized output against ground truth");
}
