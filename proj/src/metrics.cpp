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

#include "ctxtts/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ctxtts {

AlignmentPath dtw_align(int len_ref, int len_test,
                        const std::function<double(int, int)>& cost) {
  if (len_ref < 1 || len_test < 1)
    throw InvalidInput("dtw_align: sequences must be non-empty");
  const double inf = std::numeric_limits<double>::infinity();
  Mat d(len_ref, len_test);
  for (int i = 0; i < len_ref; ++i) {
    for (int j = 0; j < len_test; ++j) {
      double c = cost(i, j);
      if (!std::isfinite(c)) throw NumericError("dtw_align: non-finite cost");
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else {
        best = inf;
        if (i > 0 && j > 0) best = std::min(best, d.at(i - 1, j - 1));
        if (i > 0) best = std::min(best, d.at(i - 1, j));
        if (j > 0) best = std::min(best, d.at(i, j - 1));
      }
      d.at(i, j) = c + best;
    }
  }
  AlignmentPath path;
  path.cost = d.at(len_ref - 1, len_test - 1);
  int i = len_ref - 1, j = len_test - 1;
  path.pairs.push_back({i, j});
  while (i > 0 || j > 0) {
    double diag = (i > 0 && j > 0) ? d.at(i - 1, j - 1) : inf;
    double up = i > 0 ? d.at(i - 1, j) : inf;
    double left = j > 0 ? d.at(i, j - 1) : inf;
    double best = std::min({diag, up, left});
    if (diag == best) {
      --i;
      --j;
    } else if (up == best) {
      --i;
    } else {
      --j;
    }
    path.pairs.push_back({i, j});
  }
  std::reverse(path.pairs.begin(), path.pairs.end());
  return path;
}

AlignmentPath dtw_align(const Mat& ref, const Mat& test) {
  if (ref.cols != test.cols) throw InvalidInput("dtw_align: dim mismatch");
  return dtw_align(ref.rows, test.rows, [&](int i, int j) {
    double s = 0.0;
    for (int c = 0; c < ref.cols; ++c) {
      double dd = ref.at(i, c) - test.at(j, c);
      s += dd * dd;
    }
    return std::sqrt(s);
  });
}

Mat mel_to_cepstra(const Mat& mel, int n_coeffs) {
  if (mel.rows < 1) throw InvalidInput("mel_to_cepstra: empty input");
  const int m = mel.cols;
  const int keep = std::min(n_coeffs, m - 1);
  Mat out(mel.rows, keep + 1);
  const double pi = 3.14159265358979323846;
  for (int t = 0; t < mel.rows; ++t) {
    for (int k = 0; k <= keep; ++k) {
      double s = 0.0;
      for (int b = 0; b < m; ++b)
        s += mel.at(t, b) * std::cos(pi * k * (2 * b + 1) / (2.0 * m));
      double scale = k == 0 ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m);
      out.at(t, k) = scale * s;
    }
  }
  return out;
}

double mcd(const Mat& ref_cepstra, const Mat& test_cepstra) {
  if (ref_cepstra.cols != test_cepstra.cols)
    throw InvalidInput("mcd: coefficient count mismatch");
  if (ref_cepstra.cols < 2)
    throw InvalidInput("mcd: needs at least one non-energy coefficient");
  auto cost = [&](int i, int j) {
    double s = 0.0;
    for (int c = 1; c < ref_cepstra.cols; ++c) {
      double d = ref_cepstra.at(i, c) - test_cepstra.at(j, c);
      s += d * d;
    }
    return std::sqrt(s);
  };
  AlignmentPath path = dtw_align(ref_cepstra.rows, test_cepstra.rows, cost);
  double sum = 0.0;
  for (auto& [i, j] : path.pairs) sum += cost(i, j);
  return mcd_constant() * sum / static_cast<double>(path.pairs.size());
}

F0Alignment align_f0(const std::vector<double>& ref_f0,
                     const std::vector<double>& test_f0) {
  if (ref_f0.empty() || test_f0.empty())
    throw InvalidInput("align_f0: sequences must be non-empty");
  // Mismatch penalty: 95th percentile of jointly voiced log-F0 distances.
  std::vector<double> voiced_costs;
  for (double r : ref_f0) {
    if (r <= 0) continue;
    for (double t : test_f0)
      if (t > 0) voiced_costs.push_back(std::abs(std::log(r) - std::log(t)));
  }
  if (voiced_costs.empty())
    throw UndefinedMetric("align_f0: no voiced frames to align");
  std::sort(voiced_costs.begin(), voiced_costs.end());
  size_t idx = static_cast<size_t>(0.95 * (voiced_costs.size() - 1));
  const double penalty = voiced_costs[idx];

  auto cost = [&](int i, int j) {
    bool rv = ref_f0[i] > 0, tv = test_f0[j] > 0;
    if (rv && tv) return std::abs(std::log(ref_f0[i]) - std::log(test_f0[j]));
    if (rv != tv) return penalty;
    return 0.0;
  };
  F0Alignment out;
  out.path = dtw_align(static_cast<int>(ref_f0.size()),
                       static_cast<int>(test_f0.size()), cost);
  for (auto& [i, j] : out.path.pairs)
    if (ref_f0[i] > 0 && test_f0[j] > 0) out.voiced_pairs.push_back({i, j});
  if (out.voiced_pairs.empty())
    throw UndefinedMetric("align_f0: no jointly voiced aligned pair");
  return out;
}

double f0_rmse(const std::vector<double>& ref_f0,
               const std::vector<double>& test_f0) {
  F0Alignment a = align_f0(ref_f0, test_f0);
  double s = 0.0;
  for (auto& [i, j] : a.voiced_pairs) {
    double d = ref_f0[i] - test_f0[j];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(a.voiced_pairs.size()));
}

double gpe(const std::vector<double>& ref_f0,
           const std::vector<double>& test_f0, double threshold) {
  F0Alignment a = align_f0(ref_f0, test_f0);
  size_t gross = 0;
  for (auto& [i, j] : a.voiced_pairs)
    if (std::abs(test_f0[j] - ref_f0[i]) / ref_f0[i] > threshold) ++gross;
  return 100.0 * static_cast<double>(gross) /
         static_cast<double>(a.voiced_pairs.size());
}

SpeakerClassifier::SpeakerClassifier(int mel_bins, int n_speakers,
                                     uint64_t seed)
    : mel_bins_(mel_bins), n_speakers_(n_speakers), store_(seed) {
  fc1_ = LinearLayer(&store_, "spkcls.fc1", mel_bins, 32);
  fc2_ = LinearLayer(&store_, "spkcls.fc2", 32, n_speakers);
}

std::vector<double> SpeakerClassifier::pooled(const Mat& mel) const {
  std::vector<double> v(mel_bins_, 0.0);
  for (int t = 0; t < mel.rows; ++t)
    for (int c = 0; c < mel_bins_; ++c) v[c] += mel.at(t, c);
  if (mel.rows > 0)
    for (double& x : v) x /= mel.rows;
  return v;
}

void SpeakerClassifier::train(const std::vector<const Mat*>& mels,
                              const std::vector<int>& labels, int iterations) {
  if (mels.size() != labels.size() || mels.empty())
    throw InvalidInput("classifier train: bad inputs");
  for (int l : labels)
    if (l < 0 || l >= n_speakers_)
      throw InvalidInput("classifier train: unknown label");
  Mat x(static_cast<int>(mels.size()), mel_bins_);
  for (size_t i = 0; i < mels.size(); ++i) {
    std::vector<double> p = pooled(*mels[i]);
    for (int c = 0; c < mel_bins_; ++c) x.at(static_cast<int>(i), c) = p[c];
  }
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  int step = 0;
  for (int it = 0; it < iterations; ++it) {
    store_.zero_grads();
    Tape t;
    Var in = t.constant(x);
    Var h = t.relu(fc1_.apply(t, in));
    Var logits = fc2_.apply(t, h);
    Var loss = t.softmax_xent(logits, labels);
    t.backward(loss);
    ++step;
    for (Param* p : store_.all()) {
      if (p->adam_m.v.empty()) {
        p->adam_m = Mat(p->value.rows, p->value.cols);
        p->adam_v = Mat(p->value.rows, p->value.cols);
      }
      double bc1 = 1.0 - std::pow(b1, step);
      double bc2 = 1.0 - std::pow(b2, step);
      for (size_t i = 0; i < p->value.size(); ++i) {
        double g = p->grad.v[i];
        p->adam_m.v[i] = b1 * p->adam_m.v[i] + (1 - b1) * g;
        p->adam_v.v[i] = b2 * p->adam_v.v[i] + (1 - b2) * g * g;
        p->value.v[i] -= lr * (p->adam_m.v[i] / bc1) /
                         (std::sqrt(p->adam_v.v[i] / bc2) + eps);
      }
    }
  }
}

int SpeakerClassifier::predict(const Mat& mel) const {
  std::vector<double> p = pooled(mel);
  Mat x(1, mel_bins_, std::move(p));
  Tape t;
  Var in = t.constant(std::move(x));
  Var h = t.relu(fc1_.apply(t, in));
  Var logits = fc2_.apply(t, h);
  const Mat& lv = t.val(logits);
  int best = 0;
  for (int c = 1; c < lv.cols; ++c)
    if (lv.at(0, c) > lv.at(0, best)) best = c;
  return best;
}

double SpeakerClassifier::accuracy(const std::vector<const Mat*>& mels,
                                   const std::vector<int>& labels) const {
  if (mels.size() != labels.size() || mels.empty())
    throw InvalidInput("classifier accuracy: bad inputs");
  for (int l : labels)
    if (l < 0 || l >= n_speakers_)
      throw InvalidInput("classifier accuracy: unknown label");
  size_t hit = 0;
  for (size_t i = 0; i < mels.size(); ++i)
    if (predict(*mels[i]) == labels[i]) ++hit;
  return 100.0 * static_cast<double>(hit) / static_cast<double>(mels.size());
}

ProsodyScores evaluate_outputs(const std::vector<SynthesizedUtterance>& outs,
                               const CorpusManifest& truth,
                               const SpeakerClassifier* classifier) {
  if (outs.empty()) throw InvalidInput("evaluate_outputs: no outputs");
  ProsodyScores scores;
  double mcd_sum = 0.0, rmse_sum = 0.0, gpe_sum = 0.0;
  size_t mcd_n = 0, f0_n = 0;
  std::vector<const Mat*> cls_mels;
  std::vector<int> cls_labels;
  for (const SynthesizedUtterance& o : outs) {
    const Book* book = truth.find_book(o.book_id);
    if (!book || o.index < 0 ||
        o.index >= static_cast<int>(book->utterances.size()))
      throw InvalidInput("evaluate_outputs: id mismatch for " + o.book_id +
                         "[" + std::to_string(o.index) + "]");
    const Utterance& gt = book->utterances[o.index];
    mcd_sum += mcd(mel_to_cepstra(gt.mel), mel_to_cepstra(o.mel));
    ++mcd_n;
    try {
      rmse_sum += f0_rmse(gt.pitch, o.pitch_hz);
      gpe_sum += gpe(gt.pitch, o.pitch_hz);
      ++f0_n;
    } catch (const UndefinedMetric&) {
      // skip utterances with no jointly voiced aligned pair
    }
    if (classifier) {
      cls_mels.push_back(&o.mel);
      cls_labels.push_back(truth.speaker_index(gt.speaker_id));
    }
  }
  if (f0_n == 0)
    throw UndefinedMetric("evaluate_outputs: F0 metrics undefined everywhere");
  scores.mcd = mcd_sum / static_cast<double>(mcd_n);
  scores.f0_rmse = rmse_sum / static_cast<double>(f0_n);
  scores.gpe = gpe_sum / static_cast<double>(f0_n);
  if (classifier) scores.speaker_acc = classifier->accuracy(cls_mels, cls_labels);
  return scores;
}

}  // namespace ctxtts
