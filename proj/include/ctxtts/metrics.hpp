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

#ifndef CTXTTS_METRICS_HPP_
#define CTXTTS_METRICS_HPP_

#include <functional>
#include <string>
#include <vector>

#include "ctxtts/corpus.hpp"
#include "ctxtts/nn.hpp"

namespace ctxtts {

// Monotone alignment between two sequences. Starts at (0,0), ends at
// (len_ref-1, len_test-1), each step increments i, j or both by one; cost is
// the sum of pairwise costs along the path.
struct AlignmentPath {
  std::vector<std::pair<int, int>> pairs;
  double cost = 0.0;
};

// Globally cost-minimal path under steps {(1,0),(0,1),(1,1)}. Ties are broken
// during backtrace by preferring (1,1), then (1,0), then (0,1).
AlignmentPath dtw_align(int len_ref, int len_test,
                        const std::function<double(int, int)>& cost);

// Convenience: Euclidean cost between rows of two matrices.
AlignmentPath dtw_align(const Mat& ref, const Mat& test);

// Orthonormal DCT-II over each mel frame, keeping coefficients 0..n_coeffs.
// Output is [frames x (n_coeffs+1)]; column 0 holds the energy coefficient
// that MCD excludes.
Mat mel_to_cepstra(const Mat& mel, int n_coeffs = 12);

// Mel-cepstral distortion in dB: frames DTW-aligned with Euclidean cost over
// coefficients 1..C, then (10*sqrt(2)/ln 10) * mean aligned distance.
double mcd(const Mat& ref_cepstra, const Mat& test_cepstra);

inline double mcd_constant() { return 10.0 * std::sqrt(2.0) / std::log(10.0); }

// F0 alignment shared by f0_rmse and gpe. Cost on jointly voiced pairs is
// |log ref - log test|; voiced/unvoiced mismatches pay a fixed penalty equal
// to the 95th percentile of the jointly voiced costs; unvoiced/unvoiced is
// free. Throws UndefinedMetric when no jointly voiced aligned pair exists.
struct F0Alignment {
  AlignmentPath path;
  std::vector<std::pair<int, int>> voiced_pairs;  // both frames voiced
};
F0Alignment align_f0(const std::vector<double>& ref_f0,
                     const std::vector<double>& test_f0);

// RMSE in Hz over DTW-aligned jointly voiced pairs.
double f0_rmse(const std::vector<double>& ref_f0,
               const std::vector<double>& test_f0);

// Gross pitch error: percentage of aligned jointly voiced pairs with
// |test - ref| / ref above the threshold (default 20%).
double gpe(const std::vector<double>& ref_f0,
           const std::vector<double>& test_f0, double threshold = 0.2);

// Small feed-forward classifier on time-averaged mel features.
class SpeakerClassifier {
 public:
  SpeakerClassifier(int mel_bins, int n_speakers, uint64_t seed);

  void train(const std::vector<const Mat*>& mels,
             const std::vector<int>& labels, int iterations = 300);
  int predict(const Mat& mel) const;
  // Top-1 accuracy in percent; labels must be < n_speakers.
  double accuracy(const std::vector<const Mat*>& mels,
                  const std::vector<int>& labels) const;
  int num_speakers() const { return n_speakers_; }

 private:
  std::vector<double> pooled(const Mat& mel) const;
  int mel_bins_;
  int n_speakers_;
  ParamStore store_;
  LinearLayer fc1_;
  LinearLayer fc2_;
};

struct ProsodyScores {
  double mcd = 0.0;          // dB
  double f0_rmse = 0.0;      // Hz
  double gpe = 0.0;          // percent
  double speaker_acc = 0.0;  // percent
};

// One synthesized utterance as consumed by evaluation.
struct SynthesizedUtterance {
  std::string book_id;
  int index = 0;
  Mat mel;
  std::vector<double> pitch_hz;  // per frame, 0 = unvoiced
  std::vector<int> durations;
};

// Per-utterance metrics against the ground-truth manifest, aggregated by
// unweighted mean. Utterance ids must match records in `truth`; passing a
// classifier adds speaker accuracy over the synthesized mels.
ProsodyScores evaluate_outputs(const std::vector<SynthesizedUtterance>& outs,
                               const CorpusManifest& truth,
                               const SpeakerClassifier* classifier);

}  // namespace ctxtts

#endif  // CTXTTS_METRICS_HPP_
