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

#include <cmath>

#include "ctxtts/acoustic_context.hpp"
#include "doctest.h"

using namespace ctxtts;

namespace {

GstConfig tiny_gst() {
  GstConfig cfg;
  cfg.mel_bins = 6;
  cfg.ref_channels = 4;
  cfg.ref_gru_hidden = 5;
  cfg.n_tokens = 3;
  cfg.heads = 2;
  cfg.d_out = 8;
  return cfg;
}

Mat random_mel(int frames, int bins, uint64_t seed) {
  Rng rng(seed);
  Mat m(frames, bins);
  for (double& v : m.v) v = rng.uniform(-1, 1);
  return m;
}

}  // namespace

TEST_CASE("reference encoder output shape is frame-count independent") {
  ParamStore store(3);
  StyleEncoder enc(&store, "gst", tiny_gst());
  for (int frames : {1, 10, 1000, 10000}) {
    Tape t;
    Var r = enc.reference_encode(t, t.constant(random_mel(frames, 6, 7)));
    CHECK(t.val(r).rows == 1);
    CHECK(t.val(r).cols == 5);
    for (double v : t.val(r).v) CHECK(std::isfinite(v));
  }
  Tape t;
  CHECK_THROWS_AS(enc.reference_encode(t, t.constant(Mat(0, 6))),
                  InvalidInput);
}

TEST_CASE("all-zero parameters collapse the reference encoder to zero") {
  ParamStore store(3);
  StyleEncoder enc(&store, "gst", tiny_gst());
  for (Param* p : store.all())
    std::fill(p->value.v.begin(), p->value.v.end(), 0.0);
  Tape t;
  Var r = enc.reference_encode(t, t.constant(random_mel(12, 6, 9)));
  for (double v : t.val(r).v) CHECK(v == 0.0);
}

TEST_CASE("reference encoder is deterministic") {
  ParamStore store(3);
  StyleEncoder enc(&store, "gst", tiny_gst());
  Mat mel = random_mel(20, 6, 11);
  Tape t1, t2;
  Var a = enc.encode(t1, t1.constant(mel));
  Var b = enc.encode(t2, t2.constant(mel));
  CHECK(t1.val(a).v == t2.val(b).v);
}

TEST_CASE("style attention") {
  SUBCASE("identical tokens make the output reference-independent") {
    ParamStore store(3);
    GstConfig cfg = tiny_gst();
    StyleEncoder enc(&store, "gst", cfg);
    Param* tokens = store.find("gst.tokens");
    REQUIRE(tokens != nullptr);
    for (int r = 0; r < cfg.n_tokens; ++r)
      for (int c = 0; c < cfg.d_out; ++c)
        tokens->value.at(r, c) = 0.1 * c - 0.3;
    Tape t;
    Mat ref1(1, 5), ref2(1, 5);
    ref1.v = {1, -1, 0.5, 2, 0};
    ref2.v = {-3, 0.25, 1, 1, -2};
    Var o1 = enc.style_attend(t, t.constant(ref1));
    Var o2 = enc.style_attend(t, t.constant(ref2));
    for (int c = 0; c < cfg.d_out; ++c)
      CHECK(t.val(o1).at(0, c) ==
            doctest::Approx(t.val(o2).at(0, c)).epsilon(1e-9));
  }
  SUBCASE("per-head weights sum to 1") {
    ParamStore store(3);
    StyleEncoder enc(&store, "gst", tiny_gst());
    Tape t;
    Mat ref(1, 5);
    ref.v = {0.3, -0.2, 0.9, -1.5, 0.1};
    Mat w = enc.style_weights(t, t.constant(ref));
    REQUIRE(w.rows == 2);  // heads
    REQUIRE(w.cols == 3);  // tokens
    for (int h = 0; h < 2; ++h) {
      double s = 0;
      for (int j = 0; j < 3; ++j) {
        CHECK(w.at(h, j) >= 0.0);
        s += w.at(h, j);
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  SUBCASE("hand-set logits (ln 2, ln 8) give weights (0.2, 0.8)") {
    ParamStore store(1);
    SingleQueryAttention attn(&store, "s", 1, 1, 1, 1);
    store.find("s.q.w")->value.v = {1.0};
    store.find("s.k.w")->value.v = {1.0};
    store.find("s.v.w")->value.v = {1.0};
    Tape t;
    Mat ref(1, 1);
    ref.v = {1.0};
    Mat tokens(2, 1);
    tokens.v = {std::log(2.0), std::log(8.0)};
    Mat w = attn.weights(t, t.constant(ref), t.constant(tokens));
    CHECK(w.at(0, 0) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(w.at(0, 1) == doctest::Approx(0.8).epsilon(1e-12));
  }
}

TEST_CASE("ACE/AE module") {
  ParamStore store(5);
  GstConfig cfg = tiny_gst();
  AcousticContextModule mod(&store, cfg);

  SUBCASE("no previous utterance gives the zero vector") {
    Tape t;
    Var v = mod.encode_context(t, nullptr);
    CHECK(t.val(v).cols == cfg.d_out);
    for (double x : t.val(v).v) CHECK(x == 0.0);
  }
  SUBCASE("ACE and AE have disjoint parameters") {
    Mat mel = random_mel(15, 6, 21);
    Tape t1;
    Var before = mod.encode_target(t1, mel);
    Mat before_v = t1.val(before);
    // Perturb every ACE parameter; AE output must not move.
    for (Param* p : store.all())
      if (p->name.rfind("ace.", 0) == 0)
        for (double& x : p->value.v) x += 0.37;
    Tape t2;
    Var after = mod.encode_target(t2, mel);
    CHECK(t2.val(after).v == before_v.v);
  }
  SUBCASE("shape is d_out and encoding is deterministic") {
    Mat mel = random_mel(9, 6, 23);
    Tape t;
    Var v1 = mod.encode_context(t, &mel);
    Var v2 = mod.encode_context(t, &mel);
    CHECK(t.val(v1).cols == cfg.d_out);
    CHECK(t.val(v1).v == t.val(v2).v);
  }
}

TEST_CASE("ace_prediction_loss") {
  SUBCASE("hand cases") {
    CHECK(ace_prediction_loss({1.0, 2.0}, {1.0, 2.0}) == doctest::Approx(0.0));
    CHECK(ace_prediction_loss({0, 0, 0, 0}, {1, 1, 1, 1}) ==
          doctest::Approx(1.0));
    CHECK(ace_prediction_loss({1.0, 2.0}, {3.0, 0.0}) == doctest::Approx(2.0));
    CHECK_THROWS_AS(ace_prediction_loss({1.0}, {1.0, 2.0}), InvalidInput);
  }
  SUBCASE("non-negative, zero iff equal, symmetric") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> a(6), b(6);
      for (int i = 0; i < 6; ++i) {
        a[i] = rng.uniform(-2, 2);
        b[i] = rng.uniform(-2, 2);
      }
      double ab = ace_prediction_loss(a, b);
      CHECK(ab >= 0.0);
      CHECK(ab == doctest::Approx(ace_prediction_loss(b, a)));
      CHECK(ace_prediction_loss(a, a) == 0.0);
      if (a != b) CHECK(ab > 0.0);
    }
  }
  SUBCASE("tape version matches and carries gradients to both sides") {
    Tape t;
    Mat a(1, 4), b(1, 4);
    a.v = {1, 2, 3, 4};
    b.v = {0, 2, 5, 4};
    Var av = t.leaf(a), bv = t.leaf(b);
    Var loss = ace_prediction_loss(t, av, bv);
    CHECK(t.scalar(loss) == doctest::Approx(0.75));
    t.backward(loss);
    double ga = 0, gb = 0;
    for (double g : t.grad(av).v) ga += std::abs(g);
    for (double g : t.grad(bv).v) gb += std::abs(g);
    CHECK(ga > 0.0);
    CHECK(gb > 0.0);
  }
}

TEST_CASE("GST gradients: style attention and mel input") {
  ParamStore store(29);
  GstConfig cfg = tiny_gst();
  StyleEncoder enc(&store, "gst", cfg);
  Param* mel = store.create("mel_in", 5, 6, 1.0);
  auto build = [&]() {
    store.zero_grads();
    Tape t;
    Var out = enc.encode(t, t.param(*mel));
    Mat w(1, cfg.d_out);
    for (int c = 0; c < cfg.d_out; ++c) w.at(0, c) = 0.2 * (c + 1);
    Var loss = t.mean_all(t.mul(out, t.constant(w)));
    t.backward(loss);
    return t.scalar(loss);
  };
  std::vector<std::pair<Param*, size_t>> entries;
  for (Param* p : store.all())
    for (size_t i = 0; i < p->value.size(); ++i) entries.push_back({p, i});
  GradCheckResult res =
      gradient_check(store, entries, build, [&]() { build(); }, 1e-6);
  CHECK(res.max_rel_err < 1e-4);
}
