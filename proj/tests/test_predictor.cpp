// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
//
// Sliding-window EWMA length estimation and the bucket noise model.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "rollsim/errors.hpp"
#include "rollsim/predictor.hpp"

using namespace rollsim;
using namespace rollsim::testutil;

namespace {

Prompt prompt_with_gt(const std::string& id, int gt) {
  return make_prompt(id, {1, 2, 3}, gt);
}

}  // namespace

TEST_CASE("window of one keeps only the newest observation") {
  LengthHistory h(1, 0.5, 2048);
  Prompt p = prompt_with_gt("p0", 37);
  h.observe(0, "p0", {100});
  h.observe(1, "p0", {900});
  CHECK(h.predict(p) == doctest::Approx(900.0));
  REQUIRE(h.observations("p0") != nullptr);
  CHECK(h.observations("p0")->size() == 1);
}

TEST_CASE("single observation passes through regardless of alpha") {
  LengthHistory h(4, 0.21, 2048);
  Prompt p = prompt_with_gt("p0", 1);
  h.observe(3, "p0", {512});
  CHECK(h.predict(p) == doctest::Approx(512.0));
}

TEST_CASE("cold start falls back to the ground-truth length") {
  LengthHistory h(3, 0.5, 2048);
  Prompt p = prompt_with_gt("p0", 37);
  CHECK(h.predict(p) == doctest::Approx(37.0));
}

TEST_CASE("ewma folds oldest first") {
  LengthHistory h(3, 0.5, 2048);
  Prompt p = prompt_with_gt("p0", 1);
  h.observe(0, "p0", {100});
  h.observe(1, "p0", {200});
  h.observe(2, "p0", {300});
  // est = 100; est = 0.5*200 + 0.5*100 = 150; est = 0.5*300 + 0.5*150 = 225.
  CHECK(h.predict(p) == doctest::Approx(225.0));

  // With the window full, a fourth observation evicts the oldest.
  h.observe(3, "p0", {400});
  // Window {200, 300, 400}: est = 200 -> 250 -> 325.
  CHECK(h.predict(p) == doctest::Approx(325.0));
}

TEST_CASE("observe records the mean of the step's responses") {
  LengthHistory h(2, 0.5, 2048);
  Prompt p = prompt_with_gt("p0", 1);
  h.observe(0, "p0", {10, 20, 30});
  CHECK(h.predict(p) == doctest::Approx(20.0));
}

TEST_CASE("constant observations predict the constant") {
  LengthHistory h(5, 0.3, 2048);
  Prompt p = prompt_with_gt("p0", 1);
  for (int s = 0; s < 7; ++s) h.observe(s, "p0", {444});
  CHECK(h.predict(p) == doctest::Approx(444.0));
}

TEST_CASE("prediction stays inside the observed range") {
  LengthHistory h(4, 0.5, 2048);
  Prompt p = prompt_with_gt("p0", 1);
  h.observe(0, "p0", {120});
  h.observe(1, "p0", {480});
  h.observe(2, "p0", {240});
  double est = h.predict(p);
  CHECK(est >= 120.0);
  CHECK(est <= 480.0);
}

TEST_CASE("prediction clamps to the response limit") {
  LengthHistory h(1, 0.5, 2048);
  // Observations beyond the limit are rejected outright…
  CHECK_THROWS_AS(h.observe(0, "p0", {5000}), ValidationError);
  // …and a cold-start estimate from an oversized baseline is clamped.
  Prompt p = prompt_with_gt("p0", 5000);
  CHECK(h.predict(p) == doctest::Approx(2048.0));
}

TEST_CASE("constructor rejects bad parameters") {
  CHECK_THROWS_AS(LengthHistory(0, 0.5, 2048), ConfigError);
  CHECK_THROWS_AS(LengthHistory(1, 0.0, 2048), ConfigError);
  CHECK_THROWS_AS(LengthHistory(1, 1.5, 2048), ConfigError);
  CHECK_THROWS_AS(LengthHistory(1, 0.5, 0), ConfigError);
  CHECK_NOTHROW(LengthHistory(1, 1.0, 1));
}

TEST_CASE("observe rejects empty and non-positive samples") {
  LengthHistory h(2, 0.5, 2048);
  CHECK_THROWS_AS(h.observe(0, "p0", {}), ValidationError);
  CHECK_THROWS_AS(h.observe(0, "p0", {10, 0}), ValidationError);
  CHECK_THROWS_AS(h.observe(0, "p0", {-5}), ValidationError);
}

TEST_CASE("identity noise equals the plain estimate") {
  LengthHistory h(2, 0.5, 2048);
  Prompt p = prompt_with_gt("p0", 1);
  h.observe(0, "p0", {300});
  h.observe(1, "p0", {500});
  NoiseModel noise;  // identity
  CHECK(h.predict_noisy(p, noise) == h.predict(p));

  NoiseModel perfect;
  perfect.kind = NoiseModel::Kind::bucket;
  perfect.bucket_accuracy = 1.0;
  perfect.bucket_width = 100;
  CHECK(h.predict_noisy(p, perfect) == h.predict(p));
}

TEST_CASE("bucket noise is deterministic per prompt and seed") {
  LengthHistory h(1, 0.5, 2048);
  NoiseModel noise;
  noise.kind = NoiseModel::Kind::bucket;
  noise.bucket_accuracy = 0.44;
  noise.bucket_width = 100;
  noise.seed = 9;
  Prompt p = prompt_with_gt("p7", 1);
  h.observe(0, "p7", {730});
  double a = h.predict_noisy(p, noise);
  double b = h.predict_noisy(p, noise);
  CHECK(a == b);
  CHECK(a >= 1.0);
  CHECK(a <= 2048.0);
}

TEST_CASE("bucket noise hits the true bucket at roughly the target rate") {
  LengthHistory h(1, 0.5, 2048);
  NoiseModel noise;
  noise.kind = NoiseModel::Kind::bucket;
  noise.bucket_accuracy = 0.44;
  noise.bucket_width = 100;
  noise.seed = 12345;

  int hits = 0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    std::string id = "q" + std::to_string(i);
    Prompt p = prompt_with_gt(id, 1);
    p.id = id;
    int true_len = 150 + (i % 1700);
    h.observe(0, id, {true_len});
    double base = h.predict(p);
    double noisy = h.predict_noisy(p, noise);
    int base_bucket = static_cast<int>((base - 1) / 100);
    int noisy_bucket = static_cast<int>((noisy - 1) / 100);
    if (base_bucket == noisy_bucket) ++hits;
    CHECK(noisy >= 1.0);
    CHECK(noisy <= 2048.0);
  }
  double rate = static_cast<double>(hits) / n;
  CHECK(rate > 0.36);
  CHECK(rate < 0.52);
}

TEST_CASE("noise model validation") {
  NoiseModel noise;
  noise.kind = NoiseModel::Kind::bucket;
  noise.bucket_accuracy = 1.5;
  CHECK_THROWS_AS(noise.validate(2048), ConfigError);
  noise.bucket_accuracy = -0.1;
  CHECK_THROWS_AS(noise.validate(2048), ConfigError);
  noise.bucket_accuracy = 0.5;
  noise.bucket_width = 0;
  CHECK_THROWS_AS(noise.validate(2048), ConfigError);
  noise.bucket_width = 100;
  CHECK_NOTHROW(noise.validate(2048));
}

TEST_CASE("state round trips through json") {
  LengthHistory h(3, 0.25, 1024);
  h.observe(0, "a", {100});
  h.observe(0, "b", {50, 70});
  h.observe(1, "a", {200});
  nlohmann::json j = h.to_json();
  LengthHistory back = LengthHistory::from_json(j);
  CHECK(back.window() == 3);
  CHECK(back.alpha() == doctest::Approx(0.25));
  CHECK(back.max_response_len() == 1024);
  Prompt pa = prompt_with_gt("a", 1);
  Prompt pb = prompt_with_gt("b", 1);
  CHECK(back.predict(pa) == h.predict(pa));
  CHECK(back.predict(pb) == h.predict(pb));
  REQUIRE(back.observations("a") != nullptr);
  CHECK(*back.observations("a") == *h.observations("a"));
  CHECK(back.observations("zz") == nullptr);
}
