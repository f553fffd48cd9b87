// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#include "rollsim/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "rollsim/errors.hpp"
#include "rollsim/rng.hpp"

namespace rollsim {

using nlohmann::json;

void NoiseModel::validate(int max_response_len) const {
  if (bucket_accuracy < 0 || bucket_accuracy > 1)
    throw ConfigError("noise bucket_accuracy must be in [0, 1]");
  if (bucket_width < 1 || bucket_width > max_response_len)
    throw ConfigError("noise bucket_width must be in [1, max_response_len]");
}

LengthHistory::LengthHistory(int window, double alpha, int max_response_len)
    : window_(window), alpha_(alpha), max_response_len_(max_response_len) {
  if (window_ < 1) throw ConfigError("predictor window must be >= 1");
  if (!(alpha_ > 0) || alpha_ > 1)
    throw ConfigError("predictor alpha must be in (0, 1]");
  if (max_response_len_ < 1)
    throw ConfigError("predictor max_response_len must be >= 1");
}

void LengthHistory::observe(int step_idx, const std::string& prompt_id,
                            const std::vector<int>& lengths) {
  if (lengths.empty())
    throw ValidationError("observe: empty length list for prompt '" +
                          prompt_id + "'");
  double sum = 0;
  for (int l : lengths) {
    if (l < 1 || l > max_response_len_)
      throw ValidationError("observe: length out of range for prompt '" +
                            prompt_id + "': " + std::to_string(l));
    sum += l;
  }
  std::deque<double>& q = obs_[prompt_id];
  q.push_back(sum / static_cast<double>(lengths.size()));
  while (static_cast<int>(q.size()) > window_) q.pop_front();
  last_step_[prompt_id] = step_idx;
}

double LengthHistory::predict(const Prompt& prompt) const {
  double est;
  auto it = obs_.find(prompt.id);
  if (it == obs_.end() || it->second.empty()) {
    est = static_cast<double>(prompt.ground_truth_len);
  } else {
    const std::deque<double>& q = it->second;
    est = q.front();
    for (size_t k = 1; k < q.size(); ++k)
      est = alpha_ * q[k] + (1.0 - alpha_) * est;
  }
  return std::min(static_cast<double>(max_response_len_), std::max(1.0, est));
}

double LengthHistory::predict_noisy(const Prompt& prompt,
                                    const NoiseModel& noise) const {
  double base = predict(prompt);
  if (noise.kind == NoiseModel::Kind::identity) return base;
  noise.validate(max_response_len_);

  int bucket_count =
      (max_response_len_ + noise.bucket_width - 1) / noise.bucket_width;
  if (bucket_count <= 1) return base;

  // Stream keyed on prompt identity and history state: stable for a given
  // prediction, different across steps as observations accumulate.
  uint64_t bits;
  std::memcpy(&bits, &base, sizeof(bits));
  auto it = obs_.find(prompt.id);
  uint64_t depth = it == obs_.end() ? 0 : it->second.size();
  uint64_t key = hash_combine(noise.seed, fnv1a(prompt.id));
  key = hash_combine(key, depth);
  key = hash_combine(key, bits);
  Rng rng(key);

  if (rng.uniform() < noise.bucket_accuracy) return base;

  int true_bucket = static_cast<int>((base - 1.0) / noise.bucket_width);
  true_bucket = std::min(true_bucket, bucket_count - 1);
  int wrong = static_cast<int>(rng.uniform_int(0, bucket_count - 2));
  if (wrong >= true_bucket) ++wrong;
  double lo = wrong * noise.bucket_width + 1.0;
  double hi = std::min<double>((wrong + 1) * noise.bucket_width,
                               max_response_len_);
  double v = rng.uniform(lo, hi);
  return std::min(static_cast<double>(max_response_len_), std::max(1.0, v));
}

const std::deque<double>* LengthHistory::observations(
    const std::string& prompt_id) const {
  auto it = obs_.find(prompt_id);
  return it == obs_.end() ? nullptr : &it->second;
}

json LengthHistory::to_json() const {
  json j;
  j["window"] = window_;
  j["alpha"] = alpha_;
  j["max_response_len"] = max_response_len_;
  json o = json::object();
  for (const auto& [id, q] : obs_) {
    o[id] = std::vector<double>(q.begin(), q.end());
  }
  j["observations"] = std::move(o);
  json ls = json::object();
  for (const auto& [id, s] : last_step_) ls[id] = s;
  j["last_step"] = std::move(ls);
  return j;
}

LengthHistory LengthHistory::from_json(const json& j) {
  LengthHistory h(j.at("window").get<int>(), j.at("alpha").get<double>(),
                  j.at("max_response_len").get<int>());
  for (const auto& [id, arr] : j.at("observations").items()) {
    auto v = arr.get<std::vector<double>>();
    h.obs_[id] = std::deque<double>(v.begin(), v.end());
  }
  if (j.contains("last_step")) {
    for (const auto& [id, s] : j["last_step"].items())
      h.last_step_[id] = s.get<int>();
  }
  return h;
}

}  // namespace rollsim
