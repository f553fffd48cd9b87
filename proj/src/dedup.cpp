// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#include "rollsim/dedup.hpp"

#include <algorithm>

#include "rollsim/errors.hpp"

namespace rollsim {

namespace {

// Lexicographic order; a proper prefix sorts before its extensions.
bool token_less(const Prompt* a, const Prompt* b) {
  return std::lexicographical_compare(a->token_ids.begin(),
                                      a->token_ids.end(),
                                      b->token_ids.begin(),
                                      b->token_ids.end());
}

int common_prefix(const Prompt* a, const Prompt* b) {
  int n = std::min(a->prompt_len(), b->prompt_len());
  int i = 0;
  while (i < n && a->token_ids[i] == b->token_ids[i]) ++i;
  return i;
}

}  // namespace

PrefixIndex PrefixIndex::build(const std::vector<const Prompt*>& batch) {
  if (batch.empty()) throw ValidationError("prefix index needs a non-empty batch");
  for (const Prompt* p : batch) {
    if (p == nullptr || p->prompt_len() < 1)
      throw ValidationError("prefix index: empty prompt in batch");
  }
  PrefixIndex idx;
  idx.batch_size_ = static_cast<int>(batch.size());

  std::vector<const Prompt*> sorted = batch;
  std::sort(sorted.begin(), sorted.end(), token_less);

  idx.min_len_ = sorted.front()->prompt_len();
  idx.max_len_ = 0;
  for (const Prompt* p : sorted) {
    idx.min_len_ = std::min(idx.min_len_, p->prompt_len());
    idx.max_len_ = std::max(idx.max_len_, p->prompt_len());
    idx.total_tokens_ += p->prompt_len();
  }
  const int maxd = idx.max_len_;

  // Distinct sequences with the longest-common-prefix to the previous one.
  // Inserting a sequence u after its sorted predecessor creates trie nodes at
  // depths lcp+1 .. |u|; a difference array accumulates per-depth counts.
  std::vector<int64_t> node_diff(maxd + 2, 0);
  std::vector<int64_t> end_count(maxd + 1, 0);   // distinct prompts by length
  std::vector<int64_t> len_count(maxd + 1, 0);   // all prompts by length
  const Prompt* prev = nullptr;
  for (const Prompt* p : sorted) {
    len_count[p->prompt_len()] += 1;
    if (prev != nullptr) {
      int lcp = common_prefix(prev, p);
      if (lcp == prev->prompt_len() && lcp == p->prompt_len()) continue;
      node_diff[lcp + 1] += 1;
      node_diff[p->prompt_len() + 1] -= 1;
    } else {
      node_diff[1] += 1;
      node_diff[p->prompt_len() + 1] -= 1;
    }
    end_count[p->prompt_len()] += 1;
    prev = p;
  }

  idx.nodes_at_depth_.assign(maxd + 1, 0);
  int64_t run = 0;
  for (int d = 1; d <= maxd; ++d) {
    run += node_diff[d];
    idx.nodes_at_depth_[d] = run;
  }

  idx.short_count_below_.assign(maxd + 2, 0);
  idx.short_tokens_below_.assign(maxd + 2, 0);
  for (int d = 1; d <= maxd + 1; ++d) {
    idx.short_count_below_[d] =
        idx.short_count_below_[d - 1] + (d - 1 >= 1 ? end_count[d - 1] : 0);
    idx.short_tokens_below_[d] =
        idx.short_tokens_below_[d - 1] +
        (d - 1 >= 1 ? end_count[d - 1] * (d - 1) : 0);
  }

  idx.longer_count_from_.assign(maxd + 2, 0);
  idx.longer_tokens_from_.assign(maxd + 2, 0);
  for (int d = maxd; d >= 0; --d) {
    idx.longer_count_from_[d] = idx.longer_count_from_[d + 1] +
                                (d + 1 <= maxd ? len_count[d + 1] : 0);
    idx.longer_tokens_from_[d] =
        idx.longer_tokens_from_[d + 1] +
        (d + 1 <= maxd ? len_count[d + 1] * (d + 1) : 0);
  }
  return idx;
}

int64_t PrefixIndex::unique_prefix_count(int prefix_len) const {
  if (prefix_len < 1)
    throw ValidationError("unique_prefix_count: prefix_len must be >= 1");
  int l = std::min(prefix_len, max_len_);
  return nodes_at_depth_[l] + short_count_below_[l];
}

int64_t PrefixIndex::unique_prefix_tokens(int prefix_len) const {
  if (prefix_len < 1)
    throw ValidationError("unique_prefix_tokens: prefix_len must be >= 1");
  int l = std::min(prefix_len, max_len_);
  return nodes_at_depth_[l] * l + short_tokens_below_[l];
}

int64_t PrefixIndex::remainder_tokens(int prefix_len) const {
  if (prefix_len < 1)
    throw ValidationError("remainder_tokens: prefix_len must be >= 1");
  if (prefix_len >= max_len_) return 0;
  return longer_tokens_from_[prefix_len] -
         longer_count_from_[prefix_len] * prefix_len;
}

PrefixSelection select_prefix_length(const PrefixIndex& index,
                                     const PrefillCapacity& capacity,
                                     int l_min, int l_max) {
  if (l_min < 1 || l_min > l_max)
    throw ValidationError("select_prefix_length: need 1 <= l_min <= l_max");
  if (capacity.max_unique_prefixes < 1)
    throw ConfigError("prefill capacity must allow at least one prefix");
  if (index.unique_prefix_count(l_min) > capacity.max_unique_prefixes)
    return {l_min, true};
  // unique_prefix_count is non-decreasing in L: binary search the largest
  // feasible length.
  int lo = l_min, hi = l_max;
  while (lo < hi) {
    int mid = lo + (hi - lo + 1) / 2;
    if (index.unique_prefix_count(mid) <= capacity.max_unique_prefixes)
      lo = mid;
    else
      hi = mid - 1;
  }
  return {lo, false};
}

DedupSavings dedup_savings(const PrefixIndex& index, int l_star,
                           int responses_per_prompt) {
  if (responses_per_prompt < 1)
    throw ValidationError("dedup_savings: responses_per_prompt must be >= 1");
  DedupSavings s;
  s.raw_prefill_tokens = index.total_prompt_tokens() *
                         static_cast<int64_t>(responses_per_prompt);
  s.dedup_prefill_tokens =
      index.unique_prefix_tokens(l_star) + index.remainder_tokens(l_star);
  s.saved_fraction =
      s.raw_prefill_tokens == 0
          ? 0.0
          : static_cast<double>(s.raw_prefill_tokens - s.dedup_prefill_tokens) /
                static_cast<double>(s.raw_prefill_tokens);
  return s;
}

int64_t unique_prefix_count_among(const std::vector<const Prompt*>& prompts,
                                  int prefix_len) {
  if (prefix_len < 1)
    throw ValidationError("unique_prefix_count_among: prefix_len must be >= 1");
  if (prompts.empty()) return 0;
  std::vector<const Prompt*> sorted = prompts;
  auto trunc_less = [prefix_len](const Prompt* a, const Prompt* b) {
    int na = std::min<int>(prefix_len, a->prompt_len());
    int nb = std::min<int>(prefix_len, b->prompt_len());
    return std::lexicographical_compare(a->token_ids.begin(),
                                        a->token_ids.begin() + na,
                                        b->token_ids.begin(),
                                        b->token_ids.begin() + nb);
  };
  std::sort(sorted.begin(), sorted.end(), trunc_less);
  int64_t distinct = 1;
  for (size_t i = 1; i < sorted.size(); ++i) {
    if (trunc_less(sorted[i - 1], sorted[i])) ++distinct;
  }
  return distinct;
}

}  // namespace rollsim
