// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "rollsim/workload.hpp"

namespace rollsim {

// Prefix-sharing index over one step's batch. Equivalent to a token trie:
// unique_prefix_count(L) is the number of distinct length-L prefixes, where a
// prompt shorter than L contributes its full token sequence. Built by sorting
// and longest-common-prefix counting rather than pointer chasing; the counts
// are identical to per-depth unique trie node counts.
//
// Note: unique_prefix_count(L) is non-decreasing in L. Splitting a batch at a
// longer prefix length can only reveal more distinct prefixes, never fewer.
class PrefixIndex {
 public:
  static PrefixIndex build(const std::vector<const Prompt*>& batch);

  // D(L) for L >= 1. Constant beyond the longest prompt.
  int64_t unique_prefix_count(int prefix_len) const;
  // Sum of tokens over the distinct (possibly short) prefixes at L.
  int64_t unique_prefix_tokens(int prefix_len) const;
  // Sum over prompts of max(0, prompt_len - L), each counted once.
  int64_t remainder_tokens(int prefix_len) const;

  int64_t total_prompt_tokens() const { return total_tokens_; }
  int min_prompt_len() const { return min_len_; }
  int max_prompt_len() const { return max_len_; }
  int batch_size() const { return batch_size_; }

 private:
  PrefixIndex() = default;
  int batch_size_ = 0;
  int min_len_ = 0;
  int max_len_ = 0;
  int64_t total_tokens_ = 0;
  // Indexed by depth L in [1, max_len_], offset by 1.
  std::vector<int64_t> nodes_at_depth_;      // distinct length-L prefixes
  std::vector<int64_t> short_count_below_;   // distinct full prompts shorter than L
  std::vector<int64_t> short_tokens_below_;  // their token total
  std::vector<int64_t> longer_count_from_;   // prompts with len > L (suffix)
  std::vector<int64_t> longer_tokens_from_;  // their token total
};

struct PrefillCapacity {
  int max_unique_prefixes = 64;  // prefixes one prefill pass can hold
  int gpu_count = 1;             // GPUs backing the prefill actor
};

struct PrefixSelection {
  int prefix_len = 0;
  // Set when even the shortest candidate exceeds capacity and prefill must
  // run in multiple passes.
  bool capacity_exceeded = false;
};

// Largest L in [l_min, l_max] whose unique-prefix count fits the capacity.
PrefixSelection select_prefix_length(const PrefixIndex& index,
                                     const PrefillCapacity& capacity,
                                     int l_min, int l_max);

struct DedupSavings {
  int64_t raw_prefill_tokens = 0;    // every response refills its full prompt
  int64_t dedup_prefill_tokens = 0;  // unique prefixes once + remainders once
  double saved_fraction = 0.0;
};

DedupSavings dedup_savings(const PrefixIndex& index, int l_star,
                           int responses_per_prompt);

// Distinct length-L prefixes within an arbitrary subset (KV routing size).
int64_t unique_prefix_count_among(const std::vector<const Prompt*>& prompts,
                                  int prefix_len);

}  // namespace rollsim
