// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rollsim/planner.hpp"

namespace rollsim {

struct ClusterTopology {
  struct Node {
    int gpu_count = 8;
  };
  std::vector<Node> nodes;

  // Two-tier bandwidth model in bytes/second. A full node-by-node matrix may
  // be given instead; when present it wins.
  double intra_node_bw = 2.5e10;
  double inter_node_bw = 3.0e9;
  std::vector<std::vector<double>> bw_matrix;

  int learner_node = 0;
  std::vector<int> learner_gpus;  // local GPU indices on learner_node

  double bandwidth_between_nodes(int a, int b) const;
  int total_gpus() const;

  void validate() const;  // throws ConfigError
  nlohmann::json to_json() const;
  static ClusterTopology from_json(const nlohmann::json& j);
  static ClusterTopology load(const std::string& path);
};

ClusterTopology default_topology(int node_count = 2, int gpus_per_node = 8,
                                 int learner_gpu_count = 4);

struct TransferSizes {
  double model_bytes = 6e9;
  // Per-actor KV payload; a single entry broadcasts to every actor.
  std::vector<double> kv_bytes_per_actor;
};

struct ActorPlacement {
  int actor_id = 0;
  int node = 0;
  std::vector<int> gpu_ids;  // global GPU indices
  double l_model = 0;        // model-sync latency, seconds
  double l_kv = 0;           // KV shipping latency, seconds
};

struct PlacementPlan {
  std::vector<ActorPlacement> actors;  // indexed by actor_id
  int colocated_actor = -1;            // decode actor sharing the learner node
  int prefill_node = 0;
  std::vector<int> prefill_gpus;  // global indices, the learner's set
  bool prefill_colocated = true;
  // Node-level bandwidth between actor pairs, for migration transfers.
  std::vector<std::vector<double>> actor_bw;
  // Filled by check_overlap; slack for the colocated actor is not defined.
  std::vector<double> overlap_slack;

  nlohmann::json to_json() const;
};

// Locality-aware placement. The decode actor with the largest estimated time
// goes on the learner node (model sync and KV shipping treated as free for
// it); the rest follow in descending estimated time, each on the
// highest-bandwidth node to the learner that still has enough free GPUs.
// Throws PlacementError when the cluster cannot host the plan.
PlacementPlan place(const GenerationPlan& plan, const ClusterTopology& topo,
                    const TransferSizes& transfers);

// Baseline placement: actors in id order, nodes in index order, first fit.
// No KV shipping (actors refill locally); model sync latency still applies.
PlacementPlan naive_place(const GenerationPlan& plan,
                          const ClusterTopology& topo,
                          const TransferSizes& transfers);

struct OverlapSlack {
  int actor_id = 0;
  double slack = 0;  // (L_prefill + L_decode_1) - (L_model + L_KV + L_decode_i)
};

// Transfer-hiding check: every actor other than the colocated one must fit
// its model sync, KV shipping, and decode inside the prefill window plus the
// colocated actor's decode. Negative slack means the transfer is exposed.
std::vector<OverlapSlack> check_overlap(const PlacementPlan& placement,
                                        const GenerationPlan& plan,
                                        double l_prefill_seconds);

}  // namespace rollsim
