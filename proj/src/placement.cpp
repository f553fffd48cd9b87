// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#include "rollsim/placement.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "rollsim/errors.hpp"

namespace rollsim {

using nlohmann::json;

double ClusterTopology::bandwidth_between_nodes(int a, int b) const {
  if (!bw_matrix.empty()) return bw_matrix[a][b];
  return a == b ? intra_node_bw : inter_node_bw;
}

int ClusterTopology::total_gpus() const {
  int n = 0;
  for (const Node& node : nodes) n += node.gpu_count;
  return n;
}

void ClusterTopology::validate() const {
  if (nodes.empty()) throw ConfigError("topology needs at least one node");
  for (const Node& n : nodes)
    if (n.gpu_count < 1) throw ConfigError("every node needs at least one GPU");
  if (bw_matrix.empty()) {
    if (!(intra_node_bw > 0) || !(inter_node_bw > 0))
      throw ConfigError("bandwidths must be positive");
    if (intra_node_bw < inter_node_bw)
      throw ConfigError("intra-node bandwidth below inter-node bandwidth");
  } else {
    if (bw_matrix.size() != nodes.size())
      throw ConfigError("bandwidth matrix must be node_count x node_count");
    for (size_t i = 0; i < bw_matrix.size(); ++i) {
      if (bw_matrix[i].size() != nodes.size())
        throw ConfigError("bandwidth matrix must be node_count x node_count");
      for (size_t j = 0; j < bw_matrix[i].size(); ++j) {
        if (!(bw_matrix[i][j] > 0))
          throw ConfigError("bandwidth matrix entries must be positive");
        if (bw_matrix[i][j] != bw_matrix[j][i])
          throw ConfigError("bandwidth matrix must be symmetric");
      }
    }
  }
  if (learner_node < 0 || learner_node >= static_cast<int>(nodes.size()))
    throw ConfigError("learner_node out of range");
  if (learner_gpus.empty())
    throw ConfigError("learner needs at least one GPU");
  for (int g : learner_gpus) {
    if (g < 0 || g >= nodes[learner_node].gpu_count)
      throw ConfigError("learner GPU index out of range");
  }
}

json ClusterTopology::to_json() const {
  json j;
  json ns = json::array();
  for (const Node& n : nodes) ns.push_back({{"gpus", n.gpu_count}});
  j["nodes"] = std::move(ns);
  j["intra_node_bw"] = intra_node_bw;
  j["inter_node_bw"] = inter_node_bw;
  if (!bw_matrix.empty()) j["bw_matrix"] = bw_matrix;
  j["learner_node"] = learner_node;
  j["learner_gpus"] = learner_gpus;
  return j;
}

ClusterTopology ClusterTopology::from_json(const json& j) {
  ClusterTopology t;
  try {
    if (j.contains("nodes")) {
      t.nodes.clear();
      for (const json& jn : j["nodes"])
        t.nodes.push_back({jn.at("gpus").get<int>()});
    } else if (j.contains("node_count")) {
      t.nodes.assign(j["node_count"].get<int>(),
                     {j.value("gpus_per_node", 8)});
    } else {
      throw ConfigError("topology: need nodes or node_count");
    }
    if (j.contains("intra_node_bw"))
      t.intra_node_bw = j["intra_node_bw"].get<double>();
    if (j.contains("inter_node_bw"))
      t.inter_node_bw = j["inter_node_bw"].get<double>();
    if (j.contains("bw_matrix"))
      t.bw_matrix = j["bw_matrix"].get<std::vector<std::vector<double>>>();
    if (j.contains("learner_node"))
      t.learner_node = j["learner_node"].get<int>();
    if (j.contains("learner_gpus"))
      t.learner_gpus = j["learner_gpus"].get<std::vector<int>>();
    else if (t.nodes.size() > static_cast<size_t>(t.learner_node)) {
      int n = std::min(4, t.nodes[t.learner_node].gpu_count);
      t.learner_gpus.resize(n);
      std::iota(t.learner_gpus.begin(), t.learner_gpus.end(), 0);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("topology: ") + e.what());
  }
  t.validate();
  return t;
}

ClusterTopology ClusterTopology::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open topology file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return from_json(j);
}

ClusterTopology default_topology(int node_count, int gpus_per_node,
                                 int learner_gpu_count) {
  ClusterTopology t;
  t.nodes.assign(node_count, {gpus_per_node});
  t.learner_node = 0;
  t.learner_gpus.resize(std::min(learner_gpu_count, gpus_per_node));
  std::iota(t.learner_gpus.begin(), t.learner_gpus.end(), 0);
  t.validate();
  return t;
}

namespace {

int node_gpu_base(const ClusterTopology& topo, int node) {
  int base = 0;
  for (int i = 0; i < node; ++i) base += topo.nodes[i].gpu_count;
  return base;
}

double kv_bytes_for(const TransferSizes& transfers, int actor_id) {
  if (transfers.kv_bytes_per_actor.empty()) return 0.0;
  if (transfers.kv_bytes_per_actor.size() == 1)
    return transfers.kv_bytes_per_actor[0];
  return transfers.kv_bytes_per_actor.at(actor_id);
}

void validate_transfers(const TransferSizes& transfers, int n_actors) {
  if (!(transfers.model_bytes >= 0) || !std::isfinite(transfers.model_bytes))
    throw ConfigError("model_bytes must be finite and >= 0");
  if (transfers.kv_bytes_per_actor.size() > 1 &&
      static_cast<int>(transfers.kv_bytes_per_actor.size()) != n_actors)
    throw ConfigError("kv_bytes_per_actor must broadcast or match actor count");
  for (double v : transfers.kv_bytes_per_actor)
    if (!(v >= 0) || !std::isfinite(v))
      throw ConfigError("kv bytes must be finite and >= 0");
}

void finish_plan(PlacementPlan& plan, const ClusterTopology& topo) {
  int n = static_cast<int>(plan.actors.size());
  plan.actor_bw.assign(n, std::vector<double>(n, 0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      plan.actor_bw[i][j] =
          topo.bandwidth_between_nodes(plan.actors[i].node,
                                       plan.actors[j].node);
    }
  }
  plan.prefill_node = topo.learner_node;
  int base = node_gpu_base(topo, topo.learner_node);
  plan.prefill_gpus.clear();
  for (int g : topo.learner_gpus) plan.prefill_gpus.push_back(base + g);
}

}  // namespace

PlacementPlan place(const GenerationPlan& plan, const ClusterTopology& topo,
                    const TransferSizes& transfers) {
  topo.validate();
  if (plan.groups.empty()) throw ValidationError("place: plan has no actors");
  if (plan.est_time_per_actor.size() != plan.groups.size())
    throw ValidationError("place: plan is missing actor time estimates");
  validate_transfers(transfers, plan.n_actors);

  const int n = static_cast<int>(plan.groups.size());
  // Free local GPU indices per node; the learner's GPUs are available to
  // decode actors because the learner sits idle through generation.
  std::vector<std::vector<int>> free_gpus(topo.nodes.size());
  for (size_t nd = 0; nd < topo.nodes.size(); ++nd) {
    free_gpus[nd].resize(topo.nodes[nd].gpu_count);
    std::iota(free_gpus[nd].begin(), free_gpus[nd].end(), 0);
  }
  // On the learner node, hand out the learner's own GPUs first so the
  // co-located actor literally shares them.
  {
    std::vector<int>& lf = free_gpus[topo.learner_node];
    std::vector<int> pref = topo.learner_gpus;
    std::sort(pref.begin(), pref.end());
    std::vector<int> rest;
    for (int g : lf)
      if (!std::binary_search(pref.begin(), pref.end(), g)) rest.push_back(g);
    lf = pref;
    lf.insert(lf.end(), rest.begin(), rest.end());
  }

  int heaviest = 0;
  for (int i = 1; i < n; ++i) {
    if (plan.est_time_per_actor[i] > plan.est_time_per_actor[heaviest])
      heaviest = i;
  }
  std::vector<int> order;  // placement order: heaviest first, then the rest
  order.push_back(heaviest);
  std::vector<int> rest;
  for (int i = 0; i < n; ++i)
    if (i != heaviest) rest.push_back(i);
  std::sort(rest.begin(), rest.end(), [&](int a, int b) {
    if (plan.est_time_per_actor[a] != plan.est_time_per_actor[b])
      return plan.est_time_per_actor[a] > plan.est_time_per_actor[b];
    return a < b;
  });
  order.insert(order.end(), rest.begin(), rest.end());

  // Node preference: learner node first (intra bandwidth), then descending
  // bandwidth to the learner, index ascending on ties.
  std::vector<int> node_rank(topo.nodes.size());
  std::iota(node_rank.begin(), node_rank.end(), 0);
  std::sort(node_rank.begin(), node_rank.end(), [&](int a, int b) {
    double ba = topo.bandwidth_between_nodes(a, topo.learner_node);
    double bb = topo.bandwidth_between_nodes(b, topo.learner_node);
    if (ba != bb) return ba > bb;
    return a < b;
  });

  PlacementPlan out;
  out.actors.resize(n);
  out.colocated_actor = -1;

  auto take = [&](int node, int count) {
    std::vector<int> ids;
    std::vector<int>& fl = free_gpus[node];
    int base = node_gpu_base(topo, node);
    for (int k = 0; k < count; ++k) {
      ids.push_back(base + fl.front());
      fl.erase(fl.begin());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  };

  for (size_t oi = 0; oi < order.size(); ++oi) {
    int actor = order[oi];
    int need = plan.groups[actor].gpu_count;
    ActorPlacement ap;
    ap.actor_id = actor;
    bool placed = false;
    if (oi == 0 &&
        static_cast<int>(free_gpus[topo.learner_node].size()) >= need) {
      ap.node = topo.learner_node;
      ap.gpu_ids = take(topo.learner_node, need);
      ap.l_model = 0;
      ap.l_kv = 0;
      out.colocated_actor = actor;
      placed = true;
    }
    if (!placed) {
      for (int node : node_rank) {
        if (static_cast<int>(free_gpus[node].size()) < need) continue;
        ap.node = node;
        ap.gpu_ids = take(node, need);
        double bw = topo.bandwidth_between_nodes(node, topo.learner_node);
        ap.l_model = transfers.model_bytes / bw;
        ap.l_kv = kv_bytes_for(transfers, actor) / bw;
        placed = true;
        break;
      }
    }
    if (!placed) {
      int free_total = 0;
      for (const auto& fl : free_gpus) free_total += fl.size();
      throw PlacementError(
          "cannot place actor " + std::to_string(actor) + ": needs " +
          std::to_string(need) + " GPUs on one node, largest free block is " +
          std::to_string(free_total) + " GPUs spread across nodes");
    }
    out.actors[actor] = std::move(ap);
  }

  out.prefill_colocated = true;
  finish_plan(out, topo);
  return out;
}

PlacementPlan naive_place(const GenerationPlan& plan,
                          const ClusterTopology& topo,
                          const TransferSizes& transfers) {
  topo.validate();
  if (plan.groups.empty()) throw ValidationError("place: plan has no actors");
  validate_transfers(transfers, plan.n_actors);

  std::vector<int> free_count(topo.nodes.size());
  for (size_t nd = 0; nd < topo.nodes.size(); ++nd)
    free_count[nd] = topo.nodes[nd].gpu_count;
  std::vector<int> next_gpu(topo.nodes.size(), 0);

  PlacementPlan out;
  out.actors.resize(plan.groups.size());
  out.colocated_actor = -1;
  for (size_t actor = 0; actor < plan.groups.size(); ++actor) {
    int need = plan.groups[actor].gpu_count;
    bool placed = false;
    for (size_t node = 0; node < topo.nodes.size(); ++node) {
      if (free_count[node] < need) continue;
      ActorPlacement ap;
      ap.actor_id = static_cast<int>(actor);
      ap.node = static_cast<int>(node);
      int base = node_gpu_base(topo, static_cast<int>(node));
      for (int k = 0; k < need; ++k)
        ap.gpu_ids.push_back(base + next_gpu[node]++);
      free_count[node] -= need;
      double bw = topo.bandwidth_between_nodes(static_cast<int>(node),
                                               topo.learner_node);
      ap.l_model = transfers.model_bytes / bw;
      ap.l_kv = 0;  // prompts are refilled locally, nothing is shipped
      out.actors[actor] = std::move(ap);
      placed = true;
      break;
    }
    if (!placed) {
      throw PlacementError("cannot place actor " + std::to_string(actor) +
                           ": needs " + std::to_string(need) +
                           " GPUs on one node");
    }
  }
  out.prefill_colocated = false;
  finish_plan(out, topo);
  return out;
}

std::vector<OverlapSlack> check_overlap(const PlacementPlan& placement,
                                        const GenerationPlan& plan,
                                        double l_prefill_seconds) {
  if (placement.actors.size() != plan.est_time_per_actor.size())
    throw ValidationError("check_overlap: placement and plan disagree on actors");
  int ref = placement.colocated_actor;
  if (ref < 0) {
    ref = 0;
    for (size_t i = 1; i < plan.est_time_per_actor.size(); ++i)
      if (plan.est_time_per_actor[i] > plan.est_time_per_actor[ref])
        ref = static_cast<int>(i);
  }
  double d1 = plan.est_time_per_actor[ref];
  std::vector<OverlapSlack> out;
  for (size_t i = 0; i < placement.actors.size(); ++i) {
    if (static_cast<int>(i) == ref) continue;
    const ActorPlacement& a = placement.actors[i];
    OverlapSlack s;
    s.actor_id = static_cast<int>(i);
    s.slack = (l_prefill_seconds + d1) -
              (a.l_model + a.l_kv + plan.est_time_per_actor[i]);
    out.push_back(s);
  }
  return out;
}

json PlacementPlan::to_json() const {
  json j;
  j["colocated_actor"] = colocated_actor;
  j["prefill_node"] = prefill_node;
  j["prefill_gpus"] = prefill_gpus;
  j["prefill_colocated"] = prefill_colocated;
  json as = json::array();
  for (const ActorPlacement& a : actors) {
    json aj;
    aj["actor_id"] = a.actor_id;
    aj["node"] = a.node;
    aj["gpu_ids"] = a.gpu_ids;
    aj["l_model"] = a.l_model;
    aj["l_kv"] = a.l_kv;
    as.push_back(std::move(aj));
  }
  j["actors"] = std::move(as);
  if (!overlap_slack.empty()) j["overlap_slack"] = overlap_slack;
  return j;
}

}  // namespace rollsim
