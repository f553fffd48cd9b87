// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
//
// Locality-aware actor placement, the naive baseline, and overlap slack.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "rollsim/errors.hpp"
#include "rollsim/placement.hpp"
#include "rollsim/rng.hpp"

using namespace rollsim;
using namespace rollsim::testutil;

namespace {

// A minimal plan carrying only what placement reads: group GPU counts and
// per-actor time estimates.
GenerationPlan mini_plan(const std::vector<double>& est_times,
                         int gpus_per_actor = 2) {
  GenerationPlan plan;
  plan.n_actors = static_cast<int>(est_times.size());
  plan.est_time_per_actor = est_times;
  plan.est_total_time = *std::max_element(est_times.begin(), est_times.end());
  for (int i = 0; i < plan.n_actors; ++i) {
    ActorGroup g;
    g.actor_id = i;
    g.gpu_count = gpus_per_actor;
    g.prompt_ids = {"p" + std::to_string(i)};
    g.prompt_lens = {64};
    g.predicted_lengths = {est_times[static_cast<size_t>(i)]};
    plan.groups.push_back(std::move(g));
  }
  return plan;
}

ClusterTopology two_nodes() {
  ClusterTopology t = default_topology(2, 4, 2);
  return t;  // learner on node 0, local GPUs {0, 1}
}

TransferSizes tiered_transfers() {
  TransferSizes tr;
  tr.model_bytes = 3e9;
  tr.kv_bytes_per_actor = {1e9, 2e9, 3e9};
  return tr;
}

// Single KV entry, broadcast to however many actors the plan has.
TransferSizes broadcast_transfers() {
  TransferSizes tr;
  tr.model_bytes = 3e9;
  tr.kv_bytes_per_actor = {1e9};
  return tr;
}

int node_of_gpu(const ClusterTopology& topo, int gpu) {
  int base = 0;
  for (size_t n = 0; n < topo.nodes.size(); ++n) {
    if (gpu < base + topo.nodes[n].gpu_count) return static_cast<int>(n);
    base += topo.nodes[n].gpu_count;
  }
  return -1;
}

}  // namespace

TEST_CASE("single actor lands on the learner node with free transfers") {
  GenerationPlan plan = mini_plan({25.0});
  PlacementPlan p = place(plan, two_nodes(), broadcast_transfers());
  REQUIRE(p.actors.size() == 1);
  CHECK(p.colocated_actor == 0);
  CHECK(p.actors[0].node == 0);
  CHECK(p.actors[0].gpu_ids == std::vector<int>{0, 1});  // the learner's own
  CHECK(p.actors[0].l_model == 0.0);
  CHECK(p.actors[0].l_kv == 0.0);
  CHECK(p.prefill_node == 0);
  CHECK(p.prefill_gpus == std::vector<int>{0, 1});
  CHECK(p.prefill_colocated);
}

TEST_CASE("actors fill nodes in bandwidth order, heaviest first") {
  GenerationPlan plan = mini_plan({30.0, 20.0, 10.0});
  PlacementPlan p = place(plan, two_nodes(), tiered_transfers());

  // Heaviest actor 0 shares the learner's GPUs.
  CHECK(p.colocated_actor == 0);
  CHECK(p.actors[0].node == 0);
  CHECK(p.actors[0].gpu_ids == std::vector<int>{0, 1});
  CHECK(p.actors[0].l_model == 0.0);
  CHECK(p.actors[0].l_kv == 0.0);

  // Next heaviest takes the learner node's remaining GPUs at intra speed.
  CHECK(p.actors[1].node == 0);
  CHECK(p.actors[1].gpu_ids == std::vector<int>{2, 3});
  CHECK(p.actors[1].l_model == doctest::Approx(3e9 / 2.5e10));
  CHECK(p.actors[1].l_kv == doctest::Approx(2e9 / 2.5e10));

  // Lightest goes across the slow link.
  CHECK(p.actors[2].node == 1);
  CHECK(p.actors[2].gpu_ids == std::vector<int>{4, 5});
  CHECK(p.actors[2].l_model == doctest::Approx(1.0));
  CHECK(p.actors[2].l_kv == doctest::Approx(1.0));
}

TEST_CASE("placement follows estimated time, not actor id") {
  GenerationPlan plan = mini_plan({10.0, 30.0, 20.0});
  PlacementPlan p = place(plan, two_nodes(), tiered_transfers());
  CHECK(p.colocated_actor == 1);
  CHECK(p.actors[1].gpu_ids == std::vector<int>{0, 1});
  CHECK(p.actors[2].node == 0);  // second heaviest stays local
  CHECK(p.actors[2].gpu_ids == std::vector<int>{2, 3});
  CHECK(p.actors[0].node == 1);
  CHECK(p.actors[0].l_model == doctest::Approx(1.0));
}

TEST_CASE("equal estimates break ties by actor id") {
  GenerationPlan plan = mini_plan({10.0, 20.0, 20.0});
  PlacementPlan p = place(plan, two_nodes(), tiered_transfers());
  // Strictly-greater scan keeps the first maximum as the co-located actor.
  CHECK(p.colocated_actor == 1);
  // Of the rest, actor 2 (20) outranks actor 0 (10).
  CHECK(p.actors[2].node == 0);
  CHECK(p.actors[0].node == 1);
}

TEST_CASE("placement fails loudly when gpus run out") {
  GenerationPlan plan = mini_plan({30.0, 20.0, 10.0});
  ClusterTopology topo = default_topology(1, 4, 2);
  CHECK_THROWS_AS(place(plan, topo, tiered_transfers()), PlacementError);
  try {
    place(plan, topo, tiered_transfers());
  } catch (const PlacementError& e) {
    CHECK(std::string(e.what()).find("cannot place actor 2") !=
          std::string::npos);
  }
  // An actor wider than any single node cannot be split across nodes.
  GenerationPlan wide = mini_plan({10.0}, 16);
  CHECK_THROWS_AS(place(wide, two_nodes(), broadcast_transfers()),
                  PlacementError);
}

TEST_CASE("actor bandwidth table reflects node tiers") {
  GenerationPlan plan = mini_plan({30.0, 20.0, 10.0});
  ClusterTopology topo = two_nodes();
  PlacementPlan p = place(plan, topo, tiered_transfers());
  REQUIRE(p.actor_bw.size() == 3);
  // Actors 0 and 1 share node 0; actor 2 sits on node 1.
  CHECK(p.actor_bw[0][1] == doctest::Approx(topo.intra_node_bw));
  CHECK(p.actor_bw[0][2] == doctest::Approx(topo.inter_node_bw));
  CHECK(p.actor_bw[2][2] == doctest::Approx(topo.intra_node_bw));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(p.actor_bw[i][j] == doctest::Approx(p.actor_bw[j][i]));
}

TEST_CASE("a bandwidth matrix overrides the two-tier model") {
  ClusterTopology topo = two_nodes();
  topo.bw_matrix = {{4e10, 5e9}, {5e9, 4e10}};
  GenerationPlan plan = mini_plan({30.0, 20.0, 10.0});
  PlacementPlan p = place(plan, topo, tiered_transfers());
  CHECK(p.actors[2].l_model == doctest::Approx(3e9 / 5e9));
  CHECK(p.actor_bw[0][2] == doctest::Approx(5e9));
}

TEST_CASE("naive placement packs by id and node index") {
  GenerationPlan plan = mini_plan({10.0, 30.0, 20.0});
  ClusterTopology topo = two_nodes();
  PlacementPlan p = naive_place(plan, topo, tiered_transfers());
  CHECK(p.colocated_actor == -1);
  CHECK_FALSE(p.prefill_colocated);
  // Id order, first fit: estimates are ignored entirely.
  CHECK(p.actors[0].node == 0);
  CHECK(p.actors[0].gpu_ids == std::vector<int>{0, 1});
  CHECK(p.actors[1].node == 0);
  CHECK(p.actors[1].gpu_ids == std::vector<int>{2, 3});
  CHECK(p.actors[2].node == 1);
  CHECK(p.actors[2].gpu_ids == std::vector<int>{4, 5});
  // Model sync is never free, even on the learner node; nothing is shipped.
  CHECK(p.actors[0].l_model == doctest::Approx(3e9 / 2.5e10));
  CHECK(p.actors[2].l_model == doctest::Approx(1.0));
  for (const ActorPlacement& a : p.actors) CHECK(a.l_kv == 0.0);

  GenerationPlan big = mini_plan({1.0, 1.0, 1.0, 1.0, 1.0});
  CHECK_THROWS_AS(naive_place(big, topo, broadcast_transfers()),
                  PlacementError);
}

TEST_CASE("zero transfers always leave non-negative slack") {
  TransferSizes none;
  none.model_bytes = 0;
  none.kv_bytes_per_actor = {};
  Rng rng(5150);
  for (int trial = 0; trial < 100; ++trial) {
    int n = static_cast<int>(rng.uniform_int(1, 6));
    std::vector<double> est;
    for (int i = 0; i < n; ++i) est.push_back(rng.uniform(1.0, 100.0));
    GenerationPlan plan = mini_plan(est, 2);
    ClusterTopology topo = default_topology(3, 4, 2);
    PlacementPlan p = place(plan, topo, none);
    double l_prefill = rng.uniform(0.0, 5.0);
    auto slacks = check_overlap(p, plan, l_prefill);
    CHECK(slacks.size() == static_cast<size_t>(n - 1));
    for (const OverlapSlack& s : slacks) {
      CAPTURE(trial);
      CHECK(s.slack >= l_prefill - 1e-12);
      CHECK(s.actor_id != p.colocated_actor);
    }
  }
}

TEST_CASE("overlap slack matches the hand computation") {
  GenerationPlan plan = mini_plan({30.0, 20.0, 10.0});
  ClusterTopology topo = two_nodes();
  PlacementPlan p = place(plan, topo, tiered_transfers());
  double l_prefill = 4.0;
  auto slacks = check_overlap(p, plan, l_prefill);
  REQUIRE(slacks.size() == 2);
  // Actor 1: (4 + 30) - (0.12 + 0.08 + 20) = 4 + 9.8.
  CHECK(slacks[0].actor_id == 1);
  CHECK(slacks[0].slack == doctest::Approx(l_prefill + 9.8));
  // Actor 2: (4 + 30) - (1 + 1 + 10) = 4 + 18.
  CHECK(slacks[1].actor_id == 2);
  CHECK(slacks[1].slack == doctest::Approx(l_prefill + 18.0));
}

TEST_CASE("oversized kv payloads expose the transfer") {
  GenerationPlan plan = mini_plan({30.0, 20.0, 10.0});
  ClusterTopology topo = two_nodes();
  TransferSizes tr = tiered_transfers();
  tr.kv_bytes_per_actor = {1e14};  // broadcast, hours of shipping
  PlacementPlan p = place(plan, topo, tr);
  auto slacks = check_overlap(p, plan, 2.0);
  for (const OverlapSlack& s : slacks) CHECK(s.slack < 0);
}

TEST_CASE("slack without a colocated actor uses the longest actor") {
  GenerationPlan plan = mini_plan({10.0, 30.0, 20.0});
  ClusterTopology topo = two_nodes();
  PlacementPlan p = naive_place(plan, topo, tiered_transfers());
  REQUIRE(p.colocated_actor == -1);
  auto slacks = check_overlap(p, plan, 1.0);
  REQUIRE(slacks.size() == 2);
  // Reference is actor 1 (est 30); its own slack is not reported.
  for (const OverlapSlack& s : slacks) CHECK(s.actor_id != 1);
  // Actor 0: (1 + 30) - (0.12 + 0 + 10).
  CHECK(slacks[0].actor_id == 0);
  CHECK(slacks[0].slack == doctest::Approx(31.0 - 10.12));
  // Actor 2: (1 + 30) - (1 + 0 + 20).
  CHECK(slacks[1].actor_id == 2);
  CHECK(slacks[1].slack == doctest::Approx(10.0));
}

TEST_CASE("faster links shrink transfer latency proportionally") {
  GenerationPlan plan = mini_plan({30.0, 20.0, 10.0});
  ClusterTopology topo = two_nodes();
  PlacementPlan slow = place(plan, topo, tiered_transfers());
  topo.intra_node_bw *= 8;
  topo.inter_node_bw *= 8;
  PlacementPlan fast = place(plan, topo, tiered_transfers());
  for (size_t i = 0; i < slow.actors.size(); ++i) {
    CHECK(fast.actors[i].node == slow.actors[i].node);
    CHECK(fast.actors[i].l_model ==
          doctest::Approx(slow.actors[i].l_model / 8.0));
    CHECK(fast.actors[i].l_kv == doctest::Approx(slow.actors[i].l_kv / 8.0));
  }
}

TEST_CASE("gpu assignments never overlap") {
  Rng rng(909);
  for (int trial = 0; trial < 40; ++trial) {
    int nodes = static_cast<int>(rng.uniform_int(1, 4));
    int gpus = static_cast<int>(rng.uniform_int(2, 8));
    ClusterTopology topo = default_topology(nodes, gpus, 2);
    int per_actor = static_cast<int>(rng.uniform_int(1, 2));
    int max_actors = nodes * gpus / per_actor;
    int n = static_cast<int>(rng.uniform_int(1, std::min(6, max_actors)));
    std::vector<double> est;
    for (int i = 0; i < n; ++i) est.push_back(rng.uniform(1.0, 50.0));
    GenerationPlan plan = mini_plan(est, per_actor);

    for (bool naive : {false, true}) {
      PlacementPlan p;
      try {
        p = naive ? naive_place(plan, topo, broadcast_transfers())
                  : place(plan, topo, broadcast_transfers());
      } catch (const PlacementError&) {
        continue;  // fragmented fit, nothing to verify
      }
      std::set<int> seen;
      for (const ActorPlacement& a : p.actors) {
        CHECK(static_cast<int>(a.gpu_ids.size()) == per_actor);
        for (int g : a.gpu_ids) {
          CHECK(seen.insert(g).second);
          CHECK(g >= 0);
          CHECK(g < topo.total_gpus());
          CHECK(node_of_gpu(topo, g) == a.node);
        }
      }
    }
  }
}

TEST_CASE("kv payload list must broadcast or match") {
  GenerationPlan plan = mini_plan({30.0, 20.0, 10.0});
  TransferSizes tr;
  tr.kv_bytes_per_actor = {1e9, 2e9};  // neither 1 nor 3 entries
  CHECK_THROWS_AS(place(plan, two_nodes(), tr), ConfigError);
  tr.kv_bytes_per_actor = {-1.0};
  CHECK_THROWS_AS(place(plan, two_nodes(), tr), ConfigError);
  tr.kv_bytes_per_actor = {};
  tr.model_bytes = -5;
  CHECK_THROWS_AS(place(plan, two_nodes(), tr), ConfigError);
}

TEST_CASE("placement validates plan shape") {
  GenerationPlan plan = mini_plan({30.0, 20.0});
  plan.est_time_per_actor.pop_back();
  CHECK_THROWS_AS(place(plan, two_nodes(), tiered_transfers()),
                  ValidationError);
  GenerationPlan empty;
  CHECK_THROWS_AS(place(empty, two_nodes(), tiered_transfers()),
                  ValidationError);
}

TEST_CASE("topology validation") {
  ClusterTopology t = two_nodes();
  CHECK_NOTHROW(t.validate());
  t.nodes.clear();
  CHECK_THROWS_AS(t.validate(), ConfigError);

  t = two_nodes();
  t.nodes[1].gpu_count = 0;
  CHECK_THROWS_AS(t.validate(), ConfigError);

  t = two_nodes();
  t.intra_node_bw = 1e9;  // slower than inter
  CHECK_THROWS_AS(t.validate(), ConfigError);

  t = two_nodes();
  t.learner_node = 7;
  CHECK_THROWS_AS(t.validate(), ConfigError);

  t = two_nodes();
  t.learner_gpus = {0, 9};
  CHECK_THROWS_AS(t.validate(), ConfigError);

  t = two_nodes();
  t.bw_matrix = {{1e10, 2e9}};  // not square
  CHECK_THROWS_AS(t.validate(), ConfigError);

  t = two_nodes();
  t.bw_matrix = {{1e10, 2e9}, {3e9, 1e10}};  // asymmetric
  CHECK_THROWS_AS(t.validate(), ConfigError);
}

TEST_CASE("topology round trips through json") {
  ClusterTopology t = two_nodes();
  t.inter_node_bw = 7e9;
  nlohmann::json j = t.to_json();
  ClusterTopology back = ClusterTopology::from_json(j);
  CHECK(back.nodes.size() == 2);
  CHECK(back.nodes[0].gpu_count == 4);
  CHECK(back.inter_node_bw == doctest::Approx(7e9));
  CHECK(back.learner_gpus == t.learner_gpus);

  // Shorthand form.
  nlohmann::json shorthand = {{"node_count", 3}, {"gpus_per_node", 4}};
  ClusterTopology s = ClusterTopology::from_json(shorthand);
  CHECK(s.nodes.size() == 3);
  CHECK(s.nodes[2].gpu_count == 4);
  CHECK(s.learner_gpus == std::vector<int>{0, 1, 2, 3});

  nlohmann::json bad = {{"node_count", 2}, {"gpus_per_node", 0}};
  CHECK_THROWS_AS(ClusterTopology::from_json(bad), ConfigError);
}

TEST_CASE("topology file IO") {
  TempDir dir("rollsim-topo");
  ClusterTopology t = default_topology(3, 8, 4);
  write_file(dir.file("topo.json"), t.to_json().dump());
  ClusterTopology back = ClusterTopology::load(dir.file("topo.json"));
  CHECK(back.nodes.size() == 3);
  CHECK(back.total_gpus() == 24);
  CHECK_THROWS_AS(ClusterTopology::load(dir.file("nope.json")), ConfigError);
  write_file(dir.file("bad.json"), "][");
  CHECK_THROWS_AS(ClusterTopology::load(dir.file("bad.json")), ParseError);
}
