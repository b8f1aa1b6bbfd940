#include <cmath>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"

#include "cardagg/agglomerate.hpp"
#include "cardagg/synthetic.hpp"

using namespace cardagg;

namespace {

// families containing h in the given network, counted under sigma
std::vector<SufficientStats> h_families(const BayesianNetwork& net, const Dataset& data,
                                        const SigmaSet& sigma, const std::string& h) {
  std::vector<SufficientStats> fams;
  int hi = net.index_of(h);
  std::vector<int> involved{hi};
  for (int c : net.dag().children(hi)) involved.push_back(c);
  for (int v : involved) {
    std::vector<std::string> parents;
    for (int p : net.dag().parents(v)) parents.push_back(net.var(p).name);
    fams.push_back(count_sufficient_stats(data, sigma, net.var(v).name, parents));
  }
  return fams;
}

}  // namespace

TEST_CASE("initial states from the blanket") {
  // one binary blanket member, both values present -> 2 states
  std::vector<Variable> vars{{"H", {"a", "b"}}, {"C", {"0", "1"}}};
  Cpd h = Cpd::uniform("H", 2, {}, {});
  Cpd c = Cpd::uniform("C", 2, {"H"}, {2});
  BayesianNetwork net(vars, Dag({"H", "C"}, {{"H", "C"}}), {h, c});
  std::vector<DataColumn> cols{{"H", {"a", "b"}}, {"C", {"0", "1"}}};
  Dataset data(cols, {kHiddenCell, 0, kHiddenCell, 1, kHiddenCell, 0}, {"H"});
  auto sigma = init_states_from_mb(net, data, {}, "H", {});
  CHECK(sigma.num_states == 2);
  CHECK(sigma.assignment == std::vector<int>{0, 1, 0});

  // all rows share one configuration -> a single state and k = 1
  Dataset flat(cols, {kHiddenCell, 1, kHiddenCell, 1}, {"H"});
  auto one = init_states_from_mb(net, flat, {}, "H", {});
  CHECK(one.num_states == 1);
  auto [trace, result] = agglomerate(net, flat, {}, "H", {}, {});
  CHECK(result.chosen_k == 1);
  CHECK(trace.events.empty());
  CHECK(score_curve(trace).size() == 1);
}

TEST_CASE("empty blanket is an unidentifiable variable") {
  std::vector<Variable> vars{{"H", {"a", "b"}}, {"C", {"0", "1"}}};
  BayesianNetwork net(vars, Dag({"H", "C"}, {}),
                      {Cpd::uniform("H", 2, {}, {}), Cpd::uniform("C", 2, {}, {})});
  std::vector<DataColumn> cols{{"H", {"a", "b"}}, {"C", {"0", "1"}}};
  Dataset data(cols, {kHiddenCell, 0}, {"H"});
  CHECK_THROWS_WITH(agglomerate(net, data, {}, "H", {}, {}), doctest::Contains("blanket"));
  CHECK_THROWS(init_states_from_mb(net, data, {}, "C", {}));  // not hidden
}

TEST_CASE("cardio blanket configurations are a strict subset of the possible") {
  auto net = make_cardio();
  auto data = hide_variables(ancestral_sample(net, 1000, 1), {"HYPOVOLEMIA"});
  auto sigma = init_states_from_mb(net, data, {}, "HYPOVOLEMIA", {});
  // 3*2*3 = 18 joint blanket states exist; only some appear in 1000 rows
  CHECK(sigma.num_states == 14);
  CHECK(sigma.num_states < 18);
}

TEST_CASE("merge delta on all-zero tables is zero") {
  // evaluated from the closed form: every gamma ratio is 1 on both sides of
  // the merge, so the delta vanishes
  SufficientStats st;
  st.child = "c";
  st.child_card = 2;
  st.parents = {"h"};
  st.parent_cards = {3};
  st.counts.assign(6, 0);
  st.child_mult = {1.0, 1.0};
  st.parent_mult = {{1.0, 1.0, 1.0}};
  PriorSpec prior;
  CHECK(oracles::gamma_chain_score(st, prior) == 0.0);
  CHECK(delta_score_merge({st}, "h", prior, 0, 1) == doctest::Approx(0.0));
}

TEST_CASE("merge delta equals full rescoring and is local") {
  std::mt19937_64 eng(71);
  PriorSpec prior;
  for (int it = 0; it < 60; ++it) {
    auto fam_h = oracles::random_stats(eng, true);
    while (fam_h.child_card < 3) fam_h = oracles::random_stats(eng, true);
    const int hcard = fam_h.child_card;

    // a child family with h as middle parent
    SufficientStats fam_c;
    fam_c.child = "c";
    fam_c.child_card = 2 + static_cast<int>(unit_double(eng) * 2);
    fam_c.parents = {"q", "h"};
    fam_c.parent_cards = {2, hcard};
    fam_c.counts.resize(static_cast<std::size_t>(fam_c.child_card) * fam_c.n_configs());
    for (auto& n : fam_c.counts) n = static_cast<std::int64_t>(unit_double(eng) * 15);
    fam_c.child_mult.assign(fam_c.child_card, 1.0);
    fam_c.parent_mult = {{1.0, 1.0}, fam_h.child_mult};

    int i = static_cast<int>(unit_double(eng) * hcard);
    int j = static_cast<int>(unit_double(eng) * hcard);
    if (i == j) j = (j + 1) % hcard;

    std::vector<SufficientStats> fams{fam_h, fam_c};
    double delta = delta_score_merge(fams, "h", prior, i, j);

    double before = 0.0, after = 0.0;
    for (const auto& st : fams) {
      before += family_score_bde(st, prior);
      after += family_score_bde(merge_stats_states(st, "h", i, j), prior);
    }
    CHECK(delta == doctest::Approx(after - before).epsilon(1e-9));

    // perturbing a third state leaves the delta unchanged
    int l = 0;
    while (l == i || l == j) ++l;
    if (l < hcard) {
      auto fams_p = fams;
      const int q0 = fams_p[0].n_configs();
      for (int u = 0; u < q0; ++u) fams_p[0].counts[static_cast<std::size_t>(l) * q0 + u] += 9;
      const int q1 = fams_p[1].n_configs();
      for (int c = 0; c < fams_p[1].child_card; ++c)
        for (int u = 0; u < q1; ++u) {
          if (config_unindex(u, fams_p[1].parent_cards)[1] == l)
            fams_p[1].counts[static_cast<std::size_t>(c) * q1 + u] += 4;
        }
      CHECK(delta_score_merge(fams_p, "h", prior, i, j) ==
            doctest::Approx(delta).epsilon(1e-9));
    }
  }
}

TEST_CASE("delta errors on bad states and absent variable") {
  std::mt19937_64 eng(73);
  auto st = oracles::random_stats(eng, false);
  PriorSpec prior;
  CHECK_THROWS(delta_score_merge({st}, "h", prior, 0, 0));
  CHECK_THROWS(delta_score_merge({st}, "h", prior, 0, 99));
  CHECK_THROWS(delta_score_merge({st}, "nope", prior, 0, 1));
}

TEST_CASE("agglomeration recovers the planted cardinality") {
  auto net = make_planted3();
  auto data = hide_variables(ancestral_sample(net, 10000, 1), {"H"});
  auto [trace, result] = agglomerate(net, data, {}, "H", {}, {});
  CHECK(result.chosen_k == 3);
  CHECK(trace.initial_k == 82);
  CHECK(result.sigma.num_states == 3);
  // every state still holds rows
  std::vector<int> used(3, 0);
  for (int a : result.sigma.assignment) ++used[a];
  for (int n : used) CHECK(n > 0);
  // warm-start parameters are proper distributions
  for (const auto& cpd : result.warm_start_params) CHECK_NOTHROW(cpd.validate());
  // the collapse to one state scores well below the chosen cardinality
  CHECK(trace.score_at(1) < result.score_at_k - 100.0);
}

TEST_CASE("cardio strokevolume recovers three states") {
  auto net = make_cardio();
  auto data = hide_variables(ancestral_sample(net, 10000, 1), {"STROKEVOLUME"});
  auto [trace, result] = agglomerate(net, data, {}, "STROKEVOLUME", {}, {});
  CHECK(result.chosen_k == 3);
}

TEST_CASE("trace bookkeeping invariants") {
  auto net = make_planted3();
  auto data = hide_variables(ancestral_sample(net, 2000, 13), {"H"});
  auto [trace, result] = agglomerate(net, data, {}, "H", {}, {});

  const int k0 = trace.initial_k;
  CHECK(static_cast<int>(trace.events.size()) == k0 - 1);
  CHECK(static_cast<int>(trace.scores_by_k.size()) == k0);
  for (std::size_t t = 0; t < trace.events.size(); ++t) {
    double prev = trace.scores_by_k[t];
    CHECK(trace.events[t].score_after ==
          doctest::Approx(prev + trace.events[t].delta).epsilon(1e-9));
    CHECK(trace.events[t].score_after == doctest::Approx(trace.scores_by_k[t + 1]));
  }
  // quadratic work bound on delta evaluations, with the exact lower bound
  std::int64_t lo = static_cast<std::int64_t>(k0) * (k0 - 1) / 2;
  CHECK(trace.delta_evals >= lo);
  CHECK(trace.delta_evals <= static_cast<std::int64_t>(k0) * (k0 - 1));

  // score curve pairs descend in k and match the trace
  auto curve = score_curve(trace);
  REQUIRE(static_cast<int>(curve.size()) == k0);
  CHECK(curve.front().first == k0);
  CHECK(curve.back().first == 1);
  CHECK(curve.front().second == doctest::Approx(trace.scores_by_k[0]));
  CHECK(result.score_at_k == doctest::Approx(trace.score_at(result.chosen_k)));
}

TEST_CASE("greedy choice and cache correctness on a small run") {
  auto net = make_planted3();
  auto data = hide_variables(ancestral_sample(net, 300, 17), {"H"});
  PriorSpec prior;
  auto [trace, result] = agglomerate(net, data, {}, "H", prior, {});

  // replay the merge sequence on independently counted tables
  SigmaSet sig{{"H", sigma_at_k(trace, trace.initial_k)}};
  auto fams = h_families(net, data, sig, "H");
  // install leaf multiplicities (all ones here: no cap)
  int live = trace.initial_k;
  std::vector<int> leaf_of_state(live);
  for (int s = 0; s < live; ++s) leaf_of_state[s] = s;

  for (const auto& event : trace.events) {
    // fresh deltas for every live pair
    double best = -1e300;
    double executed = 0.0;
    int si = -1, sj = -1;
    for (int i = 0; i < live; ++i)
      for (int j = i + 1; j < live; ++j) {
        double d = delta_score_merge(fams, "H", prior, i, j);
        best = std::max(best, d);
        int li = std::min(leaf_of_state[i], leaf_of_state[j]);
        int lj = std::max(leaf_of_state[i], leaf_of_state[j]);
        if (li == event.leaf_i && lj == event.leaf_j) {
          executed = d;
          si = i;
          sj = j;
        }
      }
    REQUIRE(si >= 0);
    // the cached delta the run used equals a fresh evaluation
    CHECK(event.delta == doctest::Approx(executed).epsilon(1e-9));
    // and no candidate was strictly better
    CHECK(executed >= best - 1e-9);

    for (auto& st : fams) st = merge_stats_states(st, "H", si, sj);
    leaf_of_state[si] = std::min(leaf_of_state[si], leaf_of_state[sj]);
    leaf_of_state.erase(leaf_of_state.begin() + sj);
    --live;
  }
}

TEST_CASE("incremental statistics equal recounting at every cardinality") {
  auto net = make_planted3();
  auto data = hide_variables(ancestral_sample(net, 500, 19), {"H"});
  PriorSpec prior;
  auto [trace, result] = agglomerate(net, data, {}, "H", prior, {});

  SigmaSet sig0{{"H", sigma_at_k(trace, trace.initial_k)}};
  auto fams = h_families(net, data, sig0, "H");
  int live = trace.initial_k;
  std::vector<int> leaf_of_state(live);
  for (int s = 0; s < live; ++s) leaf_of_state[s] = s;
  for (const auto& event : trace.events) {
    int si = -1, sj = -1;
    for (int i = 0; i < live && si < 0; ++i)
      for (int j = i + 1; j < live; ++j) {
        int li = std::min(leaf_of_state[i], leaf_of_state[j]);
        int lj = std::max(leaf_of_state[i], leaf_of_state[j]);
        if (li == event.leaf_i && lj == event.leaf_j) {
          si = i;
          sj = j;
          break;
        }
      }
    REQUIRE(si >= 0);
    for (auto& st : fams) st = merge_stats_states(st, "H", si, sj);
    leaf_of_state[si] = std::min(leaf_of_state[si], leaf_of_state[sj]);
    leaf_of_state.erase(leaf_of_state.begin() + sj);
    --live;

    SigmaSet sig{{"H", sigma_at_k(trace, live)}};
    auto recounted = h_families(net, data, sig, "H");
    REQUIRE(recounted.size() == fams.size());
    for (std::size_t f = 0; f < fams.size(); ++f) CHECK(fams[f].counts == recounted[f].counts);
  }
}

TEST_CASE("deterministic tie-break on symmetric data") {
  // two identical blanket configurations: the first eligible pair merges
  std::vector<Variable> vars{{"H", {"a", "b"}}, {"C", {"0", "1", "2", "3"}}};
  BayesianNetwork net(vars, Dag({"H", "C"}, {{"H", "C"}}),
                      {Cpd::uniform("H", 2, {}, {}), Cpd::uniform("C", 4, {"H"}, {2})});
  std::vector<DataColumn> cols{{"H", {"a", "b"}}, {"C", {"0", "1", "2", "3"}}};
  // four configs, each with the same number of rows
  std::vector<int> cells;
  for (int rep = 0; rep < 5; ++rep)
    for (int c = 0; c < 4; ++c) {
      cells.push_back(kHiddenCell);
      cells.push_back(c);
    }
  Dataset data(cols, cells, {"H"});
  auto run1 = agglomerate(net, data, {}, "H", {}, {});
  auto run2 = agglomerate(net, data, {}, "H", {}, {});
  REQUIRE(run1.first.events.size() == run2.first.events.size());
  for (std::size_t t = 0; t < run1.first.events.size(); ++t) {
    CHECK(run1.first.events[t].leaf_i == run2.first.events[t].leaf_i);
    CHECK(run1.first.events[t].leaf_j == run2.first.events[t].leaf_j);
  }
  // symmetric deltas: the first merge must take the lexicographically
  // smallest leaf pair
  CHECK(run1.first.events[0].leaf_i == 0);
  CHECK(run1.first.events[0].leaf_j == 1);
}

TEST_CASE("initial-state cap pre-merges the rarest configurations") {
  auto net = make_planted3();
  auto data = hide_variables(ancestral_sample(net, 5000, 29), {"H"});
  AggConfig cfg;
  cfg.max_initial_states = 10;
  auto [trace, result] = agglomerate(net, data, {}, "H", {}, cfg);
  CHECK(trace.cap_applied);
  CHECK(trace.initial_k == 10);
  CHECK(trace.pre_merged > 0);
  auto sigma = init_states_from_mb(net, data, {}, "H", cfg);
  CHECK(sigma.num_states == 10);
  // every capped state is non-empty and multiplicities absorb the pre-merged
  std::vector<int> used(10, 0);
  for (int a : sigma.assignment) ++used[a];
  for (int n : used) CHECK(n > 0);
  double mult_total = 0.0;
  for (double m : trace.leaf_mult) mult_total += m;
  CHECK(mult_total == doctest::Approx(10.0 + trace.pre_merged));
  CHECK(result.chosen_k <= 10);
}

TEST_CASE("trace exports parse and mark the chosen frontier") {
  auto net = make_planted3();
  auto data = hide_variables(ancestral_sample(net, 800, 41), {"H"});
  auto [trace, result] = agglomerate(net, data, {}, "H", {}, {});

  auto j = nlohmann::json::parse(trace.to_json_string(result.chosen_k));
  CHECK(j["chosen_k"] == result.chosen_k);
  CHECK(j["initial_k"] == trace.initial_k);
  CHECK(j["leaves"].size() == static_cast<std::size_t>(trace.initial_k));
  CHECK(j["events"].size() == trace.events.size());
  CHECK(j["score_curve"].size() == trace.scores_by_k.size());

  std::string dot = trace.to_dot(result.chosen_k);
  CHECK(dot.find("digraph") != std::string::npos);
  // as many diamond frontier marks as chosen states
  std::size_t diamonds = 0, pos = 0;
  while ((pos = dot.find("shape=diamond", pos)) != std::string::npos) {
    ++diamonds;
    pos += 1;
  }
  CHECK(diamonds == static_cast<std::size_t>(result.chosen_k));
}

TEST_CASE("serial and parallel agglomeration agree bitwise") {
  auto net = make_planted3();
  auto data = hide_variables(ancestral_sample(net, 3000, 47), {"H"});
  AggConfig serial;
  serial.mode = ExecMode::serial;
  AggConfig parallel;
  parallel.mode = ExecMode::parallel;
  auto a = agglomerate(net, data, {}, "H", {}, serial);
  auto b = agglomerate(net, data, {}, "H", {}, parallel);
  CHECK(a.second.chosen_k == b.second.chosen_k);
  CHECK(a.first.scores_by_k == b.first.scores_by_k);
  CHECK(a.second.sigma.assignment == b.second.sigma.assignment);
}
