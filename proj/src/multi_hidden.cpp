#include "cardagg/multi_hidden.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"

namespace cardagg {

HiddenPartition partition_hidden(const BayesianNetwork& net,
                                 const std::vector<std::string>& hidden) {
  std::set<std::string> hidden_set(hidden.begin(), hidden.end());
  HiddenPartition part;
  std::vector<std::string> interacting;
  for (const auto& h : hidden) {
    if (net.is_decoupled_hidden(h, hidden_set))
      part.decoupled.push_back(h);
    else
      interacting.push_back(h);
  }
  // connected components of blanket membership among the interacting set
  std::map<std::string, int> comp;
  for (const auto& h : interacting) comp[h] = -1;
  int next = 0;
  for (const auto& h : interacting) {
    if (comp[h] >= 0) continue;
    std::vector<std::string> stack{h};
    comp[h] = next;
    while (!stack.empty()) {
      std::string cur = stack.back();
      stack.pop_back();
      for (const auto& m : net.markov_blanket(cur)) {
        auto it = comp.find(m);
        if (it != comp.end() && it->second < 0) {
          it->second = next;
          stack.push_back(m);
        }
      }
    }
    ++next;
  }
  part.groups.resize(next);
  for (const auto& h : interacting) part.groups[comp[h]].push_back(h);
  return part;
}

namespace {

std::vector<std::string> family_parents(const BayesianNetwork& net, int v) {
  std::vector<std::string> parents;
  for (int p : net.dag().parents(v)) parents.push_back(net.var(p).name);
  return parents;
}

double plain_family_score(const BayesianNetwork& net, const Dataset& data, const SigmaSet& sigma,
                          int v, const PriorSpec& prior, ExecMode mode) {
  return family_score_bde(
      count_sufficient_stats(data, sigma, net.var(v).name, family_parents(net, v), mode), prior);
}

}  // namespace

RoundRobinResult round_robin_agglomerate(const BayesianNetwork& net, const Dataset& data,
                                         const std::vector<std::string>& hidden,
                                         const PriorSpec& prior, const RoundRobinConfig& config) {
  prior.validate();
  if (hidden.empty()) throw std::invalid_argument("hidden set is empty");
  for (const auto& h : hidden)
    if (!data.has_var(h) || !data.is_hidden(h))
      throw std::invalid_argument("'" + h + "' is not a hidden column of the dataset");

  RoundRobinResult result;
  for (const auto& h : hidden) {
    AssignmentMap s;
    s.variable = h;
    s.num_states = 1;
    s.assignment.assign(data.num_rows(), 0);
    result.sigmas[h] = std::move(s);
    result.cardinalities[h] = 1;
  }

  // per-family plain scores under the current assignments
  std::vector<double> fam_score(net.num_vars());
  double total = 0.0;
  for (int v = 0; v < net.num_vars(); ++v) {
    fam_score[v] = plain_family_score(net, data, result.sigmas, v, prior, config.agg.mode);
    total += fam_score[v];
  }

  auto touched_families = [&](const std::string& h) {
    int hi = net.index_of(h);
    std::vector<int> fams{hi};
    for (int c : net.dag().children(hi)) fams.push_back(c);
    std::sort(fams.begin(), fams.end());
    fams.erase(std::unique(fams.begin(), fams.end()), fams.end());
    return fams;
  };

  std::set<std::string> dirty(hidden.begin(), hidden.end());
  int round = 0;
  while (!dirty.empty()) {
    if (++round > config.max_rounds)
      throw std::logic_error("round-robin failed to settle within max_rounds");
    for (const auto& h : hidden) {
      if (!dirty.count(h)) continue;
      dirty.erase(h);

      SigmaSet others = result.sigmas;
      others.erase(h);
      auto [trace, proposal] = agglomerate(net, data, others, h, prior, config.agg);
      (void)trace;

      SigmaSet candidate = result.sigmas;
      candidate[h] = proposal.sigma;
      double new_total = total;
      std::vector<std::pair<int, double>> updated;
      for (int v : touched_families(h)) {
        double s = plain_family_score(net, data, candidate, v, prior, config.agg.mode);
        new_total += s - fam_score[v];
        updated.emplace_back(v, s);
      }

      RoundRecord rec;
      rec.round = round;
      rec.variable = h;
      rec.proposed_k = proposal.chosen_k;
      rec.score_before = total;
      if (new_total > total + config.score_tol) {
        rec.accepted = true;
        rec.score_after = new_total;
        if (!(new_total > total))
          throw std::logic_error("accepted round-robin update did not improve the score");
        result.sigmas[h] = proposal.sigma;
        result.cardinalities[h] = proposal.chosen_k;
        for (auto [v, s] : updated) fam_score[v] = s;
        total = new_total;
        for (const auto& m : net.markov_blanket(h))
          if (result.sigmas.count(m)) dirty.insert(m);
      } else {
        rec.accepted = false;
        rec.score_after = total;
      }
      result.round_log.push_back(rec);
    }
  }
  result.final_score = total;
  result.rounds = round;
  return result;
}

BayesianNetwork network_from_round_robin(const BayesianNetwork& net, const Dataset& data,
                                         const RoundRobinResult& result, const PriorSpec& prior,
                                         ExecMode mode) {
  BayesianNetwork out = net;
  for (const auto& [h, sigma] : result.sigmas) out = resize_cardinality(out, h, sigma.num_states);
  std::vector<Cpd> cpds;
  for (int v = 0; v < out.num_vars(); ++v) {
    SufficientStats st = count_sufficient_stats(data, result.sigmas, out.var(v).name,
                                                family_parents(out, v), mode);
    Cpd cpd;
    cpd.child = st.child;
    cpd.parents = st.parents;
    cpd.child_card = st.child_card;
    cpd.parent_cards = st.parent_cards;
    const int q = st.n_configs();
    cpd.table.assign(static_cast<std::size_t>(q) * st.child_card, 0.0);
    for (int u = 0; u < q; ++u) {
      double norm = 0.0;
      for (int c = 0; c < st.child_card; ++c) norm += st.count(c, u) + prior.alpha_cell;
      for (int c = 0; c < st.child_card; ++c)
        cpd.table[static_cast<std::size_t>(u) * st.child_card + c] =
            (st.count(c, u) + prior.alpha_cell) / norm;
    }
    cpds.push_back(std::move(cpd));
  }
  return with_params(out, cpds);
}

std::string RoundRobinResult::to_json_string() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["final_score"] = final_score;
  j["rounds"] = rounds;
  j["cardinalities"] = cardinalities;
  j["round_log"] = nlohmann::json::array();
  for (const auto& r : round_log)
    j["round_log"].push_back({{"round", r.round},
                              {"variable", r.variable},
                              {"proposed_k", r.proposed_k},
                              {"accepted", r.accepted},
                              {"score_before", r.score_before},
                              {"score_after", r.score_after}});
  return j.dump(2) + "\n";
}

}  // namespace cardagg
