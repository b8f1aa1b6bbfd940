#include "cardagg/structure.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "cardagg/rng.hpp"
#include "json.hpp"

namespace cardagg {

namespace {

// family-score cache keyed by (child, sorted parent set)
class FamilyScoreCache {
 public:
  FamilyScoreCache(const Dataset& data, const PriorSpec& prior, ExecMode mode)
      : data_(data), prior_(prior), mode_(mode) {}

  double score(int child, const std::vector<int>& parents) {
    std::vector<int> key = parents;
    std::sort(key.begin(), key.end());
    auto it = cache_[child].find(key);
    if (it != cache_[child].end()) return it->second;
    std::vector<std::string> pnames;
    for (int p : key) pnames.push_back(data_.column(p).name);
    double s = family_score_bde(
        count_sufficient_stats(data_, {}, data_.column(child).name, pnames, mode_), prior_);
    cache_[child][key] = s;
    return s;
  }

 private:
  const Dataset& data_;
  PriorSpec prior_;
  ExecMode mode_;
  std::map<int, std::map<std::vector<int>, double>> cache_;
};

struct Move {
  int kind = 0;  // 0 add, 1 delete, 2 reverse
  int parent = 0, child = 0;
  double delta = 0.0;

  // lexicographic encoding for deterministic tie-breaks
  bool encoding_less(const Move& o) const {
    if (kind != o.kind) return kind < o.kind;
    if (parent != o.parent) return parent < o.parent;
    return child < o.child;
  }
};

bool reachable(const std::vector<std::set<int>>& children, int from, int to) {
  if (from == to) return true;
  std::vector<int> stack{from};
  std::set<int> seen{from};
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int c : children[v]) {
      if (c == to) return true;
      if (seen.insert(c).second) stack.push_back(c);
    }
  }
  return false;
}

}  // namespace

LearnedStructure greedy_hill_climb(const Dataset& data, const PriorSpec& prior,
                                   const HillClimbConfig& config) {
  prior.validate();
  if (!data.hidden_vars().empty())
    throw std::invalid_argument("structure search requires complete data");
  const int n = data.num_vars();
  FamilyScoreCache cache(data, prior, config.mode);

  std::vector<std::set<int>> parents(n), children(n);
  std::vector<double> fam(n);
  double total = 0.0;
  for (int v = 0; v < n; ++v) {
    fam[v] = cache.score(v, {});
    total += fam[v];
  }

  LearnedStructure out;
  out.score_trace.push_back(total);

  auto parent_vec = [&](int v) { return std::vector<int>(parents[v].begin(), parents[v].end()); };

  for (int moves = 0; moves < config.max_moves; ++moves) {
    bool have = false;
    Move best;
    auto consider = [&](Move m) {
      if (!have || m.delta > best.delta + config.score_tol ||
          (std::abs(m.delta - best.delta) <= config.score_tol && m.encoding_less(best))) {
        best = m;
        have = true;
      }
    };
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (a == b) continue;
        const bool edge_ab = children[a].count(b) != 0;
        if (!edge_ab && !children[b].count(a)) {
          // add a -> b
          if (static_cast<int>(parents[b].size()) < config.max_parents &&
              !reachable(children, b, a)) {
            auto pb = parent_vec(b);
            pb.push_back(a);
            double d = cache.score(b, pb) - fam[b];
            if (d > config.score_tol) consider(Move{0, a, b, d});
          }
        }
        if (edge_ab) {
          // delete a -> b
          {
            auto pb = parent_vec(b);
            pb.erase(std::find(pb.begin(), pb.end(), a));
            double d = cache.score(b, pb) - fam[b];
            if (d > config.score_tol) consider(Move{1, a, b, d});
          }
          // reverse a -> b
          if (static_cast<int>(parents[a].size()) < config.max_parents) {
            children[a].erase(b);
            bool cycles = reachable(children, a, b);
            children[a].insert(b);
            if (!cycles) {
              auto pb = parent_vec(b);
              pb.erase(std::find(pb.begin(), pb.end(), a));
              auto pa = parent_vec(a);
              pa.push_back(b);
              double d = (cache.score(b, pb) - fam[b]) + (cache.score(a, pa) - fam[a]);
              if (d > config.score_tol) consider(Move{2, a, b, d});
            }
          }
        }
      }
    }
    if (!have) break;
    // apply
    if (best.kind == 0) {
      parents[best.child].insert(best.parent);
      children[best.parent].insert(best.child);
    } else if (best.kind == 1) {
      parents[best.child].erase(best.parent);
      children[best.parent].erase(best.child);
    } else {
      parents[best.child].erase(best.parent);
      children[best.parent].erase(best.child);
      parents[best.parent].insert(best.child);
      children[best.child].insert(best.parent);
    }
    for (int v : {best.parent, best.child}) fam[v] = cache.score(v, parent_vec(v));
    double new_total = 0.0;
    for (int v = 0; v < n; ++v) new_total += fam[v];
    if (new_total <= total)
      throw std::logic_error("hill-climbing accepted a non-improving move");
    total = new_total;
    out.score_trace.push_back(total);
  }

  std::vector<std::string> names;
  for (int v = 0; v < n; ++v) names.push_back(data.column(v).name);
  std::vector<std::pair<std::string, std::string>> edges;
  for (int p = 0; p < n; ++p)
    for (int c : children[p]) edges.emplace_back(names[p], names[c]);
  out.dag = Dag(names, edges);
  out.score = total;
  return out;
}

namespace {

bool semi_clique_predicate(const std::vector<int>& members,
                           const std::vector<std::set<int>>& adj) {
  const int need = static_cast<int>((members.size() + 1) / 2);  // ceil(|S|/2)
  for (int m : members) {
    int deg = 0;
    for (int o : members)
      if (o != m && adj[m].count(o)) ++deg;
    if (deg < need) return false;
  }
  return true;
}

double set_density(const std::vector<int>& members, const std::vector<std::set<int>>& adj) {
  if (members.size() < 2) return 0.0;
  int edges = 0;
  for (std::size_t i = 0; i < members.size(); ++i)
    for (std::size_t j = i + 1; j < members.size(); ++j)
      if (adj[members[i]].count(members[j])) ++edges;
  return 2.0 * edges / (static_cast<double>(members.size()) * (members.size() - 1));
}

}  // namespace

std::vector<SemiClique> find_semi_cliques(const Dag& dag, const SemiCliqueConfig& config) {
  const int n = dag.num_nodes();
  // moralized undirected skeleton: edges plus married co-parents
  std::vector<std::set<int>> adj(n);
  for (int v = 0; v < n; ++v) {
    for (int p : dag.parents(v)) {
      adj[v].insert(p);
      adj[p].insert(v);
      for (int q : dag.parents(v))
        if (p != q) adj[p].insert(q);
    }
  }

  std::set<std::vector<int>> seen;
  std::vector<SemiClique> out;
  for (int seed = 0; seed < n; ++seed) {
    std::vector<int> members{seed};
    while (static_cast<int>(members.size()) < config.max_size) {
      std::set<int> cand;
      for (int m : members)
        for (int u : adj[m])
          if (std::find(members.begin(), members.end(), u) == members.end()) cand.insert(u);
      int best = -1;
      double best_density = -1.0;
      for (int u : cand) {
        std::vector<int> next = members;
        next.push_back(u);
        // below the minimum size grow unconditionally; beyond it only while
        // the predicate keeps holding
        if (static_cast<int>(next.size()) > config.min_size && !semi_clique_predicate(next, adj))
          continue;
        double d = set_density(next, adj);
        if (d > best_density) {
          best_density = d;
          best = u;
        }
      }
      if (best < 0) break;
      members.push_back(best);
    }
    // prune lowest-degree members until the predicate holds
    while (static_cast<int>(members.size()) >= config.min_size &&
           !semi_clique_predicate(members, adj)) {
      int worst = members[0], worst_deg = n + 1;
      for (int m : members) {
        int deg = 0;
        for (int o : members)
          if (o != m && adj[m].count(o)) ++deg;
        if (deg < worst_deg || (deg == worst_deg && dag.name(m) < dag.name(worst))) {
          worst = m;
          worst_deg = deg;
        }
      }
      members.erase(std::find(members.begin(), members.end(), worst));
    }
    if (static_cast<int>(members.size()) < config.min_size) continue;
    if (!semi_clique_predicate(members, adj)) continue;
    std::vector<int> key = members;
    std::sort(key.begin(), key.end());
    if (!seen.insert(key).second) continue;
    SemiClique sc;
    for (int m : key) sc.members.push_back(dag.name(m));
    std::sort(sc.members.begin(), sc.members.end());
    sc.density = set_density(key, adj);
    out.push_back(std::move(sc));
  }
  std::stable_sort(out.begin(), out.end(), [](const SemiClique& a, const SemiClique& b) {
    if (a.density != b.density) return a.density > b.density;
    if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
    return a.members < b.members;
  });
  return out;
}

HiddenProposal propose_hidden(const BayesianNetwork& net, const SemiClique& clique) {
  for (const auto& m : clique.members)
    if (!net.contains(m))
      throw std::invalid_argument("clique member '" + m + "' is not in the network");
  std::string hname = "H";
  for (int i = 0; net.contains(hname); ++i) hname = "H" + std::to_string(i);

  std::set<std::string> members(clique.members.begin(), clique.members.end());
  std::vector<Variable> vars = net.variables();
  vars.push_back(Variable{hname, {"s0"}});

  std::vector<std::string> names;
  for (const auto& v : vars) names.push_back(v.name);
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& [p, c] : net.dag().edges())
    if (!(members.count(p) && members.count(c))) edges.emplace_back(p, c);
  for (const auto& m : clique.members) edges.emplace_back(hname, m);

  Dag dag(names, edges);  // throws if the modification ever created a cycle

  std::vector<Cpd> cpds;
  for (int i = 0; i < net.num_vars(); ++i) {
    const std::string& name = net.var(i).name;
    if (!members.count(name)) {
      cpds.push_back(net.cpd(i));
      continue;
    }
    std::vector<std::string> parents{hname};
    std::vector<int> pcards{1};
    for (const auto& p : net.cpd(i).parents) {
      if (members.count(p)) continue;
      parents.push_back(p);
      pcards.push_back(net.cardinality(net.index_of(p)));
    }
    cpds.push_back(Cpd::uniform(name, net.cardinality(i), parents, pcards));
  }
  cpds.push_back(Cpd::uniform(hname, 1, {}, {}));

  HiddenProposal prop;
  prop.base_net = net;
  prop.modified_net = BayesianNetwork(std::move(vars), std::move(dag), std::move(cpds));
  prop.clique = clique;
  prop.hidden_name = hname;
  return prop;
}

std::pair<Dataset, Dataset> split_rows(const Dataset& data, double test_fraction,
                                       std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("test_fraction must be in (0, 1)");
  const int m = data.num_rows();
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 eng(seed);
  for (int i = m - 1; i > 0; --i) {
    int j = static_cast<int>(unit_double(eng) * (i + 1));
    if (j > i) j = i;
    std::swap(order[i], order[j]);
  }
  int test_rows = static_cast<int>(m * test_fraction);
  if (test_rows < 1) test_rows = 1;
  if (test_rows >= m) test_rows = m - 1;

  auto take = [&](int begin, int end) {
    std::vector<int> cells;
    cells.reserve(static_cast<std::size_t>(end - begin) * data.num_vars());
    for (int i = begin; i < end; ++i)
      for (int v = 0; v < data.num_vars(); ++v) cells.push_back(data.value(order[i], v));
    return Dataset(data.columns(), std::move(cells), data.hidden_vars());
  };
  return {take(test_rows, m), take(0, test_rows)};  // (train, test)
}

namespace {

// MAP parameters of a fixed structure from complete data.
BayesianNetwork map_network(const Dag& dag, const Dataset& data, const PriorSpec& prior,
                            ExecMode mode) {
  std::vector<Variable> vars;
  for (const auto& name : dag.nodes()) {
    const auto& col = data.column(data.var_index(name));
    vars.push_back(Variable{col.name, col.state_labels});
  }
  std::vector<Cpd> cpds;
  for (int v = 0; v < dag.num_nodes(); ++v) {
    std::vector<std::string> parents;
    for (int p : dag.parents(v)) parents.push_back(dag.name(p));
    SufficientStats st = count_sufficient_stats(data, {}, dag.name(v), parents, mode);
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
  return BayesianNetwork(std::move(vars), dag, std::move(cpds));
}

}  // namespace

PipelineReport find_hidden_pipeline(const Dataset& data, const PipelineConfig& config) {
  config.prior.validate();
  auto [train, test] = split_rows(data, config.test_fraction, config.seed);

  PipelineReport report;
  LearnedStructure base = greedy_hill_climb(train, config.prior, config.hill_climb);
  report.base_dag = base.dag;
  report.base_score = base.score;
  BayesianNetwork base_net = map_network(base.dag, train, config.prior, config.hill_climb.mode);
  report.base_log_loss = log_loss(base_net, test);

  auto cliques = find_semi_cliques(base.dag, config.clique);
  int taken = 0;
  for (const auto& clique : cliques) {
    if (taken >= config.max_proposals) break;
    ++taken;
    HiddenProposal prop = propose_hidden(base_net, clique);
    const std::string& h = prop.hidden_name;
    Dataset train_h = train.with_hidden_column(h);

    auto [trace, agg] = agglomerate(prop.modified_net, train_h, {}, h, config.prior, config.agg);
    int k = config.forced_k > 0 ? std::min(config.forced_k, trace.initial_k) : agg.chosen_k;

    // assignment and completed-data parameters at the pinned cardinality
    CardinalityResult pinned = agg;
    if (k != agg.chosen_k) {
      pinned.chosen_k = k;
      pinned.sigma = sigma_at_k(trace, k);
      pinned.score_at_k = trace.score_at(k);
      pinned.warm_start_params = warm_params_at_k(prop.modified_net, train_h, {}, trace, k,
                                                  config.prior, config.agg.mode);
    }

    BayesianNetwork warm_net = network_with_result(prop.modified_net, h, pinned, {});
    EmConfig em_cfg;
    em_cfg.max_iters = config.em_max_iters;
    em_cfg.ll_tolerance = config.em_tolerance;
    em_cfg.init = EmInit::warm_start;
    em_cfg.warm_params = [&] {
      std::vector<Cpd> ps;
      for (int v = 0; v < warm_net.num_vars(); ++v) ps.push_back(warm_net.cpd(v));
      return ps;
    }();
    em_cfg.mode = config.agg.mode;
    EmResult em = em_parameters(warm_net, train_h, config.prior, em_cfg);
    CsScore cs = cheeseman_stutz_score(warm_net, em, train_h, config.prior);
    BayesianNetwork tuned = with_params(warm_net, em.params);

    ProposalReport pr;
    pr.clique = clique;
    pr.hidden_name = h;
    pr.chosen_k = k;
    pr.base_cs = base.score;  // complete data: CS coincides with the BDe score
    pr.hidden_cs = cs.value;
    pr.base_log_loss = report.base_log_loss;
    pr.hidden_log_loss = log_loss(tuned, test);
    pr.accepted = pr.hidden_cs > pr.base_cs + 1e-9;
    pr.tuned_net = std::move(tuned);
    report.proposals.push_back(std::move(pr));
  }
  return report;
}

std::string PipelineReport::to_json_string() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["base_score"] = base_score;
  j["base_log_loss"] = base_log_loss;
  j["base_edges"] = nlohmann::json::array();
  for (const auto& [p, c] : base_dag.edges()) j["base_edges"].push_back({p, c});
  j["proposals"] = nlohmann::json::array();
  for (const auto& p : proposals)
    j["proposals"].push_back({{"clique", p.clique.members},
                              {"density", p.clique.density},
                              {"hidden", p.hidden_name},
                              {"chosen_k", p.chosen_k},
                              {"base_cs", p.base_cs},
                              {"hidden_cs", p.hidden_cs},
                              {"base_log_loss", p.base_log_loss},
                              {"hidden_log_loss", p.hidden_log_loss},
                              {"accepted", p.accepted}});
  return j.dump(2) + "\n";
}

}  // namespace cardagg
