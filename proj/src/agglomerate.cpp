#include "cardagg/agglomerate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cardagg {

namespace {

// -1 when h is the family's child, else h's parent position; throws if absent.
int h_axis(const SufficientStats& st, const std::string& h) {
  if (st.child == h) return -1;
  for (std::size_t t = 0; t < st.parents.size(); ++t)
    if (st.parents[t] == h) return static_cast<int>(t);
  throw std::invalid_argument("family of '" + st.child + "' does not contain '" + h + "'");
}

inline double phi(double n, double a) { return log_gamma(n + a) - log_gamma(a); }

// Delta of merging states i, j of the child variable. The parent-side terms
// cancel: N[u] and alpha_u are preserved by the merge.
double merge_delta_child_axis(const SufficientStats& st, const PriorSpec& prior, int i, int j) {
  const int q = st.n_configs();
  double delta = 0.0;
  for (int u = 0; u < q; ++u) {
    const double pm = st.parent_config_mult(u);
    const double a_i = prior.alpha_cell * pm * st.child_mult[i];
    const double a_j = prior.alpha_cell * pm * st.child_mult[j];
    const double n_i = static_cast<double>(st.count(i, u));
    const double n_j = static_cast<double>(st.count(j, u));
    delta += phi(n_i + n_j, a_i + a_j) - phi(n_i, a_i) - phi(n_j, a_j);
  }
  return delta;
}

// Delta of merging states i, j of the parent at position `pos`: the two
// parent-configuration columns collapse into one for every setting of the
// remaining parents.
double merge_delta_parent_axis(const SufficientStats& st, const PriorSpec& prior, int pos,
                               int i, int j) {
  const int r = st.child_card;
  const int q = st.n_configs();
  const int card = st.parent_cards[pos];
  int stride = 1;
  for (std::size_t t = pos + 1; t < st.parent_cards.size(); ++t) stride *= st.parent_cards[t];
  const int outer = q / card;

  double cm_total = 0.0;
  for (double m : st.child_mult) cm_total += m;

  // contribution of one collapsed column with counts n[], multiplicity product pm
  auto column_term = [&](const std::vector<double>& n, double pm) {
    double n_u = 0.0, v = 0.0;
    for (int c = 0; c < r; ++c) {
      const double a = prior.alpha_cell * pm * st.child_mult[c];
      v += phi(n[c], a);
      n_u += n[c];
    }
    const double a_u = prior.alpha_cell * pm * cm_total;
    return v + log_gamma(a_u) - log_gamma(n_u + a_u);
  };

  std::vector<double> n_i(r), n_j(r), n_m(r);
  double delta = 0.0;
  for (int o = 0; o < outer; ++o) {
    const int hi = o / stride, lo = o % stride;
    const int base = hi * stride * card + lo;
    const int u_i = base + i * stride;
    const int u_j = base + j * stride;
    double pm_other = 1.0;
    {
      std::vector<int> states = config_unindex(u_i, st.parent_cards);
      for (std::size_t t = 0; t < states.size(); ++t)
        if (static_cast<int>(t) != pos) pm_other *= st.parent_mult[t][states[t]];
    }
    for (int c = 0; c < r; ++c) {
      n_i[c] = static_cast<double>(st.count(c, u_i));
      n_j[c] = static_cast<double>(st.count(c, u_j));
      n_m[c] = n_i[c] + n_j[c];
    }
    const double m_i = st.parent_mult[pos][i], m_j = st.parent_mult[pos][j];
    delta += column_term(n_m, pm_other * (m_i + m_j)) - column_term(n_i, pm_other * m_i) -
             column_term(n_j, pm_other * m_j);
  }
  return delta;
}

double merge_delta_one_family(const SufficientStats& st, const std::string& h,
                              const PriorSpec& prior, int i, int j) {
  const int axis = h_axis(st, h);
  const int card = axis < 0 ? st.child_card : st.parent_cards[axis];
  if (i == j) throw std::invalid_argument("cannot merge a state with itself");
  if (i < 0 || j < 0 || i >= card || j >= card)
    throw std::invalid_argument("merge state out of range for '" + h + "'");
  if (i > j) std::swap(i, j);
  return axis < 0 ? merge_delta_child_axis(st, prior, i, j)
                  : merge_delta_parent_axis(st, prior, axis, i, j);
}

std::string config_label(const std::vector<std::string>& vars, const std::vector<int>& states,
                         const Dataset& data, const SigmaSet& sigma_others) {
  std::string label;
  for (std::size_t t = 0; t < vars.size(); ++t) {
    if (t) label += ", ";
    label += vars[t];
    label += '=';
    if (data.has_var(vars[t]) && !data.is_hidden(vars[t]) &&
        data.column(data.var_index(vars[t])).cardinality() > states[t]) {
      label += data.column(data.var_index(vars[t])).state_labels[states[t]];
    } else if (sigma_others.count(vars[t])) {
      label += std::to_string(states[t]);  // hidden neighbor: synthetic state id
    } else {
      label += std::to_string(states[t]);
    }
  }
  return label;
}

struct InitInfo {
  AssignmentMap sigma;
  std::vector<std::vector<int>> leaf_configs;
  std::vector<std::string> leaf_labels;
  std::vector<std::int64_t> leaf_rows;
  std::vector<double> leaf_mult;
  std::vector<std::string> mb_vars;
  bool cap_applied = false;
  int pre_merged = 0;
};

InitInfo init_states_impl(const BayesianNetwork& net, const Dataset& data,
                          const SigmaSet& sigma_others, const std::string& h,
                          const AggConfig& config) {
  if (!data.has_var(h) || !data.is_hidden(h))
    throw std::invalid_argument("'" + h + "' is not a hidden column of the dataset");
  InitInfo info;
  auto mb = net.markov_blanket(net.index_of(h));
  if (mb.empty())
    throw std::invalid_argument("'" + h +
                                "' has an empty Markov blanket; its cardinality is unidentifiable");
  for (int v : mb) info.mb_vars.push_back(net.var(v).name);
  MbConfigs configs = distinct_mb_configs(data, sigma_others, info.mb_vars);
  const int m = data.num_rows();
  const int total = static_cast<int>(configs.configs.size());

  info.sigma.variable = h;
  info.sigma.assignment.resize(m);

  if (config.max_initial_states > 0 && total > config.max_initial_states) {
    // keep the most frequent configurations; fold each dropped one into the
    // kept configuration sharing the most blanket values
    info.cap_applied = true;
    const int cap = config.max_initial_states;
    std::vector<int> order(total);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return configs.rows[a].size() > configs.rows[b].size();
    });
    std::vector<int> kept(order.begin(), order.begin() + cap);
    std::sort(kept.begin(), kept.end());  // keep first-occurrence order among survivors
    std::vector<int> target(total, -1);
    for (int s = 0; s < cap; ++s) target[kept[s]] = s;
    for (int c = 0; c < total; ++c) {
      if (target[c] >= 0) continue;
      int best = 0, best_agree = -1;
      std::size_t best_freq = 0;
      for (int s = 0; s < cap; ++s) {
        int agree = 0;
        for (std::size_t t = 0; t < configs.configs[c].size(); ++t)
          if (configs.configs[c][t] == configs.configs[kept[s]][t]) ++agree;
        std::size_t freq = configs.rows[kept[s]].size();
        if (agree > best_agree || (agree == best_agree && freq > best_freq)) {
          best = s;
          best_agree = agree;
          best_freq = freq;
        }
      }
      target[c] = best;
      ++info.pre_merged;
    }
    info.leaf_mult.assign(cap, 0.0);
    info.leaf_rows.assign(cap, 0);
    for (int c = 0; c < total; ++c) {
      info.leaf_mult[target[c]] += 1.0;
      info.leaf_rows[target[c]] += static_cast<std::int64_t>(configs.rows[c].size());
    }
    for (int s = 0; s < cap; ++s) {
      info.leaf_configs.push_back(configs.configs[kept[s]]);
      info.leaf_labels.push_back(
          config_label(info.mb_vars, configs.configs[kept[s]], data, sigma_others));
    }
    for (int r = 0; r < m; ++r) info.sigma.assignment[r] = target[configs.row_to_config[r]];
    info.sigma.num_states = cap;
  } else {
    for (int c = 0; c < total; ++c) {
      info.leaf_configs.push_back(configs.configs[c]);
      info.leaf_labels.push_back(config_label(info.mb_vars, configs.configs[c], data, sigma_others));
      info.leaf_rows.push_back(static_cast<std::int64_t>(configs.rows[c].size()));
      info.leaf_mult.push_back(1.0);
    }
    info.sigma.assignment = configs.row_to_config;
    info.sigma.num_states = total;
  }
  return info;
}

}  // namespace

AssignmentMap init_states_from_mb(const BayesianNetwork& net, const Dataset& data,
                                  const SigmaSet& sigma_others, const std::string& h,
                                  const AggConfig& config) {
  return init_states_impl(net, data, sigma_others, h, config).sigma;
}

double delta_score_merge(const std::vector<SufficientStats>& families, const std::string& h,
                         const PriorSpec& prior, int i, int j) {
  prior.validate();
  double delta = 0.0;
  for (const auto& st : families) delta += merge_delta_one_family(st, h, prior, i, j);
  return delta;
}

std::vector<std::pair<int, double>> score_curve(const MergeTrace& trace) {
  std::vector<std::pair<int, double>> curve;
  for (int k = trace.initial_k; k >= 1; --k) curve.emplace_back(k, trace.score_at(k));
  return curve;
}

AssignmentMap sigma_at_k(const MergeTrace& trace, int k) {
  if (k < 1 || k > trace.initial_k) throw std::invalid_argument("cardinality not in the trace");
  const auto& leaf_state = trace.leaf_state_by_k.at(trace.initial_k - k);
  AssignmentMap sigma;
  sigma.variable = trace.hidden;
  sigma.num_states = k;
  sigma.assignment.resize(trace.initial_assignment.size());
  for (std::size_t r = 0; r < trace.initial_assignment.size(); ++r)
    sigma.assignment[r] = leaf_state[trace.initial_assignment[r]];
  return sigma;
}

std::vector<Cpd> warm_params_at_k(const BayesianNetwork& net, const Dataset& data,
                                  const SigmaSet& sigma_others, const MergeTrace& trace, int k,
                                  const PriorSpec& prior, ExecMode mode) {
  const auto& leaf_state = trace.leaf_state_by_k.at(trace.initial_k - k);
  std::vector<double> h_mult(k, 0.0);
  for (int l = 0; l < trace.initial_k; ++l) h_mult[leaf_state[l]] += trace.leaf_mult[l];
  SigmaSet sigma_final = sigma_others;
  sigma_final[trace.hidden] = sigma_at_k(trace, k);
  const int hi = net.index_of(trace.hidden);

  std::vector<Cpd> params;
  for (int v = 0; v < net.num_vars(); ++v) {
    std::vector<std::string> parents;
    for (int p : net.dag().parents(v)) parents.push_back(net.var(p).name);
    SufficientStats st = count_sufficient_stats(data, sigma_final, net.var(v).name, parents, mode);
    if (v == hi || net.dag().has_edge(hi, v)) {
      int axis = h_axis(st, trace.hidden);
      if (axis < 0)
        st.child_mult = h_mult;
      else
        st.parent_mult[axis] = h_mult;
    }
    Cpd cpd;
    cpd.child = st.child;
    cpd.parents = st.parents;
    cpd.child_card = st.child_card;
    cpd.parent_cards = st.parent_cards;
    const int q = st.n_configs();
    cpd.table.assign(static_cast<std::size_t>(q) * st.child_card, 0.0);
    for (int u = 0; u < q; ++u) {
      const double pm = st.parent_config_mult(u);
      double norm = 0.0;
      for (int c = 0; c < st.child_card; ++c)
        norm += st.count(c, u) + prior.alpha_cell * pm * st.child_mult[c];
      for (int c = 0; c < st.child_card; ++c)
        cpd.table[static_cast<std::size_t>(u) * st.child_card + c] =
            (st.count(c, u) + prior.alpha_cell * pm * st.child_mult[c]) / norm;
    }
    params.push_back(std::move(cpd));
  }
  return params;
}

namespace {

struct HeapEntry {
  double delta;
  int leaf_i, leaf_j;  // identity of the live states (smallest original leaf)
  int ver_i, ver_j;
  bool operator<(const HeapEntry& o) const {
    if (delta != o.delta) return delta < o.delta;  // max-heap on delta
    if (leaf_i != o.leaf_i) return leaf_i > o.leaf_i;
    return leaf_j > o.leaf_j;
  }
};

}  // namespace

std::pair<MergeTrace, CardinalityResult> agglomerate(const BayesianNetwork& net,
                                                     const Dataset& data,
                                                     const SigmaSet& sigma_others,
                                                     const std::string& h,
                                                     const PriorSpec& prior,
                                                     const AggConfig& config) {
  prior.validate();
  InitInfo init = init_states_impl(net, data, sigma_others, h, config);
  const int k0 = init.sigma.num_states;
  const int hi = net.index_of(h);

  MergeTrace trace;
  trace.hidden = h;
  trace.mb_vars = init.mb_vars;
  trace.leaf_configs = init.leaf_configs;
  trace.leaf_labels = init.leaf_labels;
  trace.leaf_rows = init.leaf_rows;
  trace.leaf_mult = init.leaf_mult;
  trace.initial_assignment = init.sigma.assignment;
  trace.initial_k = k0;
  trace.cap_applied = init.cap_applied;
  trace.pre_merged = init.pre_merged;

  SigmaSet sigma_all = sigma_others;
  sigma_all[h] = init.sigma;

  // families containing h carry the merges; all others contribute a constant
  std::vector<int> involved = {hi};
  for (int c : net.dag().children(hi)) involved.push_back(c);
  std::sort(involved.begin(), involved.end());
  involved.erase(std::unique(involved.begin(), involved.end()), involved.end());
  std::vector<bool> is_involved(net.num_vars(), false);
  for (int v : involved) is_involved[v] = true;

  auto family_parents = [&](int v) {
    std::vector<std::string> parents;
    for (int p : net.dag().parents(v)) parents.push_back(net.var(p).name);
    return parents;
  };

  double base_rest = 0.0;
  for (int v = 0; v < net.num_vars(); ++v) {
    if (is_involved[v]) continue;
    base_rest += family_score_bde(
        count_sufficient_stats(data, sigma_all, net.var(v).name, family_parents(v), config.mode),
        prior);
  }

  std::vector<SufficientStats> fams;
  for (int v : involved) {
    fams.push_back(
        count_sufficient_stats(data, sigma_all, net.var(v).name, family_parents(v), config.mode));
    // install h-axis multiplicities (non-unit only when the cap pre-merged)
    auto& st = fams.back();
    int axis = h_axis(st, h);
    if (axis < 0)
      st.child_mult = init.leaf_mult;
    else
      st.parent_mult[axis] = init.leaf_mult;
  }

  double score = base_rest;
  for (const auto& st : fams) score += family_score_bde(st, prior);
  trace.scores_by_k.push_back(score);

  // live bookkeeping; state s of the h axis in every fams table corresponds
  // to live slot s here
  std::vector<int> leaf_of_state(k0);     // live state -> smallest original leaf
  std::vector<int> state_of_leaf(k0);     // leaf -> live state
  std::vector<int> version(k0, 0);        // per leaf identity, bumped on merge
  std::vector<bool> alive(k0, true);
  std::iota(leaf_of_state.begin(), leaf_of_state.end(), 0);
  std::iota(state_of_leaf.begin(), state_of_leaf.end(), 0);
  trace.leaf_state_by_k.push_back(state_of_leaf);

  auto pair_delta = [&](int si, int sj) {
    return delta_score_merge(fams, h, prior, si, sj);
  };

  std::priority_queue<HeapEntry> heap;
  {
    // initial all-pairs pass, parallel over candidate slots
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(k0) * (k0 - 1) / 2);
    for (int i = 0; i < k0; ++i)
      for (int j = i + 1; j < k0; ++j) pairs.emplace_back(i, j);
    std::vector<double> deltas;
    parallel_map(pairs.size(), config.mode, deltas,
                 [&](std::size_t p) { return pair_delta(pairs[p].first, pairs[p].second); });
    trace.delta_evals += static_cast<std::int64_t>(pairs.size());
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      auto [i, j] = pairs[p];
      int li = std::min(leaf_of_state[i], leaf_of_state[j]);
      int lj = std::max(leaf_of_state[i], leaf_of_state[j]);
      heap.push(HeapEntry{deltas[p], li, lj, version[li], version[lj]});
    }
  }

  int live = k0;
  int step = 0;
  while (live > 1) {
    HeapEntry top{};
    while (true) {
      if (heap.empty()) throw std::logic_error("merge heap exhausted");
      top = heap.top();
      heap.pop();
      if (alive[top.leaf_i] && alive[top.leaf_j] && version[top.leaf_i] == top.ver_i &&
          version[top.leaf_j] == top.ver_j)
        break;
    }
    int si = state_of_leaf[top.leaf_i];
    int sj = state_of_leaf[top.leaf_j];
    if (si > sj) std::swap(si, sj);

    for (auto& st : fams) st = merge_stats_states(st, h, si, sj);

    // merged state keeps index si; states above sj shift down
    const int dead_leaf = std::max(leaf_of_state[si], leaf_of_state[sj]);
    const int kept_leaf = std::min(leaf_of_state[si], leaf_of_state[sj]);
    alive[dead_leaf] = false;
    ++version[kept_leaf];
    ++version[dead_leaf];
    leaf_of_state.erase(leaf_of_state.begin() + sj);
    leaf_of_state[si] = kept_leaf;
    // every leaf (alive identity or absorbed) tracks its containing state
    for (int l = 0; l < k0; ++l) {
      if (state_of_leaf[l] == sj)
        state_of_leaf[l] = si;
      else if (state_of_leaf[l] > sj)
        --state_of_leaf[l];
    }

    --live;
    ++step;
    score += top.delta;
    trace.events.push_back(MergeEvent{step, top.leaf_i, top.leaf_j, top.delta, score});
    trace.scores_by_k.push_back(score);
    trace.leaf_state_by_k.push_back(state_of_leaf);

    // refresh candidates involving the merged state
    for (int sl = 0; sl < live; ++sl) {
      if (sl == si) continue;
      int a = std::min(sl, si), b = std::max(sl, si);
      double d = pair_delta(a, b);
      ++trace.delta_evals;
      int li = std::min(leaf_of_state[a], leaf_of_state[b]);
      int lj = std::max(leaf_of_state[a], leaf_of_state[b]);
      heap.push(HeapEntry{d, li, lj, version[li], version[lj]});
    }
  }

  // highest score wins; ties go to the smaller cardinality
  double best = -std::numeric_limits<double>::infinity();
  for (double s : trace.scores_by_k) best = std::max(best, s);
  int chosen_k = 1;
  for (int k = 1; k <= k0; ++k) {
    if (trace.score_at(k) >= best - config.score_tol) {
      chosen_k = k;
      break;
    }
  }

  CardinalityResult result;
  result.chosen_k = chosen_k;
  result.score_at_k = trace.score_at(chosen_k);
  result.sigma = sigma_at_k(trace, chosen_k);
  result.warm_start_params =
      warm_params_at_k(net, data, sigma_others, trace, chosen_k, prior, config.mode);

  return {std::move(trace), std::move(result)};
}

BayesianNetwork network_with_result(const BayesianNetwork& net, const std::string& h,
                                    const CardinalityResult& result,
                                    const SigmaSet& sigma_others) {
  BayesianNetwork out = resize_cardinality(net, h, result.chosen_k);
  for (const auto& [name, sigma] : sigma_others)
    out = resize_cardinality(out, name, sigma.num_states);
  return with_params(out, result.warm_start_params);
}

std::string MergeTrace::to_json_string(int chosen_k) const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["hidden"] = hidden;
  j["mb_vars"] = mb_vars;
  j["initial_k"] = initial_k;
  j["cap_applied"] = cap_applied;
  j["pre_merged"] = pre_merged;
  j["delta_evals"] = delta_evals;
  j["chosen_k"] = chosen_k;
  j["leaves"] = nlohmann::json::array();
  for (std::size_t l = 0; l < leaf_configs.size(); ++l)
    j["leaves"].push_back({{"id", l},
                           {"label", leaf_labels[l]},
                           {"config", leaf_configs[l]},
                           {"rows", leaf_rows[l]},
                           {"mult", leaf_mult[l]}});
  j["events"] = nlohmann::json::array();
  for (const auto& e : events)
    j["events"].push_back({{"step", e.step},
                           {"merge", {e.leaf_i, e.leaf_j}},
                           {"delta", e.delta},
                           {"score_after", e.score_after}});
  j["score_curve"] = nlohmann::json::array();
  for (int k = initial_k; k >= 1; --k) j["score_curve"].push_back({k, score_at(k)});
  return j.dump(2) + "\n";
}

std::string MergeTrace::to_dot(int chosen_k) const {
  std::ostringstream out;
  out << "digraph agglomeration {\n  rankdir=BT;\n  node [fontsize=10];\n";
  // node of each live state at the chosen cardinality, for the frontier marks
  std::vector<std::string> node_of_leaf(initial_k);
  for (int l = 0; l < initial_k; ++l) node_of_leaf[l] = "L" + std::to_string(l);
  std::vector<std::string> frontier;
  {
    std::vector<std::string> cur = node_of_leaf;
    std::vector<bool> alive(initial_k, true);
    int live = initial_k;
    std::size_t e = 0;
    while (live > chosen_k && e < events.size()) {
      cur[events[e].leaf_i] = "M" + std::to_string(events[e].step);
      alive[events[e].leaf_j] = false;
      --live;
      ++e;
    }
    for (int l = 0; l < initial_k; ++l)
      if (alive[l]) frontier.push_back(cur[l]);
  }
  for (int l = 0; l < initial_k; ++l) {
    std::string label = leaf_labels[l];
    for (auto& ch : label)
      if (ch == ',') ch = '\n';
    out << "  L" << l << " [shape=box label=\"" << label << "\\nrows " << leaf_rows[l] << "\"];\n";
  }
  std::vector<std::string> cur = node_of_leaf;
  for (const auto& e : events) {
    std::string id = "M" + std::to_string(e.step);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%+.4g", e.delta);
    out << "  " << id << " [label=\"step " << e.step << "\\ndelta " << buf << "\"];\n";
    out << "  " << cur[e.leaf_i] << " -> " << id << ";\n";
    out << "  " << cur[e.leaf_j] << " -> " << id << ";\n";
    cur[e.leaf_i] = id;
  }
  for (const auto& f : frontier) out << "  " << f << " [shape=diamond];\n";
  out << "}\n";
  return out.str();
}

}  // namespace cardagg
