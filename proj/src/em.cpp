#include "cardagg/em.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "cardagg/rng.hpp"

namespace cardagg {

void EmConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (!(ll_tolerance > 0.0)) throw std::invalid_argument("ll_tolerance must be > 0");
  if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  if (init == EmInit::warm_start && warm_params.empty())
    throw std::invalid_argument("warm_start init requires warm_params");
}

PosteriorHidden posterior_hidden(const BayesianNetwork& net, const std::vector<int>& row,
                                 int max_hidden_states) {
  if (static_cast<int>(row.size()) != net.num_vars())
    throw std::invalid_argument("row has wrong length");
  PosteriorHidden post;
  std::vector<int> hidden_ix;
  long joint = 1;
  for (int i = 0; i < net.num_vars(); ++i) {
    if (row[i] == kHiddenCell) {
      hidden_ix.push_back(i);
      post.hidden_vars.push_back(net.var(i).name);
      post.cards.push_back(net.cardinality(i));
      joint *= net.cardinality(i);
      if (joint > max_hidden_states)
        throw std::runtime_error("joint hidden state space exceeds the cap (" +
                                 std::to_string(max_hidden_states) + ")");
    } else if (row[i] < 0 || row[i] >= net.cardinality(i)) {
      throw std::invalid_argument("state index out of range for '" + net.var(i).name + "'");
    }
  }
  if (hidden_ix.empty()) {
    post.probs = {1.0};
    return post;
  }

  // only families touching a hidden variable vary across completions
  std::vector<bool> hidden(net.num_vars(), false);
  for (int i : hidden_ix) hidden[i] = true;
  std::vector<int> vary;
  for (int i = 0; i < net.num_vars(); ++i) {
    bool v = hidden[i];
    for (int p : net.dag().parents(i)) v = v || hidden[p];
    if (v) vary.push_back(i);
  }

  std::vector<int> full = row;
  std::vector<double> logw(static_cast<std::size_t>(joint));
  for (long hjoint = 0; hjoint < joint; ++hjoint) {
    long rest = hjoint;
    for (std::size_t t = hidden_ix.size(); t-- > 0;) {
      full[hidden_ix[t]] = static_cast<int>(rest % post.cards[t]);
      rest /= post.cards[t];
    }
    double lp = 0.0;
    for (int fam : vary) {
      const Cpd& cpd = net.cpd(fam);
      int u = 0;
      for (std::size_t t = 0; t < cpd.parents.size(); ++t)
        u = u * cpd.parent_cards[t] + full[net.index_of(cpd.parents[t])];
      double p = cpd.prob(u, full[fam]);
      if (p <= 0.0) {
        lp = kNegInf;
        break;
      }
      lp += std::log(p);
    }
    logw[static_cast<std::size_t>(hjoint)] = lp;
  }
  double lse = log_sum_exp(logw);
  if (lse == kNegInf)
    throw std::runtime_error("observed part of the row has probability zero under the model");
  post.probs.resize(logw.size());
  for (std::size_t i = 0; i < logw.size(); ++i)
    post.probs[i] = logw[i] == kNegInf ? 0.0 : std::exp(logw[i] - lse);
  return post;
}

namespace {

struct FamilyLayout {
  int var = 0;
  std::vector<int> member_cols;   // data column per member (child last), -1 if absent
  std::vector<int> member_nets;   // net index per member (parents then child)
  std::vector<int> parent_cards;
  int child_card = 0;
  int n_configs = 1;
  bool varies = false;
};

// Precomputed row-independent machinery for one (net, data) pairing.
struct EStepPlan {
  std::vector<FamilyLayout> fams;
  std::vector<int> hidden_net_ix;  // net vars to complete per row
  std::vector<int> hidden_cards;
  long joint = 1;
  std::vector<int> data_col;  // net var -> data column or -1

  EStepPlan(const BayesianNetwork& net, const Dataset& data, int max_hidden_states) {
    data_col.assign(net.num_vars(), -1);
    for (int v = 0; v < data.num_vars(); ++v) {
      const std::string& name = data.column(v).name;
      if (!net.contains(name))
        throw std::invalid_argument("data variable '" + name + "' is not in the network");
      if (!data.is_hidden(v)) data_col[net.index_of(name)] = v;
    }
    std::vector<bool> hidden(net.num_vars(), false);
    for (int i = 0; i < net.num_vars(); ++i) {
      if (data_col[i] < 0) {
        hidden[i] = true;
        hidden_net_ix.push_back(i);
        hidden_cards.push_back(net.cardinality(i));
        joint *= net.cardinality(i);
        if (joint > max_hidden_states)
          throw std::runtime_error("joint hidden state space exceeds the cap (" +
                                   std::to_string(max_hidden_states) + ")");
      }
    }
    for (int i = 0; i < net.num_vars(); ++i) {
      FamilyLayout f;
      f.var = i;
      f.child_card = net.cardinality(i);
      bool varies = hidden[i];
      const Cpd& cpd = net.cpd(i);
      for (std::size_t t = 0; t < cpd.parents.size(); ++t) {
        int p = net.index_of(cpd.parents[t]);
        f.member_nets.push_back(p);
        f.member_cols.push_back(data_col[p]);
        f.parent_cards.push_back(cpd.parent_cards[t]);
        f.n_configs *= cpd.parent_cards[t];
        varies = varies || hidden[p];
      }
      f.member_nets.push_back(i);
      f.member_cols.push_back(data_col[i]);
      f.varies = varies;
      fams.push_back(std::move(f));
    }
  }
};

struct EStepOut {
  std::vector<std::vector<double>> counts;  // per family
  double log_likelihood = 0.0;
};

// One pass over the data: expected sufficient statistics and the observed
// log-likelihood under the given parameters.
EStepOut e_step(const BayesianNetwork& net, const Dataset& data, const EStepPlan& plan,
                const std::vector<Cpd>& params, ExecMode mode) {
  const int m = data.num_rows();
  const std::size_t nfam = plan.fams.size();

  // flattened table of log parameters and table offsets per family
  std::vector<std::vector<double>> logp(nfam);
  for (std::size_t f = 0; f < nfam; ++f) {
    const auto& tab = params[plan.fams[f].var].table;
    logp[f].resize(tab.size());
    for (std::size_t i = 0; i < tab.size(); ++i)
      logp[f][i] = tab[i] > 0.0 ? std::log(tab[i]) : kNegInf;
  }

  std::vector<std::size_t> offset(nfam + 1, 0);
  for (std::size_t f = 0; f < nfam; ++f)
    offset[f + 1] = offset[f] + static_cast<std::size_t>(plan.fams[f].n_configs) *
                                    plan.fams[f].child_card;
  const std::size_t total_cells = offset[nfam];

  std::vector<double> flat(total_cells, 0.0);
  double ll = 0.0;

  auto cell_index = [&](const FamilyLayout& f, const std::vector<int>& full) {
    int u = 0;
    for (std::size_t t = 0; t + 1 < f.member_nets.size(); ++t)
      u = u * f.parent_cards[t] + full[f.member_nets[t]];
    return static_cast<std::size_t>(u) * f.child_card + full[f.member_nets.back()];
  };

  if (plan.joint == 1) {
    // complete data, or hidden variables pinned to a single state
    ll = chunked_sum(static_cast<std::size_t>(m), mode, [&](std::size_t b, std::size_t e) {
      double s = 0.0;
      std::vector<int> full(net.num_vars());
      for (std::size_t r = b; r < e; ++r) {
        for (int i = 0; i < net.num_vars(); ++i)
          full[i] = plan.data_col[i] >= 0 ? data.value(static_cast<int>(r), plan.data_col[i]) : 0;
        for (std::size_t f = 0; f < nfam; ++f)
          s += logp[f][cell_index(plan.fams[f], full)];
      }
      return s;
    });
    chunked_accumulate(static_cast<std::size_t>(m), total_cells, mode, flat,
                       [&](std::size_t b, std::size_t e, std::vector<double>& local) {
                         std::vector<int> full(net.num_vars());
                         for (std::size_t r = b; r < e; ++r) {
                           for (int i = 0; i < net.num_vars(); ++i)
                             full[i] = plan.data_col[i] >= 0
                                           ? data.value(static_cast<int>(r), plan.data_col[i])
                                           : 0;
                           for (std::size_t f = 0; f < nfam; ++f)
                             local[offset[f] + cell_index(plan.fams[f], full)] += 1.0;
                         }
                       });
  } else {
    std::vector<double> ll_chunk;
    const std::size_t nchunks = num_chunks(static_cast<std::size_t>(m));
    ll_chunk.assign(nchunks, 0.0);
    std::vector<long> zero_row(nchunks, -1);  // deferred error, never throw inside the loop
    chunked_accumulate(
        static_cast<std::size_t>(m), total_cells, mode, flat,
        [&](std::size_t b, std::size_t e, std::vector<double>& local) {
          std::vector<int> full(net.num_vars());
          std::vector<double> logw(static_cast<std::size_t>(plan.joint));
          std::vector<std::size_t> fixed_cells;
          double chunk_ll = 0.0;
          for (std::size_t r = b; r < e; ++r) {
            for (int i = 0; i < net.num_vars(); ++i)
              full[i] = plan.data_col[i] >= 0 ? data.value(static_cast<int>(r), plan.data_col[i]) : 0;
            // constant part: families untouched by hidden variables
            double fixed_ll = 0.0;
            fixed_cells.clear();
            for (std::size_t f = 0; f < nfam; ++f) {
              if (plan.fams[f].varies) continue;
              std::size_t cell = cell_index(plan.fams[f], full);
              fixed_cells.push_back(offset[f] + cell);
              fixed_ll += logp[f][cell];
            }
            for (long h = 0; h < plan.joint; ++h) {
              long rest = h;
              for (std::size_t t = plan.hidden_net_ix.size(); t-- > 0;) {
                full[plan.hidden_net_ix[t]] = static_cast<int>(rest % plan.hidden_cards[t]);
                rest /= plan.hidden_cards[t];
              }
              double lp = 0.0;
              for (std::size_t f = 0; f < nfam; ++f) {
                if (!plan.fams[f].varies) continue;
                double l = logp[f][cell_index(plan.fams[f], full)];
                if (l == kNegInf) {
                  lp = kNegInf;
                  break;
                }
                lp += l;
              }
              logw[static_cast<std::size_t>(h)] = lp;
            }
            double lse = log_sum_exp(logw);
            if (lse == kNegInf || fixed_ll == kNegInf) {
              if (zero_row[b / kRowChunk] < 0) zero_row[b / kRowChunk] = static_cast<long>(r);
              continue;
            }
            chunk_ll += fixed_ll + lse;
            for (std::size_t c : fixed_cells) local[c] += 1.0;
            for (long h = 0; h < plan.joint; ++h) {
              double w = logw[static_cast<std::size_t>(h)];
              if (w == kNegInf) continue;
              double weight = std::exp(w - lse);
              long rest = h;
              for (std::size_t t = plan.hidden_net_ix.size(); t-- > 0;) {
                full[plan.hidden_net_ix[t]] = static_cast<int>(rest % plan.hidden_cards[t]);
                rest /= plan.hidden_cards[t];
              }
              for (std::size_t f = 0; f < nfam; ++f) {
                if (!plan.fams[f].varies) continue;
                local[offset[f] + cell_index(plan.fams[f], full)] += weight;
              }
            }
          }
          ll_chunk[b / kRowChunk] = chunk_ll;
        });
    for (long z : zero_row)
      if (z >= 0)
        throw std::runtime_error("row " + std::to_string(z) +
                                 " has probability zero under the current parameters");
    for (double v : ll_chunk) ll += v;
  }

  EStepOut out;
  out.log_likelihood = ll;
  out.counts.resize(nfam);
  for (std::size_t f = 0; f < nfam; ++f)
    out.counts[f].assign(flat.begin() + offset[f], flat.begin() + offset[f + 1]);
  return out;
}

std::vector<Cpd> m_step(const BayesianNetwork& net, const EStepPlan& plan,
                        const std::vector<std::vector<double>>& counts, double alpha) {
  std::vector<Cpd> params;
  for (std::size_t f = 0; f < plan.fams.size(); ++f) {
    const Cpd& shape = net.cpd(plan.fams[f].var);
    Cpd cpd = shape;
    const int q = plan.fams[f].n_configs;
    const int r = plan.fams[f].child_card;
    for (int u = 0; u < q; ++u) {
      double norm = 0.0;
      for (int c = 0; c < r; ++c)
        norm += counts[f][static_cast<std::size_t>(u) * r + c] + alpha;
      for (int c = 0; c < r; ++c)
        cpd.table[static_cast<std::size_t>(u) * r + c] =
            (counts[f][static_cast<std::size_t>(u) * r + c] + alpha) / norm;
    }
    params.push_back(std::move(cpd));
  }
  return params;
}

double prior_term(const std::vector<Cpd>& params, double alpha) {
  double t = 0.0;
  for (const auto& cpd : params)
    for (double p : cpd.table) t += alpha * std::log(p);
  return t;
}

std::vector<Cpd> random_params(const BayesianNetwork& net, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::vector<Cpd> params;
  for (int i = 0; i < net.num_vars(); ++i) {
    Cpd cpd = net.cpd(i);
    for (int u = 0; u < cpd.n_configs(); ++u) {
      auto row = dirichlet1_row(eng, cpd.child_card);
      for (int c = 0; c < cpd.child_card; ++c)
        cpd.table[static_cast<std::size_t>(u) * cpd.child_card + c] = row[c];
    }
    params.push_back(std::move(cpd));
  }
  return params;
}

struct RunOut {
  std::vector<Cpd> params;
  std::vector<std::vector<double>> counts;
  double ll = 0.0;
  double objective = 0.0;
  int iters = 0;
  std::vector<double> ll_trace, obj_trace;
};

RunOut run_em_once(const BayesianNetwork& net, const Dataset& data, const EStepPlan& plan,
                   std::vector<Cpd> params, const PriorSpec& prior, const EmConfig& config) {
  RunOut run;
  const double alpha = prior.alpha_cell;
  double prev_obj = 0.0;
  for (int it = 1; it <= config.max_iters; ++it) {
    EStepOut es = e_step(net, data, plan, params, config.mode);
    double obj = es.log_likelihood + prior_term(params, alpha);
    run.ll_trace.push_back(es.log_likelihood);
    run.obj_trace.push_back(obj);
    if (it > 1 && obj < prev_obj - 1e-8)
      throw std::logic_error("EM objective decreased by more than 1e-8");
    run.params = std::move(params);
    run.counts = std::move(es.counts);
    run.ll = es.log_likelihood;
    run.objective = obj;
    run.iters = it;
    if (plan.joint == 1) break;  // complete data: parameters already exact after one M-step
    if (it > 1 && std::abs(obj - prev_obj) < config.ll_tolerance) break;
    prev_obj = obj;
    if (it == config.max_iters) break;
    params = m_step(net, plan, run.counts, alpha);
  }
  return run;
}

}  // namespace

EmResult em_parameters(const BayesianNetwork& net, const Dataset& data, const PriorSpec& prior,
                       const EmConfig& config) {
  config.validate();
  prior.validate();
  EStepPlan plan(net, data, config.max_hidden_states);

  std::vector<RunOut> runs;
  if (config.init == EmInit::warm_start) {
    runs.push_back(run_em_once(net, data, plan, config.warm_params, prior, config));
  } else if (plan.joint == 1) {
    // complete data: a single M-step from the hard counts is exact
    EStepOut hard = e_step(net, data, plan, random_params(net, split_seed(config.seed, 0)),
                           config.mode);
    std::vector<Cpd> params = m_step(net, plan, hard.counts, prior.alpha_cell);
    runs.push_back(run_em_once(net, data, plan, std::move(params), prior, config));
  } else {
    for (int r = 0; r < config.restarts; ++r) {
      runs.push_back(run_em_once(net, data, plan,
                                 random_params(net, split_seed(config.seed, r)), prior, config));
    }
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].ll > runs[best].ll) best = r;

  EmResult result;
  result.params = runs[best].params;
  result.log_likelihood = runs[best].ll;
  result.objective = runs[best].objective;
  result.iters_used = runs[best].iters;
  result.ll_trace = runs[best].ll_trace;
  result.objective_trace = runs[best].obj_trace;
  for (std::size_t r = 0; r < runs.size(); ++r)
    result.restart_summaries.push_back(
        EmRestartSummary{static_cast<int>(r), runs[r].ll, runs[r].objective, runs[r].iters});
  for (std::size_t f = 0; f < plan.fams.size(); ++f) {
    ExpectedStats es;
    const Cpd& cpd = net.cpd(plan.fams[f].var);
    es.child = cpd.child;
    es.parents = cpd.parents;
    es.child_card = cpd.child_card;
    es.parent_cards = cpd.parent_cards;
    // counts are tallied [config][child]; expose them [child][config]
    const int q = plan.fams[f].n_configs;
    const int r = plan.fams[f].child_card;
    es.counts.assign(static_cast<std::size_t>(q) * r, 0.0);
    for (int u = 0; u < q; ++u)
      for (int c = 0; c < r; ++c)
        es.counts[static_cast<std::size_t>(c) * q + u] =
            runs[best].counts[f][static_cast<std::size_t>(u) * r + c];
    result.expected_stats.push_back(std::move(es));
  }
  return result;
}

CsScore cheeseman_stutz_score(const BayesianNetwork& net, const EmResult& em_result,
                              const Dataset& data, const PriorSpec& prior) {
  (void)data;
  if (static_cast<int>(em_result.params.size()) != net.num_vars() ||
      em_result.expected_stats.size() != em_result.params.size())
    throw std::invalid_argument("EM result does not match the network");
  CsScore cs;
  cs.observed_ll = em_result.log_likelihood;
  for (std::size_t f = 0; f < em_result.expected_stats.size(); ++f) {
    const ExpectedStats& es = em_result.expected_stats[f];
    cs.completed_score += family_score_bde(es.counts, es.child_card, es.n_configs(), prior);
    const Cpd& cpd = em_result.params[net.index_of(es.child)];
    const int q = es.n_configs();
    for (int c = 0; c < es.child_card; ++c)
      for (int u = 0; u < q; ++u) {
        double n = es.counts[static_cast<std::size_t>(c) * q + u];
        if (n > 0.0) cs.completed_ll += n * std::log(cpd.prob(u, c));
      }
  }
  cs.value = cs.completed_score - cs.completed_ll + cs.observed_ll;
  return cs;
}

SweepResult cardinality_sweep_em(const BayesianNetwork& net, const Dataset& data,
                                 const std::string& h, int k_min, int k_max,
                                 const PriorSpec& prior, const EmConfig& config) {
  if (k_min < 1) throw std::invalid_argument("k_min must be >= 1");
  if (k_max < k_min) throw std::invalid_argument("k_max must be >= k_min");
  SweepResult sweep;
  for (int k = k_min; k <= k_max; ++k) {
    auto t0 = std::chrono::steady_clock::now();
    BayesianNetwork net_k = resize_cardinality(net, h, k);
    EmResult em = em_parameters(net_k, data, prior, config);
    em.cs_score = cheeseman_stutz_score(net_k, em, data, prior).value;
    auto t1 = std::chrono::steady_clock::now();
    SweepEntry entry;
    entry.k = k;
    entry.cs = em.cs_score;
    entry.log_likelihood = em.log_likelihood;
    entry.iters = em.iters_used;
    entry.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    entry.em = std::move(em);
    sweep.entries.push_back(std::move(entry));
  }
  sweep.best_k = sweep.entries.front().k;
  double best_cs = sweep.entries.front().cs;
  for (const auto& e : sweep.entries) {
    if (e.cs > best_cs) {
      best_cs = e.cs;
      sweep.best_k = e.k;
    }
  }
  return sweep;
}

}  // namespace cardagg
