#include "cardagg/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace cardagg {

std::string NetworkScore::to_json_string() const {
  nlohmann::json j;
  j["total"] = total;
  j["families"] = nlohmann::json::array();
  for (const auto& f : per_family)
    j["families"].push_back({{"child", f.child}, {"parents", f.parents}, {"score", f.value}});
  return j.dump(2) + "\n";
}

double log_gamma(double x) {
#if defined(__GLIBC__) || defined(__APPLE__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

void PriorSpec::validate() const {
  if (!(alpha_cell > 0.0)) throw std::invalid_argument("alpha_cell must be > 0");
  if (!std::isfinite(structure_prior)) throw std::invalid_argument("structure_prior must be finite");
}

double log_sum_exp(const std::vector<double>& xs) {
  double mx = kNegInf;
  for (double x : xs) mx = std::max(mx, x);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs)
    if (x != kNegInf) s += std::exp(x - mx);
  return mx + std::log(s);
}

double family_score_bde(const SufficientStats& stats, const PriorSpec& prior) {
  prior.validate();
  const int q = stats.n_configs();
  const int r = stats.child_card;
  double child_mult_total = 0.0;
  for (double m : stats.child_mult) child_mult_total += m;
  double value = prior.structure_prior;
  for (int u = 0; u < q; ++u) {
    const double pm = stats.parent_config_mult(u);
    const double alpha_u = prior.alpha_cell * pm * child_mult_total;
    std::int64_t n_u = 0;
    for (int c = 0; c < r; ++c) {
      const std::int64_t n = stats.count(c, u);
      n_u += n;
      const double a = prior.alpha_cell * pm * stats.child_mult[c];
      value += log_gamma(static_cast<double>(n) + a) - log_gamma(a);
    }
    value += log_gamma(alpha_u) - log_gamma(static_cast<double>(n_u) + alpha_u);
  }
  return value;
}

double family_score_bde(const std::vector<double>& counts, int child_card, int n_configs,
                        const PriorSpec& prior) {
  prior.validate();
  double value = prior.structure_prior;
  const double a = prior.alpha_cell;
  for (int u = 0; u < n_configs; ++u) {
    double n_u = 0.0;
    for (int c = 0; c < child_card; ++c) {
      const double n = counts[static_cast<std::size_t>(c) * n_configs + u];
      n_u += n;
      value += log_gamma(n + a) - log_gamma(a);
    }
    const double alpha_u = a * child_card;
    value += log_gamma(alpha_u) - log_gamma(n_u + alpha_u);
  }
  return value;
}

NetworkScore network_score(const std::vector<SufficientStats>& families, const PriorSpec& prior) {
  NetworkScore score;
  for (const auto& f : families) {
    double v = family_score_bde(f, prior);
    score.per_family.push_back(FamilyScore{f.child, f.parents, v});
    score.total += v;
  }
  return score;
}

NetworkScore network_score_of_data(const BayesianNetwork& net, const Dataset& data,
                                   const SigmaSet& sigma, const PriorSpec& prior, ExecMode mode) {
  std::vector<SufficientStats> families;
  for (int i = 0; i < net.num_vars(); ++i) {
    std::vector<std::string> parents;
    for (int p : net.dag().parents(i)) parents.push_back(net.var(p).name);
    families.push_back(count_sufficient_stats(data, sigma, net.var(i).name, parents, mode));
  }
  return network_score(families, prior);
}

namespace {

// Per-row exact marginalization helper: variables of `net` that are hidden in
// the row are enumerated jointly; only families touching a hidden variable
// vary across completions.
struct Marginalizer {
  const BayesianNetwork& net;
  std::vector<int> data_col;    // net var -> data column, -1 when absent
  std::vector<int> hidden_vars; // net var indices to marginalize
  std::vector<int> hidden_cards;
  long joint_states = 1;
  std::vector<int> vary_families;    // families containing a hidden var
  std::vector<int> fixed_families;   // all others

  Marginalizer(const BayesianNetwork& n, const Dataset& test, int max_hidden_states) : net(n) {
    data_col.assign(net.num_vars(), -1);
    for (int v = 0; v < test.num_vars(); ++v) {
      const std::string& name = test.column(v).name;
      if (!net.contains(name))
        throw std::invalid_argument("test variable '" + name + "' is not in the network");
      if (!test.is_hidden(v)) data_col[net.index_of(name)] = v;
    }
    std::vector<bool> hidden(net.num_vars(), false);
    for (int i = 0; i < net.num_vars(); ++i) {
      if (data_col[i] < 0) {
        hidden[i] = true;
        hidden_vars.push_back(i);
        hidden_cards.push_back(net.cardinality(i));
        joint_states *= net.cardinality(i);
        if (joint_states > max_hidden_states)
          throw std::runtime_error(
              "joint hidden state space exceeds the cap (" + std::to_string(max_hidden_states) +
              "); reduce the hidden set or raise the cap");
      }
    }
    for (int i = 0; i < net.num_vars(); ++i) {
      bool varies = hidden[i];
      for (int p : net.dag().parents(i)) varies = varies || hidden[p];
      (varies ? vary_families : fixed_families).push_back(i);
    }
  }

  double family_log_prob(int fam, const std::vector<int>& full) const {
    const Cpd& cpd = net.cpd(fam);
    int u = 0;
    for (std::size_t t = 0; t < cpd.parents.size(); ++t)
      u = u * cpd.parent_cards[t] + full[net.index_of(cpd.parents[t])];
    double p = cpd.prob(u, full[fam]);
    return p > 0.0 ? std::log(p) : kNegInf;
  }

  // log P(observed part of row), hidden completions summed out
  double row_log_prob(const Dataset& test, int row, std::vector<int>& full,
                      std::vector<double>& buf) const {
    for (int i = 0; i < net.num_vars(); ++i)
      full[i] = data_col[i] >= 0 ? test.value(row, data_col[i]) : 0;
    double fixed = 0.0;
    for (int fam : fixed_families) {
      double lp = family_log_prob(fam, full);
      if (lp == kNegInf) return kNegInf;
      fixed += lp;
    }
    if (hidden_vars.empty()) {
      double lp = 0.0;
      for (int fam : vary_families) {
        double l = family_log_prob(fam, full);
        if (l == kNegInf) return kNegInf;
        lp += l;
      }
      return fixed + lp;
    }
    buf.assign(static_cast<std::size_t>(joint_states), 0.0);
    for (long h = 0; h < joint_states; ++h) {
      long rest = h;
      for (std::size_t t = hidden_vars.size(); t-- > 0;) {
        full[hidden_vars[t]] = static_cast<int>(rest % hidden_cards[t]);
        rest /= hidden_cards[t];
      }
      double lp = 0.0;
      for (int fam : vary_families) {
        double l = family_log_prob(fam, full);
        if (l == kNegInf) {
          lp = kNegInf;
          break;
        }
        lp += l;
      }
      buf[static_cast<std::size_t>(h)] = lp;
    }
    double lse = log_sum_exp(buf);
    return lse == kNegInf ? kNegInf : fixed + lse;
  }
};

}  // namespace

double log_loss(const BayesianNetwork& net, const Dataset& test, int max_hidden_states,
                ExecMode mode) {
  if (test.num_rows() == 0) throw std::invalid_argument("empty test set");
  Marginalizer marg(net, test, max_hidden_states);
  double total = chunked_sum(
      static_cast<std::size_t>(test.num_rows()), mode, [&](std::size_t b, std::size_t e) {
        std::vector<int> full(net.num_vars());
        std::vector<double> buf;
        double s = 0.0;
        for (std::size_t r = b; r < e; ++r)
          s += marg.row_log_prob(test, static_cast<int>(r), full, buf);
        return s;
      });
  return total / test.num_rows();
}

}  // namespace cardagg
