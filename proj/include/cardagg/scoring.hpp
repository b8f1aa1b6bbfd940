#ifndef CARDAGG_SCORING_HPP
#define CARDAGG_SCORING_HPP

#include <string>
#include <vector>

#include "cardagg/data.hpp"
#include "cardagg/model.hpp"

namespace cardagg {

// Dirichlet prior with a fixed pseudo-count per table cell, independent of any
// variable's cardinality. Under state merges the merged cell's hyperparameter
// is the sum of the merged cells' (tracked by SufficientStats::*_mult), which
// is what keeps merge deltas local to the two states involved. This is not
// BDeu: a cardinality-dependent alpha would reshape every cell on a merge.
struct PriorSpec {
  double alpha_cell = 1.0;
  double structure_prior = 0.0;  // per-family log-prior term

  void validate() const;
};

struct FamilyScore {
  std::string child;
  std::vector<std::string> parents;
  double value = 0.0;
};

// Closed-form complete-data log marginal likelihood of one family:
//   structure_prior + sum_u [ lgamma(a_u) - lgamma(N[u]+a_u)
//                             + sum_c ( lgamma(N[c,u]+a_cu) - lgamma(a_cu) ) ]
// with a_cu = alpha_cell * state multiplicities and a_u = sum_c a_cu.
double family_score_bde(const SufficientStats& stats, const PriorSpec& prior);

// Fractional-count variant used for expected sufficient statistics; every
// cell hyperparameter is alpha_cell.
double family_score_bde(const std::vector<double>& counts, int child_card, int n_configs,
                        const PriorSpec& prior);

struct NetworkScore {
  double total = 0.0;
  std::vector<FamilyScore> per_family;

  std::string to_json_string() const;  // per-family breakdown for trace files
};

// Decomposable total: one statistics table per family.
NetworkScore network_score(const std::vector<SufficientStats>& families, const PriorSpec& prior);

// Count every family of `net` from the completed data and score it.
NetworkScore network_score_of_data(const BayesianNetwork& net, const Dataset& data,
                                   const SigmaSet& sigma, const PriorSpec& prior,
                                   ExecMode mode = ExecMode::parallel);

// Mean per-row log-probability of the observed cells, marginalizing hidden
// variables (and net variables absent from the data) by exact summation.
// Throws if the joint hidden state space of a row exceeds max_hidden_states.
double log_loss(const BayesianNetwork& net, const Dataset& test,
                int max_hidden_states = 10000, ExecMode mode = ExecMode::parallel);

// log(sum exp(xs)) with -inf entries ignored; returns -inf when all are.
double log_sum_exp(const std::vector<double>& xs);

// Thread-safe positive-argument log-gamma.
double log_gamma(double x);

}  // namespace cardagg

#endif
