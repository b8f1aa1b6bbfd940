#ifndef CARDAGG_EM_HPP
#define CARDAGG_EM_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "cardagg/data.hpp"
#include "cardagg/model.hpp"
#include "cardagg/scoring.hpp"

namespace cardagg {

enum class EmInit { random, warm_start };

struct EmConfig {
  int max_iters = 200;
  double ll_tolerance = 1e-4;  // convergence threshold on the objective change
  int restarts = 1;
  std::uint64_t seed = 0;
  EmInit init = EmInit::random;
  std::vector<Cpd> warm_params;  // used when init == warm_start (single run)
  int max_hidden_states = 10000;
  ExecMode mode = ExecMode::parallel;

  void validate() const;
};

// Fractional family counts from an E-step.
struct ExpectedStats {
  std::string child;
  std::vector<std::string> parents;
  int child_card = 0;
  std::vector<int> parent_cards;
  std::vector<double> counts;  // [child_state * n_configs + config]

  int n_configs() const { return num_configs(parent_cards); }
};

struct EmRestartSummary {
  int restart = 0;
  double log_likelihood = 0.0;
  double objective = 0.0;
  int iters = 0;
};

struct EmResult {
  std::vector<Cpd> params;
  double log_likelihood = 0.0;  // observed-data log-likelihood under params
  double objective = 0.0;       // log-likelihood + alpha * sum(log theta); the
                                // quantity EM provably does not decrease
  int iters_used = 0;
  std::vector<EmRestartSummary> restart_summaries;
  std::vector<double> ll_trace;         // best restart, per iteration
  std::vector<double> objective_trace;  // best restart, per iteration
  std::vector<ExpectedStats> expected_stats;  // consistent with params
  double cs_score = 0.0;  // filled by cheeseman_stutz_score via the sweep/CLI
};

struct PosteriorHidden {
  std::vector<std::string> hidden_vars;
  std::vector<int> cards;
  std::vector<double> probs;  // joint states, mixed radix, last variable fastest
};

// Exact posterior over the joint states of the hidden entries of `row`
// (entries equal to kHiddenCell). Throws when the joint space exceeds the cap
// or the observed part has probability zero.
PosteriorHidden posterior_hidden(const BayesianNetwork& net, const std::vector<int>& row,
                                 int max_hidden_states = 10000);

// Parameter EM with exact inference over the hidden variables. Best restart
// by final log-likelihood; deterministic for a given seed. The per-iteration
// objective is asserted non-decreasing within 1e-8 on every run.
EmResult em_parameters(const BayesianNetwork& net, const Dataset& data, const PriorSpec& prior,
                       const EmConfig& config);

struct CsScore {
  double value = 0.0;
  double completed_score = 0.0;  // complete-data score of the expected statistics
  double completed_ll = 0.0;     // log-likelihood of the expected statistics under params
  double observed_ll = 0.0;      // observed-data log-likelihood under params
};

// Cheeseman-Stutz: completed-data marginal score corrected by the likelihood
// ratio, value = completed_score - completed_ll + observed_ll.
CsScore cheeseman_stutz_score(const BayesianNetwork& net, const EmResult& em_result,
                              const Dataset& data, const PriorSpec& prior);

struct SweepEntry {
  int k = 0;
  double cs = 0.0;
  double log_likelihood = 0.0;
  int iters = 0;
  double wall_ms = 0.0;
  EmResult em;
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  int best_k = 0;  // argmax CS, ties to the smaller k
};

// Exhaustive baseline: for each cardinality k of h, fit by EM from `restarts`
// random starts and score with Cheeseman-Stutz.
SweepResult cardinality_sweep_em(const BayesianNetwork& net, const Dataset& data,
                                 const std::string& h, int k_min, int k_max,
                                 const PriorSpec& prior, const EmConfig& config);

}  // namespace cardagg

#endif
