#ifndef CARDAGG_AGGLOMERATE_HPP
#define CARDAGG_AGGLOMERATE_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cardagg/data.hpp"
#include "cardagg/model.hpp"
#include "cardagg/scoring.hpp"

namespace cardagg {

struct AggConfig {
  // 0 = unlimited. When the number of distinct blanket configurations exceeds
  // the cap, the rarest configurations are pre-merged into the kept
  // configuration agreeing with them on the most blanket values.
  int max_initial_states = 0;
  double score_tol = 1e-9;  // "improvement" comparisons and per-k tie breaks
  ExecMode mode = ExecMode::parallel;
};

struct MergeCandidate {
  int i = 0, j = 0;  // live state indices, i < j
  double delta = 0.0;
};

struct MergeEvent {
  int step = 0;
  int leaf_i = 0, leaf_j = 0;  // smallest original leaf in each merged state
  double delta = 0.0;
  double score_after = 0.0;
};

// Record of one agglomeration run: the initial states (one per distinct
// Markov-blanket configuration), every merge in order, and the full-network
// score at every cardinality from initial_k down to 1.
struct MergeTrace {
  std::string hidden;
  std::vector<std::string> mb_vars;
  std::vector<std::vector<int>> leaf_configs;   // per leaf, states of mb_vars
  std::vector<std::string> leaf_labels;
  std::vector<std::int64_t> leaf_rows;
  std::vector<double> leaf_mult;                // >1 only when the cap pre-merged
  std::vector<MergeEvent> events;
  std::vector<double> scores_by_k;              // [k0 - k] -> score at k
  std::vector<std::vector<int>> leaf_state_by_k;  // [k0 - k][leaf] -> dense state
  std::vector<int> initial_assignment;          // row -> leaf
  int initial_k = 0;
  bool cap_applied = false;
  int pre_merged = 0;
  std::int64_t delta_evals = 0;

  double score_at(int k) const { return scores_by_k.at(initial_k - k); }
  std::string to_json_string(int chosen_k) const;
  std::string to_dot(int chosen_k) const;  // agglomeration tree, chosen frontier as diamonds
};

struct CardinalityResult {
  int chosen_k = 0;
  AssignmentMap sigma;
  double score_at_k = 0.0;
  std::vector<Cpd> warm_start_params;  // one per network variable
};

// One hidden state per distinct observed configuration of h's Markov blanket.
AssignmentMap init_states_from_mb(const BayesianNetwork& net, const Dataset& data,
                                  const SigmaSet& sigma_others, const std::string& h,
                                  const AggConfig& config = {});

// Score change of merging states i and j of `h`, computed from the affected
// cells of the families containing h only. Equals the full network-score
// difference exactly: the per-cell prior makes the delta local to i and j.
double delta_score_merge(const std::vector<SufficientStats>& families, const std::string& h,
                         const PriorSpec& prior, int i, int j);

// Greedy agglomeration: start from the blanket-configuration states, always
// apply the best-delta merge (ties to the smallest original leaf pair) down
// to one state, then pick the cardinality with the highest score (ties to the
// smallest k).
std::pair<MergeTrace, CardinalityResult> agglomerate(const BayesianNetwork& net,
                                                     const Dataset& data,
                                                     const SigmaSet& sigma_others,
                                                     const std::string& h,
                                                     const PriorSpec& prior,
                                                     const AggConfig& config = {});

// (k, score) pairs from initial_k down to 1.
std::vector<std::pair<int, double>> score_curve(const MergeTrace& trace);

// Hard assignment at any visited cardinality, replayed from the trace.
AssignmentMap sigma_at_k(const MergeTrace& trace, int k);

// Completed-data MAP parameters for the network at cardinality k of the
// traced hidden variable (one Cpd per variable, h-axis prior multiplicities
// folded in).
std::vector<Cpd> warm_params_at_k(const BayesianNetwork& net, const Dataset& data,
                                  const SigmaSet& sigma_others, const MergeTrace& trace, int k,
                                  const PriorSpec& prior, ExecMode mode = ExecMode::parallel);

// Network with h resized to the chosen cardinality (and any other hidden
// variable resized to its assignment's state count), parameterized by the
// warm-start CPDs.
BayesianNetwork network_with_result(const BayesianNetwork& net, const std::string& h,
                                    const CardinalityResult& result,
                                    const SigmaSet& sigma_others);

}  // namespace cardagg

#endif
