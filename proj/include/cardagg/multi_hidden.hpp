#ifndef CARDAGG_MULTI_HIDDEN_HPP
#define CARDAGG_MULTI_HIDDEN_HPP

#include <map>
#include <set>
#include <string>
#include <vector>

#include "cardagg/agglomerate.hpp"

namespace cardagg {

struct HiddenPartition {
  std::vector<std::string> decoupled;               // blanket holds no other hidden variable
  std::vector<std::vector<std::string>> groups;     // connected components of blanket adjacency
};

// Hidden variables whose Markov blanket is fully observed can be learned one
// at a time; the rest are grouped by mutual blanket membership.
HiddenPartition partition_hidden(const BayesianNetwork& net,
                                 const std::vector<std::string>& hidden);

struct RoundRecord {
  int round = 0;
  std::string variable;
  int proposed_k = 0;
  bool accepted = false;
  double score_before = 0.0;
  double score_after = 0.0;
};

struct RoundRobinConfig {
  AggConfig agg;
  double score_tol = 1e-9;
  int max_rounds = 1000;
};

struct RoundRobinResult {
  SigmaSet sigmas;
  std::map<std::string, int> cardinalities;
  std::vector<RoundRecord> round_log;
  double final_score = 0.0;
  int rounds = 0;

  std::string to_json_string() const;
};

// Round-robin agglomeration over several hidden variables: every variable
// starts at one state, variables are revisited in declaration order, a
// proposal is kept only when the total completed-data score improves, and a
// variable is re-examined only after a blanket member changed.
RoundRobinResult round_robin_agglomerate(const BayesianNetwork& net, const Dataset& data,
                                         const std::vector<std::string>& hidden,
                                         const PriorSpec& prior,
                                         const RoundRobinConfig& config = {});

// Network with every hidden variable resized to its final cardinality and MAP
// parameters from the completed data.
BayesianNetwork network_from_round_robin(const BayesianNetwork& net, const Dataset& data,
                                         const RoundRobinResult& result, const PriorSpec& prior,
                                         ExecMode mode = ExecMode::parallel);

}  // namespace cardagg

#endif
