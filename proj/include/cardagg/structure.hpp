#ifndef CARDAGG_STRUCTURE_HPP
#define CARDAGG_STRUCTURE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "cardagg/agglomerate.hpp"
#include "cardagg/data.hpp"
#include "cardagg/em.hpp"
#include "cardagg/model.hpp"
#include "cardagg/scoring.hpp"

namespace cardagg {

struct HillClimbConfig {
  int max_parents = 4;
  double score_tol = 1e-9;
  int max_moves = 10000;
  ExecMode mode = ExecMode::parallel;
};

struct LearnedStructure {
  Dag dag;
  double score = 0.0;
  std::vector<double> score_trace;  // after each accepted move
};

// Greedy hill-climbing on complete data from the empty graph: best positive
// single-edge add/delete/reverse by cached family-score deltas, deterministic
// lexicographic tie-break on the move encoding.
LearnedStructure greedy_hill_climb(const Dataset& data, const PriorSpec& prior,
                                   const HillClimbConfig& config = {});

struct SemiClique {
  std::vector<std::string> members;  // sorted
  double density = 0.0;              // present undirected edges / possible
};

struct SemiCliqueConfig {
  int min_size = 4;
  int max_size = 10;
};

// Maximal sets on the moralized undirected skeleton in which every member is
// adjacent to at least ceil(|S|/2) of the others, found by seeded greedy
// expansion; ordered by density, then size.
std::vector<SemiClique> find_semi_cliques(const Dag& dag, const SemiCliqueConfig& config = {});

struct HiddenProposal {
  BayesianNetwork base_net;
  BayesianNetwork modified_net;  // new hidden parent over the clique, intra-edges removed
  SemiClique clique;
  std::string hidden_name;
};

HiddenProposal propose_hidden(const BayesianNetwork& net, const SemiClique& clique);

struct PipelineConfig {
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  SemiCliqueConfig clique;
  HillClimbConfig hill_climb;
  AggConfig agg;
  int em_max_iters = 200;
  double em_tolerance = 1e-4;
  int forced_k = 0;  // 0 = use the agglomeration choice; otherwise pin k
  int max_proposals = 8;
  PriorSpec prior;
};

struct ProposalReport {
  SemiClique clique;
  std::string hidden_name;
  int chosen_k = 0;
  double base_cs = 0.0;
  double hidden_cs = 0.0;
  double base_log_loss = 0.0;
  double hidden_log_loss = 0.0;
  bool accepted = false;  // on the CS score
  BayesianNetwork tuned_net;
};

struct PipelineReport {
  Dag base_dag;
  double base_score = 0.0;
  double base_log_loss = 0.0;
  std::vector<ProposalReport> proposals;

  std::string to_json_string() const;
};

// Learn a base network, then for every semi-clique: propose a hidden parent,
// set its cardinality by agglomeration, fine-tune parameters by warm-started
// EM, and compare Cheeseman-Stutz and held-out log-loss against the base.
PipelineReport find_hidden_pipeline(const Dataset& data, const PipelineConfig& config);

// Deterministic row split used by the pipeline (Fisher-Yates on row indices).
std::pair<Dataset, Dataset> split_rows(const Dataset& data, double test_fraction,
                                       std::uint64_t seed);

}  // namespace cardagg

#endif
