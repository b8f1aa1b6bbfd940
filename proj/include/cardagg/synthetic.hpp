#ifndef CARDAGG_SYNTHETIC_HPP
#define CARDAGG_SYNTHETIC_HPP

#include <string>
#include <vector>

#include "cardagg/model.hpp"

namespace cardagg {

// Benchmark generator networks used by the experiment harness and the test
// suites. All are reproducible from code; `cardagg make-net` writes them out.

// 6 nodes: a 3-state root H with five binary children, each child a noisy
// copy of one bit of a per-state pattern.
BayesianNetwork make_planted3();

// Four interacting hidden roots with 3, 2, 4 and 3 states, binary observables:
// each hidden variable has private noisy-pattern children and consecutive
// hidden variables co-parent a shared child.
BayesianNetwork make_multihidden4();
std::vector<std::string> multihidden4_hidden();  // h0..h3 in declaration order

// A 4-state hidden parent over five binary children plus two independent
// noise variables; the children form the clique signature once H is removed.
BayesianNetwork make_cliquegen();

// Small cardiovascular-flavored example network (9 nodes, mixed 2/3-state).
BayesianNetwork make_cardio();

BayesianNetwork synthetic_net(const std::string& name);
std::vector<std::string> synthetic_names();

}  // namespace cardagg

#endif
