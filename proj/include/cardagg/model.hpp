#ifndef CARDAGG_MODEL_HPP
#define CARDAGG_MODEL_HPP

#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace cardagg {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Parent-configuration index: mixed radix over the ordered parent list, the
// LAST parent varying fastest. This order is shared by CPDs, sufficient
// statistics and the file formats; never reorder it locally.
inline int config_index(const std::vector<int>& states, const std::vector<int>& cards) {
  int idx = 0;
  for (std::size_t t = 0; t < cards.size(); ++t) idx = idx * cards[t] + states[t];
  return idx;
}

inline std::vector<int> config_unindex(int idx, const std::vector<int>& cards) {
  std::vector<int> states(cards.size());
  for (std::size_t t = cards.size(); t-- > 0;) {
    states[t] = idx % cards[t];
    idx /= cards[t];
  }
  return states;
}

inline int num_configs(const std::vector<int>& cards) {
  int q = 1;
  for (int c : cards) q *= c;
  return q;
}

struct Variable {
  std::string name;
  std::vector<std::string> states;  // ordered labels, size == cardinality

  int cardinality() const { return static_cast<int>(states.size()); }
  void validate() const;  // cardinality >= 1, labels unique and CSV-safe
};

// Immutable DAG over named nodes. Construction validates that every edge
// endpoint is declared and that a topological order exists.
class Dag {
 public:
  Dag() = default;
  Dag(std::vector<std::string> nodes,
      std::vector<std::pair<std::string, std::string>> edges);

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::string& name(int v) const { return nodes_[v]; }
  int index_of(const std::string& name) const;  // throws on unknown name
  bool contains(const std::string& name) const;

  const std::vector<int>& parents(int v) const { return parents_[v]; }
  const std::vector<int>& children(int v) const { return children_[v]; }
  bool has_edge(int parent, int child) const;
  std::vector<std::pair<std::string, std::string>> edges() const;
  const std::vector<int>& topological_order() const { return topo_; }

 private:
  std::vector<std::string> nodes_;
  std::unordered_map<std::string, int> index_;
  std::vector<std::vector<int>> parents_;   // sorted by node index
  std::vector<std::vector<int>> children_;  // sorted by node index
  std::vector<int> topo_;
};

// Conditional distribution of `child` given the ordered `parents`.
// table[config * child_card + c] = P(child = c | parents = config), rows
// (one per parent configuration) sum to 1 within 1e-9.
struct Cpd {
  std::string child;
  std::vector<std::string> parents;
  int child_card = 0;
  std::vector<int> parent_cards;
  std::vector<double> table;

  int n_configs() const { return num_configs(parent_cards); }
  double prob(int config, int c) const { return table[static_cast<std::size_t>(config) * child_card + c]; }
  void validate() const;
  static Cpd uniform(const std::string& child, int child_card,
                     const std::vector<std::string>& parents,
                     const std::vector<int>& parent_cards);
};

class BayesianNetwork {
 public:
  BayesianNetwork() = default;
  // Validates: one CPD per node, CPD parent lists match the DAG parent sets,
  // cardinalities agree, rows normalized.
  BayesianNetwork(std::vector<Variable> variables, Dag dag, std::vector<Cpd> cpds);

  int num_vars() const { return static_cast<int>(vars_.size()); }
  const std::vector<Variable>& variables() const { return vars_; }
  const Variable& var(int i) const { return vars_[i]; }
  int index_of(const std::string& name) const { return dag_.index_of(name); }
  bool contains(const std::string& name) const { return dag_.contains(name); }
  int cardinality(int i) const { return vars_[i].cardinality(); }
  const Dag& dag() const { return dag_; }
  const Cpd& cpd(int i) const { return cpds_[i]; }

  // Parents, children and spouses of v, excluding v, as sorted indices.
  std::vector<int> markov_blanket(int v) const;
  std::set<std::string> markov_blanket(const std::string& name) const;

  // Full assignment: state index per variable, in variable order. Entries < 0
  // are reported as missing. Returns -inf if any factor is zero.
  double joint_log_prob(const std::vector<int>& assignment) const;

  // True iff the Markov blanket of h contains no other member of `hidden`
  // (blanket-of-observables sufficient condition for learning h on its own).
  bool is_decoupled_hidden(const std::string& h, const std::set<std::string>& hidden) const;

  std::string to_json_string() const;
  static BayesianNetwork from_json_string(const std::string& text);
  void save(const std::string& path) const;
  static BayesianNetwork load(const std::string& path);

 private:
  std::vector<Variable> vars_;
  Dag dag_;
  std::vector<Cpd> cpds_;  // aligned with vars_
};

// Same DAG with variable h resized to `card` states (labels s0..s{card-1}).
// The CPD of h and of its children become uniform placeholders.
BayesianNetwork resize_cardinality(const BayesianNetwork& net, const std::string& h, int card);

// Replace the CPD tables of `net` (structure unchanged).
BayesianNetwork with_params(const BayesianNetwork& net, const std::vector<Cpd>& cpds);

}  // namespace cardagg

#endif
