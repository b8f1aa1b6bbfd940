#ifndef CARDAGG_DATA_HPP
#define CARDAGG_DATA_HPP

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cardagg/model.hpp"
#include "cardagg/parallel.hpp"

namespace cardagg {

// Sentinel for hidden cells; never a valid state index.
inline constexpr int kHiddenCell = -1;

struct DataColumn {
  std::string name;
  std::vector<std::string> state_labels;  // empty only for hidden columns of unknown arity
  int cardinality() const { return static_cast<int>(state_labels.size()); }
};

// Immutable set of M rows over named discrete columns. A column is either
// observed in every row or hidden in every row.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<DataColumn> columns, std::vector<int> cells,
          std::set<std::string> hidden_vars);

  int num_rows() const { return rows_; }
  int num_vars() const { return static_cast<int>(cols_.size()); }
  const std::vector<DataColumn>& columns() const { return cols_; }
  const DataColumn& column(int i) const { return cols_[i]; }
  int var_index(const std::string& name) const;  // throws on unknown name
  bool has_var(const std::string& name) const;
  bool is_hidden(int var) const { return hidden_flags_[var]; }
  bool is_hidden(const std::string& name) const { return hidden_flags_[var_index(name)]; }
  const std::set<std::string>& hidden_vars() const { return hidden_; }
  int value(int row, int var) const { return cells_[static_cast<std::size_t>(row) * cols_.size() + var]; }

  Dataset with_hidden_column(const std::string& name) const;  // append an all-hidden column

 private:
  std::vector<DataColumn> cols_;
  std::vector<int> cells_;  // row-major
  std::set<std::string> hidden_;
  std::vector<bool> hidden_flags_;
  int rows_ = 0;
};

// Hard assignment of one hidden variable across all rows.
struct AssignmentMap {
  std::string variable;
  std::vector<int> assignment;  // size M, entries in [0, num_states)
  int num_states = 0;

  void validate(int num_rows) const;
};

using SigmaSet = std::map<std::string, AssignmentMap>;

// Count table for one family: counts[child_state * n_configs + config].
// state_mult tracks, per family member and state, how many original states
// were folded into it by merges; the scoring prior scales with it. Fresh
// counts have every multiplicity equal to 1.
struct SufficientStats {
  std::string child;
  std::vector<std::string> parents;
  int child_card = 0;
  std::vector<int> parent_cards;
  std::vector<std::int64_t> counts;
  std::vector<double> child_mult;
  std::vector<std::vector<double>> parent_mult;

  int n_configs() const { return num_configs(parent_cards); }
  std::int64_t count(int c, int u) const {
    return counts[static_cast<std::size_t>(c) * n_configs() + u];
  }
  std::int64_t total() const;
  double parent_config_mult(int u) const;
};

// Forward sampling in topological order; deterministic for a given seed.
Dataset ancestral_sample(const BayesianNetwork& net, int m, std::uint64_t seed);

// Replace the named columns with the hidden marker in every row.
Dataset hide_variables(const Dataset& data, const std::set<std::string>& vars);

// Inverse of hide_variables given the true assignment columns.
Dataset complete_with(const Dataset& data, const Dataset& truth,
                      const std::set<std::string>& vars);

// Tally the family (child | parents) over all rows. Hidden family members
// read their state from sigma; an absent entry is an error.
SufficientStats count_sufficient_stats(const Dataset& data, const SigmaSet& sigma,
                                       const std::string& child,
                                       const std::vector<std::string>& parents,
                                       ExecMode mode = ExecMode::parallel);

struct MbConfigs {
  std::vector<std::string> vars;
  std::vector<std::vector<int>> configs;      // distinct joint states, first-occurrence order
  std::vector<std::vector<int>> rows;         // row indices per config
  std::vector<int> row_to_config;             // size M
};

// Distinct joint configurations of `mb` observed in the data, ordered by
// first occurrence.
MbConfigs distinct_mb_configs(const Dataset& data, const SigmaSet& sigma,
                              const std::vector<std::string>& mb);

// Fold states i and j of `var` (child or a parent of the family) into one.
// The merged state takes index min(i, j); higher states are re-packed down.
// Counts and multiplicities add; the grand total is unchanged.
SufficientStats merge_stats_states(const SufficientStats& stats, const std::string& var,
                                   int i, int j);

// CSV: header row of variable names, cells are state labels, hidden cells "?".
void csv_write(const Dataset& data, const std::string& path);
void csv_write_with_sigma(const Dataset& data, const SigmaSet& sigma, const std::string& path);
// Column labels are inferred from the file (sorted lexicographically).
Dataset csv_read(const std::string& path);
// Labels validated against the network's variables; unknown label is an error
// naming the row.
Dataset csv_read(const std::string& path, const BayesianNetwork& schema);

}  // namespace cardagg

#endif
