#include "cardagg/data.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "cardagg/rng.hpp"

namespace cardagg {

Dataset::Dataset(std::vector<DataColumn> columns, std::vector<int> cells,
                 std::set<std::string> hidden_vars)
    : cols_(std::move(columns)), cells_(std::move(cells)), hidden_(std::move(hidden_vars)) {
  if (cols_.empty()) throw std::invalid_argument("dataset needs at least one column");
  if (cells_.size() % cols_.size() != 0)
    throw std::invalid_argument("cell count is not a multiple of the column count");
  rows_ = static_cast<int>(cells_.size() / cols_.size());
  hidden_flags_.assign(cols_.size(), false);
  std::set<std::string> names;
  for (std::size_t i = 0; i < cols_.size(); ++i) {
    if (!names.insert(cols_[i].name).second)
      throw std::invalid_argument("duplicate column '" + cols_[i].name + "'");
    hidden_flags_[i] = hidden_.count(cols_[i].name) != 0;
  }
  for (const auto& h : hidden_)
    if (!names.count(h)) throw std::invalid_argument("hidden variable '" + h + "' is not a column");
  for (int r = 0; r < rows_; ++r) {
    for (int v = 0; v < num_vars(); ++v) {
      int x = value(r, v);
      if (hidden_flags_[v]) {
        if (x != kHiddenCell)
          throw std::invalid_argument("hidden column '" + cols_[v].name +
                                      "' has an observed cell in row " + std::to_string(r));
      } else {
        if (x == kHiddenCell)
          throw std::invalid_argument("observed column '" + cols_[v].name +
                                      "' has a hidden cell in row " + std::to_string(r));
        if (x < 0 || x >= cols_[v].cardinality())
          throw std::invalid_argument("state index out of range in column '" + cols_[v].name +
                                      "', row " + std::to_string(r));
      }
    }
  }
}

int Dataset::var_index(const std::string& name) const {
  for (int i = 0; i < num_vars(); ++i)
    if (cols_[i].name == name) return i;
  throw std::invalid_argument("unknown variable '" + name + "'");
}

bool Dataset::has_var(const std::string& name) const {
  for (const auto& c : cols_)
    if (c.name == name) return true;
  return false;
}

Dataset Dataset::with_hidden_column(const std::string& name) const {
  if (has_var(name)) throw std::invalid_argument("column '" + name + "' already exists");
  std::vector<DataColumn> cols = cols_;
  cols.push_back(DataColumn{name, {}});
  std::vector<int> cells;
  cells.reserve(static_cast<std::size_t>(rows_) * cols.size());
  for (int r = 0; r < rows_; ++r) {
    for (int v = 0; v < num_vars(); ++v) cells.push_back(value(r, v));
    cells.push_back(kHiddenCell);
  }
  std::set<std::string> hidden = hidden_;
  hidden.insert(name);
  return Dataset(std::move(cols), std::move(cells), std::move(hidden));
}

void AssignmentMap::validate(int num_rows) const {
  if (static_cast<int>(assignment.size()) != num_rows)
    throw std::invalid_argument("assignment for '" + variable + "' has wrong length");
  if (num_states < 1) throw std::invalid_argument("assignment for '" + variable + "' has no states");
  for (int a : assignment)
    if (a < 0 || a >= num_states)
      throw std::invalid_argument("assignment for '" + variable + "' out of range");
}

std::int64_t SufficientStats::total() const {
  std::int64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

double SufficientStats::parent_config_mult(int u) const {
  double m = 1.0;
  std::vector<int> states = config_unindex(u, parent_cards);
  for (std::size_t t = 0; t < states.size(); ++t) m *= parent_mult[t][states[t]];
  return m;
}

Dataset ancestral_sample(const BayesianNetwork& net, int m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("row count must be >= 1");
  std::mt19937_64 eng(seed);
  const int n = net.num_vars();
  std::vector<DataColumn> cols(n);
  for (int i = 0; i < n; ++i) cols[i] = DataColumn{net.var(i).name, net.var(i).states};
  std::vector<int> cells(static_cast<std::size_t>(m) * n);
  std::vector<int> row(n);
  std::vector<int> pstates;
  for (int r = 0; r < m; ++r) {
    for (int v : net.dag().topological_order()) {
      const Cpd& cpd = net.cpd(v);
      pstates.clear();
      for (const auto& p : cpd.parents) pstates.push_back(row[net.index_of(p)]);
      int u = config_index(pstates, cpd.parent_cards);
      row[v] = draw_discrete(eng, cpd.table.data() + static_cast<std::size_t>(u) * cpd.child_card,
                             cpd.child_card);
    }
    for (int v = 0; v < n; ++v) cells[static_cast<std::size_t>(r) * n + v] = row[v];
  }
  return Dataset(std::move(cols), std::move(cells), {});
}

Dataset hide_variables(const Dataset& data, const std::set<std::string>& vars) {
  std::vector<int> idx;
  for (const auto& v : vars) idx.push_back(data.var_index(v));
  std::vector<int> cells;
  cells.reserve(static_cast<std::size_t>(data.num_rows()) * data.num_vars());
  std::vector<bool> hide(data.num_vars(), false);
  for (int i : idx) hide[i] = true;
  for (int r = 0; r < data.num_rows(); ++r)
    for (int v = 0; v < data.num_vars(); ++v)
      cells.push_back(hide[v] ? kHiddenCell : data.value(r, v));
  std::set<std::string> hidden = data.hidden_vars();
  hidden.insert(vars.begin(), vars.end());
  return Dataset(data.columns(), std::move(cells), std::move(hidden));
}

Dataset complete_with(const Dataset& data, const Dataset& truth,
                      const std::set<std::string>& vars) {
  if (truth.num_rows() != data.num_rows())
    throw std::invalid_argument("completion source has a different row count");
  std::vector<bool> fill(data.num_vars(), false);
  for (const auto& v : vars) fill[data.var_index(v)] = true;
  std::vector<int> cells;
  cells.reserve(static_cast<std::size_t>(data.num_rows()) * data.num_vars());
  for (int r = 0; r < data.num_rows(); ++r)
    for (int v = 0; v < data.num_vars(); ++v)
      cells.push_back(fill[v] ? truth.value(r, truth.var_index(data.column(v).name))
                              : data.value(r, v));
  std::set<std::string> hidden = data.hidden_vars();
  for (const auto& v : vars) hidden.erase(v);
  return Dataset(data.columns(), std::move(cells), std::move(hidden));
}

namespace {

// Resolves a family member to either a data column or a sigma entry and its
// working cardinality.
struct MemberSource {
  int col = -1;                  // data column when observed
  const AssignmentMap* sigma = nullptr;  // assignment when hidden
  int card = 0;
};

MemberSource resolve_member(const Dataset& data, const SigmaSet& sigma, const std::string& name) {
  MemberSource src;
  int col = data.var_index(name);
  if (data.is_hidden(col)) {
    auto it = sigma.find(name);
    if (it == sigma.end())
      throw std::invalid_argument("hidden family member '" + name + "' has no assignment map");
    it->second.validate(data.num_rows());
    src.sigma = &it->second;
    src.card = it->second.num_states;
  } else {
    src.col = col;
    src.card = data.column(col).cardinality();
  }
  return src;
}

inline int member_state(const MemberSource& src, const Dataset& data, int row) {
  return src.sigma ? src.sigma->assignment[row] : data.value(row, src.col);
}

}  // namespace

SufficientStats count_sufficient_stats(const Dataset& data, const SigmaSet& sigma,
                                       const std::string& child,
                                       const std::vector<std::string>& parents,
                                       ExecMode mode) {
  SufficientStats stats;
  stats.child = child;
  stats.parents = parents;
  MemberSource child_src = resolve_member(data, sigma, child);
  stats.child_card = child_src.card;
  std::vector<MemberSource> parent_src;
  for (const auto& p : parents) {
    parent_src.push_back(resolve_member(data, sigma, p));
    stats.parent_cards.push_back(parent_src.back().card);
  }
  const int q = stats.n_configs();
  stats.counts.assign(static_cast<std::size_t>(stats.child_card) * q, 0);
  stats.child_mult.assign(stats.child_card, 1.0);
  for (int c : stats.parent_cards) stats.parent_mult.emplace_back(c, 1.0);

  const std::size_t m = static_cast<std::size_t>(data.num_rows());
  chunked_count(m, stats.counts.size(), mode, stats.counts,
                [&](std::size_t b, std::size_t e, std::vector<std::int64_t>& local) {
                  std::vector<int> pstates(parent_src.size());
                  for (std::size_t r = b; r < e; ++r) {
                    int row = static_cast<int>(r);
                    for (std::size_t t = 0; t < parent_src.size(); ++t)
                      pstates[t] = member_state(parent_src[t], data, row);
                    int u = config_index(pstates, stats.parent_cards);
                    int c = member_state(child_src, data, row);
                    ++local[static_cast<std::size_t>(c) * q + u];
                  }
                });
  return stats;
}

MbConfigs distinct_mb_configs(const Dataset& data, const SigmaSet& sigma,
                              const std::vector<std::string>& mb) {
  MbConfigs out;
  out.vars = mb;
  std::vector<MemberSource> src;
  for (const auto& v : mb) src.push_back(resolve_member(data, sigma, v));
  std::unordered_map<std::string, int> seen;
  out.row_to_config.resize(data.num_rows());
  std::vector<int> states(mb.size());
  std::string key;
  for (int r = 0; r < data.num_rows(); ++r) {
    key.clear();
    for (std::size_t t = 0; t < src.size(); ++t) {
      states[t] = member_state(src[t], data, r);
      key += std::to_string(states[t]);
      key += ',';
    }
    auto [it, inserted] = seen.emplace(key, static_cast<int>(out.configs.size()));
    if (inserted) {
      out.configs.push_back(states);
      out.rows.emplace_back();
    }
    out.rows[it->second].push_back(r);
    out.row_to_config[r] = it->second;
  }
  return out;
}

namespace {

int find_family_var(const SufficientStats& stats, const std::string& var) {
  // returns -1 for the child, else the parent position
  if (stats.child == var) return -1;
  for (std::size_t t = 0; t < stats.parents.size(); ++t)
    if (stats.parents[t] == var) return static_cast<int>(t);
  throw std::invalid_argument("'" + var + "' is not a member of family of '" + stats.child + "'");
}

}  // namespace

SufficientStats merge_stats_states(const SufficientStats& stats, const std::string& var,
                                   int i, int j) {
  if (i == j) throw std::invalid_argument("cannot merge a state with itself");
  if (i > j) std::swap(i, j);
  int pos = find_family_var(stats, var);
  int card = pos < 0 ? stats.child_card : stats.parent_cards[pos];
  if (i < 0 || j >= card) throw std::invalid_argument("merge state out of range for '" + var + "'");

  SufficientStats out;
  out.child = stats.child;
  out.parents = stats.parents;
  out.child_card = stats.child_card;
  out.parent_cards = stats.parent_cards;
  auto remap = [&](int s) { return s == j ? i : (s > j ? s - 1 : s); };
  if (pos < 0)
    out.child_card -= 1;
  else
    out.parent_cards[pos] -= 1;

  out.counts.assign(static_cast<std::size_t>(out.child_card) * out.n_configs(), 0);
  const int old_q = stats.n_configs();
  std::vector<int> pstates;
  for (int c = 0; c < stats.child_card; ++c) {
    for (int u = 0; u < old_q; ++u) {
      std::int64_t n = stats.counts[static_cast<std::size_t>(c) * old_q + u];
      int nc = pos < 0 ? remap(c) : c;
      int nu = u;
      if (pos >= 0) {
        pstates = config_unindex(u, stats.parent_cards);
        pstates[pos] = remap(pstates[pos]);
        nu = config_index(pstates, out.parent_cards);
      }
      out.counts[static_cast<std::size_t>(nc) * out.n_configs() + nu] += n;
    }
  }

  auto merge_mult = [&](const std::vector<double>& m) {
    std::vector<double> r;
    r.reserve(m.size() - 1);
    for (int s = 0; s < static_cast<int>(m.size()); ++s) {
      if (s == j) continue;
      r.push_back(s == i ? m[i] + m[j] : m[s]);
    }
    return r;
  };
  out.child_mult = pos < 0 ? merge_mult(stats.child_mult) : stats.child_mult;
  out.parent_mult = stats.parent_mult;
  if (pos >= 0) out.parent_mult[pos] = merge_mult(stats.parent_mult[pos]);
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void csv_write(const Dataset& data, const std::string& path) {
  csv_write_with_sigma(data, SigmaSet{}, path);
}

void csv_write_with_sigma(const Dataset& data, const SigmaSet& sigma, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write csv file '" + path + "'");
  for (int v = 0; v < data.num_vars(); ++v) {
    if (v) out << ',';
    out << data.column(v).name;
  }
  for (const auto& [name, s] : sigma) out << ',' << name << "__sigma";
  out << '\n';
  for (int r = 0; r < data.num_rows(); ++r) {
    for (int v = 0; v < data.num_vars(); ++v) {
      if (v) out << ',';
      int x = data.value(r, v);
      if (x == kHiddenCell)
        out << '?';
      else
        out << data.column(v).state_labels[x];
    }
    for (const auto& [name, s] : sigma) out << ',' << s.assignment[r];
    out << '\n';
  }
}

Dataset csv_read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read csv file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv file '" + path + "' is empty");
  std::vector<std::string> names = split_csv_line(line);
  const std::size_t n = names.size();

  std::vector<std::vector<std::string>> raw;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != n)
      throw std::runtime_error("csv row " + std::to_string(lineno) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(n));
    raw.push_back(std::move(cells));
  }

  // infer labels per column, sorted for determinism; all-'?' columns are hidden
  std::vector<DataColumn> cols(n);
  std::set<std::string> hidden;
  std::vector<std::map<std::string, int>> label_ix(n);
  for (std::size_t v = 0; v < n; ++v) {
    cols[v].name = names[v];
    std::set<std::string> labels;
    bool any_obs = false, any_hidden = false;
    for (const auto& row : raw) {
      if (row[v] == "?")
        any_hidden = true;
      else {
        labels.insert(row[v]);
        any_obs = true;
      }
    }
    if (any_hidden && any_obs)
      throw std::runtime_error("column '" + names[v] + "' mixes observed and hidden cells");
    if (any_hidden || raw.empty()) {
      hidden.insert(names[v]);
    } else {
      cols[v].state_labels.assign(labels.begin(), labels.end());
      int k = 0;
      for (const auto& l : cols[v].state_labels) label_ix[v][l] = k++;
    }
  }
  std::vector<int> cells;
  cells.reserve(raw.size() * n);
  for (const auto& row : raw)
    for (std::size_t v = 0; v < n; ++v)
      cells.push_back(row[v] == "?" ? kHiddenCell : label_ix[v][row[v]]);
  return Dataset(std::move(cols), std::move(cells), std::move(hidden));
}

Dataset csv_read(const std::string& path, const BayesianNetwork& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read csv file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv file '" + path + "' is empty");
  std::vector<std::string> names = split_csv_line(line);
  const std::size_t n = names.size();

  std::vector<DataColumn> cols(n);
  std::vector<std::map<std::string, int>> label_ix(n);
  for (std::size_t v = 0; v < n; ++v) {
    const Variable& var = schema.var(schema.index_of(names[v]));
    cols[v] = DataColumn{var.name, var.states};
    int k = 0;
    for (const auto& l : var.states) label_ix[v][l] = k++;
  }

  std::vector<int> cells;
  std::vector<bool> col_hidden(n, false), col_observed(n, false);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto row = split_csv_line(line);
    if (row.size() != n)
      throw std::runtime_error("csv row " + std::to_string(lineno) + " has " +
                               std::to_string(row.size()) + " cells, expected " +
                               std::to_string(n));
    for (std::size_t v = 0; v < n; ++v) {
      if (row[v] == "?") {
        col_hidden[v] = true;
        cells.push_back(kHiddenCell);
      } else {
        auto it = label_ix[v].find(row[v]);
        if (it == label_ix[v].end())
          throw std::runtime_error("csv row " + std::to_string(lineno) + ": label '" + row[v] +
                                   "' is not a state of '" + names[v] + "'");
        col_observed[v] = true;
        cells.push_back(it->second);
      }
    }
  }
  std::set<std::string> hidden;
  for (std::size_t v = 0; v < n; ++v) {
    if (col_hidden[v] && col_observed[v])
      throw std::runtime_error("column '" + names[v] + "' mixes observed and hidden cells");
    if (col_hidden[v]) hidden.insert(names[v]);
  }
  return Dataset(std::move(cols), std::move(cells), std::move(hidden));
}

}  // namespace cardagg
