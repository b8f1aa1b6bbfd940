#include "cardagg/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cardagg {

using nlohmann::json;

void Variable::validate() const {
  if (name.empty()) throw std::invalid_argument("variable with empty name");
  if (states.empty())
    throw std::invalid_argument("variable '" + name + "' must have cardinality >= 1");
  std::set<std::string> seen;
  for (const auto& s : states) {
    if (s.empty() || s == "?" || s.find(',') != std::string::npos ||
        s.find('\n') != std::string::npos)
      throw std::invalid_argument("variable '" + name + "' has unusable state label '" + s + "'");
    if (!seen.insert(s).second)
      throw std::invalid_argument("variable '" + name + "' has duplicate state label '" + s + "'");
  }
}

Dag::Dag(std::vector<std::string> nodes,
         std::vector<std::pair<std::string, std::string>> edges)
    : nodes_(std::move(nodes)) {
  for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
    if (!index_.emplace(nodes_[i], i).second)
      throw std::invalid_argument("duplicate node '" + nodes_[i] + "'");
  }
  parents_.resize(nodes_.size());
  children_.resize(nodes_.size());
  for (const auto& [p, c] : edges) {
    int pi = index_of(p), ci = index_of(c);
    if (pi == ci) throw std::invalid_argument("self edge on '" + p + "'");
    if (std::find(parents_[ci].begin(), parents_[ci].end(), pi) != parents_[ci].end())
      throw std::invalid_argument("duplicate edge " + p + " -> " + c);
    parents_[ci].push_back(pi);
    children_[pi].push_back(ci);
  }
  for (auto& v : parents_) std::sort(v.begin(), v.end());
  for (auto& v : children_) std::sort(v.begin(), v.end());

  // Kahn with smallest-index tie-break; doubles as the acyclicity check.
  std::vector<int> indeg(nodes_.size());
  for (std::size_t v = 0; v < nodes_.size(); ++v) indeg[v] = static_cast<int>(parents_[v].size());
  std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
  for (std::size_t v = 0; v < nodes_.size(); ++v)
    if (indeg[v] == 0) ready.push(static_cast<int>(v));
  while (!ready.empty()) {
    int v = ready.top();
    ready.pop();
    topo_.push_back(v);
    for (int c : children_[v])
      if (--indeg[c] == 0) ready.push(c);
  }
  if (topo_.size() != nodes_.size())
    throw std::invalid_argument("graph contains a directed cycle");
}

int Dag::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("unknown variable '" + name + "'");
  return it->second;
}

bool Dag::contains(const std::string& name) const { return index_.count(name) != 0; }

bool Dag::has_edge(int parent, int child) const {
  const auto& ch = children_[parent];
  return std::binary_search(ch.begin(), ch.end(), child);
}

std::vector<std::pair<std::string, std::string>> Dag::edges() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (int p = 0; p < num_nodes(); ++p)
    for (int c : children_[p]) out.emplace_back(nodes_[p], nodes_[c]);
  return out;
}

void Cpd::validate() const {
  if (child_card < 1) throw std::invalid_argument("cpd for '" + child + "': child cardinality < 1");
  if (parents.size() != parent_cards.size())
    throw std::invalid_argument("cpd for '" + child + "': parent list/cardinality mismatch");
  const std::size_t expect = static_cast<std::size_t>(n_configs()) * child_card;
  if (table.size() != expect)
    throw std::invalid_argument("cpd for '" + child + "': table has " +
                                std::to_string(table.size()) + " entries, expected " +
                                std::to_string(expect));
  for (int u = 0; u < n_configs(); ++u) {
    double row = 0.0;
    for (int c = 0; c < child_card; ++c) {
      double p = prob(u, c);
      if (p < 0.0 || !(p == p))
        throw std::invalid_argument("cpd for '" + child + "': negative or NaN probability");
      row += p;
    }
    if (std::abs(row - 1.0) > 1e-9)
      throw std::invalid_argument("cpd for '" + child + "': row " + std::to_string(u) +
                                  " sums to " + std::to_string(row));
  }
}

Cpd Cpd::uniform(const std::string& child, int child_card,
                 const std::vector<std::string>& parents,
                 const std::vector<int>& parent_cards) {
  Cpd cpd;
  cpd.child = child;
  cpd.parents = parents;
  cpd.child_card = child_card;
  cpd.parent_cards = parent_cards;
  cpd.table.assign(static_cast<std::size_t>(cpd.n_configs()) * child_card,
                   1.0 / child_card);
  return cpd;
}

BayesianNetwork::BayesianNetwork(std::vector<Variable> variables, Dag dag,
                                 std::vector<Cpd> cpds)
    : vars_(std::move(variables)), dag_(std::move(dag)) {
  if (static_cast<int>(vars_.size()) != dag_.num_nodes())
    throw std::invalid_argument("variable list does not match graph nodes");
  for (int i = 0; i < num_vars(); ++i) {
    vars_[i].validate();
    if (vars_[i].name != dag_.name(i))
      throw std::invalid_argument("variable order does not match graph node order");
  }
  if (cpds.size() != vars_.size())
    throw std::invalid_argument("expected one cpd per variable");
  cpds_.resize(vars_.size());
  std::vector<bool> filled(vars_.size(), false);
  for (auto& cpd : cpds) {
    int i = dag_.index_of(cpd.child);
    if (filled[i]) throw std::invalid_argument("duplicate cpd for '" + cpd.child + "'");
    filled[i] = true;
    // parent list must match the dag parent set, in the cpd's declared order
    std::vector<int> want = dag_.parents(i);
    std::vector<int> got;
    for (const auto& p : cpd.parents) got.push_back(dag_.index_of(p));
    std::vector<int> sorted_got = got;
    std::sort(sorted_got.begin(), sorted_got.end());
    if (sorted_got != want)
      throw std::invalid_argument("cpd for '" + cpd.child + "' disagrees with graph parents");
    if (cpd.child_card != vars_[i].cardinality())
      throw std::invalid_argument("cpd for '" + cpd.child + "' has wrong child cardinality");
    for (std::size_t t = 0; t < got.size(); ++t)
      if (cpd.parent_cards[t] != vars_[got[t]].cardinality())
        throw std::invalid_argument("cpd for '" + cpd.child + "' has wrong parent cardinality");
    cpd.validate();
    cpds_[i] = std::move(cpd);
  }
}

std::vector<int> BayesianNetwork::markov_blanket(int v) const {
  std::set<int> mb;
  for (int p : dag_.parents(v)) mb.insert(p);
  for (int c : dag_.children(v)) {
    mb.insert(c);
    for (int s : dag_.parents(c)) mb.insert(s);
  }
  mb.erase(v);
  return std::vector<int>(mb.begin(), mb.end());
}

std::set<std::string> BayesianNetwork::markov_blanket(const std::string& name) const {
  std::set<std::string> out;
  for (int i : markov_blanket(dag_.index_of(name))) out.insert(dag_.name(i));
  return out;
}

double BayesianNetwork::joint_log_prob(const std::vector<int>& assignment) const {
  if (static_cast<int>(assignment.size()) != num_vars())
    throw std::invalid_argument("assignment has wrong length");
  std::string missing;
  for (int i = 0; i < num_vars(); ++i) {
    if (assignment[i] < 0) {
      if (!missing.empty()) missing += ", ";
      missing += vars_[i].name;
    } else if (assignment[i] >= cardinality(i)) {
      throw std::invalid_argument("state index out of range for '" + vars_[i].name + "'");
    }
  }
  if (!missing.empty())
    throw std::invalid_argument("partial assignment, missing: " + missing);

  double total = 0.0;
  std::vector<int> pstates;
  for (int i = 0; i < num_vars(); ++i) {
    const Cpd& cpd = cpds_[i];
    pstates.clear();
    for (const auto& pname : cpd.parents) pstates.push_back(assignment[dag_.index_of(pname)]);
    double p = cpd.prob(config_index(pstates, cpd.parent_cards), assignment[i]);
    if (p <= 0.0) return kNegInf;
    total += std::log(p);
  }
  return total;
}

bool BayesianNetwork::is_decoupled_hidden(const std::string& h,
                                          const std::set<std::string>& hidden) const {
  if (!hidden.count(h))
    throw std::invalid_argument("'" + h + "' is not in the hidden set");
  for (const auto& m : markov_blanket(h))
    if (hidden.count(m)) return false;
  return true;
}

std::string BayesianNetwork::to_json_string() const {
  json j;
  j["variables"] = json::array();
  for (const auto& v : vars_) j["variables"].push_back({{"name", v.name}, {"states", v.states}});
  j["edges"] = json::array();
  for (const auto& [p, c] : dag_.edges()) j["edges"].push_back({p, c});
  j["cpds"] = json::array();
  for (const auto& cpd : cpds_) {
    json rows = json::array();
    for (int u = 0; u < cpd.n_configs(); ++u) {
      json row = json::array();
      for (int c = 0; c < cpd.child_card; ++c) row.push_back(cpd.prob(u, c));
      rows.push_back(row);
    }
    j["cpds"].push_back({{"child", cpd.child}, {"parents", cpd.parents}, {"table", rows}});
  }
  return j.dump(2) + "\n";
}

BayesianNetwork BayesianNetwork::from_json_string(const std::string& text) {
  json j = json::parse(text);
  std::vector<Variable> vars;
  for (const auto& v : j.at("variables")) {
    Variable var;
    var.name = v.at("name").get<std::string>();
    var.states = v.at("states").get<std::vector<std::string>>();
    vars.push_back(std::move(var));
  }
  std::vector<std::string> names;
  for (const auto& v : vars) names.push_back(v.name);
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& e : j.at("edges"))
    edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
  Dag dag(names, edges);

  auto card_of = [&](const std::string& n) {
    for (const auto& v : vars)
      if (v.name == n) return v.cardinality();
    throw std::invalid_argument("cpd references unknown variable '" + n + "'");
  };
  std::vector<Cpd> cpds;
  for (const auto& c : j.at("cpds")) {
    Cpd cpd;
    cpd.child = c.at("child").get<std::string>();
    cpd.parents = c.at("parents").get<std::vector<std::string>>();
    cpd.child_card = card_of(cpd.child);
    for (const auto& p : cpd.parents) cpd.parent_cards.push_back(card_of(p));
    for (const auto& row : c.at("table"))
      for (const auto& x : row) cpd.table.push_back(x.get<double>());
    cpds.push_back(std::move(cpd));
  }
  return BayesianNetwork(std::move(vars), std::move(dag), std::move(cpds));
}

void BayesianNetwork::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write network file '" + path + "'");
  out << to_json_string();
}

BayesianNetwork BayesianNetwork::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read network file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

BayesianNetwork resize_cardinality(const BayesianNetwork& net, const std::string& h, int card) {
  if (card < 1) throw std::invalid_argument("cardinality must be >= 1");
  int hi = net.index_of(h);
  std::vector<Variable> vars = net.variables();
  vars[hi].states.clear();
  for (int s = 0; s < card; ++s) vars[hi].states.push_back("s" + std::to_string(s));
  std::vector<Cpd> cpds;
  for (int i = 0; i < net.num_vars(); ++i) {
    const Cpd& old = net.cpd(i);
    bool touched = (i == hi);
    for (const auto& p : old.parents)
      if (p == h) touched = true;
    if (!touched) {
      cpds.push_back(old);
      continue;
    }
    std::vector<int> pcards;
    for (const auto& p : old.parents) pcards.push_back(vars[net.index_of(p)].cardinality());
    cpds.push_back(Cpd::uniform(old.child, vars[i].cardinality(), old.parents, pcards));
  }
  return BayesianNetwork(std::move(vars), net.dag(), std::move(cpds));
}

BayesianNetwork with_params(const BayesianNetwork& net, const std::vector<Cpd>& cpds) {
  return BayesianNetwork(net.variables(), net.dag(), cpds);
}

}  // namespace cardagg
