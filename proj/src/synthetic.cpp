#include "cardagg/synthetic.hpp"

#include <stdexcept>

namespace cardagg {

namespace {

Variable binary(const std::string& name) { return Variable{name, {"no", "yes"}}; }

Variable kstate(const std::string& name, int k) {
  Variable v;
  v.name = name;
  for (int s = 0; s < k; ++s) v.states.push_back("s" + std::to_string(s));
  return v;
}

Cpd root(const std::string& name, std::vector<double> probs) {
  Cpd cpd;
  cpd.child = name;
  cpd.child_card = static_cast<int>(probs.size());
  cpd.table = std::move(probs);
  return cpd;
}

// Binary child of `parent`; emits 1 with probability `strength` when the
// parent state's pattern bit is 1, with 1 - strength otherwise.
Cpd pattern_child(const std::string& name, const std::string& parent,
                  const std::vector<int>& bits, double strength) {
  Cpd cpd;
  cpd.child = name;
  cpd.child_card = 2;
  cpd.parents = {parent};
  cpd.parent_cards = {static_cast<int>(bits.size())};
  for (int bit : bits) {
    double p1 = bit ? strength : 1.0 - strength;
    cpd.table.push_back(1.0 - p1);
    cpd.table.push_back(p1);
  }
  return cpd;
}

// Binary child of two parents; emits 1 with probability `hi` when the parent
// state sum is even, else 1 - hi.
Cpd parity_child(const std::string& name, const std::string& pa, int card_a,
                 const std::string& pb, int card_b, double hi) {
  Cpd cpd;
  cpd.child = name;
  cpd.child_card = 2;
  cpd.parents = {pa, pb};
  cpd.parent_cards = {card_a, card_b};
  for (int a = 0; a < card_a; ++a)
    for (int b = 0; b < card_b; ++b) {
      double p1 = ((a + b) % 2 == 0) ? hi : 1.0 - hi;
      cpd.table.push_back(1.0 - p1);
      cpd.table.push_back(p1);
    }
  return cpd;
}

}  // namespace

BayesianNetwork make_planted3() {
  auto v3 = [](const std::string& name) { return Variable{name, {"x0", "x1", "x2"}}; };
  std::vector<Variable> vars{binary("A"), binary("B"), kstate("H", 3),
                             v3("C1"),    v3("C2"),    v3("E")};
  std::vector<std::pair<std::string, std::string>> edges{
      {"A", "H"}, {"B", "H"}, {"H", "C1"}, {"E", "C1"}, {"H", "C2"}};
  auto table = [](const std::string& child, const std::vector<std::string>& parents,
                  const std::vector<int>& pcards, std::vector<double> t) {
    Cpd cpd;
    cpd.child = child;
    cpd.parents = parents;
    cpd.parent_cards = pcards;
    cpd.child_card = static_cast<int>(t.size()) / num_configs(pcards);
    cpd.table = std::move(t);
    return cpd;
  };
  std::vector<Cpd> cpds{
      root("A", {0.25, 0.75}),
      root("B", {0.12, 0.88}),
      // configs (A,B): 00, 01, 10, 11
      table("H", {"A", "B"}, {2, 2},
            {0.94, 0.05, 0.01,  0.75, 0.22, 0.03,  0.05, 0.92, 0.03,  0.02, 0.14, 0.84}),
      // configs (H,E), E fastest
      table("C1", {"H", "E"}, {3, 3},
            {0.98, 0.01, 0.01,  0.95, 0.04, 0.01,  0.90, 0.09, 0.01,
             0.95, 0.04, 0.01,  0.02, 0.97, 0.01,  0.01, 0.15, 0.84,
             0.15, 0.84, 0.01,  0.01, 0.15, 0.84,  0.01, 0.01, 0.98}),
      table("C2", {"H"}, {3},
            {0.96, 0.03, 0.01,  0.03, 0.96, 0.01,  0.01, 0.03, 0.96}),
      root("E", {0.10, 0.80, 0.10}),
  };
  std::vector<std::string> names;
  for (const auto& v : vars) names.push_back(v.name);
  return BayesianNetwork(vars, Dag(names, edges), cpds);
}

BayesianNetwork make_multihidden4() {
  std::vector<Variable> vars;
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<Cpd> cpds;

  auto table = [](const std::string& child, const std::vector<std::string>& parents,
                  const std::vector<int>& pcards, std::vector<double> t) {
    Cpd cpd;
    cpd.child = child;
    cpd.parents = parents;
    cpd.parent_cards = pcards;
    cpd.child_card = static_cast<int>(t.size()) / num_configs(pcards);
    cpd.table = std::move(t);
    return cpd;
  };

  // every hidden variable gets two observed binary parents; the parent family
  // anchors the number of states the data can support
  auto add_parents = [&](const std::string& h, double p0, double p1) {
    std::string u0 = h + "u0", u1 = h + "u1";
    vars.push_back(binary(u0));
    vars.push_back(binary(u1));
    edges.emplace_back(u0, h);
    edges.emplace_back(u1, h);
    cpds.push_back(root(u0, {1.0 - p0, p0}));
    cpds.push_back(root(u1, {1.0 - p1, p1}));
    return std::vector<std::string>{u0, u1};
  };

  const double s = 0.95;
  auto add_private = [&](const std::string& h, int hcard,
                         const std::vector<std::vector<int>>& patterns) {
    for (std::size_t c = 0; c < patterns.size(); ++c) {
      std::string name = h + "c" + std::to_string(c);
      vars.push_back(binary(name));
      edges.emplace_back(h, name);
      cpds.push_back(pattern_child(name, h, patterns[c], s));
      (void)hcard;
    }
  };

  vars.push_back(kstate("h0", 3));
  auto p0 = add_parents("h0", 0.35, 0.55);
  cpds.push_back(table("h0", p0, {2, 2},
                       {0.94, 0.05, 0.01,  0.75, 0.22, 0.03,
                        0.05, 0.92, 0.03,  0.02, 0.14, 0.84}));
  add_private("h0", 3, {{0, 1, 0}, {0, 1, 1}, {0, 0, 1}});

  vars.push_back(kstate("h1", 2));
  auto p1 = add_parents("h1", 0.45, 0.30);
  cpds.push_back(table("h1", p1, {2, 2}, {0.95, 0.05,  0.80, 0.20,  0.15, 0.85,  0.03, 0.97}));
  add_private("h1", 2, {{0, 1}, {0, 1}});

  vars.push_back(kstate("h2", 4));
  auto p2 = add_parents("h2", 0.50, 0.40);
  cpds.push_back(table("h2", p2, {2, 2},
                       {0.91, 0.05, 0.03, 0.01,  0.04, 0.90, 0.05, 0.01,
                        0.02, 0.05, 0.90, 0.03,  0.01, 0.03, 0.06, 0.90}));
  add_private("h2", 4, {{0, 1, 0, 1}, {0, 1, 1, 0}, {0, 0, 1, 1}});

  vars.push_back(kstate("h3", 3));
  auto p3 = add_parents("h3", 0.40, 0.60);
  cpds.push_back(table("h3", p3, {2, 2},
                       {0.93, 0.05, 0.02,  0.70, 0.25, 0.05,
                        0.06, 0.91, 0.03,  0.02, 0.10, 0.88}));
  add_private("h3", 3, {{0, 1, 0}, {0, 1, 1}, {0, 0, 1}});

  // consecutive hidden variables co-parent a shared child
  for (const auto& [sname, pa, ca, pb, cb] :
       std::vector<std::tuple<std::string, std::string, int, std::string, int>>{
           {"s01", "h0", 3, "h1", 2}, {"s12", "h1", 2, "h2", 4}, {"s23", "h2", 4, "h3", 3}}) {
    vars.push_back(binary(sname));
    edges.emplace_back(pa, sname);
    edges.emplace_back(pb, sname);
    cpds.push_back(parity_child(sname, pa, ca, pb, cb, 0.90));
  }

  std::vector<std::string> names;
  for (const auto& v : vars) names.push_back(v.name);
  return BayesianNetwork(vars, Dag(names, edges), cpds);
}

std::vector<std::string> multihidden4_hidden() { return {"h0", "h1", "h2", "h3"}; }

BayesianNetwork make_cliquegen() {
  auto v4 = [](const std::string& name) {
    return Variable{name, {"x0", "x1", "x2", "x3"}};
  };
  std::vector<Variable> vars{kstate("H", 4), v4("C1"), v4("C2"), v4("C3"), v4("C4"),
                             binary("X1"),   binary("X2")};
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& c : {"C1", "C2", "C3", "C4"}) edges.emplace_back("H", c);

  // each child reads a distinct permutation of H's state, so every pair of
  // hidden states disagrees on all four children
  auto perm_child = [](const std::string& name, const std::vector<int>& perm, double s) {
    Cpd cpd;
    cpd.child = name;
    cpd.child_card = 4;
    cpd.parents = {"H"};
    cpd.parent_cards = {4};
    for (int hs = 0; hs < 4; ++hs)
      for (int x = 0; x < 4; ++x) cpd.table.push_back(x == perm[hs] ? s : (1.0 - s) / 3.0);
    return cpd;
  };
  const double s = 0.95;
  std::vector<Cpd> cpds{
      root("H", {0.30, 0.28, 0.22, 0.20}),
      perm_child("C1", {0, 1, 2, 3}, s),
      perm_child("C2", {1, 0, 3, 2}, s),
      perm_child("C3", {2, 3, 0, 1}, s),
      perm_child("C4", {3, 2, 1, 0}, s),
      root("X1", {0.55, 0.45}),
      root("X2", {0.70, 0.30}),
  };
  std::vector<std::string> names;
  for (const auto& v : vars) names.push_back(v.name);
  return BayesianNetwork(vars, Dag(names, edges), cpds);
}

BayesianNetwork make_cardio() {
  auto tf = [](const std::string& name) { return Variable{name, {"True", "False"}}; };
  auto lnh = [](const std::string& name) { return Variable{name, {"Low", "Normal", "High"}}; };
  std::vector<Variable> vars{tf("HYPOVOLEMIA"),   tf("LVFAILURE"),    tf("HISTORY"),
                             lnh("LVEDVOLUME"),   lnh("STROKEVOLUME"), lnh("CVP"),
                             lnh("PCWP"),         lnh("HR"),           lnh("CO")};
  std::vector<std::pair<std::string, std::string>> edges{
      {"LVFAILURE", "HISTORY"},      {"HYPOVOLEMIA", "LVEDVOLUME"},
      {"LVFAILURE", "LVEDVOLUME"},   {"HYPOVOLEMIA", "STROKEVOLUME"},
      {"LVFAILURE", "STROKEVOLUME"}, {"LVEDVOLUME", "CVP"},
      {"LVEDVOLUME", "PCWP"},        {"STROKEVOLUME", "CO"},
      {"HR", "CO"}};

  auto table2 = [](const std::string& child, const std::vector<std::string>& parents,
                   const std::vector<int>& pcards, std::vector<double> t) {
    Cpd cpd;
    cpd.child = child;
    cpd.parents = parents;
    cpd.parent_cards = pcards;
    cpd.child_card = static_cast<int>(t.size()) / num_configs(pcards);
    cpd.table = std::move(t);
    return cpd;
  };

  std::vector<Cpd> cpds{
      root("HYPOVOLEMIA", {0.20, 0.80}),
      root("LVFAILURE", {0.05, 0.95}),
      table2("HISTORY", {"LVFAILURE"}, {2}, {0.90, 0.10, 0.01, 0.99}),
      // parent order (HYPOVOLEMIA, LVFAILURE); configs TT, TF, FT, FF
      table2("LVEDVOLUME", {"HYPOVOLEMIA", "LVFAILURE"}, {2, 2},
             {0.95, 0.04, 0.01,  0.98, 0.01, 0.01,  0.01, 0.09, 0.90,  0.05, 0.90, 0.05}),
      table2("STROKEVOLUME", {"HYPOVOLEMIA", "LVFAILURE"}, {2, 2},
             {0.98, 0.01, 0.01,  0.95, 0.04, 0.01,  0.50, 0.49, 0.01,  0.05, 0.90, 0.05}),
      table2("CVP", {"LVEDVOLUME"}, {3},
             {0.95, 0.04, 0.01,  0.04, 0.95, 0.01,  0.01, 0.29, 0.70}),
      table2("PCWP", {"LVEDVOLUME"}, {3},
             {0.95, 0.04, 0.01,  0.04, 0.95, 0.01,  0.01, 0.04, 0.95}),
      root("HR", {0.10, 0.80, 0.10}),
      table2("CO", {"STROKEVOLUME", "HR"}, {3, 3},
             {0.98, 0.01, 0.01,  0.95, 0.04, 0.01,  0.80, 0.19, 0.01,
              0.95, 0.04, 0.01,  0.04, 0.95, 0.01,  0.01, 0.30, 0.69,
              0.30, 0.69, 0.01,  0.01, 0.30, 0.69,  0.01, 0.01, 0.98}),
  };
  std::vector<std::string> names;
  for (const auto& v : vars) names.push_back(v.name);
  return BayesianNetwork(vars, Dag(names, edges), cpds);
}

BayesianNetwork synthetic_net(const std::string& name) {
  if (name == "planted3") return make_planted3();
  if (name == "multihidden4") return make_multihidden4();
  if (name == "cliquegen") return make_cliquegen();
  if (name == "cardio") return make_cardio();
  throw std::invalid_argument("unknown synthetic network '" + name + "'");
}

std::vector<std::string> synthetic_names() {
  return {"planted3", "multihidden4", "cliquegen", "cardio"};
}

}  // namespace cardagg
