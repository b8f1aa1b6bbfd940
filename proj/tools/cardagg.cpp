// Batch experiment frontend. Every subcommand reads and writes files only;
// stochastic subcommands require an explicit --seed.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cardagg/agglomerate.hpp"
#include "cardagg/data.hpp"
#include "cardagg/em.hpp"
#include "cardagg/model.hpp"
#include "cardagg/multi_hidden.hpp"
#include "cardagg/scoring.hpp"
#include "cardagg/structure.hpp"
#include "cardagg/synthetic.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace cardagg;

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.15g", x);
  return buf;
}

struct GlobalOpts {
  int threads = 0;
  bool serial = false;
  double alpha = 1.0;

  ExecMode mode() const { return serial ? ExecMode::serial : ExecMode::parallel; }
  PriorSpec prior() const { return PriorSpec{alpha, 0.0}; }
  void apply() const {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif
  }
};

void cmd_make_net(const std::string& name, const std::string& out) {
  synthetic_net(name).save(out);
}

void cmd_sample(const GlobalOpts& g, const std::string& net_file, int rows, std::uint64_t seed,
                const std::string& out, const std::string& hide) {
  (void)g;
  if (rows < 1) throw std::invalid_argument("row count must be >= 1");
  BayesianNetwork net = BayesianNetwork::load(net_file);
  Dataset data = ancestral_sample(net, rows, seed);
  auto hidden = split_list(hide);
  if (!hidden.empty())
    data = hide_variables(data, std::set<std::string>(hidden.begin(), hidden.end()));
  csv_write(data, out);
}

void cmd_agglomerate(const GlobalOpts& g, const std::string& net_file,
                     const std::string& data_file, const std::string& hidden,
                     const std::string& prefix, int max_initial_states, bool write_sigma) {
  BayesianNetwork net = BayesianNetwork::load(net_file);
  Dataset data = csv_read(data_file, net);
  AggConfig cfg;
  cfg.max_initial_states = max_initial_states;
  cfg.mode = g.mode();
  auto [trace, result] = agglomerate(net, data, {}, hidden, g.prior(), cfg);

  write_file(prefix + "_trace.json", trace.to_json_string(result.chosen_k));
  write_file(prefix + "_tree.dot", trace.to_dot(result.chosen_k));
  std::ostringstream curve;
  curve << "k,score\n";
  for (auto [k, s] : score_curve(trace)) curve << k << ',' << fmt(s) << '\n';
  write_file(prefix + "_curve.csv", curve.str());

  nlohmann::json summary{{"schema_version", 1},
                         {"hidden", hidden},
                         {"chosen_k", result.chosen_k},
                         {"score_at_k", result.score_at_k},
                         {"initial_k", trace.initial_k},
                         {"delta_evals", trace.delta_evals},
                         {"cap_applied", trace.cap_applied}};
  write_file(prefix + "_summary.json", summary.dump(2) + "\n");
  if (write_sigma)
    csv_write_with_sigma(data, SigmaSet{{hidden, result.sigma}}, prefix + "_sigma.csv");
}

void cmd_sweep_em(const GlobalOpts& g, const std::string& net_file, const std::string& data_file,
                  const std::string& hidden, int k_min, int k_max, int restarts,
                  std::uint64_t seed, const std::string& prefix, bool omit_timing) {
  BayesianNetwork net = BayesianNetwork::load(net_file);
  Dataset data = csv_read(data_file, net);
  EmConfig cfg;
  cfg.restarts = restarts;
  cfg.seed = seed;
  cfg.mode = g.mode();
  SweepResult sweep = cardinality_sweep_em(net, data, hidden, k_min, k_max, g.prior(), cfg);

  std::ostringstream csv;
  csv << "k,cs,log_likelihood,iters,wall_ms\n";
  for (const auto& e : sweep.entries)
    csv << e.k << ',' << fmt(e.cs) << ',' << fmt(e.log_likelihood) << ',' << e.iters << ','
        << fmt(omit_timing ? 0.0 : e.wall_ms) << '\n';
  write_file(prefix + "_sweep.csv", csv.str());

  nlohmann::json summary{{"schema_version", 1},
                         {"hidden", hidden},
                         {"best_k", sweep.best_k},
                         {"k_min", k_min},
                         {"k_max", k_max},
                         {"restarts", restarts},
                         {"seed", seed}};
  write_file(prefix + "_summary.json", summary.dump(2) + "\n");
}

void cmd_roundrobin(const GlobalOpts& g, const std::string& net_file,
                    const std::string& data_file, const std::string& hidden_csv,
                    const std::string& prefix) {
  BayesianNetwork net = BayesianNetwork::load(net_file);
  Dataset data = csv_read(data_file, net);
  auto hidden = split_list(hidden_csv);
  RoundRobinConfig cfg;
  cfg.agg.mode = g.mode();
  RoundRobinResult rr = round_robin_agglomerate(net, data, hidden, g.prior(), cfg);
  write_file(prefix + "_roundrobin.json", rr.to_json_string());
}

void cmd_findhidden(const GlobalOpts& g, const std::string& data_file, std::uint64_t seed,
                    const std::string& prefix, int min_clique, double test_fraction, int forced_k,
                    int max_proposals) {
  Dataset data = csv_read(data_file);
  PipelineConfig cfg;
  cfg.seed = seed;
  cfg.test_fraction = test_fraction;
  cfg.clique.min_size = min_clique;
  cfg.forced_k = forced_k;
  cfg.max_proposals = max_proposals;
  cfg.prior = g.prior();
  cfg.hill_climb.mode = g.mode();
  cfg.agg.mode = g.mode();
  PipelineReport report = find_hidden_pipeline(data, cfg);
  write_file(prefix + "_report.json", report.to_json_string());
  for (std::size_t i = 0; i < report.proposals.size(); ++i)
    report.proposals[i].tuned_net.save(prefix + "_proposal" + std::to_string(i) + "_net.json");
}

void cmd_eval(const GlobalOpts& g, const std::string& net_file, const std::string& params_file,
              const std::string& test_file, const std::string& out, int cap) {
  BayesianNetwork net = BayesianNetwork::load(net_file);
  if (!params_file.empty()) {
    std::ifstream in(params_file);
    if (!in) throw std::runtime_error("cannot read params file '" + params_file + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    BayesianNetwork pnet = BayesianNetwork::from_json_string(ss.str());
    std::vector<Cpd> cpds;
    for (int v = 0; v < pnet.num_vars(); ++v) cpds.push_back(pnet.cpd(v));
    net = with_params(net, cpds);
  }
  Dataset test = csv_read(test_file, net);
  double ll = log_loss(net, test, cap, g.mode());
  std::printf("%.15g\n", ll);
  if (!out.empty()) {
    nlohmann::json j{{"schema_version", 1}, {"log_loss", ll}, {"rows", test.num_rows()}};
    write_file(out, j.dump(2) + "\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hidden-variable cardinality selection by agglomerative state merging"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--threads", g.threads, "worker thread count (0 = library default)");
  app.add_flag("--serial", g.serial, "run every kernel in serial mode");
  app.add_option("--alpha", g.alpha, "per-cell prior pseudo-count")->check(CLI::PositiveNumber);

  std::string name = "planted3", out, net_file, data_file, hidden, prefix, params_file, test_file;
  std::string hide_list;
  int rows = 1000, k_min = 1, k_max = 5, restarts = 5, max_initial_states = 0;
  int min_clique = 4, forced_k = 0, max_proposals = 8, cap = 10000;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  bool write_sigma = false, omit_timing = false;

  auto* mk = app.add_subcommand("make-net", "write a generator network as JSON");
  mk->add_option("--name", name, "one of: planted3, multihidden4, cliquegen, cardio")->required();
  mk->add_option("--out", out, "output network file")->required();

  auto* sample = app.add_subcommand("sample", "draw rows from a network into a CSV");
  sample->add_option("--net", net_file)->required();
  sample->add_option("--rows", rows)->required();
  sample->add_option("--seed", seed)->required();
  sample->add_option("--out", out)->required();
  sample->add_option("--hide", hide_list, "comma-separated variables to hide");

  auto* agg = app.add_subcommand("agglomerate", "choose a hidden variable's cardinality");
  agg->add_option("--net", net_file)->required();
  agg->add_option("--data", data_file)->required();
  agg->add_option("--hidden", hidden)->required();
  agg->add_option("--out-prefix", prefix)->required();
  agg->add_option("--max-initial-states", max_initial_states);
  agg->add_flag("--write-sigma", write_sigma, "also write the completed assignment CSV");

  auto* sweep = app.add_subcommand("sweep-em", "exhaustive per-cardinality EM baseline");
  sweep->add_option("--net", net_file)->required();
  sweep->add_option("--data", data_file)->required();
  sweep->add_option("--hidden", hidden)->required();
  sweep->add_option("--k-min", k_min);
  sweep->add_option("--k-max", k_max);
  sweep->add_option("--restarts", restarts);
  sweep->add_option("--seed", seed)->required();
  sweep->add_option("--out-prefix", prefix)->required();
  sweep->add_flag("--omit-timing", omit_timing, "write zeros for wall times");

  auto* rr = app.add_subcommand("roundrobin", "multi-variable round-robin agglomeration");
  rr->add_option("--net", net_file)->required();
  rr->add_option("--data", data_file)->required();
  rr->add_option("--hidden", hidden, "comma-separated hidden variables")->required();
  rr->add_option("--out-prefix", prefix)->required();

  auto* fh = app.add_subcommand("findhidden", "semi-clique hidden-variable discovery");
  fh->add_option("--data", data_file)->required();
  fh->add_option("--seed", seed)->required();
  fh->add_option("--out-prefix", prefix)->required();
  fh->add_option("--min-clique", min_clique);
  fh->add_option("--test-fraction", test_fraction);
  fh->add_option("--forced-k", forced_k, "pin the hidden cardinality (0 = agglomeration choice)");
  fh->add_option("--max-proposals", max_proposals);

  auto* ev = app.add_subcommand("eval", "held-out log-loss of a network");
  ev->add_option("--net", net_file)->required();
  ev->add_option("--params", params_file, "optional CPD override file");
  ev->add_option("--test", test_file)->required();
  ev->add_option("--out", out, "optional JSON output");
  ev->add_option("--max-hidden-states", cap);

  CLI11_PARSE(app, argc, argv);

  try {
    g.apply();
    if (mk->parsed()) cmd_make_net(name, out);
    if (sample->parsed()) cmd_sample(g, net_file, rows, seed, out, hide_list);
    if (agg->parsed())
      cmd_agglomerate(g, net_file, data_file, hidden, prefix, max_initial_states, write_sigma);
    if (sweep->parsed())
      cmd_sweep_em(g, net_file, data_file, hidden, k_min, k_max, restarts, seed, prefix,
                   omit_timing);
    if (rr->parsed()) cmd_roundrobin(g, net_file, data_file, hidden, prefix);
    if (fh->parsed())
      cmd_findhidden(g, data_file, seed, prefix, min_clique, test_fraction, forced_k,
                     max_proposals);
    if (ev->parsed()) cmd_eval(g, net_file, params_file, test_file, out, cap);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
