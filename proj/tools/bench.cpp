// Serial vs OpenMP comparison for the row-level kernels. Both modes share the
// chunked accumulation order, so outputs must agree bit for bit; the harness
// verifies that while timing.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>

#include "cardagg/agglomerate.hpp"
#include "cardagg/data.hpp"
#include "cardagg/em.hpp"
#include "cardagg/scoring.hpp"
#include "cardagg/synthetic.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace cardagg;

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

template <typename Fn>
double time_best_of(int reps, Fn&& fn) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, ms_since(t0));
  }
  return best;
}

void report(const char* kernel, double serial_ms, double parallel_ms, bool identical) {
  std::printf("%-24s serial %9.2f ms   parallel %9.2f ms   speedup %5.2fx   %s\n", kernel,
              serial_ms, parallel_ms, serial_ms / parallel_ms,
              identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  int rows = 200000;
  int reps = 3;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--rows") && i + 1 < argc) rows = std::atoi(argv[++i]);
    if (!std::strcmp(argv[i], "--reps") && i + 1 < argc) reps = std::atoi(argv[++i]);
  }
#ifdef _OPENMP
  std::printf("openmp threads: %d, rows: %d\n", omp_get_max_threads(), rows);
#else
  std::printf("built without openmp, rows: %d\n", rows);
#endif

  BayesianNetwork net = make_planted3();
  Dataset full = ancestral_sample(net, rows, 7);
  Dataset data = hide_variables(full, {"H"});
  PriorSpec prior;

  // counting kernel
  {
    AssignmentMap sigma = init_states_from_mb(net, data, {}, "H", {});
    SigmaSet sig{{"H", sigma}};
    SufficientStats a, b;
    double ts = time_best_of(reps, [&] {
      a = count_sufficient_stats(data, sig, "C1", {"H", "E"}, ExecMode::serial);
    });
    double tp = time_best_of(reps, [&] {
      b = count_sufficient_stats(data, sig, "C1", {"H", "E"}, ExecMode::parallel);
    });
    report("count_sufficient_stats", ts, tp, a.counts == b.counts);
  }

  // log-loss marginalization kernel
  {
    double a = 0, b = 0;
    double ts = time_best_of(reps, [&] { a = log_loss(net, data, 10000, ExecMode::serial); });
    double tp = time_best_of(reps, [&] { b = log_loss(net, data, 10000, ExecMode::parallel); });
    report("log_loss", ts, tp, a == b);
  }

  // one EM pass (E-step dominated)
  {
    EmConfig cfg;
    cfg.max_iters = 3;
    cfg.restarts = 1;
    cfg.seed = 11;
    EmResult a, b;
    cfg.mode = ExecMode::serial;
    double ts = time_best_of(reps, [&] { a = em_parameters(net, data, prior, cfg); });
    cfg.mode = ExecMode::parallel;
    double tp = time_best_of(reps, [&] { b = em_parameters(net, data, prior, cfg); });
    bool same = a.log_likelihood == b.log_likelihood;
    for (std::size_t f = 0; same && f < a.params.size(); ++f)
      same = a.params[f].table == b.params[f].table;
    report("em_iteration", ts, tp, same);
  }

  // agglomeration delta pass
  {
    AggConfig cfg;
    std::pair<MergeTrace, CardinalityResult> a, b;
    cfg.mode = ExecMode::serial;
    double ts = time_best_of(reps, [&] { a = agglomerate(net, data, {}, "H", prior, cfg); });
    cfg.mode = ExecMode::parallel;
    double tp = time_best_of(reps, [&] { b = agglomerate(net, data, {}, "H", prior, cfg); });
    bool same = a.second.chosen_k == b.second.chosen_k &&
                a.first.scores_by_k == b.first.scores_by_k &&
                a.second.sigma.assignment == b.second.sigma.assignment;
    report("agglomerate", ts, tp, same);
  }
  return 0;
}
