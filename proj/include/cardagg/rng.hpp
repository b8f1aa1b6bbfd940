#ifndef CARDAGG_RNG_HPP
#define CARDAGG_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace cardagg {

// Deterministic sampling helpers. std::uniform_real_distribution and friends
// are implementation-defined, so unit doubles are built directly from engine
// bits; results are reproducible for a given seed on any conforming stdlib.

inline double unit_double(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Inverse-CDF draw from a discrete distribution given as (possibly
// unnormalized) nonnegative weights.
inline int draw_discrete(std::mt19937_64& eng, const double* w, int n) {
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += w[i];
  double u = unit_double(eng) * total;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += w[i];
    if (u < acc) return i;
  }
  return n - 1;
}

// Symmetric Dirichlet(1): normalized exponentials. Avoids gamma rejection
// sampling so the draw count per row is fixed.
inline std::vector<double> dirichlet1_row(std::mt19937_64& eng, int n) {
  std::vector<double> row(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = unit_double(eng);
    if (u <= 0.0) u = 0x1.0p-53;
    row[i] = -std::log(u);
    total += row[i];
  }
  for (int i = 0; i < n; ++i) row[i] /= total;
  return row;
}

// Stream splitter for derived seeds (restart r of run seed s, etc).
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace cardagg

#endif
