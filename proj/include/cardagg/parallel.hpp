#ifndef CARDAGG_PARALLEL_HPP
#define CARDAGG_PARALLEL_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cardagg {

// Every data-parallel kernel in this library exists in two modes. Serial and
// parallel runs produce bit-identical results: floating-point accumulation is
// always chunked with a fixed chunk size and the partial sums are folded in
// chunk order, so the arithmetic never depends on the thread count.
enum class ExecMode { serial, parallel };

inline constexpr std::size_t kRowChunk = 2048;

inline std::size_t num_chunks(std::size_t n) {
  return (n + kRowChunk - 1) / kRowChunk;
}

// Sum f(row) over rows [0, n). ChunkFn signature: double(size_t begin, size_t end),
// returning the serial sum of its chunk.
template <typename ChunkFn>
double chunked_sum(std::size_t n, ExecMode mode, ChunkFn&& chunk_fn) {
  const std::size_t nc = num_chunks(n);
  std::vector<double> partial(nc, 0.0);
  if (mode == ExecMode::parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(nc); ++c) {
      const std::size_t b = static_cast<std::size_t>(c) * kRowChunk;
      const std::size_t e = b + kRowChunk < n ? b + kRowChunk : n;
      partial[static_cast<std::size_t>(c)] = chunk_fn(b, e);
    }
  } else {
    for (std::size_t c = 0; c < nc; ++c) {
      const std::size_t b = c * kRowChunk;
      const std::size_t e = b + kRowChunk < n ? b + kRowChunk : n;
      partial[c] = chunk_fn(b, e);
    }
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

// Accumulate per-row contributions into a table of doubles. AccumFn signature:
// void(size_t begin, size_t end, std::vector<double>& local). Partials are
// folded into `table` in chunk order.
template <typename AccumFn>
void chunked_accumulate(std::size_t n, std::size_t table_size, ExecMode mode,
                        std::vector<double>& table, AccumFn&& accum_fn) {
  const std::size_t nc = num_chunks(n);
  std::vector<std::vector<double>> partial(nc);
  if (mode == ExecMode::parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(nc); ++c) {
      const std::size_t b = static_cast<std::size_t>(c) * kRowChunk;
      const std::size_t e = b + kRowChunk < n ? b + kRowChunk : n;
      auto& local = partial[static_cast<std::size_t>(c)];
      local.assign(table_size, 0.0);
      accum_fn(b, e, local);
    }
  } else {
    for (std::size_t c = 0; c < nc; ++c) {
      const std::size_t b = c * kRowChunk;
      const std::size_t e = b + kRowChunk < n ? b + kRowChunk : n;
      auto& local = partial[c];
      local.assign(table_size, 0.0);
      accum_fn(b, e, local);
    }
  }
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t i = 0; i < table_size; ++i) table[i] += partial[c][i];
}

// Integer variant for count tables; addition is exact so this is identical to
// the sequential tally for any schedule.
template <typename AccumFn>
void chunked_count(std::size_t n, std::size_t table_size, ExecMode mode,
                   std::vector<std::int64_t>& table, AccumFn&& accum_fn) {
  const std::size_t nc = num_chunks(n);
  std::vector<std::vector<std::int64_t>> partial(nc);
  if (mode == ExecMode::parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(nc); ++c) {
      const std::size_t b = static_cast<std::size_t>(c) * kRowChunk;
      const std::size_t e = b + kRowChunk < n ? b + kRowChunk : n;
      auto& local = partial[static_cast<std::size_t>(c)];
      local.assign(table_size, 0);
      accum_fn(b, e, local);
    }
  } else {
    for (std::size_t c = 0; c < nc; ++c) {
      const std::size_t b = c * kRowChunk;
      const std::size_t e = b + kRowChunk < n ? b + kRowChunk : n;
      auto& local = partial[c];
      local.assign(table_size, 0);
      accum_fn(b, e, local);
    }
  }
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t i = 0; i < table_size; ++i) table[i] += partial[c][i];
}

// Evaluate f(i) into out[i] for i in [0, n). Independent slots, deterministic
// under any schedule.
template <typename Fn>
void parallel_map(std::size_t n, ExecMode mode, std::vector<double>& out, Fn&& f) {
  out.resize(n);
  if (mode == ExecMode::parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
      out[static_cast<std::size_t>(i)] = f(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
  }
}

}  // namespace cardagg

#endif
