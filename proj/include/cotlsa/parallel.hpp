#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include <omp.h>

namespace cotlsa {

// Work items are grouped into fixed chunks of kReduceChunk consecutive indices.
// Each chunk accumulates its items in index order into a fresh accumulator; the
// chunk partials are then folded in chunk order on the calling thread. The
// result is therefore bit-identical for any thread count, including the serial
// path.
inline constexpr std::size_t kReduceChunk = 64;

enum class Execution { serial, parallel };

// Caps OpenMP workers for subsequent parallel reductions (0 keeps the runtime default).
inline void set_thread_count(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

// Acc must be copyable and provide `Acc& operator+=(const Acc&)`.
// body(index, acc) adds the contribution of item `index` to acc.
template <class Acc, class Body>
Acc chunked_reduce(std::size_t count, const Acc& zero, Body&& body,
                   Execution exec = Execution::parallel) {
  const std::size_t chunks = (count + kReduceChunk - 1) / kReduceChunk;
  std::vector<Acc> partials(chunks, zero);
  auto run_chunk = [&](std::size_t c) {
    const std::size_t begin = c * kReduceChunk;
    const std::size_t end = std::min(count, begin + kReduceChunk);
    Acc& acc = partials[c];
    for (std::size_t i = begin; i < end; ++i) body(i, acc);
  };
  if (exec == Execution::parallel && chunks > 1) {
    const auto n = static_cast<long>(chunks);
#pragma omp parallel for schedule(dynamic, 1)
    for (long c = 0; c < n; ++c) run_chunk(static_cast<std::size_t>(c));
  } else {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  }
  Acc total = zero;
  for (const auto& p : partials) total += p;
  return total;
}

}  // namespace cotlsa
