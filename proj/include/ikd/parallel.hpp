#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace ikd {

/// Execution mode for the data-parallel kernels. Serial is the reference
/// implementation; Parallel runs the same per-item work under OpenMP and must
/// produce bitwise-identical results.
enum class ExecMode { Serial, Parallel };

/// Caps the number of worker threads used by Parallel kernels.
/// n <= 0 restores the hardware default.
void set_thread_cap(int n);

/// Number of threads a Parallel kernel will actually use.
int effective_threads();

/// Runs fn(i) for every i in [0, count). Items must be independent: each
/// writes only to its own preassigned slot, so scheduling order cannot change
/// the result.
void parallel_for_index(int count, ExecMode mode, const std::function<void(int)>& fn);

/// Reduces items[0..n) with a fixed pairwise tree: stride doubling, always
/// combining slot i with slot i+stride. The combination order depends only on
/// n, never on thread count, so parallel producers feeding this reduction get
/// bitwise-reproducible sums.
template <class T, class Combine>
T tree_reduce(std::vector<T> items, Combine combine) {
  const std::size_t n = items.size();
  for (std::size_t stride = 1; stride < n; stride *= 2) {
    for (std::size_t i = 0; i + stride < n; i += 2 * stride) {
      combine(items[i], items[i + stride]);
    }
  }
  return items.empty() ? T{} : std::move(items[0]);
}

/// tree_reduce specialised to plain doubles.
double pairwise_sum(std::vector<double> values);

}  // namespace ikd
