#include "ikd/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>

#ifdef IKD_HAVE_OPENMP
#include <omp.h>
#endif

namespace ikd {

namespace {
std::atomic<int> g_thread_cap{0};
}

void set_thread_cap(int n) { g_thread_cap.store(n > 0 ? n : 0); }

int effective_threads() {
#ifdef IKD_HAVE_OPENMP
  int hw = omp_get_max_threads();
#else
  int hw = 1;
#endif
  int cap = g_thread_cap.load();
  return cap > 0 ? std::min(cap, hw) : hw;
}

void parallel_for_index(int count, ExecMode mode, const std::function<void(int)>& fn) {
#ifdef IKD_HAVE_OPENMP
  if (mode == ExecMode::Parallel && count > 1) {
    const int threads = effective_threads();
    std::exception_ptr first_error;
    std::mutex error_mutex;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
    if (first_error) std::rethrow_exception(first_error);
    return;
  }
#else
  (void)mode;
#endif
  for (int i = 0; i < count; ++i) {
    fn(i);
  }
}

double pairwise_sum(std::vector<double> values) {
  return tree_reduce(std::move(values), [](double& a, const double& b) { a += b; });
}

}  // namespace ikd
