#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace tier {

// OpenMP loop over [0, n) whose body may throw. Exceptions cannot cross a
// parallel region, so they are captured per index and the lowest-index one is
// rethrown afterwards (deterministic regardless of thread count).
template <typename F>
void parallel_for(std::size_t n, F&& fn) {
  std::vector<std::exception_ptr> errors(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
  }
}

}  // namespace tier
