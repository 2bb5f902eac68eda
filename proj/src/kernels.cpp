#include "tier/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tier::kernels {

namespace {
bool g_parallel = true;
}

void set_parallel(bool on) { g_parallel = on; }
bool parallel() {
#ifdef _OPENMP
  return g_parallel;
#else
  return false;
#endif
}

void set_max_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

namespace {

// One output row of the matmul; shared by both paths so they stay bit-equal.
inline void matmul_row(const double* a, const double* b, double* y, std::size_t i, std::size_t m,
                       std::size_t k, std::size_t n, bool ta, bool tb, bool accumulate) {
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = ta ? a[l * m + i] : a[i * k + l];
      const double bv = tb ? b[j * k + l] : b[l * n + j];
      acc += av * bv;
    }
    double& out = y[i * n + j];
    out = accumulate ? out + acc : acc;
  }
}

inline void softmax_row(const double* x, double* p, std::size_t i, std::size_t c) {
  const double* xr = x + i * c;
  double* pr = p + i * c;
  double mx = xr[0];
  for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, xr[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    pr[j] = std::exp(xr[j] - mx);
    sum += pr[j];
  }
  for (std::size_t j = 0; j < c; ++j) pr[j] /= sum;
}

inline double entropy_row(const double* p, std::size_t i, std::size_t c) {
  const double* pr = p + i * c;
  double h = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    if (pr[j] != 0.0) h -= pr[j] * std::log(pr[j]);
  }
  return h;
}

}  // namespace

void matmul_serial(const double* a, const double* b, double* y, std::size_t m, std::size_t k,
                   std::size_t n, bool ta, bool tb, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) matmul_row(a, b, y, i, m, k, n, ta, tb, accumulate);
}

void matmul_parallel(const double* a, const double* b, double* y, std::size_t m, std::size_t k,
                     std::size_t n, bool ta, bool tb, bool accumulate) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    matmul_row(a, b, y, static_cast<std::size_t>(i), m, k, n, ta, tb, accumulate);
  }
#else
  matmul_serial(a, b, y, m, k, n, ta, tb, accumulate);
#endif
}

void matmul(const double* a, const double* b, double* y, std::size_t m, std::size_t k,
            std::size_t n, bool ta, bool tb, bool accumulate) {
  if (parallel()) {
    matmul_parallel(a, b, y, m, k, n, ta, tb, accumulate);
  } else {
    matmul_serial(a, b, y, m, k, n, ta, tb, accumulate);
  }
}

void softmax_rows_serial(const double* x, double* p, std::size_t r, std::size_t c) {
  for (std::size_t i = 0; i < r; ++i) softmax_row(x, p, i, c);
}

void softmax_rows_parallel(const double* x, double* p, std::size_t r, std::size_t c) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(r); ++i) {
    softmax_row(x, p, static_cast<std::size_t>(i), c);
  }
#else
  softmax_rows_serial(x, p, r, c);
#endif
}

void softmax_rows(const double* x, double* p, std::size_t r, std::size_t c) {
  if (parallel()) {
    softmax_rows_parallel(x, p, r, c);
  } else {
    softmax_rows_serial(x, p, r, c);
  }
}

void row_entropy_serial(const double* p, double* h, std::size_t r, std::size_t c) {
  for (std::size_t i = 0; i < r; ++i) h[i] = entropy_row(p, i, c);
}

void row_entropy_parallel(const double* p, double* h, std::size_t r, std::size_t c) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(r); ++i) {
    h[i] = entropy_row(p, static_cast<std::size_t>(i), c);
  }
#else
  row_entropy_serial(p, h, r, c);
#endif
}

void row_entropy(const double* p, double* h, std::size_t r, std::size_t c) {
  if (parallel()) {
    row_entropy_parallel(p, h, r, c);
  } else {
    row_entropy_serial(p, h, r, c);
  }
}

void tanh_map_serial(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

void tanh_map_parallel(const double* x, double* y, std::size_t n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    y[i] = std::tanh(x[i]);
  }
#else
  tanh_map_serial(x, y, n);
#endif
}

void tanh_map(const double* x, double* y, std::size_t n) {
  if (parallel()) {
    tanh_map_parallel(x, y, n);
  } else {
    tanh_map_serial(x, y, n);
  }
}

}  // namespace tier::kernels
