#pragma once

#include <cstddef>

namespace tier::kernels {

// Runtime switch between the serial reference kernels and the OpenMP ones.
// Both paths compute every output element with identical arithmetic order,
// so they are bit-identical; the tests assert this and the bench tool
// measures the difference.
void set_parallel(bool on);
bool parallel();

// Caps the OpenMP thread count (0 = library default).
void set_max_threads(int n);

// y = op(a) * op(b) with logical dims m x k times k x n. `ta`/`tb` select a
// transposed read of the operand (physical layouts k x m / n x k).
// `accumulate` adds into y instead of overwriting.
void matmul_serial(const double* a, const double* b, double* y, std::size_t m, std::size_t k,
                   std::size_t n, bool ta, bool tb, bool accumulate);
void matmul_parallel(const double* a, const double* b, double* y, std::size_t m, std::size_t k,
                     std::size_t n, bool ta, bool tb, bool accumulate);
void matmul(const double* a, const double* b, double* y, std::size_t m, std::size_t k,
            std::size_t n, bool ta, bool tb, bool accumulate);

// Row-wise softmax with max subtraction. x and p are r x c.
void softmax_rows_serial(const double* x, double* p, std::size_t r, std::size_t c);
void softmax_rows_parallel(const double* x, double* p, std::size_t r, std::size_t c);
void softmax_rows(const double* x, double* p, std::size_t r, std::size_t c);

// h[i] = sum_j -p[i][j] * ln(p[i][j]), with 0 ln 0 := 0. No input validation.
void row_entropy_serial(const double* p, double* h, std::size_t r, std::size_t c);
void row_entropy_parallel(const double* p, double* h, std::size_t r, std::size_t c);
void row_entropy(const double* p, double* h, std::size_t r, std::size_t c);

void tanh_map_serial(const double* x, double* y, std::size_t n);
void tanh_map_parallel(const double* x, double* y, std::size_t n);
void tanh_map(const double* x, double* y, std::size_t n);

}  // namespace tier::kernels
