#pragma once

// Finite-difference oracles and random-tensor helpers shared by the test
// suites. These stay independent of the tape's backward pass: they only call
// forward evaluations.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "tier/rng.hpp"
#include "tier/tensor.hpp"

namespace testsupport {

inline tier::Tensor random_tensor(std::vector<std::size_t> shape, tier::rng::Stream& stream,
                                  double lo = -1.0, double hi = 1.0) {
  tier::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = stream.uniform(lo, hi);
  return t;
}

inline tier::Tensor random_unit_rows(std::size_t r, std::size_t c, tier::rng::Stream& stream) {
  tier::Tensor t({r, c});
  for (std::size_t i = 0; i < r; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      t.at(i, j) = stream.normal();
      sq += t.at(i, j) * t.at(i, j);
    }
    const double norm = std::sqrt(sq);
    for (std::size_t j = 0; j < c; ++j) t.at(i, j) /= norm;
  }
  return t;
}

// Central finite difference of a scalar function with respect to xs[i].
inline double central_difference(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> xs, std::size_t i, double h = 1e-5) {
  xs[i] += h;
  const double fp = f(xs);
  xs[i] -= 2.0 * h;
  const double fm = f(xs);
  return (fp - fm) / (2.0 * h);
}

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// rtol/atol gradient comparison used by the gradient-check criteria.
inline bool grad_close(double analytic, double fd, double rtol = 1e-4, double atol = 1e-8) {
  return std::abs(analytic - fd) <= rtol * std::max(std::abs(analytic), std::abs(fd)) + atol;
}

}  // namespace testsupport
