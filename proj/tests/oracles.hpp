#pragma once

// Independent oracles for the test suite. Everything here recomputes results
// from first principles (pairwise enumeration, finite differences, explicit
// loops) and must stay decoupled from the library implementation paths it
// checks.

#include <door/rng.hpp>
#include <door/types.hpp>

#include <functional>

namespace door::testing {

// DOOR probability by exhaustive scoring of all K^2 outcome pairs.
inline double door_pairwise_oracle(const Vector& p1, const Vector& p0) {
  double d = 0.0;
  for (Index k = 0; k < p1.size(); ++k)
    for (Index l = 0; l < p0.size(); ++l) {
      const double score = k > l ? 1.0 : (k == l ? 0.5 : 0.0);
      d += score * p1[k] * p0[l];
    }
  return d;
}

// Random point on the K-simplex (normalized exponentials keep it interior).
inline Vector random_simplex(Index levels, RngStream& rng) {
  Vector p(levels);
  for (Index k = 0; k < levels; ++k) p[k] = -std::log(1.0 - rng.uniform());
  return p / p.sum();
}

// Central finite difference of a scalar function.
inline double central_difference(const std::function<double(const Vector&)>& f, const Vector& at,
                                 Index coord, double step) {
  Vector hi = at, lo = at;
  hi[coord] += step;
  lo[coord] -= step;
  return (f(hi) - f(lo)) / (2.0 * step);
}

// Second-order central difference (finite-difference Hessian entry).
inline double central_difference2(const std::function<double(const Vector&)>& f, const Vector& at,
                                  Index r, Index s, double step) {
  auto shifted = [&](double dr, double ds) {
    Vector x = at;
    x[r] += dr;
    x[s] += ds;
    return f(x);
  };
  return (shifted(step, step) - shifted(step, -step) - shifted(-step, step) +
          shifted(-step, -step)) /
         (4.0 * step * step);
}

}  // namespace door::testing
