#pragma once

#include "adhoc/rational.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace adhoc {

/// maximize c'x  subject to  A x <= b,  x >= 0,  with b >= 0.
/// The origin is feasible, so the slack basis starts phase two directly.
template <typename Scalar>
struct LinearProgram {
  Matrix<Scalar> a;
  Vector<Scalar> b;
  Vector<Scalar> c;
};

template <typename Scalar>
struct LpSolution {
  Vector<Scalar> x;
  Scalar objective{0};
  std::size_t pivots{0};
};

namespace detail {

template <typename Scalar>
Scalar lp_tolerance() {
  return Scalar(0);
}
template <>
inline double lp_tolerance<double>() {
  return 1e-11;
}

}  // namespace detail

/// Dense tableau simplex with Bland's rule (lowest index enters, lowest
/// basic index leaves on ratio ties). Deterministic for a given input
/// ordering; exact when Scalar is Rational.
template <typename Scalar>
LpSolution<Scalar> solve_lp(const LinearProgram<Scalar>& lp, std::size_t max_pivots = 200000) {
  const Eigen::Index m = lp.a.rows();
  const Eigen::Index nv = lp.a.cols();
  if (lp.b.size() != m || lp.c.size() != nv) throw std::invalid_argument("solve_lp: dimension mismatch");
  const Scalar tol = detail::lp_tolerance<Scalar>();
  for (Eigen::Index i = 0; i < m; ++i)
    if (lp.b(i) < Scalar(0)) throw std::invalid_argument("solve_lp: negative right-hand side");

  // columns: structural, slack, rhs; last row holds reduced costs (negated objective)
  Matrix<Scalar> t = Matrix<Scalar>::Zero(m + 1, nv + m + 1);
  t.topLeftCorner(m, nv) = lp.a;
  for (Eigen::Index i = 0; i < m; ++i) {
    t(i, nv + i) = Scalar(1);
    t(i, nv + m) = lp.b(i);
  }
  for (Eigen::Index j = 0; j < nv; ++j) t(m, j) = -lp.c(j);
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = nv + i;

  LpSolution<Scalar> sol;
  const Eigen::Index rhs = nv + m;
  for (;;) {
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < nv + m; ++j)
      if (t(m, j) < -tol) {
        enter = j;
        break;
      }
    if (enter < 0) break;
    Eigen::Index leave = -1;
    Scalar best(0);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!(t(i, enter) > tol)) continue;
      Scalar ratio = t(i, rhs) / t(i, enter);
      if (leave < 0 || ratio < best ||
          (ratio == best && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
        leave = i;
        best = ratio;
      }
    }
    if (leave < 0) throw std::runtime_error("solve_lp: unbounded");
    if (++sol.pivots > max_pivots) throw std::runtime_error("solve_lp: pivot limit");
    const Scalar p = t(leave, enter);
    t.row(leave) /= p;
    for (Eigen::Index i = 0; i <= m; ++i) {
      if (i == leave) continue;
      const Scalar f = t(i, enter);
      if (f == Scalar(0)) continue;
      t.row(i) -= f * t.row(leave);
    }
    basis[static_cast<std::size_t>(leave)] = enter;
  }
  sol.x = Vector<Scalar>::Zero(nv);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index j = basis[static_cast<std::size_t>(i)];
    if (j < nv) sol.x(j) = t(i, rhs);
  }
  sol.objective = t(m, rhs);
  return sol;
}

}  // namespace adhoc
