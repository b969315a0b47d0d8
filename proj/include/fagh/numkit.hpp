#pragma once

#include <cstdint>
#include <span>

#include "fagh/param_vector.hpp"

namespace fagh {

/// Pivot threshold for the rank-1 solve. Below it the solve falls back to G / rho.
inline constexpr double kPivotEps = 1e-12;

/// Tolerance on |sum(weights) - 1| accepted by weighted_average.
inline constexpr double kWeightSumTol = 1e-9;

/// Returns sum_i weights[i] * vectors[i], accumulated in list order.
ParamVector weighted_average(std::span<const ParamVector> vectors,
                             std::span<const double> weights);

/// First and second exponential moving averages (gradient and Hessian first
/// row) with their decay rates and the number of completed updates.
struct MomentState {
  ParamVector m1;
  ParamVector m2;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.99;

  /// All-zero moments of length dim at t = 0. Throws when a beta is outside [0, 1).
  static MomentState zeros(std::size_t dim, double beta1, double beta2);

  std::size_t dim() const noexcept { return m1.size(); }
};

MomentState ema_update(const MomentState& state, const ParamVector& g, const ParamVector& v);

struct CorrectedMoments {
  ParamVector gradient;     // m1 / (1 - beta1^t)
  ParamVector hessian_row;  // m2 / (1 - beta2^t)
};

/// Removes the zero-initialisation bias. Requires state.t >= 1.
CorrectedMoments bias_correct(const MomentState& state);

struct Rank1Solve {
  ParamVector direction;
  bool fallback = false;
};

/// Solves (V V^T / V[0] + rho I) x = G with the Sherman-Morrison identity in
/// O(d) time and memory.
///
/// When |V[0]| < pivot_eps, or when the Sherman-Morrison denominator
/// |1 + V.Z / rho| < pivot_eps, the rank-1 term is dropped: the result is
/// G / rho with `fallback` set.
Rank1Solve rank1_regularized_solve(const ParamVector& V, const ParamVector& G, double rho,
                                   double pivot_eps = kPivotEps);

/// Reference solver: materialises the d x d matrix V V^T / V[0] + rho I and
/// factorises it. Test scale only (d <= 2000).
ParamVector dense_solve_oracle(const ParamVector& V, const ParamVector& G, double rho);

}  // namespace fagh
