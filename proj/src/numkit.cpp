#include "fagh/numkit.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "fagh/errors.hpp"

namespace fagh {

namespace {

void require_beta(double beta, const char* name) {
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw InvalidArgument(std::string(name) + " must lie in [0, 1), got " + std::to_string(beta));
  }
}

}  // namespace

ParamVector weighted_average(std::span<const ParamVector> vectors,
                             std::span<const double> weights) {
  if (vectors.empty()) throw InvalidArgument("weighted_average: empty vector list");
  if (vectors.size() != weights.size()) {
    throw DimensionError("weighted_average: " + std::to_string(vectors.size()) + " vectors but " +
                         std::to_string(weights.size()) + " weights");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InvalidArgument("weighted_average: weights must be finite and non-negative");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > kWeightSumTol) {
    throw InvalidArgument("weighted_average: weights sum to " + std::to_string(total) + ", not 1");
  }

  const std::size_t dim = vectors.front().size();
  ParamVector out(dim);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    require_same_dim(vectors[i], out, "weighted_average");
    require_finite(vectors[i], "weighted_average");
    for (std::size_t k = 0; k < dim; ++k) out[k] += weights[i] * vectors[i][k];
  }
  return out;
}

MomentState MomentState::zeros(std::size_t dim, double beta1, double beta2) {
  require_beta(beta1, "beta1");
  require_beta(beta2, "beta2");
  return MomentState{ParamVector(dim), ParamVector(dim), 0, beta1, beta2};
}

MomentState ema_update(const MomentState& state, const ParamVector& g, const ParamVector& v) {
  require_same_dim(state.m1, g, "ema_update(g)");
  require_same_dim(state.m2, v, "ema_update(v)");
  require_finite(g, "ema_update(g)");
  require_finite(v, "ema_update(v)");

  MomentState next = state;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  for (std::size_t k = 0; k < g.size(); ++k) {
    next.m1[k] = b1 * state.m1[k] + (1.0 - b1) * g[k];
    next.m2[k] = b2 * state.m2[k] + (1.0 - b2) * v[k];
  }
  next.t = state.t + 1;
  return next;
}

CorrectedMoments bias_correct(const MomentState& state) {
  if (state.t == 0) throw NumericError("bias_correct: step count is zero");
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  CorrectedMoments out{ParamVector(state.dim()), ParamVector(state.dim())};
  for (std::size_t k = 0; k < state.dim(); ++k) {
    out.gradient[k] = state.m1[k] / c1;
    out.hessian_row[k] = state.m2[k] / c2;
  }
  return out;
}

Rank1Solve rank1_regularized_solve(const ParamVector& V, const ParamVector& G, double rho,
                                   double pivot_eps) {
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    throw InvalidArgument("rank1_regularized_solve: rho must be positive, got " +
                          std::to_string(rho));
  }
  require_same_dim(V, G, "rank1_regularized_solve");
  if (V.empty()) throw DimensionError("rank1_regularized_solve: empty vectors");
  require_finite(V, "rank1_regularized_solve(V)");
  require_finite(G, "rank1_regularized_solve(G)");

  const std::size_t d = G.size();
  Rank1Solve out{ParamVector(d), false};
  auto gradient_step = [&] {
    for (std::size_t k = 0; k < d; ++k) out.direction[k] = G[k] / rho;
    out.fallback = true;
    return out;
  };

  const double pivot = V[0];
  if (std::abs(pivot) < pivot_eps) return gradient_step();

  // Z = V / V[0]; V.Z and V.G are the only reductions needed.
  double v_dot_z = 0.0;
  double v_dot_g = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    v_dot_z += V[k] * (V[k] / pivot);
    v_dot_g += V[k] * G[k];
  }
  const double denom = 1.0 + v_dot_z / rho;
  if (std::abs(denom) < pivot_eps) return gradient_step();

  const double coeff = v_dot_g / (rho * rho) / denom;
  for (std::size_t k = 0; k < d; ++k) {
    out.direction[k] = G[k] / rho - (V[k] / pivot) * coeff;
  }
  if (!out.direction.all_finite()) return gradient_step();
  return out;
}

ParamVector dense_solve_oracle(const ParamVector& V, const ParamVector& G, double rho) {
  if (!(rho > 0.0)) throw InvalidArgument("dense_solve_oracle: rho must be positive");
  require_same_dim(V, G, "dense_solve_oracle");
  const auto d = static_cast<Eigen::Index>(G.size());
  if (d == 0) throw DimensionError("dense_solve_oracle: empty vectors");
  if (V[0] == 0.0) throw NumericError("dense_solve_oracle: V[0] is zero");

  const Eigen::Map<const Eigen::VectorXd> v(V.values().data(), d);
  const Eigen::Map<const Eigen::VectorXd> g(G.values().data(), d);
  Eigen::MatrixXd a = (v * v.transpose()) / V[0];
  a.diagonal().array() += rho;

  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const auto& u = lu.matrixLU();
  const double scale = u.diagonal().cwiseAbs().maxCoeff();
  if (u.diagonal().cwiseAbs().minCoeff() <= scale * 1e-15) {
    throw NumericError("dense_solve_oracle: singular system");
  }
  const Eigen::VectorXd x = lu.solve(g);
  return ParamVector(std::vector<double>(x.data(), x.data() + d));
}

}  // namespace fagh
