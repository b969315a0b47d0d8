#pragma once

// Shared helpers for the test binaries. Nothing here calls into the code
// under test except where noted, so the helpers can serve as references.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "fagh/models.hpp"
#include "fagh/param_vector.hpp"

namespace fagh::testing {

inline ParamVector random_vector(std::size_t d, std::mt19937_64& rng, double lo = -1.0,
                                 double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(d);
  for (auto& x : v) x = u(rng);
  return ParamVector(std::move(v));
}

inline Batch random_batch(std::size_t n, std::size_t dim, std::size_t classes,
                          std::mt19937_64& rng) {
  Batch b;
  b.input_dim = dim;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, static_cast<int>(classes) - 1);
  for (std::size_t i = 0; i < n * dim; ++i) b.features.push_back(normal(rng));
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(label(rng));
  return b;
}

inline double rel_err(const ParamVector& x, const ParamVector& ref) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - ref[i]) * (x[i] - ref[i]);
    den += ref[i] * ref[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

inline double max_abs_diff(const ParamVector& a, const ParamVector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Full d x d Hessian by central differences of the analytic gradient
// (row-major). Relies on gradient(), which is itself checked against
// differences of loss() elsewhere.
inline std::vector<double> fd_hessian(const ModelSpec& spec, const ParamVector& w,
                                      const Batch& batch, double eps = 1e-5) {
  const std::size_t d = w.size();
  std::vector<double> h(d * d);
  for (std::size_t k = 0; k < d; ++k) {
    ParamVector wp = w, wm = w;
    wp[k] += eps;
    wm[k] -= eps;
    const ParamVector gp = gradient(spec, wp, batch);
    const ParamVector gm = gradient(spec, wm, batch);
    for (std::size_t j = 0; j < d; ++j) h[k * d + j] = (gp[j] - gm[j]) / (2 * eps);
  }
  return h;
}

// Softmax cross-entropy MLR written out directly, for cross-checking the
// generic layer code. Weight layout matches ModelSpec: [class][feature] then bias.
inline double naive_mlr_loss(std::size_t D, std::size_t C, bool bias, const ParamVector& w,
                             const Batch& b) {
  double total = 0.0;
  for (std::size_t s = 0; s < b.size(); ++s) {
    std::vector<double> z(C, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t j = 0; j < D; ++j) z[c] += w[c * D + j] * b.features[s * D + j];
      if (bias) z[c] += w[C * D + c];
    }
    double zmax = z[0];
    for (double v : z) zmax = std::max(zmax, v);
    double se = 0.0;
    for (double v : z) se += std::exp(v - zmax);
    total += zmax + std::log(se) - z[static_cast<std::size_t>(b.labels[s])];
  }
  return total / static_cast<double>(b.size());
}

}  // namespace fagh::testing
