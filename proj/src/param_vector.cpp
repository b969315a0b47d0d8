#include "fagh/param_vector.hpp"

#include <cmath>
#include <string>

#include "fagh/errors.hpp"

namespace fagh {

ParamVector ParamVector::basis(std::size_t dim, std::size_t index) {
  if (index >= dim) {
    throw DimensionError("basis index " + std::to_string(index) + " out of range for dimension " +
                         std::to_string(dim));
  }
  ParamVector e(dim);
  e[index] = 1.0;
  return e;
}

bool ParamVector::all_finite() const noexcept {
  for (double x : values_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void require_same_dim(const ParamVector& a, const ParamVector& b, std::string_view what) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
  }
}

void require_finite(const ParamVector& v, std::string_view what) {
  if (!v.all_finite()) throw NumericError(std::string(what) + ": non-finite entry");
}

double dot(const ParamVector& a, const ParamVector& b) {
  require_same_dim(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm_sq(const ParamVector& a) {
  double acc = 0.0;
  for (double x : a) acc += x * x;
  return acc;
}

double max_abs(const ParamVector& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

ParamVector operator+(const ParamVector& a, const ParamVector& b) {
  require_same_dim(a, b, "operator+");
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

ParamVector operator-(const ParamVector& a, const ParamVector& b) {
  require_same_dim(a, b, "operator-");
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

ParamVector operator*(double s, const ParamVector& a) {
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
  return out;
}

void axpy(double alpha, const ParamVector& x, ParamVector& y) {
  require_same_dim(x, y, "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace fagh
