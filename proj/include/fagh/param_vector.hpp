#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace fagh {

/// Flat float64 vector of model parameters, gradients, Hessian rows and
/// moment estimates. The length is fixed at construction.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t dim, double fill = 0.0) : values_(dim, fill) {}
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}
  ParamVector(std::initializer_list<double> values) : values_(values) {}

  /// Unit vector e_index of length dim.
  static ParamVector basis(std::size_t dim, std::size_t index);

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }

  std::span<const double> view() const noexcept { return values_; }
  std::span<double> view() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }
  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }

  bool all_finite() const noexcept;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

/// Throws DimensionError naming `what` when the lengths differ.
void require_same_dim(const ParamVector& a, const ParamVector& b, std::string_view what);
/// Throws NumericError naming `what` when any entry is NaN or infinite.
void require_finite(const ParamVector& v, std::string_view what);

// Element-wise helpers. All reductions accumulate sequentially from index 0.
double dot(const ParamVector& a, const ParamVector& b);
double norm_sq(const ParamVector& a);
double max_abs(const ParamVector& a);

ParamVector operator+(const ParamVector& a, const ParamVector& b);
ParamVector operator-(const ParamVector& a, const ParamVector& b);
ParamVector operator*(double s, const ParamVector& a);

/// y += alpha * x
void axpy(double alpha, const ParamVector& x, ParamVector& y);

}  // namespace fagh
