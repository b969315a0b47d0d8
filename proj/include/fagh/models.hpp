#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fagh/param_vector.hpp"

namespace fagh {

enum class ModelKind { kMlr, kMlp };

/// Architecture of a softmax classifier. MLR is a single affine layer; MLP
/// adds tanh hidden layers.
///
/// Parameters are flattened layer by layer. Each weight matrix is row-major
/// [output unit, input feature], followed by that layer's bias when
/// include_bias is set. Coordinate 0 is therefore the weight from input
/// feature 0 to the first unit of the first layer.
struct ModelSpec {
  ModelKind kind = ModelKind::kMlr;
  std::size_t input_dim = 1;
  std::size_t num_classes = 2;
  std::vector<std::size_t> hidden_sizes;
  bool include_bias = true;

  static ModelSpec mlr(std::size_t input_dim, std::size_t num_classes, bool include_bias = true);
  static ModelSpec mlp(std::size_t input_dim, std::vector<std::size_t> hidden_sizes,
                       std::size_t num_classes, bool include_bias = true);

  std::size_t param_count() const;
  /// Throws InvalidArgument for an inconsistent architecture.
  void validate() const;
};

/// Row-major n x input_dim feature matrix plus labels.
struct Batch {
  std::size_t input_dim = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * input_dim, input_dim);
  }
  /// Copies the selected rows in the given order.
  Batch gather(std::span<const std::size_t> indices) const;
};

/// Mean softmax cross-entropy over the batch.
double loss(const ModelSpec& spec, const ParamVector& w, const Batch& batch);

/// Exact gradient of loss().
ParamVector gradient(const ModelSpec& spec, const ParamVector& w, const Batch& batch);

/// d(gradient[0]) / dw, i.e. the first row of the Hessian of loss().
ParamVector hessian_first_row(const ModelSpec& spec, const ParamVector& w, const Batch& batch);

/// Exact Hessian-vector product H u by forward-mode differentiation of the
/// backward pass. Never forms the d x d Hessian.
ParamVector hvp(const ModelSpec& spec, const ParamVector& w, const Batch& batch,
                const ParamVector& u);

/// Fraction of samples whose arg-max logit equals the label; ties go to the
/// lowest class index.
double accuracy(const ModelSpec& spec, const ParamVector& w, const Batch& batch);

/// Central-difference references for gradient() and hessian_first_row().
struct FiniteDiffResult {
  ParamVector gradient;     // from loss()
  ParamVector hessian_row;  // from gradient()[0]
};

inline constexpr double kFiniteDiffStep = 1e-5;

FiniteDiffResult finite_diff_oracles(const ModelSpec& spec, const ParamVector& w,
                                     const Batch& batch, double step = kFiniteDiffStep);

/// Deterministic starting point: zeros for MLR, uniform in
/// +-fan_in^(-1/2) per layer for MLP.
ParamVector initial_parameters(const ModelSpec& spec, std::uint64_t seed);

std::string to_string(ModelKind kind);

}  // namespace fagh
