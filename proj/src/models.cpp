#include "fagh/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fagh/errors.hpp"
#include "fagh/rng.hpp"

namespace fagh {

ModelSpec ModelSpec::mlr(std::size_t input_dim, std::size_t num_classes, bool include_bias) {
  ModelSpec s{ModelKind::kMlr, input_dim, num_classes, {}, include_bias};
  s.validate();
  return s;
}

ModelSpec ModelSpec::mlp(std::size_t input_dim, std::vector<std::size_t> hidden_sizes,
                         std::size_t num_classes, bool include_bias) {
  ModelSpec s{ModelKind::kMlp, input_dim, num_classes, std::move(hidden_sizes), include_bias};
  s.validate();
  return s;
}

void ModelSpec::validate() const {
  if (input_dim == 0) throw InvalidArgument("model: input_dim must be positive");
  if (num_classes < 2) throw InvalidArgument("model: num_classes must be at least 2");
  if (kind == ModelKind::kMlr && !hidden_sizes.empty()) {
    throw InvalidArgument("model: mlr takes no hidden layers");
  }
  if (kind == ModelKind::kMlp && hidden_sizes.empty()) {
    throw InvalidArgument("model: mlp needs at least one hidden layer");
  }
  for (auto h : hidden_sizes) {
    if (h == 0) throw InvalidArgument("model: hidden layer sizes must be positive");
  }
}

std::size_t ModelSpec::param_count() const {
  std::size_t d = 0;
  std::size_t in = input_dim;
  auto add_layer = [&](std::size_t out) {
    d += out * in + (include_bias ? out : 0);
    in = out;
  };
  for (auto h : hidden_sizes) add_layer(h);
  add_layer(num_classes);
  return d;
}

std::string to_string(ModelKind kind) { return kind == ModelKind::kMlr ? "mlr" : "mlp"; }

Batch Batch::gather(std::span<const std::size_t> indices) const {
  Batch out;
  out.input_dim = input_dim;
  out.features.reserve(indices.size() * input_dim);
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    if (i >= size()) throw InvalidArgument("Batch::gather: index out of range");
    auto r = row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.labels.push_back(labels[i]);
  }
  return out;
}

namespace {

struct Layer {
  std::size_t in;
  std::size_t out;
  std::size_t w_off;
  std::size_t b_off;  // meaningful only when has_bias
  bool has_bias;
};

std::vector<Layer> make_layout(const ModelSpec& spec) {
  std::vector<Layer> layers;
  std::size_t in = spec.input_dim;
  std::size_t off = 0;
  auto add = [&](std::size_t out) {
    Layer l{in, out, off, off + out * in, spec.include_bias};
    off += out * in + (spec.include_bias ? out : 0);
    layers.push_back(l);
    in = out;
  };
  for (auto h : spec.hidden_sizes) add(h);
  add(spec.num_classes);
  return layers;
}

void validate_inputs(const ModelSpec& spec, const ParamVector& w, const Batch& batch) {
  spec.validate();
  const std::size_t d = spec.param_count();
  if (w.size() != d) {
    throw DimensionError("model: parameter vector has length " + std::to_string(w.size()) +
                         ", model expects " + std::to_string(d));
  }
  if (batch.empty()) throw InvalidArgument("model: empty batch");
  if (batch.input_dim != spec.input_dim) {
    throw DimensionError("model: batch input_dim " + std::to_string(batch.input_dim) +
                         " does not match model input_dim " + std::to_string(spec.input_dim));
  }
  if (batch.features.size() != batch.size() * batch.input_dim) {
    throw DimensionError("model: feature matrix size does not match labels");
  }
  for (int y : batch.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= spec.num_classes) {
      throw InvalidArgument("model: label " + std::to_string(y) + " outside [0, " +
                            std::to_string(spec.num_classes) + ")");
    }
  }
}

/// Per-sample forward / backward machinery shared by loss, gradient and the
/// Hessian-vector product. Buffers are reused across samples.
class Evaluator {
 public:
  Evaluator(const ModelSpec& spec, const ParamVector& w)
      : layers_(make_layout(spec)), w_(w), acts_(layers_.size()), r_acts_(layers_.size()) {
    for (std::size_t l = 1; l < layers_.size(); ++l) {
      acts_[l].resize(layers_[l].in);
      r_acts_[l].resize(layers_[l].in);
    }
    logits_.resize(spec.num_classes);
    r_logits_.resize(spec.num_classes);
  }

  /// Forward pass; returns the logits.
  const std::vector<double>& forward(std::span<const double> x) {
    acts_[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Layer& L = layers_[l];
      std::vector<double>& z = (l + 1 < layers_.size()) ? acts_[l + 1] : logits_;
      affine(L, w_, acts_[l], z);
      if (l + 1 < layers_.size()) {
        for (double& v : z) v = std::tanh(v);
      }
    }
    return logits_;
  }

  /// Cross-entropy of the last forward pass against `label`.
  double sample_loss(int label) const {
    const double m = *std::max_element(logits_.begin(), logits_.end());
    double s = 0.0;
    for (double z : logits_) s += std::exp(z - m);
    return m + std::log(s) - logits_[static_cast<std::size_t>(label)];
  }

  /// Tangent of the forward pass along direction u (call after forward()).
  void forward_tangent(const ParamVector& u) {
    r_acts_[0].assign(acts_[0].size(), 0.0);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Layer& L = layers_[l];
      std::vector<double>& rz = (l + 1 < layers_.size()) ? r_acts_[l + 1] : r_logits_;
      // R(z) = U a + W R(a) + u_b
      affine(L, u, acts_[l], rz);
      if (l > 0) {
        for (std::size_t o = 0; o < L.out; ++o) {
          const double* wrow = w_.values().data() + L.w_off + o * L.in;
          double acc = 0.0;
          for (std::size_t i = 0; i < L.in; ++i) acc += wrow[i] * r_acts_[l][i];
          rz[o] += acc;
        }
      }
      if (l + 1 < layers_.size()) {
        const auto& a = acts_[l + 1];
        for (std::size_t o = 0; o < L.out; ++o) rz[o] *= (1.0 - a[o] * a[o]);
      }
    }
  }

  /// Backward pass for one sample. Adds the sample gradient into `grad` and,
  /// when `hu` is non-null, the sample's H u into `hu` (requires
  /// forward_tangent with the same u).
  void backward(int label, ParamVector* grad, const ParamVector* u, ParamVector* hu) {
    const std::size_t C = logits_.size();
    delta_.resize(C);
    const double m = *std::max_element(logits_.begin(), logits_.end());
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      delta_[c] = std::exp(logits_[c] - m);
      s += delta_[c];
    }
    for (double& p : delta_) p /= s;
    if (hu != nullptr) {
      // R(p) = p * (Rz - p.Rz)
      double p_dot = 0.0;
      for (std::size_t c = 0; c < C; ++c) p_dot += delta_[c] * r_logits_[c];
      r_delta_.resize(C);
      for (std::size_t c = 0; c < C; ++c) r_delta_[c] = delta_[c] * (r_logits_[c] - p_dot);
    }
    delta_[static_cast<std::size_t>(label)] -= 1.0;

    for (std::size_t li = layers_.size(); li-- > 0;) {
      const Layer& L = layers_[li];
      const auto& a = acts_[li];
      if (grad != nullptr) {
        for (std::size_t o = 0; o < L.out; ++o) {
          double* g = &(*grad)[L.w_off + o * L.in];
          for (std::size_t i = 0; i < L.in; ++i) g[i] += delta_[o] * a[i];
          if (L.has_bias) (*grad)[L.b_off + o] += delta_[o];
        }
      }
      if (hu != nullptr) {
        const auto& ra = r_acts_[li];
        for (std::size_t o = 0; o < L.out; ++o) {
          double* h = &(*hu)[L.w_off + o * L.in];
          for (std::size_t i = 0; i < L.in; ++i) h[i] += r_delta_[o] * a[i] + delta_[o] * ra[i];
          if (L.has_bias) (*hu)[L.b_off + o] += r_delta_[o];
        }
      }
      if (li == 0) break;

      // Propagate into the tanh layer below.
      da_.assign(L.in, 0.0);
      if (hu != nullptr) r_da_.assign(L.in, 0.0);
      for (std::size_t o = 0; o < L.out; ++o) {
        const double* wrow = w_.values().data() + L.w_off + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) da_[i] += wrow[i] * delta_[o];
        if (hu != nullptr) {
          const double* urow = u->values().data() + L.w_off + o * L.in;
          for (std::size_t i = 0; i < L.in; ++i) {
            r_da_[i] += urow[i] * delta_[o] + wrow[i] * r_delta_[o];
          }
        }
      }
      delta_.resize(L.in);
      if (hu != nullptr) r_delta_.resize(L.in);
      const auto& ra = r_acts_[li];
      for (std::size_t i = 0; i < L.in; ++i) {
        const double deriv = 1.0 - a[i] * a[i];
        delta_[i] = deriv * da_[i];
        if (hu != nullptr) r_delta_[i] = deriv * r_da_[i] - 2.0 * a[i] * ra[i] * da_[i];
      }
    }
  }

 private:
  // z = W a + b using parameters p (either w or a tangent direction).
  static void affine(const Layer& L, const ParamVector& p, const std::vector<double>& a,
                     std::vector<double>& z) {
    z.resize(L.out);
    for (std::size_t o = 0; o < L.out; ++o) {
      const double* row = p.values().data() + L.w_off + o * L.in;
      double acc = L.has_bias ? p[L.b_off + o] : 0.0;
      for (std::size_t i = 0; i < L.in; ++i) acc += row[i] * a[i];
      z[o] = acc;
    }
  }

  std::vector<Layer> layers_;
  const ParamVector& w_;
  std::vector<std::vector<double>> acts_;    // acts_[l] is the input to layer l
  std::vector<std::vector<double>> r_acts_;  // tangents of acts_
  std::vector<double> logits_, r_logits_;
  std::vector<double> delta_, r_delta_, da_, r_da_;
};

}  // namespace

double loss(const ModelSpec& spec, const ParamVector& w, const Batch& batch) {
  validate_inputs(spec, w, batch);
  Evaluator ev(spec, w);
  double total = 0.0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    ev.forward(batch.row(j));
    total += ev.sample_loss(batch.labels[j]);
  }
  return total / static_cast<double>(batch.size());
}

ParamVector gradient(const ModelSpec& spec, const ParamVector& w, const Batch& batch) {
  validate_inputs(spec, w, batch);
  Evaluator ev(spec, w);
  ParamVector grad(w.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    ev.forward(batch.row(j));
    ev.backward(batch.labels[j], &grad, nullptr, nullptr);
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad) g *= inv_n;
  return grad;
}

ParamVector hvp(const ModelSpec& spec, const ParamVector& w, const Batch& batch,
                const ParamVector& u) {
  validate_inputs(spec, w, batch);
  require_same_dim(w, u, "hvp");
  Evaluator ev(spec, w);
  ParamVector hu(w.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    ev.forward(batch.row(j));
    ev.forward_tangent(u);
    ev.backward(batch.labels[j], nullptr, &u, &hu);
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (double& h : hu) h *= inv_n;
  return hu;
}

ParamVector hessian_first_row(const ModelSpec& spec, const ParamVector& w, const Batch& batch) {
  // The Hessian is symmetric, so its first row is H e_0.
  return hvp(spec, w, batch, ParamVector::basis(spec.param_count(), 0));
}

double accuracy(const ModelSpec& spec, const ParamVector& w, const Batch& batch) {
  validate_inputs(spec, w, batch);
  Evaluator ev(spec, w);
  std::size_t correct = 0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto& z = ev.forward(batch.row(j));
    std::size_t best = 0;
    for (std::size_t c = 1; c < z.size(); ++c) {
      if (z[c] > z[best]) best = c;
    }
    if (best == static_cast<std::size_t>(batch.labels[j])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

FiniteDiffResult finite_diff_oracles(const ModelSpec& spec, const ParamVector& w,
                                     const Batch& batch, double step) {
  validate_inputs(spec, w, batch);
  if (!(step > 0.0)) throw InvalidArgument("finite_diff_oracles: step must be positive");
  const std::size_t d = w.size();
  FiniteDiffResult out{ParamVector(d), ParamVector(d)};
  ParamVector probe = w;
  for (std::size_t k = 0; k < d; ++k) {
    probe[k] = w[k] + step;
    const double lp = loss(spec, probe, batch);
    const double gp = gradient(spec, probe, batch)[0];
    probe[k] = w[k] - step;
    const double lm = loss(spec, probe, batch);
    const double gm = gradient(spec, probe, batch)[0];
    probe[k] = w[k];
    out.gradient[k] = (lp - lm) / (2.0 * step);
    out.hessian_row[k] = (gp - gm) / (2.0 * step);
  }
  return out;
}

ParamVector initial_parameters(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector w(spec.param_count());
  if (spec.kind == ModelKind::kMlr) return w;

  auto rng = make_stream(seed, StreamTag::kInit);
  for (const Layer& L : make_layout(spec)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(L.in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t k = 0; k < L.out * L.in; ++k) w[L.w_off + k] = dist(rng);
    if (L.has_bias) {
      for (std::size_t o = 0; o < L.out; ++o) w[L.b_off + o] = dist(rng);
    }
  }
  return w;
}

}  // namespace fagh
