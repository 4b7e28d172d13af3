#include "jigsaw/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "jigsaw/error.hpp"

namespace jigsaw {

Mlp::Mlp(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw ValidationError("an MLP needs input and output layers");
  if (std::find(sizes_.begin(), sizes_.end(), 0u) != sizes_.end()) throw ValidationError("MLP layers must be non-empty");
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(offset);
    offset += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
  }
  params_.assign(offset, 0.0);
}

Mlp Mlp::glorot(std::vector<std::size_t> layer_sizes, Rng& rng, double output_scale) {
  Mlp net(std::move(layer_sizes));
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const double fan_in = static_cast<double>(net.sizes_[l]);
    const double fan_out = static_cast<double>(net.sizes_[l + 1]);
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    if (l + 1 == net.layer_count()) limit *= output_scale;
    const std::size_t begin = net.weight_offset(l);
    const std::size_t end = net.bias_offset(l);
    for (std::size_t i = begin; i < end; ++i) net.params_[i] = limit * (2.0 * rng.uniform() - 1.0);
  }
  return net;
}

double& Mlp::weight(std::size_t layer, std::size_t out, std::size_t in) {
  return params_[weight_offset(layer) + out * sizes_[layer] + in];
}
double Mlp::weight(std::size_t layer, std::size_t out, std::size_t in) const {
  return params_[weight_offset(layer) + out * sizes_[layer] + in];
}
double& Mlp::bias(std::size_t layer, std::size_t out) { return params_[bias_offset(layer) + out]; }
double Mlp::bias(std::size_t layer, std::size_t out) const { return params_[bias_offset(layer) + out]; }

void Mlp::forward(std::span<const double> input, Trace& trace) const {
  if (input.size() != input_size()) throw ValidationError("MLP input has wrong dimension");
  trace.activations.resize(sizes_.size());
  trace.activations[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const std::size_t n_in = sizes_[l], n_out = sizes_[l + 1];
    const double* w = &params_[weight_offset(l)];
    const double* b = &params_[bias_offset(l)];
    const auto& x = trace.activations[l];
    auto& y = trace.activations[l + 1];
    y.resize(n_out);
    const bool hidden = l + 1 < layer_count();
    for (std::size_t o = 0; o < n_out; ++o) {
      double acc = b[o];
      const double* row = w + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * x[i];
      y[o] = hidden ? std::tanh(acc) : acc;
    }
  }
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
  Trace trace;
  forward(input, trace);
  return std::move(trace.activations.back());
}

void Mlp::accumulate_gradient(const Trace& trace, std::span<const double> upstream, std::span<double> grad) const {
  if (upstream.size() != output_size()) throw ValidationError("upstream gradient has wrong dimension");
  if (grad.size() != params_.size()) throw ValidationError("gradient buffer has wrong size");
  std::vector<double> delta(upstream.begin(), upstream.end());
  std::vector<double> prev;
  for (std::size_t l = layer_count(); l-- > 0;) {
    const std::size_t n_in = sizes_[l], n_out = sizes_[l + 1];
    const auto& x = trace.activations[l];
    double* gw = &grad[weight_offset(l)];
    double* gb = &grad[bias_offset(l)];
    for (std::size_t o = 0; o < n_out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      gb[o] += d;
      double* row = gw + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) row[i] += d * x[i];
    }
    if (l == 0) break;
    // Propagate through W^T, then through tanh of the layer below.
    prev.assign(n_in, 0.0);
    const double* w = &params_[weight_offset(l)];
    for (std::size_t o = 0; o < n_out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = w + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) prev[i] += row[i] * d;
    }
    for (std::size_t i = 0; i < n_in; ++i) prev[i] *= 1.0 - x[i] * x[i];
    delta.swap(prev);
  }
}

std::vector<double> Mlp::backward(std::span<const double> input, std::span<const double> upstream) const {
  Trace trace;
  forward(input, trace);
  std::vector<double> grad(params_.size(), 0.0);
  accumulate_gradient(trace, upstream, grad);
  return grad;
}

bool Mlp::all_finite() const {
  return std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------

AdamState AdamState::for_parameters(std::size_t count, double learning_rate) {
  AdamState s;
  s.m.assign(count, 0.0);
  s.v.assign(count, 0.0);
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& s) {
  if (grads.size() != params.size() || s.m.size() != params.size() || s.v.size() != params.size()) {
    throw ValidationError("adam: parameter, gradient and moment sizes differ");
  }
  if (!std::all_of(grads.begin(), grads.end(), [](double g) { return std::isfinite(g); })) {
    throw NumericError("adam: non-finite gradient");
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grads[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grads[i] * grads[i];
    const double m_hat = s.m[i] / c1;
    const double v_hat = s.v[i] / c2;
    params[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
}

double clip_grad_norm(std::span<double> grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grads) g *= scale;
  }
  return norm;
}

void blend_parameters(std::span<const double> source, std::span<double> target, double beta) {
  if (source.size() != target.size()) throw ValidationError("blend: parameter shapes differ");
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = beta * source[i] + (1.0 - beta) * target[i];
}

}  // namespace jigsaw
