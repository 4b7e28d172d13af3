#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "jigsaw/rng.hpp"

namespace jigsaw {

/// Fully connected feed-forward network: tanh hidden layers, linear output.
///
/// Parameters live in one flat array, layer by layer: the weight matrix
/// (out x in, row-major) followed by the bias vector. Gradients, Adam moments
/// and checkpoints all share this layout.
class Mlp {
 public:
  /// Cached layer activations from a forward pass; activations[0] is the input.
  struct Trace {
    std::vector<std::vector<double>> activations;
    std::span<const double> output() const { return activations.back(); }
  };

  Mlp() = default;

  /// All parameters zero. Needs at least an input and an output layer.
  explicit Mlp(std::vector<std::size_t> layer_sizes);

  /// Uniform Glorot initialisation for hidden layers; the output layer is
  /// scaled by `output_scale` (0 gives a network whose output is exactly 0).
  static Mlp glorot(std::vector<std::size_t> layer_sizes, Rng& rng, double output_scale = 1.0);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t layer_count() const { return sizes_.size() - 1; }
  std::size_t parameter_count() const { return params_.size(); }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  double& weight(std::size_t layer, std::size_t out, std::size_t in);
  double weight(std::size_t layer, std::size_t out, std::size_t in) const;
  double& bias(std::size_t layer, std::size_t out);
  double bias(std::size_t layer, std::size_t out) const;

  std::vector<double> forward(std::span<const double> input) const;
  void forward(std::span<const double> input, Trace& trace) const;

  /// Parameter gradient of <upstream, output(input)>.
  std::vector<double> backward(std::span<const double> input, std::span<const double> upstream) const;

  /// Adds the parameter gradient for a cached pass into `grad`.
  void accumulate_gradient(const Trace& trace, std::span<const double> upstream, std::span<double> grad) const;

  bool all_finite() const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const { return offsets_[layer] + sizes_[layer + 1] * sizes_[layer]; }

  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_parameters(std::size_t count, double learning_rate);

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam update. Throws NumericError if any gradient is
/// non-finite (parameters and state are left untouched in that case).
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

/// Rescales `grads` in place so their L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(std::span<double> grads, double max_norm);

/// target <- beta * source + (1 - beta) * target, element-wise.
void blend_parameters(std::span<const double> source, std::span<double> target, double beta);

}  // namespace jigsaw
