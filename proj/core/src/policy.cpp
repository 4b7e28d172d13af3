#include "jigsaw/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "jigsaw/error.hpp"
#include "jigsaw/perception.hpp"

namespace jigsaw {

namespace {

constexpr int kFirst = 0;
constexpr int kSecond = 1;

bool contains(std::span<const int> xs, int x) { return std::find(xs.begin(), xs.end(), x) != xs.end(); }

std::vector<int> without(std::span<const int> xs, std::initializer_list<int> drop) {
  std::vector<int> out;
  out.reserve(xs.size());
  for (int x : xs) {
    if (std::find(drop.begin(), drop.end(), x) == drop.end()) out.push_back(x);
  }
  return out;
}

}  // namespace

void disjoint_anchors(BoardShape shape, int anchor, std::vector<int>& out) {
  out.clear();
  for (int b = 0; b < shape.cells(); ++b) {
    if (shape.is_anchor(b) && anchors_disjoint(anchor, b, shape.cols)) out.push_back(b);
  }
}

std::vector<int> partnered_anchors(BoardShape shape) {
  std::vector<int> out, partners;
  for (int a = 0; a < shape.cells(); ++a) {
    if (!shape.is_anchor(a)) continue;
    disjoint_anchors(shape, a, partners);
    if (!partners.empty()) out.push_back(a);
  }
  return out;
}

PolicyDistribution::PolicyDistribution(BoardShape shape, std::vector<double> logits, const KindPrior& prior)
    : shape_(shape), logits_(std::move(logits)) {
  if (logits_.size() != PolicyHead::output_size(shape)) throw ValidationError("policy logits have wrong dimension");
  for (double w : prior) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("kind prior entries must be finite and >= 0");
  }
  all_cells_.resize(static_cast<std::size_t>(shape.cells()));
  for (int p = 0; p < shape.cells(); ++p) all_cells_[static_cast<std::size_t>(p)] = p;
  partnered_anchors_ = partnered_anchors(shape);

  std::array<bool, kActionKinds> allowed{prior[0] > 0.0, prior[1] > 0.0,
                                         prior[2] > 0.0 && !partnered_anchors_.empty()};
  double zmax = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < kActionKinds; ++k) {
    if (allowed[k]) zmax = std::max(zmax, logits_[k]);
  }
  if (!std::isfinite(zmax)) throw ValidationError("every action kind is masked");
  double total = 0.0;
  for (int k = 0; k < kActionKinds; ++k) {
    kind_probs_[k] = allowed[k] ? std::exp(logits_[k] - zmax) * prior[k] : 0.0;
    total += kind_probs_[k];
  }
  for (double& p : kind_probs_) p /= total;
}

std::span<const double> PolicyDistribution::head(int h) const {
  const auto n = static_cast<std::size_t>(shape_.cells());
  return std::span<const double>(logits_).subspan(kActionKinds + static_cast<std::size_t>(h) * n, n);
}

std::vector<double> PolicyDistribution::head_probabilities(int h, std::span<const int> allowed) const {
  const auto z = head(h);
  const std::span<const int> support = allowed.empty() ? std::span<const int>(all_cells_) : allowed;
  std::vector<double> probs(z.size(), 0.0);
  double zmax = -std::numeric_limits<double>::infinity();
  for (int p : support) zmax = std::max(zmax, z[static_cast<std::size_t>(p)]);
  double total = 0.0;
  for (int p : support) total += probs[static_cast<std::size_t>(p)] = std::exp(z[static_cast<std::size_t>(p)] - zmax);
  for (double& v : probs) v /= total;
  return probs;
}

int PolicyDistribution::draw(int h, std::span<const int> support, Rng& rng) const {
  if (support.empty()) throw ValidationError("policy head has empty support");
  const auto z = head(h);
  double zmax = -std::numeric_limits<double>::infinity();
  for (int p : support) zmax = std::max(zmax, z[static_cast<std::size_t>(p)]);
  std::vector<double> w(support.size());
  for (std::size_t i = 0; i < support.size(); ++i) w[i] = std::exp(z[static_cast<std::size_t>(support[i])] - zmax);
  return support[rng.categorical(w)];
}

double PolicyDistribution::head_log_prob(int h, std::span<const int> support, int choice,
                                         std::span<double> grad) const {
  const auto z = head(h);
  double zmax = -std::numeric_limits<double>::infinity();
  for (int p : support) zmax = std::max(zmax, z[static_cast<std::size_t>(p)]);
  double total = 0.0;
  for (int p : support) total += std::exp(z[static_cast<std::size_t>(p)] - zmax);
  const double lse = zmax + std::log(total);
  if (!grad.empty()) {
    const std::size_t base = kActionKinds + static_cast<std::size_t>(h) * static_cast<std::size_t>(shape_.cells());
    for (int p : support) grad[base + static_cast<std::size_t>(p)] -= std::exp(z[static_cast<std::size_t>(p)] - lse);
    grad[base + static_cast<std::size_t>(choice)] += 1.0;
  }
  return z[static_cast<std::size_t>(choice)] - lse;
}

SampledAction PolicyDistribution::sample(Rng& rng, std::optional<ActionKind> forced) const {
  ActionKind kind;
  if (forced) {
    if (!kind_allowed(*forced)) throw ValidationError("forced action kind is masked");
    kind = *forced;
  } else {
    kind = static_cast<ActionKind>(rng.categorical(kind_probs_));
  }
  Action a;
  switch (kind) {
    case ActionKind::Swap2: {
      const int p0 = draw(kFirst, all_cells_, rng);
      const int p1 = draw(kSecond, without(all_cells_, {p0}), rng);
      a = Action::swap2(p0, p1);
      break;
    }
    case ActionKind::Swap3: {
      const int p0 = draw(kFirst, all_cells_, rng);
      const int p1 = draw(kSecond, without(all_cells_, {p0}), rng);
      const int p2 = draw(kSecond, without(all_cells_, {p0, p1}), rng);
      a = Action::swap3(p0, p1, p2, rng.bernoulli(0.5));
      break;
    }
    case ActionKind::SwapPuzzlet: {
      const int a0 = draw(kFirst, partnered_anchors_, rng);
      std::vector<int> partners;
      disjoint_anchors(shape_, a0, partners);
      a = Action::swap_puzzlet(a0, draw(kSecond, partners, rng));
      break;
    }
  }
  double lp = log_prob(a);
  if (forced) lp -= std::log(kind_probability(kind));
  return {a, lp};
}

double PolicyDistribution::log_prob(const Action& a, std::span<double> grad) const {
  validate_action(a, shape_);
  if (!grad.empty() && grad.size() != logits_.size()) throw ValidationError("logit gradient buffer has wrong size");
  const int k = static_cast<int>(a.kind);
  if (!kind_allowed(a.kind)) throw ValidationError("action kind is masked under this prior");

  double lp = std::log(kind_probs_[k]);
  if (!grad.empty()) {
    // d log p_k / d z_j = [j == k] - p_j over the unmasked kinds.
    for (int j = 0; j < kActionKinds; ++j) grad[j] -= kind_probs_[j];
    grad[k] += 1.0;
  }
  switch (a.kind) {
    case ActionKind::Swap2:
      lp += head_log_prob(kFirst, all_cells_, a.pos[0], grad);
      lp += head_log_prob(kSecond, without(all_cells_, {a.pos[0]}), a.pos[1], grad);
      break;
    case ActionKind::Swap3:
      lp += head_log_prob(kFirst, all_cells_, a.pos[0], grad);
      lp += head_log_prob(kSecond, without(all_cells_, {a.pos[0]}), a.pos[1], grad);
      lp += head_log_prob(kSecond, without(all_cells_, {a.pos[0], a.pos[1]}), a.pos[2], grad);
      lp += std::log(0.5);
      break;
    case ActionKind::SwapPuzzlet: {
      if (!contains(partnered_anchors_, a.pos[0])) throw ValidationError("puzzlet anchor has no partner");
      lp += head_log_prob(kFirst, partnered_anchors_, a.pos[0], grad);
      std::vector<int> partners;
      disjoint_anchors(shape_, a.pos[0], partners);
      lp += head_log_prob(kSecond, partners, a.pos[1], grad);
      break;
    }
  }
  return lp;
}

// ---------------------------------------------------------------------------

PolicyHead::PolicyHead(BoardShape shape, Mlp net) : shape_(shape), net_(std::move(net)) {
  if (net_.input_size() != feature_count(shape)) throw ValidationError("actor input does not match board features");
  if (net_.output_size() != output_size(shape)) throw ValidationError("actor output does not match board");
}

PolicyHead PolicyHead::create(BoardShape shape, const std::vector<std::size_t>& hidden, Rng& rng) {
  std::vector<std::size_t> sizes{feature_count(shape)};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output_size(shape));
  return PolicyHead(shape, Mlp::glorot(sizes, rng, 0.0));
}

PolicyDistribution PolicyHead::distribution(std::span<const double> features, const KindPrior& prior) const {
  return PolicyDistribution(shape_, net_.forward(features), prior);
}

PolicyDistribution PolicyHead::distribution(std::span<const double> features, const KindPrior& prior,
                                            Mlp::Trace& trace) const {
  net_.forward(features, trace);
  const auto out = trace.output();
  return PolicyDistribution(shape_, std::vector<double>(out.begin(), out.end()), prior);
}

std::vector<SampledAction> sample_actions(const PolicyHead& policy, std::span<const double> features,
                                          std::size_t count, const KindPrior& prior, Rng& rng) {
  if (count == 0) throw ValidationError("sample count must be >= 1");
  const auto dist = policy.distribution(features, prior);
  std::vector<SampledAction> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(dist.sample(rng));
  return out;
}

KindPrior blend_prior(const KindPrior& start, const KindPrior& end, double t) {
  t = std::clamp(t, 0.0, 1.0);
  KindPrior out{};
  for (int k = 0; k < kActionKinds; ++k) out[k] = (1.0 - t) * start[k] + t * end[k];
  return out;
}

}  // namespace jigsaw
