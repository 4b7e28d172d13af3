#include "jigsaw/perception.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "jigsaw/error.hpp"
#include "jigsaw/rng.hpp"

namespace jigsaw {

EvidenceWeights EvidenceWeights::uniform(BoardShape shape, double local, double global) {
  EvidenceWeights w;
  w.lambda_g = global;
  w.lambda_h = Grid(shape.rows, shape.cols - 1, local);
  w.lambda_v = Grid(shape.rows - 1, shape.cols, local);
  w.lambda_q = Grid(shape.rows - 1, shape.cols - 1, local);
  return w;
}

void EvidenceWeights::validate(BoardShape shape) const {
  const auto check_shape = [](const Grid& g, int r, int c, const char* name) {
    if (g.rows() != r || g.cols() != c) throw ValidationError(std::string(name) + " weight grid has wrong shape");
  };
  check_shape(lambda_h, shape.rows, shape.cols - 1, "horizontal");
  check_shape(lambda_v, shape.rows - 1, shape.cols, "vertical");
  check_shape(lambda_q, shape.rows - 1, shape.cols - 1, "2x2");
  bool any_positive = lambda_g > 0.0;
  if (!(lambda_g >= 0.0)) throw ValidationError("evidence weights must be non-negative");
  for (const Grid* g : {&lambda_h, &lambda_v, &lambda_q}) {
    for (double w : g->values()) {
      if (!(w >= 0.0)) throw ValidationError("evidence weights must be non-negative");
      any_positive = any_positive || w > 0.0;
    }
  }
  if (!any_positive) throw ValidationError("at least one evidence weight must be positive");
}

double EvidenceWeights::total() const {
  double t = lambda_g;
  for (const Grid* g : {&lambda_h, &lambda_v, &lambda_q}) {
    for (double w : g->values()) t += w;
  }
  return t;
}

double combine_evidence(const EvidenceReport& r, const EvidenceWeights& w) {
  double e = w.lambda_g * r.global_e;
  const auto dot = [](const Grid& values, const Grid& weights) {
    double s = 0.0;
    const auto v = values.values();
    const auto k = weights.values();
    for (std::size_t i = 0; i < v.size(); ++i) s += k[i] * v[i];
    return s;
  };
  return e + dot(r.h_grid, w.lambda_h) + dot(r.v_grid, w.lambda_v) + dot(r.q_grid, w.lambda_q);
}

Raster render_assembly(const PuzzleSpec& spec, std::span<const int> placement, std::uint8_t gap_fill) {
  const int fp = spec.fragment_px(), gap = spec.gap_px();
  Raster canvas(spec.cols() * fp + (spec.cols() - 1) * gap, spec.rows() * fp + (spec.rows() - 1) * gap, gap_fill);
  for (int p = 0; p < spec.shape().cells(); ++p) {
    const int r = p / spec.cols(), c = p % spec.cols();
    blit(canvas, spec.fragment(placement[p]), c * (fp + gap), r * (fp + gap));
  }
  return canvas;
}

// ---------------------------------------------------------------------------
// Oracle

namespace {

enum QueryTag : std::uint64_t { kTagH = 0x68, kTagV = 0x76, kTagQ = 0x71, kTagG = 0x67 };

}  // namespace

OracleModel::OracleModel(BoardShape shape, int fragment_px, double corruption, std::uint64_t seed)
    : shape_(shape), fragment_px_(fragment_px), corruption_(corruption), seed_(seed) {
  if (!(corruption >= 0.0 && corruption < 0.5)) throw ValidationError("oracle corruption must be in [0, 0.5)");
}

double OracleModel::answer(bool truth, std::uint64_t query) const {
  if (corruption_ > 0.0 && unit_interval(hash_combine(seed_, query)) < corruption_) truth = !truth;
  return truth ? 1.0 : 0.0;
}

double OracleModel::score_h(int left, int right) const {
  const bool truth = right == left + 1 && left % shape_.cols != shape_.cols - 1;
  return answer(truth, hash_combine(hash_combine(kTagH, static_cast<std::uint64_t>(left)), static_cast<std::uint64_t>(right)));
}

double OracleModel::score_v(int top, int bottom) const {
  const bool truth = bottom == top + shape_.cols;
  return answer(truth, hash_combine(hash_combine(kTagV, static_cast<std::uint64_t>(top)), static_cast<std::uint64_t>(bottom)));
}

double OracleModel::score_q(const std::array<int, 4>& b) const {
  const int n = shape_.cols;
  const bool truth = b[0] % n != n - 1 && b[0] / n != shape_.rows - 1 && b[1] == b[0] + 1 && b[2] == b[0] + n &&
                     b[3] == b[0] + n + 1;
  std::uint64_t q = kTagQ;
  for (int f : b) q = hash_combine(q, static_cast<std::uint64_t>(f));
  return answer(truth, q);
}

double OracleModel::score_global(const GlobalView& view) const {
  bool solved = true;
  std::uint64_t q = kTagG;
  for (std::size_t p = 0; p < view.placement.size(); ++p) {
    solved = solved && view.placement[p] == static_cast<int>(p);
    q = hash_combine(q, static_cast<std::uint64_t>(view.placement[p]));
  }
  return answer(solved, q);
}

std::unique_ptr<PerceptionModel> oracle_model(const PuzzleSpec& spec, double corruption, std::uint64_t seed) {
  return std::make_unique<OracleModel>(spec.shape(), spec.fragment_px(), corruption, seed);
}

// ---------------------------------------------------------------------------
// Pixel statistics

namespace {

enum Side { kTop = 0, kRight = 1, kBottom = 2, kLeft = 3 };

struct EdgeStats {
  std::vector<double> profile;  // bins x 3, mean color per bin along the edge
  std::array<double, 3> gradient{};  // outward per-channel slope (outer - inner)
};

EdgeStats edge_stats(const Raster& tile, Side side, const PixelStatParams& params) {
  const int fp = tile.width;
  const int strip = std::clamp(params.strip_px, 1, fp / 2);
  const int bins = std::clamp(params.bins, 1, fp);
  EdgeStats s;
  s.profile.assign(static_cast<std::size_t>(bins) * 3, 0.0);
  std::vector<int> counts(static_cast<std::size_t>(bins), 0);

  // Map (along, depth) to pixel coordinates; depth 0 is the outermost line.
  const auto pixel = [&](int along, int depth) -> std::pair<int, int> {
    switch (side) {
      case kTop: return {along, depth};
      case kBottom: return {along, fp - 1 - depth};
      case kLeft: return {depth, along};
      case kRight: return {fp - 1 - depth, along};
    }
    return {0, 0};
  };

  for (int along = 0; along < fp; ++along) {
    const int bin = along * bins / fp;
    for (int depth = 0; depth < strip; ++depth) {
      const auto [x, y] = pixel(along, depth);
      for (int c = 0; c < 3; ++c) s.profile[static_cast<std::size_t>(bin) * 3 + c] += tile.at(x, y, c);
      ++counts[static_cast<std::size_t>(bin)];
    }
    const auto [ox, oy] = pixel(along, 0);
    const auto [ix, iy] = pixel(along, strip - 1);
    for (int c = 0; c < 3; ++c) s.gradient[c] += static_cast<double>(tile.at(ox, oy, c)) - tile.at(ix, iy, c);
  }
  for (int b = 0; b < bins; ++b) {
    for (int c = 0; c < 3; ++c) s.profile[static_cast<std::size_t>(b) * 3 + c] /= std::max(counts[b], 1);
  }
  for (double& g : s.gradient) g /= fp;
  return s;
}

double edge_dissimilarity(const EdgeStats& a, const EdgeStats& b, double gradient_weight) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.profile.size(); ++i) {
    const double diff = (a.profile[i] - b.profile[i]) / 255.0;
    d += diff * diff;
  }
  d /= static_cast<double>(a.profile.size());
  // Outward slopes of two abutting sides point in opposite directions, so a
  // smooth continuation has a.gradient ≈ -b.gradient.
  double g = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double diff = (a.gradient[c] + b.gradient[c]) / 255.0;
    g += diff * diff;
  }
  return d + gradient_weight * g / 3.0;
}

}  // namespace

PixelStatModel::PixelStatModel(const PuzzleSpec& spec, PixelStatParams params)
    : shape_(spec.shape()), fragment_px_(spec.fragment_px()), n_(spec.shape().cells()) {
  if (spec.fragment_px() < 8) throw ValidationError("pixelstat needs fragments of at least 8 px");
  if (!(params.temperature > 0.0)) throw ValidationError("pixelstat temperature must be positive");
  std::vector<std::array<EdgeStats, 4>> stats(static_cast<std::size_t>(n_));
  for (int f = 0; f < n_; ++f) {
    for (int s = 0; s < 4; ++s) stats[f][s] = edge_stats(spec.fragment(f), static_cast<Side>(s), params);
  }
  h_table_.assign(static_cast<std::size_t>(n_) * n_, 0.0);
  v_table_.assign(static_cast<std::size_t>(n_) * n_, 0.0);
  for (int a = 0; a < n_; ++a) {
    for (int b = 0; b < n_; ++b) {
      const auto idx = static_cast<std::size_t>(a) * n_ + b;
      h_table_[idx] = std::exp(-edge_dissimilarity(stats[a][kRight], stats[b][kLeft], params.gradient_weight) /
                               params.temperature);
      v_table_[idx] = std::exp(-edge_dissimilarity(stats[a][kBottom], stats[b][kTop], params.gradient_weight) /
                               params.temperature);
    }
  }
}

double PixelStatModel::score_h(int left, int right) const {
  return h_table_[static_cast<std::size_t>(left) * n_ + right];
}

double PixelStatModel::score_v(int top, int bottom) const {
  return v_table_[static_cast<std::size_t>(top) * n_ + bottom];
}

double PixelStatModel::score_q(const std::array<int, 4>& b) const {
  return 0.25 * (score_h(b[0], b[1]) + score_h(b[2], b[3]) + score_v(b[0], b[2]) + score_v(b[1], b[3]));
}

double PixelStatModel::score_global(const GlobalView& view) const {
  const int rows = shape_.rows, cols = shape_.cols;
  const auto& pl = view.placement;
  double sum = 0.0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) sum += score_h(pl[r * cols + c], pl[r * cols + c + 1]);
  }
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c < cols; ++c) sum += score_v(pl[r * cols + c], pl[(r + 1) * cols + c]);
  }
  return sum / (rows * (cols - 1) + (rows - 1) * cols);
}

std::unique_ptr<PerceptionModel> pixelstat_model(const PuzzleSpec& spec, PixelStatParams params) {
  return std::make_unique<PixelStatModel>(spec, params);
}

// ---------------------------------------------------------------------------

EvidenceReport aggregate_evidence(std::span<const int> pl, const PuzzleSpec& spec, const PerceptionModel& model,
                                  const EvidenceWeights& weights) {
  const BoardShape shape = spec.shape();
  if (model.shape() != shape || model.fragment_px() != spec.fragment_px()) {
    throw ValidationError("perception model geometry does not match the puzzle");
  }
  if (static_cast<int>(pl.size()) != shape.cells()) throw ValidationError("placement does not match board size");
  const int rows = shape.rows, cols = shape.cols;

  EvidenceReport r;
  r.h_grid = Grid(rows, cols - 1);
  r.v_grid = Grid(rows - 1, cols);
  r.q_grid = Grid(rows - 1, cols - 1);
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x + 1 < cols; ++x) r.h_grid(y, x) = model.score_h(pl[y * cols + x], pl[y * cols + x + 1]);
  }
  for (int y = 0; y + 1 < rows; ++y) {
    for (int x = 0; x < cols; ++x) r.v_grid(y, x) = model.score_v(pl[y * cols + x], pl[(y + 1) * cols + x]);
  }
  for (int y = 0; y + 1 < rows; ++y) {
    for (int x = 0; x + 1 < cols; ++x) {
      const int p = y * cols + x;
      r.q_grid(y, x) = model.score_q({pl[p], pl[p + 1], pl[p + cols], pl[p + cols + 1]});
    }
  }
  r.global_e = model.score_global(GlobalView{spec, pl});
  r.aggregate = combine_evidence(r, weights);
  return r;
}

std::vector<double> state_features(const EvidenceReport& report) {
  std::vector<double> f;
  f.reserve(1 + report.h_grid.size() + report.v_grid.size() + report.q_grid.size());
  f.push_back(report.global_e);
  for (const Grid* g : {&report.h_grid, &report.v_grid, &report.q_grid}) {
    f.insert(f.end(), g->values().begin(), g->values().end());
  }
  return f;
}

std::size_t feature_count(BoardShape s) {
  return 1 + static_cast<std::size_t>(s.rows * (s.cols - 1) + (s.rows - 1) * s.cols + (s.rows - 1) * (s.cols - 1));
}

double perceived_neighbor_fraction(const EvidenceReport& report) {
  double sum = 0.0;
  for (double v : report.h_grid.values()) sum += v;
  for (double v : report.v_grid.values()) sum += v;
  return sum / static_cast<double>(report.h_grid.size() + report.v_grid.size());
}

bool perceived_perfect(const EvidenceReport& report) {
  if (report.global_e < 0.5) return false;
  for (const Grid* g : {&report.h_grid, &report.v_grid, &report.q_grid}) {
    for (double v : g->values()) {
      if (v < 0.5) return false;
    }
  }
  return true;
}

EvidenceEvaluator::EvidenceEvaluator(const PuzzleSpec& spec, const PerceptionModel& model, EvidenceWeights weights)
    : spec_(spec), model_(model), weights_(std::move(weights)) {
  weights_.validate(spec.shape());
  if (model.shape() != spec.shape() || model.fragment_px() != spec.fragment_px()) {
    throw ValidationError("perception model geometry does not match the puzzle");
  }
}

EvidenceReport EvidenceEvaluator::evaluate(std::span<const int> placement) {
  ++evaluations_;
  return aggregate_evidence(placement, spec_, model_, weights_);
}

}  // namespace jigsaw
