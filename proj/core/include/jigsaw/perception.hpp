#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "jigsaw/puzzle.hpp"
#include "jigsaw/raster.hpp"

namespace jigsaw {

/// Dense row-major matrix of doubles.
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(int r, int c) { return values_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return values_[static_cast<std::size_t>(r) * cols_ + c]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> values_;
};

/// Output of all four perception heads over one placement, plus their
/// weighted sum. Grid cell (r, c) of h_grid scores board positions (r, c) and
/// (r, c+1); v_grid scores (r, c) over (r+1, c); q_grid scores the 2×2 window
/// whose top-left cell is (r, c).
struct EvidenceReport {
  double global_e = 0.0;
  Grid h_grid;
  Grid v_grid;
  Grid q_grid;
  double aggregate = 0.0;
};

struct EvidenceWeights {
  double lambda_g = 1.0;
  Grid lambda_h;
  Grid lambda_v;
  Grid lambda_q;

  static EvidenceWeights uniform(BoardShape shape, double local = 1.0, double global = 1.0);

  /// Grid shapes match the board, all weights >= 0 and at least one > 0.
  void validate(BoardShape shape) const;

  /// Aggregate reached when every head reports 1.
  double total() const;
};

/// lambda_g * global + sum of per-cell weighted local scores.
double combine_evidence(const EvidenceReport& report, const EvidenceWeights& weights);

/// Whole-puzzle view handed to the global head.
struct GlobalView {
  const PuzzleSpec& spec;
  std::span<const int> placement;
};

/// Reassembled raster with gaps between fragments filled by `gap_fill`.
Raster render_assembly(const PuzzleSpec& spec, std::span<const int> placement, std::uint8_t gap_fill = 128);

/// The multi-head perception contract. Every head returns a likelihood in
/// [0, 1] that the queried arrangement is correct. Fragment arguments are
/// ground-truth fragment indices. Implementations are immutable after
/// construction and safe to query concurrently.
class PerceptionModel {
 public:
  virtual ~PerceptionModel() = default;

  virtual std::string name() const = 0;
  virtual BoardShape shape() const = 0;
  virtual int fragment_px() const = 0;

  virtual double score_h(int left, int right) const = 0;
  virtual double score_v(int top, int bottom) const = 0;
  /// Block given as {top-left, top-right, bottom-left, bottom-right}.
  virtual double score_q(const std::array<int, 4>& block) const = 0;
  virtual double score_global(const GlobalView& view) const = 0;
};

/// Ground-truth indicator heads. Each answer is flipped with probability
/// `corruption`, decided by a hash of (query, seed) so that repeated queries
/// agree.
class OracleModel final : public PerceptionModel {
 public:
  OracleModel(BoardShape shape, int fragment_px, double corruption, std::uint64_t seed);

  std::string name() const override { return "oracle"; }
  BoardShape shape() const override { return shape_; }
  int fragment_px() const override { return fragment_px_; }
  double corruption() const { return corruption_; }

  double score_h(int left, int right) const override;
  double score_v(int top, int bottom) const override;
  double score_q(const std::array<int, 4>& block) const override;
  double score_global(const GlobalView& view) const override;

 private:
  double answer(bool truth, std::uint64_t query) const;

  BoardShape shape_;
  int fragment_px_;
  double corruption_;
  std::uint64_t seed_;
};

struct PixelStatParams {
  /// Width of the strip sampled along each fragment side.
  int strip_px = 3;
  /// Number of bins the strip is split into along the edge.
  int bins = 8;
  /// Squashing temperature: score = exp(-dissimilarity / temperature).
  double temperature = 0.01;
  /// Weight of the gradient-continuity term.
  double gradient_weight = 0.5;
};

/// Learning-free compatibility scorer built from low-order color statistics
/// of the strips nearest each fragment side. Pairwise tables are precomputed.
class PixelStatModel final : public PerceptionModel {
 public:
  PixelStatModel(const PuzzleSpec& spec, PixelStatParams params = {});

  std::string name() const override { return "pixelstat"; }
  BoardShape shape() const override { return shape_; }
  int fragment_px() const override { return fragment_px_; }

  double score_h(int left, int right) const override;
  double score_v(int top, int bottom) const override;
  double score_q(const std::array<int, 4>& block) const override;
  double score_global(const GlobalView& view) const override;

 private:
  BoardShape shape_;
  int fragment_px_;
  int n_;
  std::vector<double> h_table_;
  std::vector<double> v_table_;
};

std::unique_ptr<PerceptionModel> oracle_model(const PuzzleSpec& spec, double corruption, std::uint64_t seed);
std::unique_ptr<PerceptionModel> pixelstat_model(const PuzzleSpec& spec, PixelStatParams params = {});

/// Queries every head over the current placement and aggregates with
/// `weights`. Throws ValidationError if model and spec disagree on geometry.
EvidenceReport aggregate_evidence(std::span<const int> placement, const PuzzleSpec& spec,
                                  const PerceptionModel& model, const EvidenceWeights& weights);

inline EvidenceReport aggregate_evidence(const Permutation& state, const PuzzleSpec& spec,
                                         const PerceptionModel& model, const EvidenceWeights& weights) {
  return aggregate_evidence(state.placement(), spec, model, weights);
}

/// [global, h_grid, v_grid, q_grid], grids flattened row-major.
std::vector<double> state_features(const EvidenceReport& report);

std::size_t feature_count(BoardShape shape);

/// Mean of the horizontal and vertical head scores, weighted by pair count.
double perceived_neighbor_fraction(const EvidenceReport& report);

/// True when the global head and every local head score at least 0.5.
bool perceived_perfect(const EvidenceReport& report);

/// Binds spec, model and weights and counts evidence evaluations, the unit
/// used for solver budget parity. Holds references; not thread-safe.
class EvidenceEvaluator {
 public:
  EvidenceEvaluator(const PuzzleSpec& spec, const PerceptionModel& model, EvidenceWeights weights);

  EvidenceReport evaluate(std::span<const int> placement);
  double aggregate(std::span<const int> placement) { return evaluate(placement).aggregate; }

  std::uint64_t evaluations() const { return evaluations_; }
  const PuzzleSpec& spec() const { return spec_; }
  const PerceptionModel& model() const { return model_; }
  const EvidenceWeights& weights() const { return weights_; }

 private:
  const PuzzleSpec& spec_;
  const PerceptionModel& model_;
  EvidenceWeights weights_;
  std::uint64_t evaluations_ = 0;
};

}  // namespace jigsaw
