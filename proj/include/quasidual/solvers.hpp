#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace quasidual {

/// Largest magnitude a bisection bracket may be expanded to.
inline constexpr double kBracketLimit = 1e6;

enum class BisectStatus { Converged, Unbounded, BracketExhausted };

struct BisectResult {
  double root = 0.0;
  std::pair<double, double> bracket_final{0.0, 0.0};
  int iterations = 0;
  BisectStatus status = BisectStatus::Converged;
};

/// Locates the threshold of a nondecreasing predicate (false below, true
/// above). The bracket is widened geometrically (factor 2) until it contains
/// the switch or hits ±kBracketLimit:
///  - pred true at -kBracketLimit  -> Unbounded, root = -kBracketLimit
///  - pred false at +kBracketLimit -> BracketExhausted
/// On convergence the final bracket width is at most `tol` and root is its
/// midpoint, so pred(root + tol) holds and pred(root - tol) does not.
BisectResult bisect(const std::function<bool(double)>& pred, double lo,
                    double hi, double tol);

/// Same contract as bisect() for the predicate h(c) >= 0, where h is a
/// nondecreasing extended-real function. Inside a finite bracket the trial
/// point is the Illinois (modified regula falsi) estimate, nudged at least
/// tol/2 inside the bracket; infinite values fall back to halving. On
/// convergence the final bracket has width at most tol.
BisectResult bracket_root(const std::function<double(double)>& h, double lo, double hi,
                          double tol);

/// Tunables shared by the bisection and the simplex search.
struct SolverCfg {
  double bisect_tol = 1e-12;
  int restarts = 16;
  int grid_fallback_resolution = 20;
  /// The fallback grid is coarsened until it has at most this many points.
  std::size_t grid_point_cap = 400;
  int max_sweeps = 200;
  double spread_tol = 1e-10;
  std::uint64_t seed = 0;
};

/// Validates bisect_tol > 0 and restarts >= 1; throws InvalidParameter.
void validate(const SolverCfg& cfg);

struct SimplexResult {
  std::vector<double> weights;
  double value = 0.0;
  /// Index of the start whose refinement won (vertices first, then the
  /// uniform point, extra starts, random starts, grid best).
  std::size_t best_start = 0;
  int restarts_used = 0;
  int iterations = 0;
  /// Largest coordinate change in the last ascent sweep of the winner.
  double spread = 0.0;
  std::size_t evaluations = 0;
  int grid_resolution = 0;
};

using SimplexObjective = std::function<double(std::span<const double>)>;

/// Maximizes f over the probability simplex of dimension `dim`.
///
/// Starts: every vertex, the barycenter, `extra_starts`, cfg.restarts
/// uniformly random points (seeded by cfg.seed) and the best point of a
/// regular grid of resolution at most cfg.grid_fallback_resolution. Every
/// start is evaluated once. With dim == 2 only the best start is refined;
/// otherwise the best 8 get one ascent sweep and the best 4 of those are
/// refined to convergence (ties go to the lower start index).
///
/// Refinement is coordinate-pair ascent: mass is moved between two
/// coordinates with a Brent line search on the segment (endpoints always
/// tried), and a move is kept only if it strictly improves f. A start stops
/// once a sweep moves no coordinate by more than cfg.spread_tol or improves
/// f by less than 1e-12 (relative), or after cfg.max_sweeps sweeps. After
/// each improving sweep its net displacement is line-searched as well.
/// f may return -inf.
SimplexResult simplex_search(const SimplexObjective& f, std::size_t dim,
                             const SolverCfg& cfg,
                             std::span<const std::vector<double>> extra_starts = {});

/// Number of points of the regular simplex grid {k / r : sum k = r} in
/// `dim` coordinates.
std::size_t simplex_grid_size(std::size_t dim, int resolution);

/// Visits every point of the regular simplex grid.
void for_each_simplex_grid_point(
    std::size_t dim, int resolution,
    const std::function<void(std::span<const double>)>& visit);

}  // namespace quasidual
