#pragma once

#include <span>
#include <vector>

#include "quasidual/maps.hpp"
#include "quasidual/prob_core.hpp"

/// Brute-force ground truth for the dual engine. Nothing here calls the
/// support oracle or the bisection: K is a minimum of pi over a regular grid.
namespace quasidual {

struct GridCfg {
  double box_lo = -5.0;
  double box_hi = 5.0;
  double step = 0.05;

  /// Throws InvalidParameter.
  void validate() const;
};

struct GridResult {
  /// One entry per G-atom; nullopt on Q-null atoms.
  std::vector<AtomValue> values;
  /// slope_bound(m, box): the grid minimum exceeds the true infimum by at
  /// most slope * step when the minimizer lies in the box.
  double slope = 0.0;
};

/// Largest atom the grid oracle accepts.
inline constexpr std::size_t kGridMaxAtom = 4;

/// min of pi over grid points xi with <w, xi> >= t on each atom (w the
/// conditional Q-weights, t = <w, x>). For monotone maps only the smallest
/// feasible value of one pivot coordinate is visited per grid line, which
/// yields the same minimum. Requires an unrefined quasiconvex map
/// (output partition = G). Throws AtomTooLarge or EmptyFeasibleGrid.
GridResult grid_k(const MapSpec& m, std::span<const double> x, const Density& q,
                  const GridCfg& cfg = {});

/// Same as grid_k with the equality constraint discretized as
/// t <= <w, xi> <= t + step * max(w). Moving the heaviest coordinate by one
/// step changes <w, xi> by exactly the band width, so every grid line
/// through the box meets the band.
GridResult equality_k(const MapSpec& m, std::span<const double> x, const Density& q,
                      const GridCfg& cfg = {});

/// Largest number of G-atoms enumerate_partitions accepts (B_6 = 203).
inline constexpr std::size_t kMaxEnumeratedAtoms = 6;

/// All partitions of the atoms of g, as partitions of the sample points,
/// in restricted-growth-string order (the coarsest {Omega} first).
/// Throws TooManyAtoms.
std::vector<Partition> enumerate_partitions(const Partition& g);

}  // namespace quasidual
