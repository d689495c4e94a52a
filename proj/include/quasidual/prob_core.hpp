#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quasidual/error.hpp"

/// Finite probability spaces, partitions standing in for sub-sigma-algebras,
/// random variables, densities and conditional expectation.
///
/// The reference measure P always has full support, so "P-a.s." statements
/// are statements about every sample point. Comparisons under a density Q
/// are only made on atoms with Q(A) > 0; conditional expectation on a Q-null
/// atom is reported as an empty optional.
namespace quasidual {

/// Real random variable indexed by sample points.
using Rv = std::vector<double>;

/// Sorted list of sample-point indices.
using Block = std::vector<std::size_t>;

/// Value of a G-measurable quantity on one atom. `std::nullopt` marks an atom
/// that is null for the density in use; constraints there hold vacuously.
using AtomValue = std::optional<double>;

class FiniteSpace {
 public:
  static constexpr double kSumTolerance = 1e-12;

  /// Validates labels and probabilities. Throws Error with
  /// NonPositiveProbability, ProbabilitySumMismatch, DuplicateLabel or
  /// LengthMismatch.
  static FiniteSpace build(std::vector<std::string> labels,
                           std::vector<double> probs);

  std::size_t size() const noexcept { return probs_.size(); }
  std::span<const double> probs() const noexcept { return probs_; }
  double prob(std::size_t i) const { return probs_.at(i); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::optional<std::size_t> index_of(const std::string& label) const;

  /// P(A) for a set of indices.
  double mass(std::span<const std::size_t> block) const;
  /// Expectation under P.
  double expect(std::span<const double> x) const;

  bool operator==(const FiniteSpace&) const = default;

 private:
  FiniteSpace(std::vector<std::string> labels, std::vector<double> probs)
      : labels_(std::move(labels)), probs_(std::move(probs)) {}

  std::vector<std::string> labels_;
  std::vector<double> probs_;
};

/// Partition of {0, ..., n-1} into nonempty blocks. Blocks are kept in
/// canonical order: indices sorted within each block, blocks sorted by
/// their smallest index.
class Partition {
 public:
  /// Throws OverlappingBlocks, UncoveredIndex, EmptyBlock or IndexOutOfRange.
  static Partition build(std::size_t n_points, std::vector<Block> blocks);
  static Partition trivial(std::size_t n_points);
  static Partition discrete(std::size_t n_points);

  std::size_t n_points() const noexcept { return block_of_.size(); }
  std::size_t num_blocks() const noexcept { return blocks_.size(); }
  const std::vector<Block>& blocks() const noexcept { return blocks_; }
  const Block& block(std::size_t b) const { return blocks_.at(b); }
  std::size_t block_of(std::size_t point) const { return block_of_.at(point); }

  /// True when every block of *this lies inside one block of `coarser`.
  bool refines(const Partition& coarser) const;

  /// Indices (into this->blocks()) of the blocks contained in `block`.
  /// Throws NotGMeasurablePartition when `block` cuts through a block.
  std::vector<std::size_t> blocks_inside(std::span<const std::size_t> block) const;

  bool operator==(const Partition&) const = default;

 private:
  Partition(std::vector<Block> blocks, std::vector<std::size_t> block_of)
      : blocks_(std::move(blocks)), block_of_(std::move(block_of)) {}

  std::vector<Block> blocks_;
  std::vector<std::size_t> block_of_;
};

/// Coarsest common refinement {A1 ∩ A2}. Throws SpaceMismatch.
Partition common_refinement(const Partition& g1, const Partition& g2);

/// True iff `x` is constant (exact equality) on every block.
bool is_measurable(std::span<const double> x, const Partition& g);

/// Density dQ/dP of a measure absolutely continuous w.r.t. P.
class Density {
 public:
  static constexpr double kNormTolerance = 1e-10;

  /// Throws NegativeDensity, NonFiniteInput or DimensionMismatch.
  static Density make(const FiniteSpace& space, std::vector<double> q);
  /// q = 1, i.e. Q = P.
  static Density reference(const FiniteSpace& space);

  std::size_t size() const noexcept { return q_.size(); }
  std::span<const double> values() const noexcept { return q_; }
  double operator[](std::size_t i) const { return q_[i]; }
  /// Whether E_P[q] = 1 within kNormTolerance.
  bool normalized() const noexcept { return normalized_; }

  /// Q(A) = sum over A of q_i p_i.
  double mass(const FiniteSpace& space, std::span<const std::size_t> block) const;

 private:
  Density(std::vector<double> q, bool normalized)
      : q_(std::move(q)), normalized_(normalized) {}

  std::vector<double> q_;
  bool normalized_ = false;
};

/// Conditional weights q_i p_i / Q(A) over the points of `block`, in block
/// order; nullopt when Q(A) = 0.
std::optional<std::vector<double>> conditional_weights(
    const FiniteSpace& space, std::span<const double> q,
    std::span<const std::size_t> block);

/// Conditional P-weights p_i / P(A).
std::vector<double> reference_weights(const FiniteSpace& space,
                                      std::span<const std::size_t> block);

/// E_Q[x | G], one entry per block of g; nullopt on Q-null atoms.
std::vector<AtomValue> cond_expect(const FiniteSpace& space,
                                   std::span<const double> x, const Density& q,
                                   const Partition& g);

/// Q ∈ P_G: Q(A) = P(A) on every atom of g (within Density::kNormTolerance).
bool is_in_P_G(const FiniteSpace& space, const Density& q, const Partition& g);

/// Groups the atoms of g by the dyadic cell of y they fall in:
/// cell 0 is y <= -n, cell j is (-n + (j-1)/2^n, -n + j/2^n], and the last
/// cell is y > n. Every block of the result is a union of atoms of g.
/// Throws NotMeasurable or InvalidParameter (n == 0).
Partition dyadic_partition(std::span<const double> y, const Partition& g,
                           unsigned n);

/// Whether dyadic cell `cell` of level n is one of the two unbounded tails.
bool is_dyadic_tail(long long cell, unsigned n);
/// Dyadic cell index of a value at level n.
long long dyadic_cell(double y, unsigned n);

/// max of x over the atom (P has full support). Throws EmptyAtom.
double ess_sup_on(std::span<const double> x, std::span<const std::size_t> atom);

/// Expands a per-block quantity to a per-point random variable. Q-null
/// entries are not allowed here.
Rv expand(std::span<const double> per_block, const Partition& g);

}  // namespace quasidual
