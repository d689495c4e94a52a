#pragma once

#include <span>
#include <vector>

#include "quasidual/maps.hpp"
#include "quasidual/prob_core.hpp"
#include "quasidual/solvers.hpp"

/// Dual functionals of a conditional map.
///
///   K(X, Q) = inf { pi(xi) : E_Q[xi | G] >=_Q E_Q[X | G] }
///   R(Y, xi') = inf { pi(xi) : E_P[xi' xi | G] >= Y  on {E_P[xi' | G] > 0} }
///   H(X) = sup_Q K(X, Q)
///
/// All of them split over G-atoms: on an atom only the conditional weights
/// of Q matter, so the outer supremum is a search over one probability
/// simplex per atom and the inner infimum is a bisection on the level c of
/// the support oracle. Coarsened maps are handled per coarsening block with
/// one constraint per G-atom inside it.
namespace quasidual {

/// Quasiconvex K on one G-atom given conditional weights w (indexed like
/// the atom's points) and the atom's target t = <w, x>.
double k_on_atom(const MapSpec& m, std::size_t atom, std::span<const double> w,
                 std::span<const double> x, const SolverCfg& cfg = {});

/// K(X, Q), one entry per block of m.output_partition(). Atoms with
/// Q(A) = 0 carry no constraint, so there K is the unconstrained infimum of
/// pi (-inf for most families). For mirrored maps this is the quasiconcave
/// counterpart sup { rho(eta) : E_Q[eta | G] <= E_Q[X | G] } = -K_inner(-X, Q).
/// Throws BracketExhausted or DomainViolation.
std::vector<double> k_value(const MapSpec& m, std::span<const double> x,
                            const Density& q, const SolverCfg& cfg = {});

/// R(Y, xi'), one entry per output block. y must be G-measurable and xi'
/// nonnegative. R(E_P[xi' X | G], xi') equals K(X, Q) with dQ/dP = xi'/E[xi'].
/// Throws NotMeasurable, NegativeDensity, DimensionMismatch or BracketExhausted.
std::vector<double> r_value(const MapSpec& m, std::span<const double> y,
                            std::span<const double> xi, const SolverCfg& cfg = {});

struct DualAtomReport {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  /// Conditional weights on the block (block order), summing to one.
  std::vector<double> argmax_weights;
  double k_at_argmax = 0.0;
  int restarts = 0;
  int iterations = 0;
  double spread = 0.0;
};

struct DualReport {
  Orientation orientation = Orientation::Quasiconvex;
  /// The blocks the entries refer to (the map's output partition).
  std::vector<Block> blocks;
  std::vector<DualAtomReport> atoms;

  double max_abs_gap() const;
};

/// H(X) per output block, with the best conditional weights found. The
/// search always includes the simplex vertices, the barycenter and, for
/// exponential-type families, the closed-form optimizer w_i ∝ v_i e^{a x_i}.
/// For mirrored maps the dual value is the inf-sup -H_inner(-X).
/// Throws SolverDiverged.
DualReport h_value(const MapSpec& m, std::span<const double> x, const SolverCfg& cfg = {});

struct SweepReport {
  DualReport base;                   // h_value(m, x)
  std::vector<DualReport> per_gamma;  // h_value(coarsen(m, gamma), x)
};

/// H for m and for every coarsening of it, sharing the per-atom searches
/// (they do not depend on gamma). Results equal the separate h_value calls.
/// Throws like coarsen() and h_value().
SweepReport h_value_sweep(const MapSpec& m, std::span<const double> x,
                          const std::vector<Partition>& gammas, const SolverCfg& cfg = {});

/// Primal value, H and their gap on every output block.
DualReport duality_gap(const MapSpec& m, std::span<const double> x,
                       const SolverCfg& cfg = {});

/// pi*(Q) = sup_xi { E_Q[xi | G] - pi(xi) } computed as -K(0, Q), valid for
/// cash-invariant maps. Q-null atoms are reported as nullopt.
/// Throws NotCashInvariant or UnsupportedOrientation.
std::vector<AtomValue> fenchel_conjugate(const MapSpec& m, const Density& q,
                                         const SolverCfg& cfg = {});

/// Density whose conditional weights on every atom of g are the given ones
/// and whose atom masses agree with P. Throws DimensionMismatch or
/// InvalidParameter (weights not on the simplex).
Density glue_density(const std::vector<std::vector<double>>& per_atom_weights,
                     const Partition& g, const FiniteSpace& space);

/// Rescales q on each atom by P(A)/Q(A) so that the result lies in P_G.
/// Throws QNullAtom when some atom has Q(A) = 0.
Density restrict_to_P_G(const Density& q, const Partition& g, const FiniteSpace& space);

/// Closed-form maximizer of w -> K on a G-atom when the family has one
/// (w_i ∝ v_i exp(a x_i) for entropic and exponential-loss maps, possibly
/// under a transform or coarsening); empty otherwise.
std::vector<double> analytic_dual_start(const MapSpec& m, std::size_t atom,
                                        std::span<const double> x);

}  // namespace quasidual
