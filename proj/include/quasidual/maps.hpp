#pragma once

#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "quasidual/prob_core.hpp"

/// Concrete quasiconvex conditional maps pi: L_F -> L_G on a finite space.
///
/// Every family is regular: the value on a G-atom depends only on x
/// restricted to that atom (or, for coarsened maps, to the coarsening block
/// containing it). Besides evaluation each family exposes a per-atom support
/// oracle, sup{ <w, xi> : pi(xi) <= c on the atom }, which is all the dual
/// engine needs.
namespace quasidual {

struct Entropic {
  double gamma = 1.0;
};

struct WorstCase {};

enum class LossKind { Exp, Softplus };
/// Increasing convex loss l on the real line, l > 0.
struct Loss {
  LossKind kind = LossKind::Exp;
  double alpha = 1.0;  // Exp only: l(x) = exp(alpha x)
};

enum class OuterKind { Identity, Log, Sqrt };

/// pi(x) = f(sum_i v_i l(x_i)) on each atom.
struct Composite {
  Loss loss;
  OuterKind outer = OuterKind::Identity;
};

/// Monotone transform applied to an inner map. Reflect (g(t) = -t) is
/// decreasing and exists only as a negative control.
enum class TransformKind { Arctan, ShiftedCubic, Reflect };
struct Transform {
  TransformKind kind = TransformKind::Arctan;
  double shift = 0.0;  // ShiftedCubic: g(t) = (t - shift)^3
};

class MapSpec;
using MapPtr = std::shared_ptr<const MapSpec>;

struct Transformed {
  MapPtr inner;
  Transform g;
};

/// pi^Gamma: on each block of gamma, the maximum of the inner map over the
/// block.
struct Coarsened {
  MapPtr inner;
  Partition gamma;
};

/// x -> -inner(-x), a monotone quasiconcave map.
struct Mirrored {
  MapPtr inner;
};

enum class Orientation { Quasiconvex, Quasiconcave };

class MapSpec {
 public:
  using Family =
      std::variant<Entropic, WorstCase, Composite, Transformed, Coarsened, Mirrored>;

  /// Throws InvalidParameter when gamma <= 0.
  static MapSpec entropic(std::shared_ptr<const FiniteSpace> space, Partition g,
                          double gamma);
  static MapSpec worst_case(std::shared_ptr<const FiniteSpace> space, Partition g);
  static MapSpec composite(std::shared_ptr<const FiniteSpace> space, Partition g,
                           Loss loss, OuterKind outer);
  static MapSpec transformed(const MapSpec& inner, Transform g);

  const Family& family() const noexcept { return family_; }
  const FiniteSpace& space() const noexcept { return *space_; }
  const std::shared_ptr<const FiniteSpace>& space_ptr() const noexcept { return space_; }
  /// The sub-sigma-algebra G of the constraints E_Q[. | G].
  const Partition& g_partition() const noexcept { return g_; }
  /// Partition on which evaluate() is constant: G, or Gamma once coarsened.
  const Partition& output_partition() const noexcept { return output_; }
  /// Conditional P-weights on G-atom `atom`.
  std::span<const double> ref_weights(std::size_t atom) const { return ref_weights_.at(atom); }

  bool is_cash_invariant() const noexcept { return cash_invariant_; }
  bool is_monotone() const noexcept { return monotone_; }
  Orientation orientation() const noexcept { return orientation_; }

  std::string describe() const;

 private:
  friend MapSpec coarsen(const MapSpec&, const Partition&);
  friend MapSpec mirror(const MapSpec&);

  MapSpec(std::shared_ptr<const FiniteSpace> space, Partition g, Partition output,
          Family family);

  std::shared_ptr<const FiniteSpace> space_;
  Partition g_;
  Partition output_;
  Family family_;
  std::vector<std::vector<double>> ref_weights_;
  bool cash_invariant_ = false;
  bool monotone_ = true;
  Orientation orientation_ = Orientation::Quasiconvex;
};

/// pi(x) as a random variable, constant on output_partition().
/// Throws DimensionMismatch, NonFiniteInput or DomainViolation.
Rv evaluate(const MapSpec& m, std::span<const double> x);

/// Value of pi(x) on G-atom `atom` (for coarsened maps: the value on the
/// coarsening block that contains it).
double atom_value(const MapSpec& m, std::size_t atom, std::span<const double> x);

/// sup{ sum_{i in A} w_i xi_i : pi(xi) <= c on A } for G-atom A. `w` is
/// indexed like the atom's points. Returns +inf when unbounded and -inf
/// when the level set is empty. Quasiconvex maps only.
/// Throws WeightAllZero, DimensionMismatch or UnsupportedOrientation.
double atom_support(const MapSpec& m, std::size_t atom, double c,
                    std::span<const double> w);

/// Support value over an index set that is a union of G-atoms lying inside
/// one output block: the per-atom supports add up because both the
/// constraint and the objective separate across atoms. `w` is indexed like
/// `block`. Throws NotGMeasurablePartition when `block` is not such a union.
double support_value(const MapSpec& m, std::span<const std::size_t> block,
                     double c, std::span<const double> w);

/// pi^Gamma. Every block of gamma must be a union of output blocks of m.
/// Throws NotGMeasurablePartition, SpaceMismatch or UnsupportedOrientation.
MapSpec coarsen(const MapSpec& m, const Partition& gamma);

/// x -> -m(-x).
MapSpec mirror(const MapSpec& m);

/// Upper bound on the directional derivative of pi along the constant
/// direction, sup d/ds pi(xi + s 1), for xi in [lo, hi]^n. Rounding every
/// coordinate of a point up by at most h raises pi by at most bound * h.
double slope_bound(const MapSpec& m, double lo, double hi);

enum class UtilityKind { Exponential, Power, Log };

/// Strictly increasing concave utility with closed-form inverse.
struct Utility {
  UtilityKind kind = UtilityKind::Exponential;
  double param = 1.0;  // alpha for Exponential, eta in (0,1) for Power

  /// Throws InvalidParameter for alpha <= 0 or eta outside (0, 1).
  void validate() const;
  /// Throws DomainViolation for x <= 0 under Power and Log.
  double value(double x) const;
  double inverse(double y) const;
};

/// Conditional certainty equivalent u^{-1}(E_P[u(x) | G]).
Rv cce_evaluate(const Utility& u, const FiniteSpace& space,
                std::span<const double> x, const Partition& g);

/// Transform helpers, exposed for tests.
double apply_transform(const Transform& g, double t);
double transform_inverse(const Transform& g, double c);

}  // namespace quasidual
