#include "quasidual/maps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace quasidual {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double loss_value(const Loss& l, double x) {
  switch (l.kind) {
    case LossKind::Exp: return std::exp(l.alpha * x);
    case LossKind::Softplus: return softplus(x);
  }
  return 0.0;
}

double outer_value(OuterKind f, double s) {
  switch (f) {
    case OuterKind::Identity: return s;
    case OuterKind::Log: return std::log(s);
    case OuterKind::Sqrt: return std::sqrt(s);
  }
  return 0.0;
}

// f^{-1}(c), or -inf when no s > 0 has f(s) <= c.
double outer_inverse(OuterKind f, double c) {
  switch (f) {
    case OuterKind::Identity: return c;
    case OuterKind::Log: return std::exp(c);
    case OuterKind::Sqrt: return c < 0.0 ? -kInf : c * c;
  }
  return 0.0;
}

// inf of f over the range (0, inf) of the averaged loss.
double outer_floor(OuterKind f) {
  switch (f) {
    case OuterKind::Identity: return 0.0;
    case OuterKind::Log: return -kInf;
    case OuterKind::Sqrt: return 0.0;
  }
  return 0.0;
}

// KL(w / total || v) with 0 log 0 = 0; v sums to one.
double kl_divergence(std::span<const double> w, std::span<const double> v, double total) {
  double kl = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k] > 0.0) {
      const double wk = w[k] / total;
      kl += wk * std::log(wk / v[k]);
    }
  }
  return std::max(kl, 0.0);
}

// sup{ <w, xi> : sum_i v_i l(xi_i) <= b } for b > 0, via the dual
//   inf_{lambda > 0} lambda b + sum_i lambda v_i l*(w_i / (lambda v_i)).
// Exp(alpha) has the closed form (S / alpha)(log b + KL(w / S || v)),
// S = sum w. For softplus the stationarity condition in u = 1 / lambda is
//   b + sum_i v_i log(1 - a_i u) = 0,  a_i = w_i / v_i,
// solved by safeguarded Newton in t = -log(1 - u max a). With r_i = a_i / max a
// the left side is b + sum_i v_i log(1 - r_i + r_i e^-t), which lies between
// b - V t and b - V_max t (V = sum of v over w > 0, V_max over r = 1).
double composite_support(const Loss& loss, std::span<const double> v,
                         std::span<const double> w, double b) {
  double total = 0.0;
  for (double wk : w) total += wk;
  if (loss.kind == LossKind::Exp) {
    return total * (std::log(b) + kl_divergence(w, v, total)) / loss.alpha;
  }

  double amax = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) amax = std::max(amax, w[k] / v[k]);
  double v_all = 0.0;
  double v_top = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k] <= 0.0) continue;
    v_all += v[k];
    if (w[k] / v[k] == amax) v_top += v[k];
  }
  auto h = [&](double t, double& slope) {
    const double et = std::exp(-t);
    double val = b;
    slope = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (w[k] <= 0.0) continue;
      const double r = (w[k] / v[k]) / amax;
      const double rest = (1.0 - r) + r * et;
      val += v[k] * std::log(rest);
      slope -= v[k] * r * et / rest;
    }
    return val;
  };
  double lo = b / v_all;
  double hi = b / v_top;
  double t = lo;
  double slope = 0.0;
  if (hi > lo) {
    t = 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
      const double val = h(t, slope);
      if (val == 0.0) break;
      if (val > 0.0) {
        lo = t;
      } else {
        hi = t;
      }
      double next = t - val / slope;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      const bool done = std::abs(next - t) <= 1e-15 * t || hi - lo <= 1e-15 * hi;
      t = next;
      if (done) break;
    }
  }
  const double et = std::exp(-t);
  const double lambda = amax / -std::expm1(-t);
  double d = lambda * b;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k] <= 0.0) continue;
    const double r = (w[k] / v[k]) / amax;
    const double y = r * -std::expm1(-t);
    d += w[k] * std::log(y);
    d += (lambda * v[k] - w[k]) * std::log((1.0 - r) + r * et);
  }
  return d;
}

// Range (inf, sup) of pi over all inputs; neither bound is attained.
std::pair<double, double> value_range(const MapSpec& m);

std::pair<double, double> transform_range(const Transform& g,
                                          std::pair<double, double> r) {
  if (g.kind == TransformKind::Reflect) return {-r.second, -r.first};
  return {apply_transform(g, r.first), apply_transform(g, r.second)};
}

std::pair<double, double> value_range(const MapSpec& m) {
  return std::visit(
      Overloaded{
          [](const Entropic&) { return std::pair{-kInf, kInf}; },
          [](const WorstCase&) { return std::pair{-kInf, kInf}; },
          [](const Composite& c) { return std::pair{outer_floor(c.outer), kInf}; },
          [](const Transformed& t) { return transform_range(t.g, value_range(*t.inner)); },
          [](const Coarsened& c) { return value_range(*c.inner); },
          [](const Mirrored& mm) {
            const auto r = value_range(*mm.inner);
            return std::pair{-r.second, -r.first};
          },
      },
      m.family());
}

void check_input(const MapSpec& m, std::span<const double> x) {
  if (x.size() != m.space().size()) {
    throw Error(ErrorCode::DimensionMismatch, "x has " + std::to_string(x.size()) +
                                                  " entries, space has " +
                                                  std::to_string(m.space().size()));
  }
  for (double xi : x) {
    if (!std::isfinite(xi)) throw Error(ErrorCode::NonFiniteInput, "x must be finite");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Transforms

double apply_transform(const Transform& g, double t) {
  switch (g.kind) {
    case TransformKind::Arctan: return std::atan(t);
    case TransformKind::ShiftedCubic: {
      const double u = t - g.shift;
      return u * u * u;
    }
    case TransformKind::Reflect: return -t;
  }
  return t;
}

double transform_inverse(const Transform& g, double c) {
  switch (g.kind) {
    case TransformKind::Arctan:
      if (c >= std::numbers::pi / 2) return kInf;
      if (c <= -std::numbers::pi / 2) return -kInf;
      return std::tan(c);
    case TransformKind::ShiftedCubic: return std::cbrt(c) + g.shift;
    case TransformKind::Reflect: return -c;
  }
  return c;
}

// ---------------------------------------------------------------------------
// MapSpec

MapSpec::MapSpec(std::shared_ptr<const FiniteSpace> space, Partition g,
                 Partition output, Family family)
    : space_(std::move(space)),
      g_(std::move(g)),
      output_(std::move(output)),
      family_(std::move(family)) {
  if (!space_) throw Error(ErrorCode::InvalidParameter, "map needs a space");
  if (g_.n_points() != space_->size() || output_.n_points() != space_->size()) {
    throw Error(ErrorCode::SpaceMismatch, "partition does not match the space");
  }
  for (const auto& atom : g_.blocks()) ref_weights_.push_back(reference_weights(*space_, atom));
}

MapSpec MapSpec::entropic(std::shared_ptr<const FiniteSpace> space, Partition g,
                          double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw Error(ErrorCode::InvalidParameter, "entropic gamma must be positive");
  }
  Partition out = g;
  MapSpec m(std::move(space), std::move(g), std::move(out), Entropic{gamma});
  m.cash_invariant_ = true;
  return m;
}

MapSpec MapSpec::worst_case(std::shared_ptr<const FiniteSpace> space, Partition g) {
  Partition out = g;
  MapSpec m(std::move(space), std::move(g), std::move(out), WorstCase{});
  m.cash_invariant_ = true;
  return m;
}

MapSpec MapSpec::composite(std::shared_ptr<const FiniteSpace> space, Partition g,
                           Loss loss, OuterKind outer) {
  if (loss.kind == LossKind::Exp && !(loss.alpha > 0.0 && std::isfinite(loss.alpha))) {
    throw Error(ErrorCode::InvalidParameter, "exponential loss needs alpha > 0");
  }
  Partition out = g;
  return MapSpec(std::move(space), std::move(g), std::move(out), Composite{loss, outer});
}

MapSpec MapSpec::transformed(const MapSpec& inner, Transform g) {
  if (inner.orientation() != Orientation::Quasiconvex) {
    throw Error(ErrorCode::UnsupportedOrientation, "transform of a mirrored map");
  }
  if (!std::isfinite(g.shift)) throw Error(ErrorCode::InvalidParameter, "cubic shift");
  MapSpec m(inner.space_, inner.g_, inner.output_,
            Transformed{std::make_shared<const MapSpec>(inner), g});
  m.monotone_ = inner.monotone_ && g.kind != TransformKind::Reflect;
  return m;
}

MapSpec coarsen(const MapSpec& m, const Partition& gamma) {
  if (gamma.n_points() != m.space().size()) {
    throw Error(ErrorCode::SpaceMismatch, "coarsening partition size");
  }
  if (m.orientation() != Orientation::Quasiconvex) {
    throw Error(ErrorCode::UnsupportedOrientation, "coarsening a mirrored map");
  }
  if (!m.output_partition().refines(gamma)) {
    throw Error(ErrorCode::NotGMeasurablePartition,
                "coarsening blocks must be unions of atoms");
  }
  MapSpec out(m.space_, m.g_, gamma,
              Coarsened{std::make_shared<const MapSpec>(m), gamma});
  out.monotone_ = m.monotone_;
  return out;
}

MapSpec mirror(const MapSpec& m) {
  MapSpec out(m.space_, m.g_, m.output_, Mirrored{std::make_shared<const MapSpec>(m)});
  out.monotone_ = m.monotone_;
  out.cash_invariant_ = m.cash_invariant_;
  out.orientation_ = m.orientation_ == Orientation::Quasiconvex ? Orientation::Quasiconcave
                                                                : Orientation::Quasiconvex;
  return out;
}

std::string MapSpec::describe() const {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const Entropic& e) { os << "entropic(gamma=" << e.gamma << ")"; },
                 [&](const WorstCase&) { os << "worst_case"; },
                 [&](const Composite& c) {
                   os << "composite(loss=";
                   if (c.loss.kind == LossKind::Exp) {
                     os << "exp(alpha=" << c.loss.alpha << ")";
                   } else {
                     os << "softplus";
                   }
                   os << ",outer="
                      << (c.outer == OuterKind::Identity ? "identity"
                          : c.outer == OuterKind::Log    ? "log"
                                                         : "sqrt")
                      << ")";
                 },
                 [&](const Transformed& t) {
                   os << "transformed(";
                   switch (t.g.kind) {
                     case TransformKind::Arctan: os << "arctan"; break;
                     case TransformKind::ShiftedCubic:
                       os << "cubic(shift=" << t.g.shift << ")";
                       break;
                     case TransformKind::Reflect: os << "reflect"; break;
                   }
                   os << "," << t.inner->describe() << ")";
                 },
                 [&](const Coarsened& c) {
                   os << "coarsened(" << c.gamma.num_blocks() << " blocks,"
                      << c.inner->describe() << ")";
                 },
                 [&](const Mirrored& mm) { os << "mirrored(" << mm.inner->describe() << ")"; },
             },
             family_);
  return os.str();
}

// ---------------------------------------------------------------------------
// Evaluation

double atom_value(const MapSpec& m, std::size_t atom, std::span<const double> x) {
  const Block& pts = m.g_partition().block(atom);
  const auto v = m.ref_weights(atom);
  return std::visit(
      Overloaded{
          [&](const Entropic& e) {
            double zmax = -kInf;
            for (auto i : pts) zmax = std::max(zmax, e.gamma * x[i]);
            double acc = 0.0;
            for (std::size_t k = 0; k < pts.size(); ++k) {
              acc += v[k] * std::exp(e.gamma * x[pts[k]] - zmax);
            }
            return (zmax + std::log(acc)) / e.gamma;
          },
          [&](const WorstCase&) { return ess_sup_on(x, pts); },
          [&](const Composite& c) {
            double s = 0.0;
            for (std::size_t k = 0; k < pts.size(); ++k) s += v[k] * loss_value(c.loss, x[pts[k]]);
            return outer_value(c.outer, s);
          },
          [&](const Transformed& t) { return apply_transform(t.g, atom_value(*t.inner, atom, x)); },
          [&](const Coarsened& c) {
            const auto& out = m.output_partition();
            const auto& block = out.block(out.block_of(pts.front()));
            double best = -kInf;
            for (auto a : m.g_partition().blocks_inside(block)) {
              best = std::max(best, atom_value(*c.inner, a, x));
            }
            return best;
          },
          [&](const Mirrored& mm) {
            std::vector<double> neg(x.begin(), x.end());
            for (auto& xi : neg) xi = -xi;
            return -atom_value(*mm.inner, atom, neg);
          },
      },
      m.family());
}

Rv evaluate(const MapSpec& m, std::span<const double> x) {
  check_input(m, x);
  const auto& g = m.g_partition();
  Rv out(x.size());
  for (std::size_t a = 0; a < g.num_blocks(); ++a) {
    const double val = atom_value(m, a, x);
    for (auto i : g.block(a)) out[i] = val;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Support oracle

double atom_support(const MapSpec& m, std::size_t atom, double c,
                    std::span<const double> w) {
  const Block& pts = m.g_partition().block(atom);
  if (w.size() != pts.size()) throw Error(ErrorCode::DimensionMismatch, "support weights");
  double total = 0.0;
  for (double wi : w) {
    if (!(wi >= 0.0) || !std::isfinite(wi)) {
      throw Error(ErrorCode::DomainViolation, "support weights must be finite and >= 0");
    }
    total += wi;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::WeightAllZero, "support weights are all zero");
  if (std::isnan(c)) throw Error(ErrorCode::DomainViolation, "level is NaN");
  if (c == kInf) return kInf;
  if (c == -kInf) return -kInf;

  const auto v = m.ref_weights(atom);
  return std::visit(
      Overloaded{
          [&](const Entropic& e) {
            return total * (c + kl_divergence(w, v, total) / e.gamma);
          },
          [&](const WorstCase&) { return c * total; },
          [&](const Composite& comp) {
            const double b = outer_inverse(comp.outer, c);
            if (!(b > 0.0)) return -kInf;
            if (b == kInf) return kInf;
            return composite_support(comp.loss, v, w, b);
          },
          [&](const Transformed& t) {
            if (t.g.kind == TransformKind::Reflect) {
              // {-inner <= c} = {inner >= -c}: empty or unbounded along 1.
              return -c < value_range(*t.inner).second ? kInf : -kInf;
            }
            return atom_support(*t.inner, atom, transform_inverse(t.g, c), w);
          },
          [&](const Coarsened& cc) { return atom_support(*cc.inner, atom, c, w); },
          [&](const Mirrored&) -> double {
            throw Error(ErrorCode::UnsupportedOrientation,
                        "support oracle of a quasiconcave map");
          },
      },
      m.family());
}

double support_value(const MapSpec& m, std::span<const std::size_t> block, double c,
                     std::span<const double> w) {
  if (w.size() != block.size()) throw Error(ErrorCode::DimensionMismatch, "support weights");
  const auto& g = m.g_partition();
  const auto atoms = g.blocks_inside(block);
  const auto& out = m.output_partition();
  for (auto a : atoms) {
    if (out.block_of(g.block(a).front()) != out.block_of(block.front())) {
      throw Error(ErrorCode::NotGMeasurablePartition, "index set spans several output blocks");
    }
  }
  double total_w = 0.0;
  for (double wi : w) total_w += wi;
  if (!(total_w > 0.0)) throw Error(ErrorCode::WeightAllZero, "support weights are all zero");

  double sum = 0.0;
  for (auto a : atoms) {
    const Block& pts = g.block(a);
    std::vector<double> wa(pts.size());
    double mass = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const auto pos = std::find(block.begin(), block.end(), pts[k]) - block.begin();
      wa[k] = w[static_cast<std::size_t>(pos)];
      mass += wa[k];
    }
    double s;
    if (mass > 0.0) {
      s = atom_support(m, a, c, wa);
    } else {
      // Zero objective on this atom: only nonemptiness of its level set matters.
      const auto v = m.ref_weights(a);
      s = atom_support(m, a, c, v) == -kInf ? -kInf : 0.0;
    }
    if (s == -kInf) return -kInf;
    sum += s;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Slope bounds

namespace {

std::pair<double, double> range_on_box(const MapSpec& m, double lo, double hi) {
  return std::visit(
      Overloaded{
          [&](const Entropic&) { return std::pair{lo, hi}; },
          [&](const WorstCase&) { return std::pair{lo, hi}; },
          [&](const Composite& c) {
            return std::pair{outer_value(c.outer, loss_value(c.loss, lo)),
                             outer_value(c.outer, loss_value(c.loss, hi))};
          },
          [&](const Transformed& t) { return transform_range(t.g, range_on_box(*t.inner, lo, hi)); },
          [&](const Coarsened& c) { return range_on_box(*c.inner, lo, hi); },
          [&](const Mirrored& mm) {
            const auto r = range_on_box(*mm.inner, -hi, -lo);
            return std::pair{-r.second, -r.first};
          },
      },
      m.family());
}

}  // namespace

double slope_bound(const MapSpec& m, double lo, double hi) {
  return std::visit(
      Overloaded{
          [&](const Entropic&) { return 1.0; },
          [&](const WorstCase&) { return 1.0; },
          [&](const Composite& c) {
            if (c.loss.kind == LossKind::Exp) {
              const double a = c.loss.alpha;
              switch (c.outer) {
                case OuterKind::Identity: return a * std::exp(a * hi);
                case OuterKind::Log: return a;
                case OuterKind::Sqrt: return 0.5 * a * std::exp(0.5 * a * hi);
              }
            }
            switch (c.outer) {
              case OuterKind::Identity: return sigmoid(hi);
              case OuterKind::Log: return 1.0;
              case OuterKind::Sqrt: return sigmoid(hi) / (2.0 * std::sqrt(softplus(lo)));
            }
            return kInf;
          },
          [&](const Transformed& t) {
            const auto [a, b] = range_on_box(*t.inner, lo, hi);
            double gprime = 1.0;
            switch (t.g.kind) {
              case TransformKind::Arctan: {
                const double tmin = (a <= 0.0 && b >= 0.0) ? 0.0 : std::min(std::abs(a), std::abs(b));
                gprime = 1.0 / (1.0 + tmin * tmin);
                break;
              }
              case TransformKind::ShiftedCubic: {
                const double u = std::max(std::abs(a - t.g.shift), std::abs(b - t.g.shift));
                gprime = 3.0 * u * u;
                break;
              }
              case TransformKind::Reflect: gprime = 1.0; break;
            }
            return gprime * slope_bound(*t.inner, lo, hi);
          },
          [&](const Coarsened& c) { return slope_bound(*c.inner, lo, hi); },
          [&](const Mirrored& mm) { return slope_bound(*mm.inner, -hi, -lo); },
      },
      m.family());
}

// ---------------------------------------------------------------------------
// Utilities and the conditional certainty equivalent

void Utility::validate() const {
  switch (kind) {
    case UtilityKind::Exponential:
      if (!(param > 0.0) || !std::isfinite(param)) {
        throw Error(ErrorCode::InvalidParameter, "exponential utility needs alpha > 0");
      }
      break;
    case UtilityKind::Power:
      if (!(param > 0.0 && param < 1.0)) {
        throw Error(ErrorCode::InvalidParameter, "power utility needs eta in (0, 1)");
      }
      break;
    case UtilityKind::Log: break;
  }
}

double Utility::value(double x) const {
  switch (kind) {
    case UtilityKind::Exponential: return -std::expm1(-param * x);
    case UtilityKind::Power:
      if (!(x > 0.0)) throw Error(ErrorCode::DomainViolation, "power utility needs x > 0");
      return std::pow(x, param);
    case UtilityKind::Log:
      if (!(x > 0.0)) throw Error(ErrorCode::DomainViolation, "log utility needs x > 0");
      return std::log(x);
  }
  return 0.0;
}

double Utility::inverse(double y) const {
  switch (kind) {
    case UtilityKind::Exponential:
      if (!(y < 1.0)) throw Error(ErrorCode::DomainViolation, "exponential utility is < 1");
      return -std::log1p(-y) / param;
    case UtilityKind::Power:
      if (y < 0.0) throw Error(ErrorCode::DomainViolation, "power utility is >= 0");
      return std::pow(y, 1.0 / param);
    case UtilityKind::Log: return std::exp(y);
  }
  return 0.0;
}

Rv cce_evaluate(const Utility& u, const FiniteSpace& space, std::span<const double> x,
                const Partition& g) {
  u.validate();
  if (x.size() != space.size() || g.n_points() != space.size()) {
    throw Error(ErrorCode::DimensionMismatch, "cce operands");
  }
  Rv out(x.size());
  for (const auto& atom : g.blocks()) {
    const auto v = reference_weights(space, atom);
    double eu = 0.0;
    for (std::size_t k = 0; k < atom.size(); ++k) eu += v[k] * u.value(x[atom[k]]);
    const double val = u.inverse(eu);
    for (auto i : atom) out[i] = val;
  }
  return out;
}

}  // namespace quasidual
