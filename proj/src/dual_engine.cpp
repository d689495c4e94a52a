#include "quasidual/dual_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace quasidual {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One G-atom's constraint inside an output block. Unconstrained atoms only
// require their level set to be nonempty.
struct AtomTarget {
  std::size_t atom = 0;
  bool constrained = false;
  std::vector<double> w;
  double t = 0.0;
};

double block_inf(const MapSpec& m, const std::vector<AtomTarget>& targets, double lo,
                 double hi, const SolverCfg& cfg) {
  // Slack of the tightest constraint at level c; nondecreasing in c.
  auto slack = [&](double c) {
    double h = kInf;
    for (const auto& tg : targets) {
      if (tg.constrained) {
        h = std::min(h, atom_support(m, tg.atom, c, tg.w) - tg.t);
      } else if (atom_support(m, tg.atom, c, m.ref_weights(tg.atom)) == -kInf) {
        return -kInf;
      }
    }
    return h;
  };
  const auto r = bracket_root(slack, lo, hi, cfg.bisect_tol);
  switch (r.status) {
    case BisectStatus::Converged: return r.root;
    case BisectStatus::Unbounded: return -kInf;
    case BisectStatus::BracketExhausted:
      throw Error(ErrorCode::BracketExhausted,
                  "no feasible level up to " + std::to_string(r.bracket_final.second) +
                      " (last bracket [" + std::to_string(r.bracket_final.first) + ", " +
                      std::to_string(r.bracket_final.second) + "])");
  }
  return r.root;
}

void check_x(const MapSpec& m, std::span<const double> x) {
  if (x.size() != m.space().size()) throw Error(ErrorCode::DimensionMismatch, "x length");
  for (double xi : x) {
    if (!std::isfinite(xi)) throw Error(ErrorCode::NonFiniteInput, "x must be finite");
  }
}

std::pair<double, double> x_bracket(std::span<const double> x, const Block& pts) {
  double lo = kInf;
  double hi = -kInf;
  for (auto i : pts) {
    lo = std::min(lo, x[i]);
    hi = std::max(hi, x[i]);
  }
  return {lo - 1.0, hi + 1.0};
}

std::vector<double> negated(std::span<const double> x) {
  std::vector<double> out(x.begin(), x.end());
  for (auto& v : out) v = -v;
  return out;
}

}  // namespace

namespace {

double k_atom(const MapSpec& m, std::size_t atom, std::span<const double> w,
              std::span<const double> x, std::pair<double, double> bracket,
              const SolverCfg& cfg) {
  const Block& pts = m.g_partition().block(atom);
  if (w.size() != pts.size()) throw Error(ErrorCode::DimensionMismatch, "atom weights");
  AtomTarget tg{atom, true, std::vector<double>(w.begin(), w.end()), 0.0};
  for (std::size_t k = 0; k < pts.size(); ++k) tg.t += w[k] * x[pts[k]];
  return block_inf(m, {tg}, bracket.first, bracket.second, cfg);
}

}  // namespace

double k_on_atom(const MapSpec& m, std::size_t atom, std::span<const double> w,
                 std::span<const double> x, const SolverCfg& cfg) {
  return k_atom(m, atom, w, x, x_bracket(x, m.g_partition().block(atom)), cfg);
}

std::vector<double> k_value(const MapSpec& m, std::span<const double> x, const Density& q,
                            const SolverCfg& cfg) {
  check_x(m, x);
  if (q.size() != x.size()) throw Error(ErrorCode::DimensionMismatch, "density length");
  if (const auto* mm = std::get_if<Mirrored>(&m.family())) {
    auto inner = k_value(*mm->inner, negated(x), q, cfg);
    for (auto& v : inner) v = -v;
    return inner;
  }
  const auto& g = m.g_partition();
  const auto& out = m.output_partition();
  std::vector<double> result;
  result.reserve(out.num_blocks());
  for (const auto& block : out.blocks()) {
    std::vector<AtomTarget> targets;
    for (auto a : g.blocks_inside(block)) {
      const Block& pts = g.block(a);
      AtomTarget tg{a, false, {}, 0.0};
      if (auto w = conditional_weights(m.space(), q.values(), pts)) {
        tg.constrained = true;
        tg.w = std::move(*w);
        for (std::size_t k = 0; k < pts.size(); ++k) tg.t += tg.w[k] * x[pts[k]];
      }
      targets.push_back(std::move(tg));
    }
    const auto [lo, hi] = x_bracket(x, block);
    result.push_back(block_inf(m, targets, lo, hi, cfg));
  }
  return result;
}

std::vector<double> r_value(const MapSpec& m, std::span<const double> y,
                            std::span<const double> xi, const SolverCfg& cfg) {
  const auto& space = m.space();
  if (y.size() != space.size() || xi.size() != space.size()) {
    throw Error(ErrorCode::DimensionMismatch, "r_value operands");
  }
  for (std::size_t i = 0; i < xi.size(); ++i) {
    if (!std::isfinite(xi[i]) || !std::isfinite(y[i])) {
      throw Error(ErrorCode::NonFiniteInput, "r_value operands must be finite");
    }
    if (xi[i] < 0.0) throw Error(ErrorCode::NegativeDensity, "xi' must be nonnegative");
  }
  const auto& g = m.g_partition();
  if (!is_measurable(y, g)) throw Error(ErrorCode::NotMeasurable, "Y must be G-measurable");
  if (const auto* mm = std::get_if<Mirrored>(&m.family())) {
    auto inner = r_value(*mm->inner, negated(y), xi, cfg);
    for (auto& v : inner) v = -v;
    return inner;
  }
  const auto& out = m.output_partition();
  std::vector<double> result;
  for (const auto& block : out.blocks()) {
    std::vector<AtomTarget> targets;
    double lo = kInf;
    double hi = -kInf;
    for (auto a : g.blocks_inside(block)) {
      const Block& pts = g.block(a);
      AtomTarget tg{a, false, {}, 0.0};
      double mu = 0.0;
      for (auto i : pts) mu += xi[i] * space.prob(i);
      if (mu > 0.0) {
        tg.constrained = true;
        tg.w.resize(pts.size());
        for (std::size_t k = 0; k < pts.size(); ++k) {
          tg.w[k] = xi[pts[k]] * space.prob(pts[k]) / mu;
        }
        // E_P[xi' xi | G] >= y  <=>  <w, xi> >= y P(A) / mu(A)
        tg.t = y[pts.front()] * space.mass(pts) / mu;
        lo = std::min(lo, tg.t);
        hi = std::max(hi, tg.t);
      }
      targets.push_back(std::move(tg));
    }
    if (lo > hi) {
      lo = 0.0;
      hi = 0.0;
    }
    result.push_back(block_inf(m, targets, lo - 1.0, hi + 1.0, cfg));
  }
  return result;
}

std::vector<double> analytic_dual_start(const MapSpec& m, std::size_t atom,
                                        std::span<const double> x) {
  double a = 0.0;
  const MapSpec* cur = &m;
  while (a == 0.0) {
    if (const auto* e = std::get_if<Entropic>(&cur->family())) {
      a = e->gamma;
    } else if (const auto* c = std::get_if<Composite>(&cur->family())) {
      if (c->loss.kind != LossKind::Exp) return {};
      a = c->loss.alpha;
    } else if (const auto* t = std::get_if<Transformed>(&cur->family())) {
      if (t->g.kind == TransformKind::Reflect) return {};
      cur = t->inner.get();
    } else if (const auto* cc = std::get_if<Coarsened>(&cur->family())) {
      cur = cc->inner.get();
    } else {
      return {};
    }
  }
  const Block& pts = m.g_partition().block(atom);
  const auto v = m.ref_weights(atom);
  double zmax = -kInf;
  for (auto i : pts) zmax = std::max(zmax, a * x[i]);
  std::vector<double> w(pts.size());
  double total = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    w[k] = v[k] * std::exp(a * x[pts[k]] - zmax);
    total += w[k];
  }
  for (auto& wk : w) wk /= total;
  return w;
}

double DualReport::max_abs_gap() const {
  double g = 0.0;
  for (const auto& a : atoms) g = std::max(g, std::abs(a.gap));
  return g;
}

namespace {

// Best conditional weights on every G-atom. The objective on an atom only
// involves that atom's support, so a coarsened map gives the same searches
// as its inner map.
std::vector<SimplexResult> atom_searches(const MapSpec& m, std::span<const double> x,
                                         const SolverCfg& cfg) {
  const auto& g = m.g_partition();
  std::vector<SimplexResult> out;
  for (std::size_t a = 0; a < g.num_blocks(); ++a) {
    const Block& pts = g.block(a);
    // Successive evaluations are close, so the last finite value seeds the
    // bracket.
    const auto wide = x_bracket(x, pts);
    double last = std::numeric_limits<double>::quiet_NaN();
    auto objective = [&](std::span<const double> w) {
      auto bracket = wide;
      if (std::isfinite(last)) {
        const double d = 0.05 * std::max(1.0, std::abs(last));
        bracket = {last - d, last + d};
      }
      const double k = k_atom(m, a, w, x, bracket, cfg);
      if (std::isfinite(k)) last = k;
      return k;
    };
    std::vector<std::vector<double>> extra;
    if (auto seed = analytic_dual_start(m, a, x); !seed.empty()) extra.push_back(std::move(seed));
    SolverCfg atom_cfg = cfg;
    atom_cfg.seed = cfg.seed ^ (0x9E3779B97F4A7C15ULL * (a + 1));
    out.push_back(simplex_search(objective, pts.size(), atom_cfg, extra));
  }
  return out;
}

DualReport assemble(const MapSpec& m, std::span<const double> x,
                    const std::vector<SimplexResult>& searches, const SolverCfg& cfg) {
  const auto& space = m.space();
  const auto& g = m.g_partition();
  const auto& out = m.output_partition();
  DualReport report;
  report.orientation = m.orientation();
  report.blocks = out.blocks();
  for (const auto& block : out.blocks()) {
    DualAtomReport ar;
    const auto atoms = g.blocks_inside(block);
    ar.primal = atom_value(m, atoms.front(), x);
    ar.dual = -kInf;
    for (auto a : atoms) {
      const auto& res = searches[a];
      ar.restarts += res.restarts_used;
      ar.iterations += res.iterations;
      ar.spread = std::max(ar.spread, res.spread);
      ar.dual = std::max(ar.dual, res.value);
    }
    // Glue the per-atom maximizers with P-proportional atom masses.
    const double block_mass = space.mass(block);
    std::vector<AtomTarget> targets;
    std::vector<double> q_block(space.size(), 0.0);
    for (auto a : atoms) {
      const Block& pts = g.block(a);
      const auto& w = searches[a].weights;
      const double share = space.mass(pts) / block_mass;
      AtomTarget tg{a, true, w, 0.0};
      for (std::size_t j = 0; j < pts.size(); ++j) {
        tg.t += w[j] * x[pts[j]];
        q_block[pts[j]] = share * w[j];
      }
      targets.push_back(std::move(tg));
    }
    ar.argmax_weights.reserve(block.size());
    for (auto i : block) ar.argmax_weights.push_back(q_block[i]);
    const auto [lo, hi] = x_bracket(x, block);
    ar.k_at_argmax = block_inf(m, targets, lo, hi, cfg);
    ar.gap = ar.primal - ar.dual;
    report.atoms.push_back(std::move(ar));
  }
  return report;
}

}  // namespace

DualReport h_value(const MapSpec& m, std::span<const double> x, const SolverCfg& cfg) {
  check_x(m, x);
  validate(cfg);
  if (const auto* mm = std::get_if<Mirrored>(&m.family())) {
    DualReport r = h_value(*mm->inner, negated(x), cfg);
    r.orientation = m.orientation();
    for (auto& a : r.atoms) {
      a.primal = -a.primal;
      a.dual = -a.dual;
      a.k_at_argmax = -a.k_at_argmax;
      a.gap = a.primal - a.dual;
    }
    return r;
  }
  return assemble(m, x, atom_searches(m, x, cfg), cfg);
}

SweepReport h_value_sweep(const MapSpec& m, std::span<const double> x,
                          const std::vector<Partition>& gammas, const SolverCfg& cfg) {
  check_x(m, x);
  validate(cfg);
  std::vector<MapSpec> coarse;
  coarse.reserve(gammas.size());
  for (const auto& gamma : gammas) coarse.push_back(coarsen(m, gamma));
  const auto searches = atom_searches(m, x, cfg);
  SweepReport out;
  out.base = assemble(m, x, searches, cfg);
  out.per_gamma.reserve(gammas.size());
  for (const auto& mc : coarse) out.per_gamma.push_back(assemble(mc, x, searches, cfg));
  return out;
}

DualReport duality_gap(const MapSpec& m, std::span<const double> x, const SolverCfg& cfg) {
  return h_value(m, x, cfg);
}

std::vector<AtomValue> fenchel_conjugate(const MapSpec& m, const Density& q,
                                         const SolverCfg& cfg) {
  if (m.orientation() != Orientation::Quasiconvex) {
    throw Error(ErrorCode::UnsupportedOrientation, "conjugate of a quasiconcave map");
  }
  if (!m.is_cash_invariant()) {
    throw Error(ErrorCode::NotCashInvariant, m.describe() + " is not cash invariant");
  }
  const auto& g = m.g_partition();
  const std::vector<double> zero(m.space().size(), 0.0);
  const auto k0 = k_value(m, zero, q, cfg);
  std::vector<AtomValue> out;
  for (std::size_t a = 0; a < g.num_blocks(); ++a) {
    if (q.mass(m.space(), g.block(a)) > 0.0) {
      out.emplace_back(-k0[a]);
    } else {
      out.emplace_back(std::nullopt);
    }
  }
  return out;
}

Density glue_density(const std::vector<std::vector<double>>& per_atom_weights,
                     const Partition& g, const FiniteSpace& space) {
  if (per_atom_weights.size() != g.num_blocks() || g.n_points() != space.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one weight vector per atom is required");
  }
  std::vector<double> q(space.size(), 0.0);
  for (std::size_t a = 0; a < g.num_blocks(); ++a) {
    const Block& pts = g.block(a);
    const auto& w = per_atom_weights[a];
    if (w.size() != pts.size()) throw Error(ErrorCode::DimensionMismatch, "atom weight length");
    double total = 0.0;
    for (double wk : w) {
      if (!(wk >= 0.0)) throw Error(ErrorCode::InvalidParameter, "weights must be >= 0");
      total += wk;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw Error(ErrorCode::InvalidParameter, "atom weights must sum to one");
    }
    const double mass = space.mass(pts);
    for (std::size_t k = 0; k < pts.size(); ++k) q[pts[k]] = mass * w[k] / space.prob(pts[k]);
  }
  return Density::make(space, std::move(q));
}

Density restrict_to_P_G(const Density& q, const Partition& g, const FiniteSpace& space) {
  if (q.size() != space.size() || g.n_points() != space.size()) {
    throw Error(ErrorCode::DimensionMismatch, "restrict_to_P_G operands");
  }
  std::vector<double> out(q.values().begin(), q.values().end());
  for (const auto& atom : g.blocks()) {
    const double qa = q.mass(space, atom);
    if (!(qa > 0.0)) {
      throw Error(ErrorCode::QNullAtom, "Q vanishes on an atom of G");
    }
    const double pa = space.mass(atom);
    if (qa == pa) continue;
    for (auto i : atom) out[i] = q[i] * (pa / qa);
  }
  return Density::make(space, std::move(out));
}

}  // namespace quasidual
