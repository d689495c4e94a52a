#include "quasidual/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <sstream>

#include "quasidual/oracle.hpp"
#include "quasidual/rng.hpp"

namespace quasidual {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxStoredFailures = 20;

// Assertion thresholds.
constexpr double kGapTol = 1e-6;
constexpr double kTightTol = 1e-9;
constexpr double kLooseTol = 1e-8;
constexpr double kCashTol = 1e-10;
constexpr double kOrderTol = 1e-12;
constexpr double kScaleTol = 1e-10;  // relative, non-dyadic scale factors
constexpr double kNegGapTol = 1e-3;
constexpr double kVertexTol = 1e-6;

enum Check : std::size_t {
  kStrongDuality,
  kWeakDuality,
  kRegularity,
  kMonotonicity,
  kQuasiconvexity,
  kCashInvariance,
  kSupportShape,
  kRMonotone,
  kRScale,
  kRLatticeMin,
  kRLatticeMax,
  kRQuasiAffine,
  kREqualsK,
  kDownwardDirected,
  kKHomogeneity,
  kKLocality,
  kKUpwardDirected,
  kConjugateIdentity,
  kEntropicClosedForm,
  kTransformEquivariance,
  kSingleDensity,
  kKInfOverPartitions,
  kCoarsenedDuality,
  kMonotoneTransfer,
  kWorstCaseVertex,
  kCceMirror,
  kNegQuasiconvexity,
  kNegDualityGap,
  kCheckCount,
};

struct CheckDef {
  CheckInfo info;
  bool expect_violation = false;
};

const std::vector<CheckDef>& definitions() {
  static const std::vector<CheckDef> defs = {
      {{"strong-duality", "pi(X) = sup_Q K(X;Q) on every atom"}},
      {{"weak-duality", "K(X;Q) <= pi(X) for every density Q"}},
      {{"regularity", "pi(X 1_A + Y 1_A^c) = pi(X) 1_A + pi(Y) 1_A^c for A in G"}},
      {{"monotonicity", "X <= Y implies pi(X) <= pi(Y)"}},
      {{"quasiconvexity",
        "pi(L X1 + (1 - L) X2) <= pi(X1) max pi(X2) for G-measurable L in [0;1]"}},
      {{"cash-invariance", "pi(X + L) = pi(X) + L for G-measurable L"}},
      {{"support-monotone-homogeneous",
        "the support value is nondecreasing in c and positively homogeneous in w"}},
      {{"r-monotone", "Y1 <= Y2 implies R(Y1;xi) <= R(Y2;xi)"}},
      {{"r-scale-invariance", "R(lambda Y; lambda xi) = R(Y; xi) for lambda > 0"}},
      {{"r-lattice-min", "R(Y1;xi) min R(Y2;xi) = R(Y1 min Y2; xi)"}},
      {{"r-lattice-max", "R(Y1;xi) max R(Y2;xi) = R(Y1 max Y2; xi)"}},
      {{"r-quasi-affine",
        "R(L Y1 + (1 - L) Y2; xi) lies between R(Y1;xi) min R(Y2;xi) and their max"}},
      {{"r-equals-k", "R(E_P[xi X | G]; xi) = K(X;Q) with dQ/dP = xi / E_P[xi]"}},
      {{"downward-directed",
        "pasting feasible xi1 and xi2 on {pi(xi1) <= pi(xi2)} stays feasible with value "
        "pi(xi1) min pi(xi2)"}},
      {{"k-homogeneity", "K(X; lambda Q) = K(X;Q) for lambda > 0"}},
      {{"k-locality", "Q1 = Q2 on the atom B implies K(X;Q1) 1_B = K(X;Q2) 1_B"}},
      {{"k-upward-directed",
        "the pasted density satisfies K(X;Q) >= K(X;Q1) max K(X;Q2)"}},
      {{"conjugate-identity", "K(X;Q) = E_Q[X|G] - pi*(Q) for cash-invariant pi"}},
      {{"entropic-closed-form",
        "entropic K(X;Q) = E_Q[X|G] - KL(w|v) / gamma and pi*(Q) = KL(w|v) / gamma"}},
      {{"transform-equivariance", "K of g(pi) equals g(K of pi) for increasing continuous g"}},
      {{"single-density", "one pasted density Q_eps has H(X) - K(X;Q_eps) < eps on every atom"}},
      {{"k-inf-over-partitions",
        "K(X;Q) = inf over finite partitions Gamma of K^Gamma(X;Q)"}},
      {{"coarsened-duality", "H^Gamma(X) = pi^Gamma(X) >= pi(X)"}},
      {{"monotone-transfer",
        "K^Gamma(X;Q) <= K^Gamma(X;P) + eps on B for every Gamma = {B^c} + partition of B"}},
      {{"worst-case-vertex", "worst-case H(X) is the atom maximum of X attained at a point mass"}},
      {{"cce-mirror",
        "u^-1(E[u(X)|G]) for u(x) = 1 - exp(-alpha x) equals the mirrored entropic map and "
        "its inf-sup dual"}},
      {{"neg-quasiconvexity", "a decreasing transform of an entropic map is not quasiconvex"},
       true},
      {{"neg-duality-gap", "without quasiconvexity pi(X) - H(X) exceeds 1e-3 somewhere"}, true},
  };
  return defs;
}

std::string fmt(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_vec(std::span<const double> v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += fmt(v[i]);
  }
  return s + ")";
}

// |a - b| treating equal infinities as agreement.
double distance(double a, double b) {
  if (a == b) return 0.0;
  if (!std::isfinite(a) || !std::isfinite(b)) return kInf;
  return std::abs(a - b);
}

// Amount by which a <= b fails.
double excess(double a, double b) {
  if (a <= b) return 0.0;
  if (!std::isfinite(a) || !std::isfinite(b)) return kInf;
  return a - b;
}

// Per-instance accumulator for one check.
class Tally {
 public:
  Tally(CheckResult& r, const Instance& inst)
      : r_(r), inst_(inst), unwinding_(std::uncaught_exceptions()) {}
  Tally(const Tally&) = delete;
  Tally& operator=(const Tally&) = delete;

  void observe(double dev, double tol, const std::string& what) {
    worst_ = std::max(worst_, dev);
    if (!(dev <= tol) && !bad_) {
      bad_ = true;
      what_ = what;
    }
  }

  ~Tally() {
    if (std::uncaught_exceptions() > unwinding_ && !bad_) {
      bad_ = true;
      what_ = "threw";
    }
    ++r_.cases;
    r_.max_deviation = std::max(r_.max_deviation, worst_);
    if (!bad_) return;
    ++r_.violations;
    if (r_.failures.size() < kMaxStoredFailures) {
      r_.failures.push_back(CheckFailure{inst_.seed, std::string(family_name(inst_.family)),
                                         what_ + " x=" + fmt_vec(inst_.x)});
    }
  }

 private:
  CheckResult& r_;
  const Instance& inst_;
  double worst_ = 0.0;
  int unwinding_;
  bool bad_ = false;
  std::string what_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = seed ^ (0x632BE59BD9B4E019ULL * (a + 1));
  s += 0xD1B54A32D192ED03ULL * (b + 1);
  return splitmix64(s);
}

Rv random_rv(Rng& rng, std::size_t n, double lo, double hi) {
  Rv x(n);
  for (auto& v : x) v = rng.uniform(lo, hi);
  return x;
}

// G-measurable random variable with atom values uniform on [lo, hi].
Rv random_measurable(Rng& rng, const Partition& g, double lo, double hi) {
  Rv y(g.n_points());
  for (const auto& atom : g.blocks()) {
    const double v = rng.uniform(lo, hi);
    for (auto i : atom) y[i] = v;
  }
  return y;
}

std::vector<double> normalize_density(const FiniteSpace& space, std::vector<double> q) {
  double m = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) m += q[i] * space.prob(i);
  for (auto& v : q) v /= m;
  return q;
}

bool q_null(const FiniteSpace& space, const Density& q, const Block& atom) {
  return !(q.mass(space, atom) > 0.0);
}

MapSpec entropic_like(const std::shared_ptr<const FiniteSpace>& space, const Partition& g,
                      Rng& rng) {
  static constexpr double kGammas[] = {0.5, 1.0, 2.0};
  if (rng.below(3) == 0) return MapSpec::worst_case(space, g);
  return MapSpec::entropic(space, g, kGammas[rng.below(3)]);
}

double transform_of(const MapSpec& m, double k) {
  return apply_transform(std::get<Transformed>(m.family()).g, k);
}

struct SuiteCtx {
  std::vector<CheckResult>& checks;
  const SolverCfg& cfg;
  CheckResult& at(Check c) { return checks[c]; }
};

// ---------------------------------------------------------------------------
// Map axioms

void check_axioms(SuiteCtx& ctx, const Instance& inst, Rng& rng) {
  const auto& m = inst.map;
  const auto& g = inst.g;
  const auto& space = *inst.space;
  const std::size_t n = space.size();
  const Rv px = evaluate(m, inst.x);

  {
    Tally t(ctx.at(kRegularity), inst);
    const Rv y = random_rv(rng, n, -3.0, 3.0);
    const Rv py = evaluate(m, y);
    std::vector<bool> in_a(n, false);
    for (const auto& atom : g.blocks()) {
      const bool pick = rng.below(2) == 1;
      for (auto i : atom) in_a[i] = pick;
    }
    Rv z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = in_a[i] ? inst.x[i] : y[i];
    const Rv pz = evaluate(m, z);
    for (std::size_t i = 0; i < n; ++i) {
      t.observe(distance(pz[i], in_a[i] ? px[i] : py[i]), 0.0,
                "point " + std::to_string(i) + " y=" + fmt_vec(y));
    }
  }
  {
    Tally t(ctx.at(kMonotonicity), inst);
    Rv y = inst.x;
    for (auto& v : y) v += rng.below(3) == 0 ? 0.0 : rng.uniform(0.0, 1.0);
    const Rv py = evaluate(m, y);
    for (std::size_t i = 0; i < n; ++i) {
      t.observe(excess(px[i], py[i]), kOrderTol, "y=" + fmt_vec(y));
    }
  }
  {
    const bool concave = m.orientation() == Orientation::Quasiconcave;
    Tally t(ctx.at(kQuasiconvexity), inst);
    for (int trial = 0; trial < 3; ++trial) {
      const Rv x2 = random_rv(rng, n, -3.0, 3.0);
      const Rv lam = random_measurable(rng, g, 0.0, 1.0);
      Rv mix(n);
      for (std::size_t i = 0; i < n; ++i) mix[i] = lam[i] * inst.x[i] + (1.0 - lam[i]) * x2[i];
      const Rv p2 = evaluate(m, x2);
      const Rv pm = evaluate(m, mix);
      for (std::size_t i = 0; i < n; ++i) {
        const double dev = concave ? excess(std::min(px[i], p2[i]), pm[i])
                                   : excess(pm[i], std::max(px[i], p2[i]));
        t.observe(dev, kTightTol, "x2=" + fmt_vec(x2) + " L=" + fmt_vec(lam));
      }
    }
  }
  if (m.is_cash_invariant()) {
    Tally t(ctx.at(kCashInvariance), inst);
    const Rv lam = random_measurable(rng, g, -2.0, 2.0);
    Rv shifted = inst.x;
    for (std::size_t i = 0; i < n; ++i) shifted[i] += lam[i];
    const Rv ps = evaluate(m, shifted);
    for (std::size_t i = 0; i < n; ++i) {
      t.observe(distance(ps[i], px[i] + lam[i]), kCashTol, "L=" + fmt_vec(lam));
    }
  }
  if (m.orientation() == Orientation::Quasiconvex) {
    Tally t(ctx.at(kSupportShape), inst);
    for (std::size_t a = 0; a < g.num_blocks(); ++a) {
      const std::size_t d = g.block(a).size();
      std::vector<double> w(d);
      for (auto& wk : w) wk = rng.below(4) == 0 ? 0.0 : rng.uniform(0.0, 1.0);
      w[rng.below(d)] = rng.uniform(0.1, 1.0);
      double c1 = rng.uniform(-3.0, 3.0);
      double c2 = rng.uniform(-3.0, 3.0);
      if (c1 > c2) std::swap(c1, c2);
      const double s1 = atom_support(m, a, c1, w);
      const double s2 = atom_support(m, a, c2, w);
      const std::string what = "atom " + std::to_string(a) + " w=" + fmt_vec(w);
      t.observe(excess(s1, s2), kOrderTol, what + " c1=" + fmt(c1) + " c2=" + fmt(c2));
      for (double lambda : {0.5, 3.0}) {
        std::vector<double> lw(w);
        for (auto& v : lw) v *= lambda;
        const double sl = atom_support(m, a, c2, lw);
        t.observe(distance(sl, lambda * s2) / std::max(1.0, std::abs(sl)), kTightTol,
                  what + " lambda=" + fmt(lambda));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// R and K

std::vector<double> random_xi(Rng& rng, const Instance& inst) {
  const auto& pool = inst.densities;
  const Density& base = pool[rng.below(pool.size())];
  const double scale = rng.uniform(0.5, 2.0);
  std::vector<double> xi(base.values().begin(), base.values().end());
  for (auto& v : xi) v *= scale;
  return xi;
}

void check_r(SuiteCtx& ctx, const Instance& inst, Rng& rng) {
  const auto& m = inst.map;
  const auto& g = inst.g;
  const auto& space = *inst.space;
  const std::size_t n = space.size();
  const auto& cfg = ctx.cfg;

  const auto xi = random_xi(rng, inst);
  const Rv y1 = random_measurable(rng, g, -3.0, 3.0);
  const Rv y2 = random_measurable(rng, g, -3.0, 3.0);
  const auto r1 = r_value(m, y1, xi, cfg);
  const auto r2 = r_value(m, y2, xi, cfg);
  const std::string base = "xi=" + fmt_vec(xi) + " y1=" + fmt_vec(y1);

  {
    Tally t(ctx.at(kRMonotone), inst);
    Rv up = y1;
    for (const auto& atom : g.blocks()) {
      const double bump = rng.uniform(0.0, 1.0);
      for (auto i : atom) up[i] += bump;
    }
    const auto ru = r_value(m, up, xi, cfg);
    for (std::size_t a = 0; a < r1.size(); ++a) t.observe(excess(r1[a], ru[a]), kOrderTol, base);
  }
  {
    Tally t(ctx.at(kRScale), inst);
    for (double lambda : {0.5, 2.0, 10.0}) {
      Rv ly(y1);
      std::vector<double> lxi(xi);
      for (auto& v : ly) v *= lambda;
      for (auto& v : lxi) v *= lambda;
      const auto rl = r_value(m, ly, lxi, cfg);
      const double tol = lambda == 10.0 ? kScaleTol : 0.0;
      for (std::size_t a = 0; a < r1.size(); ++a) {
        t.observe(distance(rl[a], r1[a]) / std::max(1.0, std::abs(r1[a])), tol,
                  base + " lambda=" + fmt(lambda));
      }
    }
  }
  {
    Rv lo(n);
    Rv hi(n);
    for (std::size_t i = 0; i < n; ++i) {
      lo[i] = std::min(y1[i], y2[i]);
      hi[i] = std::max(y1[i], y2[i]);
    }
    const auto rlo = r_value(m, lo, xi, cfg);
    const auto rhi = r_value(m, hi, xi, cfg);
    Tally tmin(ctx.at(kRLatticeMin), inst);
    Tally tmax(ctx.at(kRLatticeMax), inst);
    for (std::size_t a = 0; a < r1.size(); ++a) {
      tmin.observe(distance(rlo[a], std::min(r1[a], r2[a])), kTightTol, base);
      tmax.observe(distance(rhi[a], std::max(r1[a], r2[a])), kTightTol, base);
    }
  }
  {
    Tally t(ctx.at(kRQuasiAffine), inst);
    const Rv lam = random_measurable(rng, g, 0.0, 1.0);
    Rv mix(n);
    for (std::size_t i = 0; i < n; ++i) mix[i] = lam[i] * y1[i] + (1.0 - lam[i]) * y2[i];
    const auto rm = r_value(m, mix, xi, cfg);
    for (std::size_t a = 0; a < r1.size(); ++a) {
      t.observe(std::max(excess(std::min(r1[a], r2[a]), rm[a]),
                         excess(rm[a], std::max(r1[a], r2[a]))),
                kTightTol, base + " L=" + fmt_vec(lam));
    }
  }
  {
    Tally t(ctx.at(kREqualsK), inst);
    Rv y(n);
    for (const auto& atom : g.blocks()) {
      double s = 0.0;
      for (auto i : atom) s += xi[i] * space.prob(i) * inst.x[i];
      const double v = s / space.mass(atom);
      for (auto i : atom) y[i] = v;
    }
    const auto r = r_value(m, y, xi, cfg);
    const auto k = k_value(m, inst.x, Density::make(space, normalize_density(space, xi)), cfg);
    for (std::size_t a = 0; a < r.size(); ++a) t.observe(distance(r[a], k[a]), kTightTol, base);
  }
}

void check_k(SuiteCtx& ctx, const Instance& inst, Rng& rng) {
  const auto& m = inst.map;
  const auto& g = inst.g;
  const auto& space = *inst.space;
  const std::size_t n = space.size();
  const auto& cfg = ctx.cfg;
  const auto& pool = inst.densities;
  const Rv px = evaluate(m, inst.x);

  std::vector<std::vector<double>> ks;
  for (const auto& q : pool) ks.push_back(k_value(m, inst.x, q, cfg));

  {
    Tally t(ctx.at(kWeakDuality), inst);
    for (std::size_t d = 0; d < pool.size(); ++d) {
      for (std::size_t a = 0; a < g.num_blocks(); ++a) {
        t.observe(excess(ks[d][a], px[g.block(a).front()]), kTightTol,
                  "q=" + fmt_vec(pool[d].values()));
      }
    }
  }
  {
    Tally t(ctx.at(kDownwardDirected), inst);
    const Density& q = pool[rng.below(pool.size())];
    const auto ex = cond_expect(space, inst.x, q, g);
    auto feasible_draw = [&]() {
      Rv u = random_rv(rng, n, -1.0, 1.0);
      const auto eu = cond_expect(space, u, q, g);
      for (std::size_t a = 0; a < g.num_blocks(); ++a) {
        const double shift = eu[a] ? std::max(0.0, -*eu[a]) : 0.0;
        for (auto i : g.block(a)) u[i] += inst.x[i] + shift;
      }
      return u;
    };
    const Rv xi1 = feasible_draw();
    const Rv xi2 = feasible_draw();
    const Rv p1 = evaluate(m, xi1);
    const Rv p2 = evaluate(m, xi2);
    Rv pasted(n);
    for (std::size_t i = 0; i < n; ++i) pasted[i] = p1[i] <= p2[i] ? xi1[i] : xi2[i];
    const Rv pp = evaluate(m, pasted);
    const auto ep = cond_expect(space, pasted, q, g);
    const std::string what = "xi1=" + fmt_vec(xi1) + " xi2=" + fmt_vec(xi2);
    for (std::size_t a = 0; a < g.num_blocks(); ++a) {
      if (ex[a]) t.observe(excess(*ex[a], *ep[a]), kOrderTol, what);
      const auto i = g.block(a).front();
      t.observe(distance(pp[i], std::min(p1[i], p2[i])), 0.0, what);
    }
  }
  {
    Tally t(ctx.at(kKHomogeneity), inst);
    const std::size_t d = rng.below(pool.size());
    for (double lambda : {0.5, 2.0, 10.0}) {
      std::vector<double> lq(pool[d].values().begin(), pool[d].values().end());
      for (auto& v : lq) v *= lambda;
      const auto kl = k_value(m, inst.x, Density::make(space, lq), cfg);
      const double tol = lambda == 10.0 ? kScaleTol : 0.0;
      for (std::size_t a = 0; a < kl.size(); ++a) {
        t.observe(distance(kl[a], ks[d][a]) / std::max(1.0, std::abs(ks[d][a])), tol,
                  "q=" + fmt_vec(pool[d].values()) + " lambda=" + fmt(lambda));
      }
    }
  }
  {
    Tally t(ctx.at(kKLocality), inst);
    const std::size_t d = rng.below(pool.size());
    const std::size_t b = rng.below(g.num_blocks());
    std::vector<double> q2(pool[d].values().begin(), pool[d].values().end());
    for (std::size_t i = 0; i < n; ++i) {
      if (g.block_of(i) != b) q2[i] = rng.uniform(0.0, 2.0);
    }
    const auto k2 = k_value(m, inst.x, Density::make(space, q2), cfg);
    t.observe(distance(k2[b], ks[d][b]), kTightTol,
              "atom " + std::to_string(b) + " q2=" + fmt_vec(q2));
  }
  {
    Tally t(ctx.at(kKUpwardDirected), inst);
    const std::size_t d1 = rng.below(pool.size());
    const std::size_t d2 = rng.below(pool.size());
    std::vector<std::vector<double>> weights;
    for (std::size_t a = 0; a < g.num_blocks(); ++a) {
      const std::size_t pick = ks[d1][a] >= ks[d2][a] ? d1 : d2;
      auto w = conditional_weights(space, pool[pick].values(), g.block(a));
      if (!w) w = conditional_weights(space, pool[pick == d1 ? d2 : d1].values(), g.block(a));
      weights.push_back(w ? *w : reference_weights(space, g.block(a)));
    }
    const auto kg = k_value(m, inst.x, glue_density(weights, g, space), cfg);
    for (std::size_t a = 0; a < g.num_blocks(); ++a) {
      t.observe(excess(std::max(ks[d1][a], ks[d2][a]), kg[a]), kLooseTol,
                "q1=" + fmt_vec(pool[d1].values()) + " q2=" + fmt_vec(pool[d2].values()));
    }
  }
  if (m.is_cash_invariant()) {
    Tally t(ctx.at(kConjugateIdentity), inst);
    for (std::size_t d = 0; d < pool.size(); ++d) {
      bool full = true;
      for (const auto& atom : g.blocks()) full = full && !q_null(space, pool[d], atom);
      if (!full) continue;
      const Density qt = restrict_to_P_G(pool[d], g, space);
      const auto ex = cond_expect(space, inst.x, qt, g);
      const auto conj = fenchel_conjugate(m, qt, cfg);
      for (std::size_t a = 0; a < g.num_blocks(); ++a) {
        t.observe(distance(ks[d][a], *ex[a] - *conj[a]), kLooseTol,
                  "q=" + fmt_vec(pool[d].values()));
      }
    }
  }
  if (const auto* e = std::get_if<Entropic>(&m.family())) {
    Tally t(ctx.at(kEntropicClosedForm), inst);
    for (std::size_t d = 0; d < pool.size(); ++d) {
      const auto conj = fenchel_conjugate(m, pool[d], cfg);
      for (std::size_t a = 0; a < g.num_blocks(); ++a) {
        const Block& atom = g.block(a);
        const auto w = conditional_weights(space, pool[d].values(), atom);
        if (!w) continue;
        const auto v = m.ref_weights(a);
        double kl = 0.0;
        double mean = 0.0;
        for (std::size_t k = 0; k < atom.size(); ++k) {
          mean += (*w)[k] * inst.x[atom[k]];
          if ((*w)[k] > 0.0) kl += (*w)[k] * std::log((*w)[k] / v[k]);
        }
        const std::string what = "q=" + fmt_vec(pool[d].values());
        t.observe(distance(ks[d][a], mean - kl / e->gamma), kLooseTol, what);
        t.observe(distance(*conj[a], kl / e->gamma), kTightTol, what);
      }
    }
  }
  if (const auto* tr = std::get_if<Transformed>(&m.family())) {
    Tally t(ctx.at(kTransformEquivariance), inst);
    for (std::size_t d = 0; d < pool.size(); ++d) {
      const auto inner = k_value(*tr->inner, inst.x, pool[d], cfg);
      for (std::size_t a = 0; a < inner.size(); ++a) {
        t.observe(distance(ks[d][a], transform_of(m, inner[a])), kLooseTol,
                  "q=" + fmt_vec(pool[d].values()));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Partition machinery

void check_partitions(SuiteCtx& ctx, const Instance& inst, Rng& rng,
                      const std::vector<Partition>& partitions,
                      const std::vector<DualReport>& reps) {
  const auto& m = inst.map;
  const auto& g = inst.g;
  const auto& space = *inst.space;
  const std::size_t n = space.size();
  const auto& cfg = ctx.cfg;
  const Rv px = evaluate(m, inst.x);

  {
    Tally t(ctx.at(kKInfOverPartitions), inst);
    const Density& q = inst.densities[1];
    const Rv k = expand(k_value(m, inst.x, q, cfg), g);
    Rv best(n, kInf);
    for (const auto& gamma : partitions) {
      const auto mc = coarsen(m, gamma);
      const Rv kg = expand(k_value(mc, inst.x, q, cfg), gamma);
      for (std::size_t i = 0; i < n; ++i) {
        t.observe(excess(k[i], kg[i]), kLooseTol, "below K at point " + std::to_string(i));
        best[i] = std::min(best[i], kg[i]);
      }
    }
    for (std::size_t i = 0; i < n; ++i) t.observe(distance(best[i], k[i]), kLooseTol, "inf");
  }
  {
    Tally t(ctx.at(kCoarsenedDuality), inst);
    for (std::size_t p = 0; p < partitions.size(); ++p) {
      const Partition& gamma = partitions[p];
      const Rv pc = evaluate(coarsen(m, gamma), inst.x);
      const auto& rep = reps[p];
      for (std::size_t b = 0; b < rep.atoms.size(); ++b) {
        const std::string what = "gamma " + std::to_string(p) + " block " + std::to_string(b);
        t.observe(std::abs(rep.atoms[b].gap), kGapTol, what);
        t.observe(distance(rep.atoms[b].primal, pc[gamma.block(b).front()]), 0.0,
                  what + " primal");
        t.observe(excess(rep.atoms[b].dual, rep.atoms[b].k_at_argmax), kGapTol,
                  what + " pasted density");
      }
      for (std::size_t i = 0; i < n; ++i) t.observe(excess(px[i], pc[i]), 0.0, "pi^Gamma < pi");
    }
  }
  {
    Tally t(ctx.at(kMonotoneTransfer), inst);
    std::vector<bool> in_b(n, false);
    for (const auto& atom : g.blocks()) {
      const bool pick = rng.below(2) == 1;
      for (auto i : atom) in_b[i] = pick;
    }
    in_b[g.block(rng.below(g.num_blocks())).front()] = true;
    for (const auto& atom : g.blocks()) {
      if (in_b[atom.front()]) {
        for (auto i : atom) in_b[i] = true;
      }
    }
    const Density& q = inst.densities[rng.below(inst.densities.size())];
    const Density p = Density::reference(space);
    const auto kq = k_value(m, inst.x, q, cfg);
    const auto kp = k_value(m, inst.x, p, cfg);
    double eps = 0.0;
    for (std::size_t a = 0; a < g.num_blocks(); ++a) {
      if (in_b[g.block(a).front()] && kq[a] > kp[a]) eps = std::max(eps, kq[a] - kp[a]);
    }
    for (const auto& gamma : partitions) {
      // Only Gamma = {B^c} + partition of B.
      bool shaped = true;
      for (const auto& block : gamma.blocks()) {
        const bool first = in_b[block.front()];
        for (auto i : block) shaped = shaped && in_b[i] == first;
        if (!first) {
          std::size_t outside = 0;
          for (std::size_t i = 0; i < n; ++i) outside += in_b[i] ? 0 : 1;
          shaped = shaped && block.size() == outside;
        }
      }
      if (!shaped) continue;
      const auto mc = coarsen(m, gamma);
      const Rv gq = expand(k_value(mc, inst.x, q, cfg), gamma);
      const Rv gp = expand(k_value(mc, inst.x, p, cfg), gamma);
      for (std::size_t i = 0; i < n; ++i) {
        if (!in_b[i]) continue;
        t.observe(excess(gq[i], gp[i] + eps), kLooseTol,
                  "q=" + fmt_vec(q.values()) + " eps=" + fmt(eps));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Duality

// Returns the largest |gap| over the atoms. For quasiconvex maps the H of
// every coarsening in `partitions` comes out of the same search.
double check_duality(SuiteCtx& ctx, const Instance& inst,
                     const std::vector<Partition>& partitions,
                     std::vector<DualReport>& coarse) {
  const auto& m = inst.map;
  const auto& g = inst.g;
  const auto& space = *inst.space;
  const bool concave = m.orientation() == Orientation::Quasiconcave;
  DualReport rep;
  {
    Tally t(ctx.at(kStrongDuality), inst);
    if (partitions.empty()) {
      rep = h_value(m, inst.x, ctx.cfg);
    } else {
      auto sweep = h_value_sweep(m, inst.x, partitions, ctx.cfg);
      rep = std::move(sweep.base);
      coarse = std::move(sweep.per_gamma);
    }
    for (std::size_t a = 0; a < rep.atoms.size(); ++a) {
      t.observe(std::abs(rep.atoms[a].gap), kGapTol,
                "atom " + std::to_string(a) + " primal " + fmt(rep.atoms[a].primal) + " dual " +
                    fmt(rep.atoms[a].dual));
    }
  }
  {
    Tally t(ctx.at(kSingleDensity), inst);
    std::vector<std::vector<double>> weights;
    for (const auto& ar : rep.atoms) weights.push_back(ar.argmax_weights);
    const auto k = k_value(m, inst.x, glue_density(weights, g, space), ctx.cfg);
    for (std::size_t a = 0; a < rep.atoms.size(); ++a) {
      const double shortfall =
          concave ? excess(k[a], rep.atoms[a].dual) : excess(rep.atoms[a].dual, k[a]);
      t.observe(shortfall, kGapTol, "atom " + std::to_string(a));
    }
  }
  if (std::holds_alternative<WorstCase>(m.family())) {
    Tally t(ctx.at(kWorstCaseVertex), inst);
    for (std::size_t a = 0; a < rep.atoms.size(); ++a) {
      const auto& ar = rep.atoms[a];
      t.observe(distance(ar.dual, ess_sup_on(inst.x, g.block(a))), kTightTol,
                "atom " + std::to_string(a));
      const double top = *std::max_element(ar.argmax_weights.begin(), ar.argmax_weights.end());
      t.observe(1.0 - top, kVertexTol,
                "argmax " + fmt_vec(ar.argmax_weights));
    }
  }
  if (const auto* mm = std::get_if<Mirrored>(&m.family())) {
    if (const auto* e = std::get_if<Entropic>(&mm->inner->family())) {
      Tally t(ctx.at(kCceMirror), inst);
      const Rv cce = cce_evaluate(Utility{UtilityKind::Exponential, e->gamma}, space, inst.x, g);
      const Rv pm = evaluate(m, inst.x);
      for (std::size_t a = 0; a < rep.atoms.size(); ++a) {
        const auto i = g.block(a).front();
        t.observe(distance(cce[i], pm[i]), kCashTol, "primal atom " + std::to_string(a));
        t.observe(distance(cce[i], rep.atoms[a].dual), kGapTol, "dual atom " + std::to_string(a));
      }
    }
  }
  return rep.max_abs_gap();
}

void check_negative(SuiteCtx& ctx, const Instance& inst, Rng& rng) {
  const auto& m = inst.map;
  const auto& g = inst.g;
  const std::size_t n = inst.space->size();
  {
    Tally t(ctx.at(kNegQuasiconvexity), inst);
    const Rv px = evaluate(m, inst.x);
    for (int trial = 0; trial < 3; ++trial) {
      const Rv x2 = random_rv(rng, n, -3.0, 3.0);
      const Rv lam = random_measurable(rng, g, 0.0, 1.0);
      Rv mix(n);
      for (std::size_t i = 0; i < n; ++i) mix[i] = lam[i] * inst.x[i] + (1.0 - lam[i]) * x2[i];
      const Rv p2 = evaluate(m, x2);
      const Rv pm = evaluate(m, mix);
      for (std::size_t i = 0; i < n; ++i) {
        t.observe(excess(pm[i], std::max(px[i], p2[i])), kTightTol,
                  "x2=" + fmt_vec(x2) + " L=" + fmt_vec(lam));
      }
    }
  }
  {
    Tally t(ctx.at(kNegDualityGap), inst);
    const auto rep = h_value(m, inst.x, ctx.cfg);
    for (std::size_t a = 0; a < rep.atoms.size(); ++a) {
      t.observe(rep.atoms[a].gap, kNegGapTol, "atom " + std::to_string(a));
    }
  }
}

void run_instance(SuiteCtx& ctx, const Instance& inst, Rng& rng, GapHistogram& gaps) {
  if (inst.family == FamilyKind::Broken) {
    check_negative(ctx, inst, rng);
    return;
  }
  check_axioms(ctx, inst, rng);
  const bool convex = inst.map.orientation() == Orientation::Quasiconvex;
  const auto partitions = convex ? enumerate_partitions(inst.g) : std::vector<Partition>{};
  std::vector<DualReport> coarse;
  const double gap = check_duality(ctx, inst, partitions, coarse);
  gaps.max_gap = std::max(gaps.max_gap, gap);
  std::size_t bucket = 4;
  if (gap <= 1e-12) {
    bucket = 0;
  } else if (gap <= 1e-10) {
    bucket = 1;
  } else if (gap <= 1e-8) {
    bucket = 2;
  } else if (gap <= 1e-6) {
    bucket = 3;
  }
  ++gaps.counts[bucket];
  if (convex) {
    check_r(ctx, inst, rng);
    check_k(ctx, inst, rng);
    check_partitions(ctx, inst, rng, partitions, coarse);
  }
}

std::string fmt_dev(double v) {
  if (v == kInf) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

}  // namespace

std::string_view family_name(FamilyKind f) {
  switch (f) {
    case FamilyKind::Entropic: return "entropic";
    case FamilyKind::WorstCase: return "worst_case";
    case FamilyKind::Composite: return "composite";
    case FamilyKind::TransformedArctan: return "transformed_arctan";
    case FamilyKind::TransformedCubic: return "transformed_cubic";
    case FamilyKind::Cce: return "cce";
    case FamilyKind::Broken: return "broken";
  }
  return "?";
}

Instance gen_instance(std::uint64_t seed, std::size_t n_points, std::size_t n_atoms,
                      FamilyKind family) {
  if (n_atoms < 1 || n_atoms > n_points || n_points > 8) {
    throw Error(ErrorCode::InvalidParameter, "need 1 <= n_atoms <= n_points <= 8");
  }
  Rng rng(mix_seed(seed, n_points, n_atoms));

  std::vector<std::string> labels;
  std::vector<double> probs(n_points);
  double total = 0.0;
  for (std::size_t i = 0; i < n_points; ++i) {
    labels.push_back("w" + std::to_string(i));
    probs[i] = rng.uniform(0.1, 1.0);
    total += probs[i];
  }
  for (auto& p : probs) p /= total;
  auto space = std::make_shared<const FiniteSpace>(FiniteSpace::build(labels, probs));

  // Shuffle the points, seed one atom with each of the first n_atoms and
  // scatter the rest.
  std::vector<std::size_t> order(n_points);
  for (std::size_t i = 0; i < n_points; ++i) order[i] = i;
  for (std::size_t i = n_points; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<Block> blocks(n_atoms);
  for (std::size_t k = 0; k < n_points; ++k) {
    blocks[k < n_atoms ? k : rng.below(n_atoms)].push_back(order[k]);
  }
  Partition g = Partition::build(n_points, std::move(blocks));

  static constexpr double kGammas[] = {0.5, 1.0, 2.0};
  auto make_map = [&]() -> MapSpec {
    switch (family) {
      case FamilyKind::Entropic: return MapSpec::entropic(space, g, kGammas[rng.below(3)]);
      case FamilyKind::WorstCase: return MapSpec::worst_case(space, g);
      case FamilyKind::Composite: {
        Loss loss;
        if (rng.below(2) == 0) {
          loss = Loss{LossKind::Exp, rng.below(2) == 0 ? 0.5 : 1.0};
        } else {
          loss = Loss{LossKind::Softplus, 1.0};
        }
        static constexpr OuterKind kOuters[] = {OuterKind::Identity, OuterKind::Log,
                                                OuterKind::Sqrt};
        return MapSpec::composite(space, g, loss, kOuters[rng.below(3)]);
      }
      case FamilyKind::TransformedArctan:
        return MapSpec::transformed(entropic_like(space, g, rng),
                                    Transform{TransformKind::Arctan, 0.0});
      case FamilyKind::TransformedCubic: {
        const double shift = rng.uniform(-1.0, 1.0);
        return MapSpec::transformed(entropic_like(space, g, rng),
                                    Transform{TransformKind::ShiftedCubic, shift});
      }
      case FamilyKind::Cce: return mirror(MapSpec::entropic(space, g, kGammas[rng.below(3)]));
      case FamilyKind::Broken:
        return MapSpec::transformed(MapSpec::entropic(space, g, kGammas[rng.below(3)]),
                                    Transform{TransformKind::Reflect, 0.0});
    }
    throw Error(ErrorCode::InvalidParameter, "unknown family");
  };
  MapSpec map = make_map();
  Rv x = random_rv(rng, n_points, -3.0, 3.0);

  std::vector<Density> densities;
  densities.push_back(Density::reference(*space));
  auto positive = [&]() {
    std::vector<double> q(n_points);
    for (auto& v : q) v = rng.uniform(0.2, 2.0);
    return q;
  };
  densities.push_back(Density::make(*space, normalize_density(*space, positive())));
  {
    auto q = positive();
    for (const auto& atom : g.blocks()) {
      if (atom.size() >= 2) q[atom[rng.below(atom.size())]] = 0.0;
    }
    densities.push_back(Density::make(*space, normalize_density(*space, std::move(q))));
  }
  if (n_atoms >= 2) {
    auto q = positive();
    for (auto i : g.block(rng.below(n_atoms))) q[i] = 0.0;
    densities.push_back(Density::make(*space, normalize_density(*space, std::move(q))));
  }
  {
    std::vector<double> q(n_points, 0.0);
    for (const auto& atom : g.blocks()) {
      const auto i = atom[rng.below(atom.size())];
      q[i] = space->mass(atom) / space->prob(i);
    }
    densities.push_back(Density::make(*space, std::move(q)));
  }

  return Instance{seed, family, std::move(space), std::move(g), std::move(map), std::move(x),
                  std::move(densities)};
}

Instance gen_instance(std::uint64_t seed, FamilyKind family) {
  Rng rng(seed);
  const std::size_t n_points = 2 + rng.below(7);
  const std::size_t n_atoms = 1 + rng.below(std::min<std::size_t>(4, n_points));
  return gen_instance(seed, n_points, n_atoms, family);
}

const std::vector<CheckInfo>& check_registry() {
  static const std::vector<CheckInfo> infos = [] {
    std::vector<CheckInfo> out;
    for (const auto& d : definitions()) out.push_back(d.info);
    return out;
  }();
  return infos;
}

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return c.passed(); });
}

std::string SuiteReport::to_csv() const {
  std::ostringstream os;
  os << "check,anchor,expect_violation,cases,violations,max_deviation,status\n";
  for (const auto& c : checks) {
    os << c.name << ",\"" << c.anchor << "\"," << (c.expect_violation ? 1 : 0) << ','
       << c.cases << ',' << c.violations << ',' << fmt_dev(c.max_deviation) << ','
       << (c.passed() ? "pass" : "fail") << '\n';
  }
  os << "\ngap_bucket,instances\n";
  static constexpr const char* kBuckets[] = {"<=1e-12", "(1e-12;1e-10]", "(1e-10;1e-8]",
                                             "(1e-8;1e-6]", ">1e-6"};
  for (std::size_t b = 0; b < gaps.counts.size(); ++b) {
    os << kBuckets[b] << ',' << gaps.counts[b] << '\n';
  }
  os << "max_gap," << fmt_dev(gaps.max_gap) << '\n';
  return os.str();
}

std::string SuiteReport::summary() const {
  std::ostringstream os;
  char line[200];
  std::snprintf(line, sizeof line, "property suite: seed %llu, %zu cases per family\n",
                static_cast<unsigned long long>(seed), cases);
  os << line;
  std::size_t ok = 0;
  for (const auto& c : checks) {
    std::snprintf(line, sizeof line, "  %-30s %6zu cases %6zu violations  max dev %-13s %s%s\n",
                  c.name.c_str(), c.cases, c.violations, fmt_dev(c.max_deviation).c_str(),
                  c.passed() ? "PASS" : "FAIL", c.expect_violation ? " (negative control)" : "");
    os << line;
    ok += c.passed() ? 1 : 0;
  }
  os << "duality gap per instance:";
  static constexpr const char* kBuckets[] = {"<=1e-12", "<=1e-10", "<=1e-8", "<=1e-6", ">1e-6"};
  for (std::size_t b = 0; b < gaps.counts.size(); ++b) {
    os << ' ' << kBuckets[b] << ':' << gaps.counts[b];
  }
  os << "  max " << fmt_dev(gaps.max_gap) << '\n';
  for (const auto& c : checks) {
    if (c.passed()) continue;
    for (const auto& f : c.failures) {
      os << "  failure " << c.name << " seed " << f.seed << " " << f.family << ": " << f.detail
         << '\n';
    }
    if (c.expect_violation) os << "  negative control " << c.name << " never fired\n";
  }
  std::snprintf(line, sizeof line, "%s: %zu/%zu checks passed\n", passed() ? "PASS" : "FAIL", ok,
                checks.size());
  os << line;
  return os.str();
}

SuiteReport run_property_suite(std::uint64_t seed, std::size_t cases) {
  if (cases == 0) throw Error(ErrorCode::InvalidParameter, "cases must be >= 1");
  SuiteReport report;
  report.seed = seed;
  report.cases = cases;
  for (const auto& d : definitions()) {
    CheckResult r;
    r.name = std::string(d.info.name);
    r.anchor = std::string(d.info.anchor);
    r.expect_violation = d.expect_violation;
    report.checks.push_back(std::move(r));
  }

  for (std::size_t f = 0; f < std::size(kAllFamilies); ++f) {
    const FamilyKind family = kAllFamilies[f];
    for (std::size_t c = 0; c < cases; ++c) {
      const std::uint64_t case_seed = mix_seed(seed, f, c);
      const Instance inst = gen_instance(case_seed, family);
      SolverCfg cfg;
      cfg.seed = case_seed;
      SuiteCtx ctx{report.checks, cfg};
      Rng rng(mix_seed(case_seed, 0xC4EC, 0));

      try {
        run_instance(ctx, inst, rng, report.gaps);
      } catch (const std::exception& e) {
        // The check that was running recorded a "threw" failure.
        for (auto& r : report.checks) {
          if (!r.failures.empty() && r.failures.back().seed == case_seed &&
              r.failures.back().detail.rfind("threw", 0) == 0) {
            r.failures.back().detail += std::string(" (") + e.what() + ")";
          }
        }
      }
    }
  }
  return report;
}

}  // namespace quasidual
