#include "quasidual/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "quasidual/error.hpp"
#include "quasidual/rng.hpp"

namespace quasidual {

BisectResult bisect(const std::function<bool(double)>& pred, double lo,
                    double hi, double tol) {
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidParameter, "bisect tol must be positive");
  if (!(lo < hi)) std::swap(lo, hi);
  if (lo == hi) hi = lo + 1.0;
  lo = std::max(lo, -kBracketLimit);
  hi = std::min(hi, kBracketLimit);

  BisectResult r;
  double step = hi - lo;
  while (pred(lo)) {
    ++r.iterations;
    if (lo <= -kBracketLimit) {
      r.root = -kBracketLimit;
      r.bracket_final = {lo, hi};
      r.status = BisectStatus::Unbounded;
      return r;
    }
    hi = lo;
    step *= 2.0;
    lo = std::max(lo - step, -kBracketLimit);
  }
  while (!pred(hi)) {
    ++r.iterations;
    if (hi >= kBracketLimit) {
      r.root = kBracketLimit;
      r.bracket_final = {lo, hi};
      r.status = BisectStatus::BracketExhausted;
      return r;
    }
    lo = hi;
    step *= 2.0;
    hi = std::min(hi + step, kBracketLimit);
  }
  while (hi - lo > tol) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    ++r.iterations;
    if (pred(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  r.root = lo + 0.5 * (hi - lo);
  r.bracket_final = {lo, hi};
  r.status = BisectStatus::Converged;
  return r;
}

BisectResult bracket_root(const std::function<double(double)>& h, double lo, double hi,
                          double tol) {
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidParameter, "tol must be positive");
  if (!(lo < hi)) std::swap(lo, hi);
  if (lo == hi) hi = lo + 1.0;
  lo = std::max(lo, -kBracketLimit);
  hi = std::min(hi, kBracketLimit);

  BisectResult r;
  double step = hi - lo;
  double flo = h(lo);
  while (flo >= 0.0) {
    ++r.iterations;
    if (lo <= -kBracketLimit) {
      r.root = -kBracketLimit;
      r.bracket_final = {lo, hi};
      r.status = BisectStatus::Unbounded;
      return r;
    }
    hi = lo;
    step *= 2.0;
    lo = std::max(lo - step, -kBracketLimit);
    flo = h(lo);
  }
  double fhi = h(hi);
  while (!(fhi >= 0.0)) {
    ++r.iterations;
    if (hi >= kBracketLimit) {
      r.root = kBracketLimit;
      r.bracket_final = {lo, hi};
      r.status = BisectStatus::BracketExhausted;
      return r;
    }
    lo = hi;
    flo = fhi;
    step *= 2.0;
    hi = std::min(hi + step, kBracketLimit);
    fhi = h(hi);
  }

  // Below a few ulps of the bracket the tolerance cannot be met.
  auto width_tol = [&] {
    return std::max(tol, 4.0 * std::numeric_limits<double>::epsilon() *
                             std::max(std::abs(lo), std::abs(hi)));
  };
  int side = 0;
  while (hi - lo > width_tol()) {
    const double tol_now = width_tol();
    const double mid = lo + 0.5 * (hi - lo);
    double c = mid;
    if (std::isfinite(flo) && std::isfinite(fhi) && fhi > flo && hi - lo > 2.0 * tol_now) {
      c = (lo * fhi - hi * flo) / (fhi - flo);
      const double margin = 0.5 * tol_now;
      if (!(c > lo + margin)) {
        c = lo + margin;
      } else if (!(c < hi - margin)) {
        c = hi - margin;
      }
    } else {
      side = 0;
    }
    if (!(c > lo && c < hi)) c = mid;
    if (!(c > lo && c < hi)) break;
    ++r.iterations;
    const double fc = h(c);
    if (fc >= 0.0) {
      hi = c;
      fhi = fc;
      if (side == 1 && std::isfinite(flo)) flo *= 0.5;
      side = 1;
    } else {
      lo = c;
      flo = fc;
      if (side == -1 && std::isfinite(fhi)) fhi *= 0.5;
      side = -1;
    }
  }
  r.root = lo + 0.5 * (hi - lo);
  r.bracket_final = {lo, hi};
  r.status = BisectStatus::Converged;
  return r;
}

void validate(const SolverCfg& cfg) {
  if (!(cfg.bisect_tol > 0.0)) {
    throw Error(ErrorCode::InvalidParameter, "bisect_tol must be positive");
  }
  if (cfg.restarts < 1) throw Error(ErrorCode::InvalidParameter, "restarts must be >= 1");
  if (cfg.grid_fallback_resolution < 1) {
    throw Error(ErrorCode::InvalidParameter, "grid resolution must be >= 1");
  }
}

std::size_t simplex_grid_size(std::size_t dim, int resolution) {
  // C(r + d - 1, d - 1)
  double c = 1.0;
  for (std::size_t k = 1; k < dim; ++k) {
    c = c * static_cast<double>(resolution + static_cast<int>(k)) /
        static_cast<double>(k);
  }
  return static_cast<std::size_t>(std::llround(c));
}

void for_each_simplex_grid_point(
    std::size_t dim, int resolution,
    const std::function<void(std::span<const double>)>& visit) {
  std::vector<int> counts(dim, 0);
  std::vector<double> w(dim, 0.0);
  const double r = static_cast<double>(resolution);
  // Recursive composition of `resolution` into `dim` nonnegative parts.
  std::function<void(std::size_t, int)> rec = [&](std::size_t k, int left) {
    if (k + 1 == dim) {
      counts[k] = left;
      for (std::size_t i = 0; i < dim; ++i) w[i] = counts[i] / r;
      visit(w);
      return;
    }
    for (int c = left; c >= 0; --c) {
      counts[k] = c;
      rec(k + 1, left - c);
    }
  };
  rec(0, resolution);
}

namespace {

constexpr double kGolden = 0.3819660112501051518;  // (3 - sqrt 5) / 2

struct Ascent {
  const SimplexObjective& f;
  const SolverCfg& cfg;
  std::size_t evaluations = 0;

  double eval(std::span<const double> w) {
    ++evaluations;
    const double v = f(w);
    if (std::isnan(v)) throw Error(ErrorCode::SolverDiverged, "objective returned NaN");
    return v;
  }

  // Brent's method maximizing phi on [0, 1]; parabolic steps are skipped
  // while any retained value is infinite. Endpoint values f0, f1 compete
  // with the interior result. Returns (tau, value).
  std::pair<double, double> line_max(const std::function<double(double)>& phi, double f0,
                                     double f1) {
    constexpr double kRelTol = 1.5e-8;
    constexpr double kAbsTol = 1e-10;
    double a = 0.0;
    double b = 1.0;
    double x = a + kGolden * (b - a);
    double w = x;
    double v = x;
    double fx = -phi(x);
    double fw = fx;
    double fv = fx;
    double d = 0.0;
    double e = 0.0;
    for (int it = 0; it < 100; ++it) {
      const double xm = 0.5 * (a + b);
      const double tol1 = kRelTol * std::abs(x) + kAbsTol;
      const double tol2 = 2.0 * tol1;
      if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) break;
      bool golden = true;
      if (std::abs(e) > tol1 && std::isfinite(fx) && std::isfinite(fw) && std::isfinite(fv)) {
        double r = (x - w) * (fx - fv);
        double q = (x - v) * (fx - fw);
        double p = (x - v) * q - (x - w) * r;
        q = 2.0 * (q - r);
        if (q > 0.0) p = -p;
        q = std::abs(q);
        const double etemp = e;
        e = d;
        if (!(std::abs(p) >= std::abs(0.5 * q * etemp) || p <= q * (a - x) ||
              p >= q * (b - x))) {
          d = p / q;
          const double u = x + d;
          if (u - a < tol2 || b - u < tol2) d = xm >= x ? tol1 : -tol1;
          golden = false;
        }
      }
      if (golden) {
        e = x >= xm ? a - x : b - x;
        d = kGolden * e;
      }
      const double u = std::abs(d) >= tol1 ? x + d : x + (d >= 0.0 ? tol1 : -tol1);
      const double fu = -phi(u);
      if (fu <= fx) {
        if (u >= x) {
          a = x;
        } else {
          b = x;
        }
        v = w;
        fv = fw;
        w = x;
        fw = fx;
        x = u;
        fx = fu;
      } else {
        if (u < x) {
          a = u;
        } else {
          b = u;
        }
        if (fu <= fw || w == x) {
          v = w;
          fv = fw;
          w = u;
          fw = fu;
        } else if (fu <= fv || v == x || v == w) {
          v = u;
          fv = fu;
        }
      }
    }
    std::pair<double, double> best{x, -fx};
    if (f0 > best.second) best = {0.0, f0};
    if (f1 > best.second) best = {1.0, f1};
    return best;
  }

  // Largest tau with w + tau d on the simplex (d sums to zero).
  static double max_step(const std::vector<double>& w, const std::vector<double>& d) {
    double tau = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (d[k] < 0.0) tau = std::min(tau, w[k] / -d[k]);
    }
    return tau;
  }

  // Coordinate-pair ascent from w; returns (value, sweeps, last spread).
  // After every improving sweep the net displacement of the sweep is tried
  // as an extra search direction.
  std::tuple<double, int, double> refine(std::vector<double>& w, double fw) {
    const std::size_t dim = w.size();
    std::vector<double> trial(w);
    std::vector<double> before(w);
    std::vector<double> dir(dim);
    int sweeps = 0;
    double spread = 0.0;
    while (sweeps < cfg.max_sweeps) {
      ++sweeps;
      const double f_start = fw;
      before = w;
      double moved = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = i + 1; j < dim; ++j) {
          const double s = w[i] + w[j];
          if (!(s > 0.0)) continue;
          trial = w;
          auto phi = [&](double tau) {
            trial[i] = s * tau;
            trial[j] = s - trial[i];
            return eval(trial);
          };
          const double f0 = phi(0.0);
          const double f1 = phi(1.0);
          const auto [tau, val] = line_max(phi, f0, f1);
          if (val > fw) {
            const double wi = s * tau;
            moved = std::max(moved, std::abs(wi - w[i]));
            w[i] = wi;
            w[j] = s - wi;
            fw = val;
          }
        }
      }
      // A single pair already searched the whole segment.
      if (dim == 2) {
        spread = moved;
        break;
      }
      if (dim > 2 && moved > 0.0) {
        for (std::size_t k = 0; k < dim; ++k) dir[k] = w[k] - before[k];
        const double reach = max_step(w, dir);
        if (reach > 1e-12 && std::isfinite(reach)) {
          auto phi = [&](double tau) {
            for (std::size_t k = 0; k < dim; ++k) {
              trial[k] = std::max(0.0, w[k] + tau * reach * dir[k]);
            }
            return eval(trial);
          };
          const auto [tau, val] = line_max(phi, fw, phi(1.0));
          if (val > fw && tau > 0.0) {
            for (std::size_t k = 0; k < dim; ++k) {
              const double wk = std::max(0.0, w[k] + tau * reach * dir[k]);
              moved = std::max(moved, std::abs(wk - w[k]));
              w[k] = wk;
            }
            fw = val;
          }
        }
      }
      spread = moved;
      if (moved < cfg.spread_tol) break;
      if (std::isfinite(f_start) && fw - f_start <= 1e-12 * std::max(1.0, std::abs(fw))) break;
    }
    return {fw, sweeps, spread};
  }
};

constexpr std::size_t kProbes = 8;
constexpr std::size_t kFinalists = 4;

}  // namespace

SimplexResult simplex_search(const SimplexObjective& f, std::size_t dim,
                             const SolverCfg& cfg,
                             std::span<const std::vector<double>> extra_starts) {
  validate(cfg);
  if (dim == 0) throw Error(ErrorCode::InvalidParameter, "simplex dimension must be >= 1");
  Ascent ascent{f, cfg};
  SimplexResult result;

  if (dim == 1) {
    result.weights = {1.0};
    result.value = ascent.eval(result.weights);
    result.evaluations = ascent.evaluations;
    return result;
  }

  std::vector<std::vector<double>> starts;
  for (std::size_t k = 0; k < dim; ++k) {
    std::vector<double> v(dim, 0.0);
    v[k] = 1.0;
    starts.push_back(std::move(v));
  }
  starts.emplace_back(dim, 1.0 / static_cast<double>(dim));
  for (const auto& s : extra_starts) {
    if (s.size() == dim) starts.push_back(s);
  }
  Rng rng(cfg.seed);
  for (int r = 0; r < cfg.restarts; ++r) {
    std::vector<double> v(dim);
    double total = 0.0;
    for (auto& vi : v) {
      vi = -std::log(1.0 - rng.uniform());
      total += vi;
    }
    for (auto& vi : v) vi /= total;
    starts.push_back(std::move(v));
  }

  int resolution = cfg.grid_fallback_resolution;
  while (resolution > 1 && simplex_grid_size(dim, resolution) > cfg.grid_point_cap) {
    --resolution;
  }
  result.grid_resolution = resolution;
  std::vector<double> grid_best;
  double grid_best_value = -std::numeric_limits<double>::infinity();
  for_each_simplex_grid_point(dim, resolution, [&](std::span<const double> w) {
    const double v = ascent.eval(w);
    if (grid_best.empty() || v > grid_best_value) {
      grid_best.assign(w.begin(), w.end());
      grid_best_value = v;
    }
  });
  starts.push_back(grid_best);

  // Screening: every start is evaluated, the best kProbes get one sweep and
  // the best kFinalists of those are refined to the end.
  struct Probe {
    std::vector<double> w;
    double value;
    std::size_t start;
  };
  auto keep_best = [](std::vector<Probe>& ps, std::size_t n) {
    std::stable_sort(ps.begin(), ps.end(),
                     [](const Probe& a, const Probe& b) { return a.value > b.value; });
    ps.resize(std::min(ps.size(), n));
  };
  std::vector<Probe> probes;
  probes.reserve(starts.size());
  for (std::size_t s = 0; s < starts.size(); ++s) {
    probes.push_back({starts[s], ascent.eval(starts[s]), s});
  }
  if (dim == 2) {
    // The single pair line search covers the whole segment from any start.
    keep_best(probes, 1);
  } else {
    keep_best(probes, kProbes);
    SolverCfg one = cfg;
    one.max_sweeps = 1;
    Ascent quick{f, one};
    for (auto& p : probes) {
      auto [value, sweeps, spread] = quick.refine(p.w, p.value);
      result.iterations += sweeps;
      p.value = value;
    }
    ascent.evaluations += quick.evaluations;
    keep_best(probes, kFinalists);
  }
  std::sort(probes.begin(), probes.end(),
            [](const Probe& a, const Probe& b) { return a.start < b.start; });

  bool have_best = false;
  for (auto& p : probes) {
    auto [value, sweeps, spread] = ascent.refine(p.w, p.value);
    result.iterations += sweeps;
    ++result.restarts_used;
    if (!have_best || value > result.value) {
      have_best = true;
      result.value = value;
      result.weights = std::move(p.w);
      result.best_start = p.start;
      result.spread = spread;
    }
  }
  result.evaluations = ascent.evaluations;
  return result;
}

}  // namespace quasidual
