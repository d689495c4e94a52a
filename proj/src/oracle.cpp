#include "quasidual/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace quasidual {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Grid coordinates, computed as exact quotients when 1/step is an integer so
// that e.g. 2.0 is hit exactly with step 0.05.
std::vector<double> grid_axis(const GridCfg& cfg) {
  const auto n = static_cast<long>(std::floor((cfg.box_hi - cfg.box_lo) / cfg.step + 1e-9));
  std::vector<double> axis;
  axis.reserve(static_cast<std::size_t>(n) + 1);
  const double inv = 1.0 / cfg.step;
  const double inv_r = std::round(inv);
  const bool rational = std::abs(inv - inv_r) < 1e-9 &&
                        std::abs(cfg.box_lo * inv_r - std::round(cfg.box_lo * inv_r)) < 1e-9;
  for (long k = 0; k <= n; ++k) {
    if (rational) {
      axis.push_back((std::round(cfg.box_lo * inv_r) + static_cast<double>(k)) / inv_r);
    } else {
      axis.push_back(cfg.box_lo + static_cast<double>(k) * cfg.step);
    }
  }
  return axis;
}

enum class Constraint { AtLeast, Band };

GridResult grid_scan(const MapSpec& m, std::span<const double> x, const Density& q,
                     const GridCfg& cfg, Constraint kind) {
  cfg.validate();
  if (m.orientation() != Orientation::Quasiconvex) {
    throw Error(ErrorCode::UnsupportedOrientation, "grid oracle needs a quasiconvex map");
  }
  if (!(m.output_partition() == m.g_partition())) {
    throw Error(ErrorCode::InvalidParameter, "grid oracle works on unrefined maps");
  }
  if (x.size() != m.space().size() || q.size() != x.size()) {
    throw Error(ErrorCode::DimensionMismatch, "grid oracle operands");
  }
  const auto& g = m.g_partition();
  const auto axis = grid_axis(cfg);
  const std::size_t na = axis.size();

  GridResult result;
  result.slope = slope_bound(m, cfg.box_lo, cfg.box_hi);
  std::vector<double> xi(x.begin(), x.end());

  for (std::size_t a = 0; a < g.num_blocks(); ++a) {
    const Block& pts = g.block(a);
    if (pts.size() > kGridMaxAtom) {
      throw Error(ErrorCode::AtomTooLarge, "grid oracle atoms hold at most " +
                                               std::to_string(kGridMaxAtom) + " points");
    }
    const auto w = conditional_weights(m.space(), q.values(), pts);
    if (!w) {
      result.values.emplace_back(std::nullopt);
      continue;
    }
    double t = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k) t += (*w)[k] * x[pts[k]];
    const double band = cfg.step * *std::max_element(w->begin(), w->end());

    auto feasible = [&](double s) {
      return s >= t && (kind == Constraint::AtLeast || s <= t + band * (1 + 1e-12));
    };
    // Pivot on the heaviest coordinate.
    const std::size_t d = pts.size();
    const std::size_t pivot =
        static_cast<std::size_t>(std::max_element(w->begin(), w->end()) - w->begin());
    const bool prune = m.is_monotone();

    double best = kInf;
    std::vector<std::size_t> idx(d, 0);
    auto value_at = [&]() {
      for (std::size_t k = 0; k < d; ++k) xi[pts[k]] = axis[idx[k]];
      return atom_value(m, a, xi);
    };
    auto weighted = [&]() {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += (*w)[k] * axis[idx[k]];
      return s;
    };

    // Odometer over all coordinates except (when pruning) the pivot.
    bool done = false;
    while (!done) {
      if (prune) {
        // Smallest pivot index that is feasible; pi is nondecreasing in it.
        double rest = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          if (k != pivot) rest += (*w)[k] * axis[idx[k]];
        }
        const double wp = (*w)[pivot];
        const double need = t - rest;
        long start = static_cast<long>(std::ceil((need / wp - cfg.box_lo) / cfg.step)) - 2;
        start = std::clamp(start, 0L, static_cast<long>(na) - 1);
        for (auto k = static_cast<std::size_t>(start); k < na; ++k) {
          idx[pivot] = k;
          const double s = weighted();
          if (feasible(s)) {
            best = std::min(best, value_at());
            break;
          }
          if (kind == Constraint::Band && s > t + band * (1 + 1e-12)) break;
        }
      } else {
        if (feasible(weighted())) best = std::min(best, value_at());
      }
      // advance
      done = true;
      for (std::size_t k = 0; k < d; ++k) {
        if (prune && k == pivot) continue;
        if (++idx[k] < na) {
          done = false;
          break;
        }
        idx[k] = 0;
      }
      if (d == 1 && prune) done = true;
    }
    for (auto i : pts) xi[i] = x[i];
    if (best == kInf) {
      throw Error(ErrorCode::EmptyFeasibleGrid,
                  "no grid point satisfies the constraint on atom " + std::to_string(a));
    }
    result.values.emplace_back(best);
  }
  return result;
}

}  // namespace

void GridCfg::validate() const {
  if (!(box_lo < box_hi) || !(step > 0.0) || !std::isfinite(box_lo) || !std::isfinite(box_hi)) {
    throw Error(ErrorCode::InvalidParameter, "grid needs box_lo < box_hi and step > 0");
  }
}

GridResult grid_k(const MapSpec& m, std::span<const double> x, const Density& q,
                  const GridCfg& cfg) {
  return grid_scan(m, x, q, cfg, Constraint::AtLeast);
}

GridResult equality_k(const MapSpec& m, std::span<const double> x, const Density& q,
                      const GridCfg& cfg) {
  return grid_scan(m, x, q, cfg, Constraint::Band);
}

std::vector<Partition> enumerate_partitions(const Partition& g) {
  const std::size_t n = g.num_blocks();
  if (n > kMaxEnumeratedAtoms) {
    throw Error(ErrorCode::TooManyAtoms, std::to_string(n) + " atoms, at most " +
                                             std::to_string(kMaxEnumeratedAtoms) +
                                             " supported");
  }
  std::vector<Partition> out;
  // Restricted growth strings: s[0] = 0, s[k] <= 1 + max(s[0..k-1]).
  std::vector<std::size_t> s(n, 0);
  std::vector<std::size_t> prefix_max(n, 0);
  while (true) {
    std::size_t blocks = 0;
    for (auto v : s) blocks = std::max(blocks, v + 1);
    std::vector<Block> parts(blocks);
    for (std::size_t a = 0; a < n; ++a) {
      const auto& atom = g.block(a);
      parts[s[a]].insert(parts[s[a]].end(), atom.begin(), atom.end());
    }
    out.push_back(Partition::build(g.n_points(), std::move(parts)));

    // Next string in lexicographic order.
    std::size_t k = n;
    while (k > 1) {
      --k;
      if (s[k] <= prefix_max[k - 1]) {
        ++s[k];
        prefix_max[k] = std::max(prefix_max[k - 1], s[k]);
        for (std::size_t j = k + 1; j < n; ++j) {
          s[j] = 0;
          prefix_max[j] = prefix_max[k];
        }
        break;
      }
      if (k == 1) return out;
    }
    if (n <= 1) return out;
  }
}

}  // namespace quasidual
