#include "quasidual/prob_core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace quasidual {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveProbability: return "NonPositiveProbability";
    case ErrorCode::ProbabilitySumMismatch: return "ProbabilitySumMismatch";
    case ErrorCode::DuplicateLabel: return "DuplicateLabel";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::OverlappingBlocks: return "OverlappingBlocks";
    case ErrorCode::UncoveredIndex: return "UncoveredIndex";
    case ErrorCode::EmptyBlock: return "EmptyBlock";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::SpaceMismatch: return "SpaceMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotMeasurable: return "NotMeasurable";
    case ErrorCode::EmptyAtom: return "EmptyAtom";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::NegativeDensity: return "NegativeDensity";
    case ErrorCode::DomainViolation: return "DomainViolation";
    case ErrorCode::WeightAllZero: return "WeightAllZero";
    case ErrorCode::NotGMeasurablePartition: return "NotGMeasurablePartition";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::UnsupportedOrientation: return "UnsupportedOrientation";
    case ErrorCode::BracketExhausted: return "BracketExhausted";
    case ErrorCode::SolverDiverged: return "SolverDiverged";
    case ErrorCode::NotCashInvariant: return "NotCashInvariant";
    case ErrorCode::QNullAtom: return "QNullAtom";
    case ErrorCode::AtomTooLarge: return "AtomTooLarge";
    case ErrorCode::EmptyFeasibleGrid: return "EmptyFeasibleGrid";
    case ErrorCode::TooManyAtoms: return "TooManyAtoms";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// FiniteSpace

FiniteSpace FiniteSpace::build(std::vector<std::string> labels,
                               std::vector<double> probs) {
  if (labels.size() != probs.size()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(labels.size()) + " labels but " +
                    std::to_string(probs.size()) + " probabilities");
  }
  if (labels.empty()) {
    throw Error(ErrorCode::LengthMismatch, "space has no sample points");
  }
  std::set<std::string> seen;
  for (const auto& l : labels) {
    if (!seen.insert(l).second) {
      throw Error(ErrorCode::DuplicateLabel, "label '" + l + "'");
    }
  }
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] > 0.0) || !std::isfinite(probs[i])) {
      throw Error(ErrorCode::NonPositiveProbability,
                  "p[" + labels[i] + "] = " + std::to_string(probs[i]));
    }
  }
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw Error(ErrorCode::ProbabilitySumMismatch,
                "probabilities sum to " + std::to_string(total));
  }
  return FiniteSpace(std::move(labels), std::move(probs));
}

std::optional<std::size_t> FiniteSpace::index_of(const std::string& label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels_.begin());
}

double FiniteSpace::mass(std::span<const std::size_t> block) const {
  double m = 0.0;
  for (auto i : block) m += probs_.at(i);
  return m;
}

double FiniteSpace::expect(std::span<const double> x) const {
  if (x.size() != size()) {
    throw Error(ErrorCode::DimensionMismatch, "random variable length");
  }
  double e = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) e += probs_[i] * x[i];
  return e;
}

// ---------------------------------------------------------------------------
// Partition

Partition Partition::build(std::size_t n_points, std::vector<Block> blocks) {
  std::vector<std::size_t> block_of(n_points, n_points);
  for (auto& b : blocks) {
    if (b.empty()) throw Error(ErrorCode::EmptyBlock, "partition has an empty block");
    std::sort(b.begin(), b.end());
  }
  std::sort(blocks.begin(), blocks.end(),
            [](const Block& a, const Block& b) { return a.front() < b.front(); });
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    for (auto i : blocks[bi]) {
      if (i >= n_points) {
        throw Error(ErrorCode::IndexOutOfRange, "index " + std::to_string(i));
      }
      if (block_of[i] != n_points) {
        throw Error(ErrorCode::OverlappingBlocks,
                    "index " + std::to_string(i) + " appears twice");
      }
      block_of[i] = bi;
    }
  }
  for (std::size_t i = 0; i < n_points; ++i) {
    if (block_of[i] == n_points) {
      throw Error(ErrorCode::UncoveredIndex, "index " + std::to_string(i));
    }
  }
  return Partition(std::move(blocks), std::move(block_of));
}

Partition Partition::trivial(std::size_t n_points) {
  Block all(n_points);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return build(n_points, {all});
}

Partition Partition::discrete(std::size_t n_points) {
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < n_points; ++i) blocks.push_back({i});
  return build(n_points, std::move(blocks));
}

bool Partition::refines(const Partition& coarser) const {
  if (coarser.n_points() != n_points()) return false;
  for (const auto& b : blocks_) {
    const auto target = coarser.block_of(b.front());
    for (auto i : b) {
      if (coarser.block_of(i) != target) return false;
    }
  }
  return true;
}

std::vector<std::size_t> Partition::blocks_inside(
    std::span<const std::size_t> block) const {
  std::set<std::size_t> ids;
  for (auto i : block) ids.insert(block_of(i));
  std::size_t covered = 0;
  for (auto id : ids) covered += blocks_[id].size();
  if (covered != block.size()) {
    throw Error(ErrorCode::NotGMeasurablePartition,
                "block is not a union of atoms");
  }
  return {ids.begin(), ids.end()};
}

Partition common_refinement(const Partition& g1, const Partition& g2) {
  if (g1.n_points() != g2.n_points()) {
    throw Error(ErrorCode::SpaceMismatch, "partitions of different spaces");
  }
  std::map<std::pair<std::size_t, std::size_t>, Block> cells;
  for (std::size_t i = 0; i < g1.n_points(); ++i) {
    cells[{g1.block_of(i), g2.block_of(i)}].push_back(i);
  }
  std::vector<Block> blocks;
  for (auto& [key, b] : cells) blocks.push_back(std::move(b));
  return Partition::build(g1.n_points(), std::move(blocks));
}

bool is_measurable(std::span<const double> x, const Partition& g) {
  if (x.size() != g.n_points()) {
    throw Error(ErrorCode::DimensionMismatch, "random variable length");
  }
  for (const auto& b : g.blocks()) {
    for (auto i : b) {
      if (x[i] != x[b.front()]) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Density

Density Density::make(const FiniteSpace& space, std::vector<double> q) {
  if (q.size() != space.size()) {
    throw Error(ErrorCode::DimensionMismatch, "density length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!std::isfinite(q[i])) throw Error(ErrorCode::NonFiniteInput, "density entry");
    if (q[i] < 0.0) {
      throw Error(ErrorCode::NegativeDensity, "q[" + std::to_string(i) + "] < 0");
    }
    total += q[i] * space.prob(i);
  }
  const bool normalized = std::abs(total - 1.0) <= kNormTolerance;
  return Density(std::move(q), normalized);
}

Density Density::reference(const FiniteSpace& space) {
  return make(space, std::vector<double>(space.size(), 1.0));
}

double Density::mass(const FiniteSpace& space,
                     std::span<const std::size_t> block) const {
  double m = 0.0;
  for (auto i : block) m += q_.at(i) * space.prob(i);
  return m;
}

std::optional<std::vector<double>> conditional_weights(
    const FiniteSpace& space, std::span<const double> q,
    std::span<const std::size_t> block) {
  std::vector<double> w(block.size());
  double m = 0.0;
  for (std::size_t k = 0; k < block.size(); ++k) {
    w[k] = q[block[k]] * space.prob(block[k]);
    m += w[k];
  }
  if (!(m > 0.0)) return std::nullopt;
  for (auto& wi : w) wi /= m;
  return w;
}

std::vector<double> reference_weights(const FiniteSpace& space,
                                      std::span<const std::size_t> block) {
  std::vector<double> v(block.size());
  const double m = space.mass(block);
  for (std::size_t k = 0; k < block.size(); ++k) v[k] = space.prob(block[k]) / m;
  return v;
}

std::vector<AtomValue> cond_expect(const FiniteSpace& space,
                                   std::span<const double> x, const Density& q,
                                   const Partition& g) {
  if (x.size() != space.size() || q.size() != space.size() ||
      g.n_points() != space.size()) {
    throw Error(ErrorCode::DimensionMismatch, "cond_expect operands");
  }
  std::vector<AtomValue> out;
  out.reserve(g.num_blocks());
  for (const auto& b : g.blocks()) {
    double num = 0.0;
    double den = 0.0;
    for (auto i : b) {
      const double wi = q[i] * space.prob(i);
      num += wi * x[i];
      den += wi;
    }
    if (den > 0.0) {
      out.emplace_back(num / den);
    } else {
      out.emplace_back(std::nullopt);
    }
  }
  return out;
}

bool is_in_P_G(const FiniteSpace& space, const Density& q, const Partition& g) {
  for (const auto& b : g.blocks()) {
    if (std::abs(q.mass(space, b) - space.mass(b)) > Density::kNormTolerance) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Dyadic partitions

long long dyadic_cell(double y, unsigned n) {
  const double bound = static_cast<double>(n);
  const double scale = std::ldexp(1.0, static_cast<int>(n));
  if (y <= -bound) return 0;
  if (y > bound) return static_cast<long long>(n) * (2LL << n) + 1;
  return static_cast<long long>(std::ceil((y + bound) * scale));
}

bool is_dyadic_tail(long long cell, unsigned n) {
  return cell == 0 || cell == static_cast<long long>(n) * (2LL << n) + 1;
}

Partition dyadic_partition(std::span<const double> y, const Partition& g,
                           unsigned n) {
  if (n == 0 || n > 40) {
    throw Error(ErrorCode::InvalidParameter, "dyadic level must be in [1, 40]");
  }
  if (!is_measurable(y, g)) {
    throw Error(ErrorCode::NotMeasurable, "y is not constant on the atoms of G");
  }
  std::map<long long, Block> cells;
  for (const auto& atom : g.blocks()) {
    auto& cell = cells[dyadic_cell(y[atom.front()], n)];
    cell.insert(cell.end(), atom.begin(), atom.end());
  }
  std::vector<Block> blocks;
  for (auto& [j, b] : cells) blocks.push_back(std::move(b));
  return Partition::build(g.n_points(), std::move(blocks));
}

double ess_sup_on(std::span<const double> x, std::span<const std::size_t> atom) {
  if (atom.empty()) throw Error(ErrorCode::EmptyAtom, "ess_sup over an empty atom");
  double m = x[atom.front()];
  for (auto i : atom) m = std::max(m, x[i]);
  return m;
}

Rv expand(std::span<const double> per_block, const Partition& g) {
  if (per_block.size() != g.num_blocks()) {
    throw Error(ErrorCode::DimensionMismatch, "per-block vector length");
  }
  Rv out(g.n_points());
  for (std::size_t b = 0; b < g.num_blocks(); ++b) {
    for (auto i : g.block(b)) out[i] = per_block[b];
  }
  return out;
}

}  // namespace quasidual
