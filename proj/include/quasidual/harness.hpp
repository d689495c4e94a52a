#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "quasidual/dual_engine.hpp"
#include "quasidual/maps.hpp"
#include "quasidual/prob_core.hpp"

/// Seeded random instances and the property suite that runs every module
/// invariant on them.
namespace quasidual {

enum class FamilyKind {
  Entropic,
  WorstCase,
  Composite,
  TransformedArctan,
  TransformedCubic,
  Cce,     // mirrored entropic: the exponential-utility certainty equivalent
  Broken,  // negative control: decreasing transform of an entropic map
};

inline constexpr FamilyKind kAllFamilies[] = {
    FamilyKind::Entropic,          FamilyKind::WorstCase,        FamilyKind::Composite,
    FamilyKind::TransformedArctan, FamilyKind::TransformedCubic, FamilyKind::Cce,
    FamilyKind::Broken,
};

std::string_view family_name(FamilyKind f);

struct Instance {
  std::uint64_t seed = 0;
  FamilyKind family = FamilyKind::Entropic;
  std::shared_ptr<const FiniteSpace> space;
  Partition g;
  MapSpec map;
  Rv x;
  /// Always starts with the reference density q = 1, followed by a random
  /// full-support density, one with zero coordinates, one null on an atom
  /// and the per-atom point masses.
  std::vector<Density> densities;
};

/// Deterministic in (seed, n_points, n_atoms, family).
/// Entropic gamma is drawn from {0.5, 1, 2}; x is uniform on [-3, 3]^n.
/// Throws InvalidParameter unless 1 <= n_atoms <= n_points <= 8.
Instance gen_instance(std::uint64_t seed, std::size_t n_points, std::size_t n_atoms,
                      FamilyKind family);

/// Same, with n_points in [2, 8] and n_atoms in [1, min(4, n_points)] drawn
/// from the seed.
Instance gen_instance(std::uint64_t seed, FamilyKind family);

struct CheckFailure {
  std::uint64_t seed = 0;
  std::string family;
  std::string detail;
};

struct CheckResult {
  std::string name;
  std::string anchor;
  /// Negative controls pass when at least one violation is observed.
  bool expect_violation = false;
  std::size_t cases = 0;
  std::size_t violations = 0;
  double max_deviation = 0.0;
  std::vector<CheckFailure> failures;

  bool passed() const { return expect_violation ? violations > 0 : violations == 0; }
};

struct GapHistogram {
  /// Counts of max |gap| per instance in decades: <=1e-12, (1e-12,1e-10],
  /// (1e-10,1e-8], (1e-8,1e-6], > 1e-6.
  std::vector<std::size_t> counts = std::vector<std::size_t>(5, 0);
  double max_gap = 0.0;
};

struct SuiteReport {
  std::uint64_t seed = 0;
  std::size_t cases = 0;
  std::vector<CheckResult> checks;
  GapHistogram gaps;

  bool passed() const;
  std::string to_csv() const;
  std::string summary() const;
};

struct CheckInfo {
  std::string_view name;
  std::string_view anchor;
};

/// Every check the suite can emit, each tied to one statement it verifies.
const std::vector<CheckInfo>& check_registry();

/// Runs `cases` instances of every family (including the negative control)
/// through all module invariants. Throws InvalidParameter when cases == 0.
SuiteReport run_property_suite(std::uint64_t seed, std::size_t cases);

}  // namespace quasidual
