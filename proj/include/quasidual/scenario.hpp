#pragma once

#include <memory>
#include <optional>
#include <string>

#include "quasidual/maps.hpp"
#include "quasidual/prob_core.hpp"
#include "quasidual/solvers.hpp"

/// Scenario documents: a JSON object that names sample points by label.
/// The grammar is described in docs/scenario.md.
namespace quasidual {

struct Scenario {
  std::shared_ptr<const FiniteSpace> space;
  Partition g;
  /// Empty for certainty equivalents without a dual form (power, log).
  std::optional<MapSpec> map;
  /// Set when the map block names a certainty equivalent.
  std::optional<Utility> cce;
  Rv x;
  std::optional<Density> q;
  std::optional<Partition> gamma;
  SolverCfg solver;

  /// map, coarsened to gamma when one is given. Throws ValidationError when
  /// the scenario has no dual-capable map.
  MapSpec dual_map() const;
  /// pi(x) per point, including primal-only certainty equivalents.
  Rv primal() const;
  /// "a+b" for the labels of a block.
  std::string block_name(const Block& block) const;
};

/// Throws ParseError (malformed JSON with line, or a missing or mistyped
/// field with its path) and ValidationError (a violated invariant, whose
/// error name is kept in the message).
Scenario parse_scenario(const std::string& text, const std::string& source = "<string>");

/// Reads and parses a file. Throws ParseError when it cannot be read.
Scenario load_scenario(const std::string& path);

}  // namespace quasidual
