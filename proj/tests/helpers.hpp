#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "quasidual/prob_core.hpp"

namespace qtest {

inline std::shared_ptr<const quasidual::FiniteSpace> uniform_space(std::size_t n) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back("w" + std::to_string(i));
  return std::make_shared<const quasidual::FiniteSpace>(
      quasidual::FiniteSpace::build(labels, std::vector<double>(n, 1.0 / double(n))));
}

inline std::shared_ptr<const quasidual::FiniteSpace> space_with(std::vector<double> probs) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < probs.size(); ++i) labels.push_back("w" + std::to_string(i));
  return std::make_shared<const quasidual::FiniteSpace>(
      quasidual::FiniteSpace::build(labels, std::move(probs)));
}

inline quasidual::Partition pairs4() { return quasidual::Partition::build(4, {{0, 1}, {2, 3}}); }

template <typename F>
quasidual::ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const quasidual::Error& e) {
    return e.code();
  }
  throw std::runtime_error("expected a quasidual::Error");
}

}  // namespace qtest
