#include <set>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "quasidual/harness.hpp"
#include "quasidual/rng.hpp"

using namespace quasidual;

TEST_CASE("rng is reproducible") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(c.below(7) < 7);
  }
  // Reference value of SplitMix64 from state 0.
  std::uint64_t state = 0;
  CHECK(splitmix64(state) == 0xE220A8397B1DCDAFULL);
}

TEST_CASE("gen_instance is deterministic") {
  for (auto f : kAllFamilies) {
    const auto a = gen_instance(1, f);
    const auto b = gen_instance(1, f);
    CHECK(a.x == b.x);
    CHECK(a.g == b.g);
    CHECK(*a.space == *b.space);
    REQUIRE(a.densities.size() == b.densities.size());
    for (std::size_t d = 0; d < a.densities.size(); ++d) {
      CHECK(std::vector<double>(a.densities[d].values().begin(), a.densities[d].values().end()) ==
            std::vector<double>(b.densities[d].values().begin(), b.densities[d].values().end()));
    }
    CHECK(a.map.describe() == b.map.describe());
  }
}

TEST_CASE("gen_instance shapes") {
  const auto t = gen_instance(3, 2, 1, FamilyKind::Entropic);
  CHECK(t.space->size() == 2);
  CHECK(t.g.num_blocks() == 1);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto inst = gen_instance(seed, FamilyKind::WorstCase);
    CHECK(inst.space->size() >= 2);
    CHECK(inst.space->size() <= 8);
    CHECK(inst.g.num_blocks() <= 4);
    for (double v : inst.x) {
      CHECK(v >= -3);
      CHECK(v <= 3);
    }
    for (double v : inst.densities.front().values()) CHECK(v == 1.0);
  }
  CHECK(qtest::code_of([] { gen_instance(1, 3, 4, FamilyKind::Entropic); }) ==
        ErrorCode::InvalidParameter);
  CHECK(qtest::code_of([] { gen_instance(1, 9, 1, FamilyKind::Entropic); }) ==
        ErrorCode::InvalidParameter);
}

TEST_CASE("check registry") {
  const auto& reg = check_registry();
  std::set<std::string_view> names;
  for (const auto& c : reg) {
    CHECK_FALSE(c.anchor.empty());
    CHECK(c.anchor.find('"') == std::string_view::npos);
    names.insert(c.name);
  }
  CHECK(names.size() == reg.size());
}

TEST_CASE("property suite with one case per family") {
  const auto r = run_property_suite(7, 1);
  CHECK(r.cases == 1);
  CHECK(r.checks.size() == check_registry().size());
  std::size_t instances = 0;
  for (auto n : r.gaps.counts) instances += n;
  // Every family reports a gap except the negative control.
  CHECK(instances == std::size(kAllFamilies) - 1);
  for (const auto& c : r.checks) {
    if (!c.expect_violation) CHECK_MESSAGE(c.passed(), c.name);
  }
  CHECK(r.to_csv() == run_property_suite(7, 1).to_csv());
  CHECK(r.summary().find("checks passed") != std::string::npos);
  CHECK(qtest::code_of([] { run_property_suite(1, 0); }) == ErrorCode::InvalidParameter);
}
