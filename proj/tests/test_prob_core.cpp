#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "quasidual/prob_core.hpp"

using namespace quasidual;
using qtest::code_of;

TEST_CASE("build_space validates probabilities") {
  CHECK_NOTHROW(FiniteSpace::build({"a", "b"}, {0.5, 0.5}));
  CHECK_NOTHROW(FiniteSpace::build({"a", "b"}, {0.7, 0.3}));
  CHECK(code_of([] { FiniteSpace::build({"a", "b"}, {0.5, 0.4}); }) ==
        ErrorCode::ProbabilitySumMismatch);
  CHECK(code_of([] { FiniteSpace::build({"a", "b"}, {1.0, 0.0}); }) ==
        ErrorCode::NonPositiveProbability);
  CHECK(code_of([] { FiniteSpace::build({"a", "a"}, {0.5, 0.5}); }) ==
        ErrorCode::DuplicateLabel);
  CHECK(code_of([] { FiniteSpace::build({"a"}, {0.5, 0.5}); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("build_partition") {
  const auto p = Partition::build(4, {{0, 1}, {2, 3}});
  CHECK(p.num_blocks() == 2);
  CHECK(p.block_of(3) == 1);
  CHECK(Partition::build(4, {{0}, {1}, {2}, {3}}) == Partition::discrete(4));
  CHECK(code_of([] { Partition::build(4, {{0, 1}, {1, 2, 3}}); }) ==
        ErrorCode::OverlappingBlocks);
  CHECK(code_of([] { Partition::build(4, {{0, 1}, {2}}); }) == ErrorCode::UncoveredIndex);
  CHECK(code_of([] { Partition::build(2, {{0, 1}, {}}); }) == ErrorCode::EmptyBlock);
  CHECK(code_of([] { Partition::build(2, {{0, 5}}); }) == ErrorCode::IndexOutOfRange);

  SUBCASE("canonical order") {
    const auto q = Partition::build(4, {{3, 2}, {1, 0}});
    CHECK(q == p);
  }
}

TEST_CASE("common_refinement") {
  const auto a = Partition::build(4, {{0, 1}, {2, 3}});
  const auto b = Partition::build(4, {{0, 2}, {1, 3}});
  CHECK(common_refinement(a, b) == Partition::discrete(4));
  CHECK(common_refinement(a, a) == a);
  CHECK(common_refinement(a, Partition::trivial(4)) == a);
  CHECK(code_of([&] { common_refinement(a, Partition::trivial(3)); }) == ErrorCode::SpaceMismatch);
}

TEST_CASE("is_measurable") {
  const auto g = qtest::pairs4();
  const Rv x1{2, 2, 6, 6}, x2{2, 3, 6, 6};
  CHECK(is_measurable(x1, g));
  CHECK_FALSE(is_measurable(x2, g));
  CHECK(is_measurable(x2, Partition::discrete(4)));
}

TEST_CASE("cond_expect") {
  const auto s = qtest::uniform_space(4);
  const auto g = qtest::pairs4();
  const Rv x{1, 3, 5, 7};

  auto e = cond_expect(*s, x, Density::make(*s, {1, 1, 1, 1}), g);
  CHECK(*e[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(*e[1] == doctest::Approx(6.0).epsilon(1e-15));

  // Brute-force weighted average.
  const std::vector<double> q{2, 0, 1, 1};
  e = cond_expect(*s, x, Density::make(*s, q), g);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < 2; ++i) {
    num += q[i] * 0.25 * x[i];
    den += q[i] * 0.25;
  }
  CHECK(*e[0] == doctest::Approx(num / den).epsilon(1e-15));
  CHECK(*e[0] == doctest::Approx(1.0));
  CHECK(*e[1] == doctest::Approx(6.0));

  e = cond_expect(*s, x, Density::make(*s, {2, 2, 0, 0}), g);
  CHECK(*e[0] == doctest::Approx(2.0));
  CHECK_FALSE(e[1].has_value());
}

TEST_CASE("densities") {
  const auto s = qtest::uniform_space(2);
  CHECK(Density::reference(*s).normalized());
  CHECK_FALSE(Density::make(*s, {1, 0}).normalized());
  CHECK(code_of([&] { Density::make(*s, {1, -1}); }) == ErrorCode::NegativeDensity);
  CHECK(code_of([&] { Density::make(*s, {1}); }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([&] { Density::make(*s, {1, NAN}); }) == ErrorCode::NonFiniteInput);

  const auto w = conditional_weights(*s, std::vector<double>{1, 3}, Block{0, 1});
  REQUIRE(w);
  CHECK((*w)[0] == doctest::Approx(0.25));
  CHECK_FALSE(conditional_weights(*s, std::vector<double>{0, 0}, Block{0, 1}));
}

TEST_CASE("is_in_P_G") {
  const auto s = qtest::uniform_space(4);
  const auto g = qtest::pairs4();
  CHECK(is_in_P_G(*s, Density::make(*s, {2, 0, 1, 1}), g));
  CHECK_FALSE(is_in_P_G(*s, Density::make(*s, {3, 1, 1, 1}), g));
}

TEST_CASE("dyadic_partition") {
  const auto g = qtest::pairs4();
  const Rv y{0.1, 0.1, 0.9, 0.9};
  // Independent cell count: j = ceil((y + n) 2^n).
  const auto cell = [](double v, unsigned n) {
    return static_cast<long long>(std::ceil((v + n) * std::ldexp(1.0, int(n))));
  };
  CHECK(cell(0.1, 1) != cell(0.9, 1));
  CHECK(dyadic_partition(y, g, 1).num_blocks() == 2);
  CHECK(dyadic_cell(0.1, 1) == cell(0.1, 1));

  const Rv c{0.3, 0.3, 0.3, 0.3};
  CHECK(dyadic_partition(c, g, 3).num_blocks() == 1);

  const Rv close{0.30, 0.30, 0.31, 0.31};
  CHECK(dyadic_partition(close, g, 1).num_blocks() == 1);
  CHECK(dyadic_partition(close, g, 7).num_blocks() == 2);

  const Rv tails{-5, -5, 5, 5};
  const auto t = dyadic_partition(tails, g, 1);
  CHECK(t.num_blocks() == 2);
  CHECK(is_dyadic_tail(dyadic_cell(-5, 1), 1));
  CHECK(is_dyadic_tail(dyadic_cell(5, 1), 1));
  CHECK_FALSE(is_dyadic_tail(dyadic_cell(0.2, 1), 1));

  CHECK(code_of([&] { dyadic_partition(Rv{0, 1, 2, 2}, g, 1); }) == ErrorCode::NotMeasurable);
  CHECK(code_of([&] { dyadic_partition(y, g, 0); }) == ErrorCode::InvalidParameter);
}

TEST_CASE("ess_sup_on") {
  const Rv x{1, 3, 5, 7};
  CHECK(ess_sup_on(x, Block{0, 1}) == 3);
  CHECK(ess_sup_on(Rv{4, 4}, Block{0, 1}) == 4);
  CHECK(ess_sup_on(Rv{-1, -2}, Block{0, 1}) == -1);
  CHECK(code_of([&] { ess_sup_on(x, Block{}); }) == ErrorCode::EmptyAtom);
}

TEST_CASE("expand") {
  const std::vector<double> v{2, 6};
  CHECK(expand(v, qtest::pairs4()) == Rv{2, 2, 6, 6});
}
