#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "quasidual/dual_engine.hpp"
#include "quasidual/oracle.hpp"

using namespace quasidual;
using qtest::code_of;

namespace {

const double kLog3 = std::log(3.0);

double kl(std::span<const double> w, std::span<const double> v) {
  double s = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] > 0) s += w[i] * std::log(w[i] / v[i]);
  }
  return s;
}

}  // namespace

TEST_CASE("k_value worst case") {
  const auto s = qtest::uniform_space(2);
  const auto wc = MapSpec::worst_case(s, Partition::trivial(2));
  const Rv x{1, 3};
  CHECK(k_value(wc, x, Density::reference(*s))[0] == doctest::Approx(2.0).epsilon(1e-12));
  for (double w : {0.0, 0.25, 0.5, 1.0}) {
    const auto q = Density::make(*s, {2 * w, 2 * (1 - w)});
    CHECK(k_value(wc, x, q)[0] == doctest::Approx(3 - 2 * w).epsilon(1e-12));
  }
}

TEST_CASE("k_value entropic closed form") {
  const auto s = qtest::space_with({0.1, 0.2, 0.3, 0.4});
  const auto g = qtest::pairs4();
  const double gamma = 0.5;
  const auto ent = MapSpec::entropic(s, g, gamma);
  const Rv x{0.3, -1.2, 2.0, 0.4};
  const auto q = Density::make(*s, {1.5, 0.25, 0.0, 2.0});
  const auto k = k_value(ent, x, q);
  for (std::size_t a = 0; a < 2; ++a) {
    const auto& block = g.block(a);
    const auto w = *conditional_weights(*s, q.values(), block);
    const auto v = reference_weights(*s, block);
    double mean = 0;
    for (std::size_t j = 0; j < block.size(); ++j) mean += w[j] * x[block[j]];
    CHECK(std::abs(k[a] - (mean - kl(w, v) / gamma)) <= 1e-8);
  }
}

TEST_CASE("k_value on a Q-null atom") {
  const auto s = qtest::uniform_space(4);
  const auto ent = MapSpec::entropic(s, qtest::pairs4(), 1.0);
  const auto k = k_value(ent, Rv{0, 1, 2, 3}, Density::make(*s, {2, 2, 0, 0}));
  CHECK(k[1] == -INFINITY);
}

TEST_CASE("r_value agrees with k_value") {
  const auto s = qtest::space_with({0.2, 0.3, 0.5});
  const auto g = Partition::trivial(3);
  const auto m = MapSpec::transformed(MapSpec::entropic(s, g, 1.0), {TransformKind::Arctan, 0});
  const Rv x{0.5, -0.25, 1.0};
  const std::vector<double> xi{3.0, 0.5, 1.0};
  double exi = 0, y = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    exi += s->prob(i) * xi[i];
    y += s->prob(i) * xi[i] * x[i];
  }
  std::vector<double> qn(3);
  for (std::size_t i = 0; i < 3; ++i) qn[i] = xi[i] / exi;
  const auto r = r_value(m, Rv{y, y, y}, xi);
  const auto k = k_value(m, x, Density::make(*s, qn));
  CHECK(r[0] == doctest::Approx(k[0]).epsilon(1e-9));

  CHECK(code_of([&] { r_value(m, Rv{0, 1, 0}, xi); }) == ErrorCode::NotMeasurable);
  CHECK(code_of([&] { r_value(m, Rv{0, 0, 0}, std::vector<double>{1, -1, 1}); }) ==
        ErrorCode::NegativeDensity);
}

TEST_CASE("h_value") {
  const auto s = qtest::uniform_space(2);
  const auto g = Partition::trivial(2);

  const auto wc = h_value(MapSpec::worst_case(s, g), Rv{1, 3});
  CHECK(wc.atoms[0].dual == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(wc.atoms[0].argmax_weights[1] >= 1 - 1e-9);

  const auto ent = h_value(MapSpec::entropic(s, g, 1.0), Rv{0, kLog3});
  CHECK(std::abs(ent.atoms[0].dual - std::log(2.0)) <= 1e-6);
  CHECK(std::abs(ent.atoms[0].argmax_weights[0] - 0.25) <= 1e-5);
  CHECK(std::abs(ent.atoms[0].argmax_weights[1] - 0.75) <= 1e-5);

  const auto c = duality_gap(MapSpec::entropic(s, g, 1.0), Rv{0.4, 0.4});
  CHECK(c.atoms[0].dual == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(std::abs(c.atoms[0].gap) <= 1e-12);
}

TEST_CASE("duality_gap fixtures") {
  const auto s2 = qtest::uniform_space(2);
  const auto cce = duality_gap(mirror(MapSpec::entropic(s2, Partition::trivial(2), 1.0)),
                               Rv{0, kLog3});
  CHECK(cce.orientation == Orientation::Quasiconcave);
  CHECK(cce.atoms[0].primal == doctest::Approx(std::log(1.5)).epsilon(1e-14));
  CHECK(std::abs(cce.atoms[0].gap) <= 1e-6);

  const auto s4 = qtest::uniform_space(4);
  const auto wc = duality_gap(MapSpec::worst_case(s4, Partition::trivial(4)), Rv{1, 3, 5, 7});
  CHECK(wc.atoms[0].primal == 7);
  CHECK(wc.atoms[0].dual == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(wc.max_abs_gap() <= 1e-9);
}

TEST_CASE("h_value_sweep matches separate calls") {
  const auto s = qtest::space_with({0.1, 0.15, 0.25, 0.2, 0.3});
  const auto g = Partition::build(5, {{0, 1}, {2}, {3, 4}});
  const auto m =
      MapSpec::transformed(MapSpec::entropic(s, g, 2.0), {TransformKind::ShiftedCubic, 0.25});
  const Rv x{0.2, -0.7, 1.1, 0.0, -0.3};
  SolverCfg cfg;
  cfg.seed = 5;
  const auto gammas = enumerate_partitions(g);
  const auto sweep = h_value_sweep(m, x, gammas, cfg);
  REQUIRE(sweep.per_gamma.size() == gammas.size());
  const auto base = h_value(m, x, cfg);
  for (std::size_t a = 0; a < base.atoms.size(); ++a) {
    CHECK(sweep.base.atoms[a].dual == base.atoms[a].dual);
  }
  for (std::size_t p = 0; p < gammas.size(); ++p) {
    const auto sep = h_value(coarsen(m, gammas[p]), x, cfg);
    REQUIRE(sep.atoms.size() == sweep.per_gamma[p].atoms.size());
    for (std::size_t b = 0; b < sep.atoms.size(); ++b) {
      CHECK(sep.atoms[b].dual == sweep.per_gamma[p].atoms[b].dual);
      CHECK(sep.atoms[b].primal == sweep.per_gamma[p].atoms[b].primal);
      CHECK(sep.atoms[b].argmax_weights == sweep.per_gamma[p].atoms[b].argmax_weights);
    }
  }
}

TEST_CASE("fenchel_conjugate") {
  const auto s = qtest::uniform_space(2);
  const auto g = Partition::trivial(2);
  const auto ent = MapSpec::entropic(s, g, 1.0);
  CHECK(std::abs(*fenchel_conjugate(ent, Density::reference(*s))[0]) <= 1e-10);
  const double expected = 0.25 * std::log(0.5) + 0.75 * std::log(1.5);
  CHECK(std::abs(expected - 0.130812) <= 1e-6);
  CHECK(*fenchel_conjugate(ent, Density::make(*s, {0.5, 1.5}))[0] ==
        doctest::Approx(expected).epsilon(1e-10));

  const auto wc = MapSpec::worst_case(s, g);
  for (double w : {0.0, 0.3, 1.0}) {
    CHECK(std::abs(*fenchel_conjugate(wc, Density::make(*s, {2 * w, 2 - 2 * w}))[0]) <= 1e-10);
  }

  const auto s4 = qtest::uniform_space(4);
  const auto e4 = MapSpec::entropic(s4, qtest::pairs4(), 1.0);
  CHECK_FALSE(fenchel_conjugate(e4, Density::make(*s4, {1, 1, 0, 0}))[1].has_value());

  const auto at = MapSpec::transformed(ent, {TransformKind::Arctan, 0});
  CHECK(code_of([&] { fenchel_conjugate(at, Density::reference(*s)); }) ==
        ErrorCode::NotCashInvariant);
}

TEST_CASE("glue_density and restrict_to_P_G") {
  const auto s = qtest::space_with({0.1, 0.3, 0.2, 0.4});
  const auto g = qtest::pairs4();
  const std::vector<std::vector<double>> ref{reference_weights(*s, g.block(0)),
                                             reference_weights(*s, g.block(1))};
  const auto q1 = glue_density(ref, g, *s);
  for (double v : q1.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));

  const std::vector<std::vector<double>> w{{0.3, 0.7}, {1.0, 0.0}};
  const auto q = glue_density(w, g, *s);
  CHECK(is_in_P_G(*s, q, g));
  for (std::size_t a = 0; a < 2; ++a) {
    const auto back = *conditional_weights(*s, q.values(), g.block(a));
    for (std::size_t j = 0; j < 2; ++j) CHECK(back[j] == doctest::Approx(w[a][j]).epsilon(1e-15));
  }
  CHECK(code_of([&] { glue_density({{0.5, 0.6}, {1, 0}}, g, *s); }) ==
        ErrorCode::InvalidParameter);

  SUBCASE("vertex gluing keeps per-atom K") {
    const auto wc = MapSpec::worst_case(s, g);
    const Rv x{1, 4, -2, 0.5};
    const auto glued = glue_density({{0, 1}, {1, 0}}, g, *s);
    const auto k = k_value(wc, x, glued);
    CHECK(k[0] == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(k[1] == doctest::Approx(-2.0).epsilon(1e-12));
  }

  const auto u = qtest::uniform_space(4);
  const auto same = Density::make(*u, {2, 0, 1, 1});
  const auto r1 = restrict_to_P_G(same, g, *u);
  CHECK(std::vector<double>(r1.values().begin(), r1.values().end()) ==
        std::vector<double>{2, 0, 1, 1});
  const auto r2 = restrict_to_P_G(Density::make(*u, {3, 1, 1, 1}), g, *u);
  const std::vector<double> want{1.5, 0.5, 1, 1};
  for (std::size_t i = 0; i < 4; ++i) CHECK(r2[i] == doctest::Approx(want[i]).epsilon(1e-15));
  CHECK(code_of([&] { restrict_to_P_G(Density::make(*u, {1, 1, 0, 0}), g, *u); }) ==
        ErrorCode::QNullAtom);
}

TEST_CASE("analytic_dual_start") {
  const auto s = qtest::uniform_space(2);
  const auto ent = MapSpec::entropic(s, Partition::trivial(2), 1.0);
  const auto w = analytic_dual_start(ent, 0, Rv{0, kLog3});
  REQUIRE(w.size() == 2);
  CHECK(w[0] == doctest::Approx(0.25));
  CHECK(analytic_dual_start(MapSpec::worst_case(s, Partition::trivial(2)), 0, Rv{0, 1}).empty());
}
