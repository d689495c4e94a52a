// One PASS/FAIL line per acceptance criterion. Exit status 1 if any fails.
#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "quasidual/dual_engine.hpp"
#include "quasidual/harness.hpp"
#include "quasidual/maps.hpp"
#include "quasidual/oracle.hpp"
#include "quasidual/rng.hpp"

using namespace quasidual;

namespace {

constexpr double kGapTol = 1e-6;
constexpr double kFixtureTol = 1e-12;
constexpr double kWeightTol = 1e-5;
constexpr double kClosedFormTol = 1e-8;
constexpr double kWorstCaseTol = 1e-9;
constexpr double kVertexTol = 1e-6;
constexpr double kOracleSlack = 1e-6;
constexpr double kGridStep = 0.05;
constexpr double kGridBox = 5.0;
constexpr std::size_t kRandomCases = 200;
constexpr std::size_t kOracleCases = 100;
constexpr std::size_t kTrivialGCases = 100;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Random space with n points and a partition whose blocks have at most
// max_block points.
struct RandomSetup {
  std::shared_ptr<const FiniteSpace> space;
  Partition g;
};

RandomSetup random_setup(Rng& rng, std::size_t n, std::size_t max_block) {
  std::vector<double> p(n);
  double total = 0;
  for (auto& v : p) total += v = rng.uniform(0.1, 1.0);
  for (auto& v : p) v /= total;
  double sum = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) sum += p[i];
  p[n - 1] = 1.0 - sum;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back("p" + std::to_string(i));
  auto space = std::make_shared<const FiniteSpace>(FiniteSpace::build(labels, p));

  std::vector<Block> blocks;
  std::size_t i = 0;
  while (i < n) {
    const std::size_t len = std::min<std::size_t>(n - i, 1 + rng.below(max_block));
    Block b;
    for (std::size_t k = 0; k < len; ++k) b.push_back(i + k);
    blocks.push_back(b);
    i += len;
  }
  return {space, Partition::build(n, blocks)};
}

Rv random_x(Rng& rng, std::size_t n) {
  Rv x(n);
  for (auto& v : x) v = rng.uniform(-3, 3);
  return x;
}

// Random density, with some coordinates set to zero.
Density random_density(Rng& rng, const FiniteSpace& s) {
  std::vector<double> q(s.size());
  for (auto& v : q) v = rng.uniform() < 0.2 ? 0.0 : rng.uniform(0.0, 3.0);
  return Density::make(s, q);
}

// --- criterion 2 -----------------------------------------------------------

Outcome entropic_closed_forms() {
  Outcome out;
  auto s = std::make_shared<const FiniteSpace>(FiniteSpace::build({"lo", "hi"}, {0.5, 0.5}));
  const auto g = Partition::trivial(2);
  const auto m = MapSpec::entropic(s, g, 1.0);
  const Rv x{0.0, std::log(3.0)};
  const double log2 = std::log(2.0);
  const double pe = std::abs(evaluate(m, x)[0] - log2);
  const auto h = h_value(m, x);
  const double he = std::abs(h.atoms[0].dual - log2);
  const double we = std::max(std::abs(h.atoms[0].argmax_weights[0] - 0.25),
                             std::abs(h.atoms[0].argmax_weights[1] - 0.75));
  out.pass = pe <= kFixtureTol && he <= kGapTol && we <= kWeightTol;

  Rng rng(2002);
  double worst = 0;
  std::size_t atoms = 0;
  for (std::size_t c = 0; c < kRandomCases; ++c) {
    const auto setup = random_setup(rng, 2 + rng.below(5), 3);
    const double gamma = std::array{0.5, 1.0, 2.0}[rng.below(3)];
    const auto em = MapSpec::entropic(setup.space, setup.g, gamma);
    const Rv xr = random_x(rng, setup.space->size());
    const auto q = random_density(rng, *setup.space);
    const auto k = k_value(em, xr, q);
    for (std::size_t a = 0; a < setup.g.num_blocks(); ++a) {
      const auto& block = setup.g.block(a);
      double qa = 0, pa = 0;
      for (auto i : block) {
        qa += q[i] * setup.space->prob(i);
        pa += setup.space->prob(i);
      }
      if (qa == 0) continue;
      double mean = 0, kl = 0;
      for (auto i : block) {
        const double w = q[i] * setup.space->prob(i) / qa;
        const double v = setup.space->prob(i) / pa;
        mean += w * xr[i];
        if (w > 0) kl += w * std::log(w / v);
      }
      worst = std::max(worst, std::abs(k[a] - (mean - kl / gamma)));
      ++atoms;
    }
  }
  out.pass = out.pass && worst <= kClosedFormTol;
  out.detail = "pi err " + fmt(pe) + ", H err " + fmt(he) + ", w err " + fmt(we) +
               ", K identity max err " + fmt(worst) + " over " + std::to_string(atoms) +
               " atoms";
  return out;
}

// --- criterion 3 -----------------------------------------------------------

Outcome worst_case_duality() {
  double worst = 0, min_top = 1;
  for (std::size_t c = 0; c < kRandomCases; ++c) {
    const auto inst = gen_instance(0x3000 + c, FamilyKind::WorstCase);
    SolverCfg cfg;
    cfg.seed = c;
    const auto r = h_value(inst.map, inst.x, cfg);
    for (std::size_t a = 0; a < r.atoms.size(); ++a) {
      double top = -INFINITY;
      for (auto i : r.blocks[a]) top = std::max(top, inst.x[i]);
      worst = std::max(worst, std::abs(r.atoms[a].dual - top));
      const auto& w = r.atoms[a].argmax_weights;
      min_top = std::min(min_top, *std::max_element(w.begin(), w.end()));
    }
  }
  return {worst <= kWorstCaseTol && min_top >= 1 - kVertexTol,
          "max |H - max x| " + fmt(worst) + ", smallest argmax weight " + fmt(min_top)};
}

// --- criterion 4 -----------------------------------------------------------

Outcome cce_mirror() {
  auto s = std::make_shared<const FiniteSpace>(FiniteSpace::build({"lo", "hi"}, {0.5, 0.5}));
  const Rv fx{0.0, std::log(3.0)};
  const auto g = Partition::trivial(2);
  const Utility u1{UtilityKind::Exponential, 1.0};
  const double expected = -std::log((1.0 + 1.0 / 3.0) / 2.0);
  const double fe = std::max(std::abs(cce_evaluate(u1, *s, fx, g)[0] - expected),
                             std::abs(duality_gap(mirror(MapSpec::entropic(s, g, 1.0)), fx)
                                          .atoms[0].dual -
                                      expected));

  Rng rng(4004);
  double worst = 0, worst_closed = 0;
  for (std::size_t c = 0; c < kRandomCases; ++c) {
    const auto setup = random_setup(rng, 2 + rng.below(7), 4);
    const double alpha = std::array{0.5, 1.0, 2.0}[rng.below(3)];
    const Rv x = random_x(rng, setup.space->size());
    const Utility u{UtilityKind::Exponential, alpha};
    const auto cce = cce_evaluate(u, *setup.space, x, setup.g);
    SolverCfg cfg;
    cfg.seed = c;
    const auto r = duality_gap(mirror(MapSpec::entropic(setup.space, setup.g, alpha)), x, cfg);
    for (std::size_t a = 0; a < r.atoms.size(); ++a) {
      const auto& block = setup.g.block(a);
      double pa = 0, e = 0;
      for (auto i : block) pa += setup.space->prob(i);
      for (auto i : block) e += setup.space->prob(i) / pa * std::exp(-alpha * x[i]);
      const double closed = -std::log(e) / alpha;
      worst = std::max(worst, std::abs(cce[block.front()] - r.atoms[a].dual));
      worst_closed = std::max(worst_closed, std::abs(cce[block.front()] - closed));
    }
  }
  return {fe <= kGapTol && worst <= kGapTol && worst_closed <= kGapTol,
          "fixture err " + fmt(fe) + ", max |CCE - mirrored dual| " + fmt(worst) +
              ", max |CCE - closed form| " + fmt(worst_closed)};
}

// --- criteria 7 and 8 ------------------------------------------------------

struct OracleStats {
  double eq_ratio = 0;  // max of |equality_k - grid_k| / (2 L step)
  double k_ratio = 0;   // max of |grid_k - k_value| / (L step + slack)
  double eq_worst = 0;
  double k_worst = 0;
  std::size_t atoms = 0;
  std::size_t drawn = 0;
};

// A monotone map together with the exponent a of its exponential tilt
// (0 for the worst case, whose minimizer is the constant t).
struct TiltedMap {
  MapSpec map;
  double a;
};

TiltedMap monotone_map(Rng& rng, const RandomSetup& s, std::size_t which) {
  const double gamma = std::array{0.5, 1.0, 2.0}[rng.below(3)];
  switch (which) {
    case 0:
      return {MapSpec::entropic(s.space, s.g, gamma), gamma};
    case 1:
      return {MapSpec::worst_case(s.space, s.g), 0.0};
    case 2:
      return {MapSpec::composite(s.space, s.g, {LossKind::Exp, 0.5}, OuterKind::Log), 0.5};
    case 3:
      return {MapSpec::transformed(MapSpec::entropic(s.space, s.g, gamma),
                                   {TransformKind::Arctan, 0.0}),
              gamma};
    default:
      return {MapSpec::transformed(MapSpec::entropic(s.space, s.g, gamma),
                                   {TransformKind::ShiftedCubic, rng.uniform(-1, 1)}),
              gamma};
  }
}

// The grid bound L * step assumes the minimizer of K lies in the box. For
// these families it is xi_i = t + (log(w_i / v_i) - KL(w || v)) / a.
bool minimizer_in_box(const TiltedMap& tm, const RandomSetup& s, const Rv& x,
                      const std::vector<std::vector<double>>& weights) {
  const double lim = kGridBox - kGridStep;
  for (std::size_t b = 0; b < s.g.num_blocks(); ++b) {
    const auto& block = s.g.block(b);
    const auto v = reference_weights(*s.space, block);
    const auto& w = weights[b];
    double t = 0, kl = 0;
    for (std::size_t j = 0; j < block.size(); ++j) {
      t += w[j] * x[block[j]];
      kl += w[j] * std::log(w[j] / v[j]);
    }
    for (std::size_t j = 0; j < block.size(); ++j) {
      const double xi = tm.a == 0 ? t : t + (std::log(w[j] / v[j]) - kl) / tm.a;
      if (std::abs(xi) > lim) return false;
    }
  }
  return true;
}

OracleStats oracle_stats() {
  OracleStats st;
  Rng rng(7007);
  const GridCfg grid{-kGridBox, kGridBox, kGridStep};
  for (std::size_t c = 0; c < kOracleCases; ++st.drawn) {
    const auto setup = random_setup(rng, 2 + rng.below(4), 3);
    const auto tm = monotone_map(rng, setup, c % 5);
    const Rv x = random_x(rng, setup.space->size());
    // equality_k needs Q in P_G.
    std::vector<std::vector<double>> weights;
    for (const auto& block : setup.g.blocks()) {
      std::vector<double> w(block.size());
      double t = 0;
      for (auto& v : w) t += v = rng.uniform(0.05, 1.0);
      for (auto& v : w) v /= t;
      weights.push_back(w);
    }
    if (!minimizer_in_box(tm, setup, x, weights)) continue;
    const auto q = glue_density(weights, setup.g, *setup.space);
    SolverCfg cfg;
    cfg.seed = c;
    const auto gk = grid_k(tm.map, x, q, grid);
    const auto ek = equality_k(tm.map, x, q, grid);
    const auto k = k_value(tm.map, x, q, cfg);
    const double l = gk.slope;
    for (std::size_t a = 0; a < setup.g.num_blocks(); ++a) {
      const double de = std::abs(*ek.values[a] - *gk.values[a]);
      const double dk = std::abs(*gk.values[a] - k[a]);
      st.eq_worst = std::max(st.eq_worst, de);
      st.k_worst = std::max(st.k_worst, dk);
      st.eq_ratio = std::max(st.eq_ratio, de / (2 * l * kGridStep));
      st.k_ratio = std::max(st.k_ratio, dk / (l * kGridStep + kOracleSlack));
      ++st.atoms;
    }
    ++c;
  }
  return st;
}

// --- criterion 11 ----------------------------------------------------------

Outcome trivial_g_duality() {
  double worst = 0;
  std::size_t n = 0;
  for (std::size_t f = 0; f < std::size(kAllFamilies); ++f) {
    const auto family = kAllFamilies[f];
    if (family == FamilyKind::Broken) continue;
    Rng rng(1100 + f);
    for (std::size_t c = 0; c < kTrivialGCases; ++c) {
      const std::size_t points = 2 + rng.below(7);
      const auto inst = gen_instance(0xB011E000 + 1000 * f + c, points, 1, family);
      SolverCfg cfg;
      cfg.seed = c;
      worst = std::max(worst, duality_gap(inst.map, inst.x, cfg).max_abs_gap());
      ++n;
    }
  }
  return {worst <= kGapTol, "max |gap| " + fmt(worst) + " over " + std::to_string(n) +
                                " trivial-G instances"};
}

// --- suite report ----------------------------------------------------------

struct Row {
  std::size_t cases = 0;
  std::size_t violations = 0;
  double max_dev = 0;
  bool pass = false;
};

struct Report {
  std::map<std::string, Row> rows;
  double max_gap = 0;
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      cells.push_back(cell);
      cell.clear();
    } else {
      cell += ch;
    }
  }
  cells.push_back(cell);
  return cells;
}

Report parse_report(const std::string& csv) {
  Report r;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto c = split_csv(line);
    if (c.size() == 7) {
      Row row;
      row.cases = std::stoul(c[3]);
      row.violations = std::stoul(c[4]);
      row.max_dev = std::stod(c[5]);
      row.pass = c[6] == "pass";
      r.rows[c[0]] = row;
    } else if (c.size() == 2 && c[0] == "max_gap") {
      r.max_gap = std::stod(c[1]);
    }
  }
  return r;
}

struct Captured {
  int status = -1;
  std::string out;
};

Captured run_props() {
  const std::string cmd =
      std::string("\"") + QUASIDUAL_CLI_PATH + "\" props --seed 42 --cases 200 2>/dev/null";
  Captured c;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return c;
  std::array<char, 4096> buf;
  std::size_t got;
  while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) c.out.append(buf.data(), got);
  const int raw = pclose(pipe);
  c.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return c;
}

Outcome from_rows(const Report& r, std::initializer_list<const char*> names,
                  std::size_t min_cases) {
  Outcome out;
  for (const char* name : names) {
    auto it = r.rows.find(name);
    if (it == r.rows.end()) {
      out.pass = false;
      out.detail += std::string(out.detail.empty() ? "" : "; ") + name + " missing";
      continue;
    }
    const Row& row = it->second;
    out.pass = out.pass && row.pass && row.cases >= min_cases;
    out.detail += std::string(out.detail.empty() ? "" : "; ") + name + " " +
                  std::to_string(row.cases - row.violations) + "/" + std::to_string(row.cases) +
                  " ok, max dev " + fmt(row.max_dev);
  }
  return out;
}

}  // namespace

int main() {
  int failed = 0;
  const auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("criterion %2d %-34s %s  (%s)\n", id, name, o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  };

  const Captured first = run_props();
  const Captured second = run_props();
  const Report suite = parse_report(first.out);
  const bool suite_ok = first.status == 0 && !suite.rows.empty();

  {
    Outcome o = from_rows(suite, {"strong-duality"}, 6 * kRandomCases);
    const auto neg = suite.rows.find("neg-duality-gap");
    const bool neg_ok = neg != suite.rows.end() && neg->second.violations > 0;
    o.pass = o.pass && suite_ok && suite.max_gap <= kGapTol && neg_ok;
    o.detail += "; max gap " + fmt(suite.max_gap) + "; negative control fired on " +
                (neg == suite.rows.end() ? std::string("?")
                                         : std::to_string(neg->second.violations)) +
                " instances";
    report(1, "strong duality", o);
  }
  report(2, "entropic closed forms", entropic_closed_forms());
  report(3, "worst-case duality", worst_case_duality());
  report(4, "certainty-equivalent mirror", cce_mirror());
  report(5, "properties of R",
         from_rows(suite, {"r-scale-invariance", "r-lattice-min", "r-lattice-max", "r-quasi-affine"},
                   kRandomCases));
  report(6, "properties of K",
         from_rows(suite, {"k-homogeneity", "k-locality", "k-upward-directed"}, kRandomCases));

  const OracleStats st = oracle_stats();
  report(7, "equality-constrained K",
         {st.eq_ratio <= 1, "max |equality_k - grid_k| " + fmt(st.eq_worst) +
                                 ", largest share of 2 L step " + fmt(st.eq_ratio) + " over " +
                                 std::to_string(st.atoms) + " atoms of " +
                                 std::to_string(kOracleCases) + " instances (" +
                                 std::to_string(st.drawn) + " drawn)"});
  report(8, "grid oracle agreement",
         {st.k_ratio <= 1, "max |grid_k - k_value| " + fmt(st.k_worst) +
                                ", largest share of L step " + fmt(st.k_ratio)});

  report(9, "coarsening machinery",
         from_rows(suite, {"k-inf-over-partitions", "coarsened-duality", "monotone-transfer"},
                   kOracleCases));
  report(10, "single density", from_rows(suite, {"single-density"}, kRandomCases));
  report(11, "trivial-G duality", trivial_g_duality());
  report(12, "determinism",
         {suite_ok && second.status == first.status && first.out == second.out,
          std::to_string(first.out.size()) + " bytes, exit codes " +
              std::to_string(first.status) + "/" + std::to_string(second.status)});

  std::printf("%s: %d of 12 criteria failed\n", failed ? "FAIL" : "PASS", failed);
  return failed ? 1 : 0;
}
