#include "quasidual/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <sstream>

#include "CLI11.hpp"
#include "quasidual/harness.hpp"
#include "quasidual/oracle.hpp"

namespace quasidual {

std::string format_value(double v) {
  if (v == std::numeric_limits<double>::infinity()) return "inf";
  if (v == -std::numeric_limits<double>::infinity()) return "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12f", v);
  // Tiny negative values would print as "-0.000000000000".
  if (buf[0] == '-' && std::strspn(buf + 1, "0.") == std::strlen(buf + 1)) return buf + 1;
  return buf;
}

std::string format_weight(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

namespace {

std::string header(const char* columns) {
  return std::string("schema_version,") + columns + "\n";
}

std::string version() { return std::to_string(kCsvSchemaVersion); }

std::string atom_value_csv(const Scenario& s, const Partition& out,
                           const std::vector<std::string>& values, const char* column) {
  std::string csv = header((std::string("atom,") + column).c_str());
  for (std::size_t b = 0; b < out.num_blocks(); ++b) {
    csv += version() + "," + s.block_name(out.block(b)) + "," + values[b] + "\n";
  }
  return csv;
}

const Density& density_or_reference(const Scenario& s, std::optional<Density>& fallback) {
  if (s.q) return *s.q;
  fallback = Density::reference(*s.space);
  return *fallback;
}

const Density& require_q(const Scenario& s) {
  if (!s.q) throw Error(ErrorCode::ValidationError, "this command needs a 'q' density");
  return *s.q;
}

struct Options {
  std::string scenario;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t cases = 200;
  double step = 0.05;
  double box = 5.0;
  int restarts = 0;
};

Scenario load(const Options& o) {
  Scenario s = load_scenario(o.scenario);
  if (o.seed_given) s.solver.seed = o.seed;
  if (o.restarts > 0) s.solver.restarts = o.restarts;
  return s;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const Scenario s = load(o);
  const Rv v = s.primal();
  const Partition part = s.map ? s.dual_map().output_partition() : s.g;
  std::vector<std::string> cells;
  for (const auto& block : part.blocks()) cells.push_back(format_value(v[block.front()]));
  out << atom_value_csv(s, part, cells, "primal");
  return kExitOk;
}

int cmd_k(const Options& o, std::ostream& out) {
  const Scenario s = load(o);
  const MapSpec m = s.dual_map();
  const auto k = k_value(m, s.x, require_q(s), s.solver);
  std::vector<std::string> cells;
  for (double v : k) cells.push_back(format_value(v));
  out << atom_value_csv(s, m.output_partition(), cells, "k");
  return kExitOk;
}

int cmd_h(const Options& o, std::ostream& out, bool gate) {
  const Scenario s = load(o);
  const auto r = duality_gap(s.dual_map(), s.x, s.solver);
  out << dual_report_csv(s, r);
  if (!gate) return kExitOk;
  // Decided from the printed values so that a script can re-check it.
  for (const auto& a : r.atoms) {
    const double printed = std::strtod(format_value(a.gap).c_str(), nullptr);
    if (!(std::abs(printed) <= o.tol)) return kExitGap;
  }
  return kExitOk;
}

int cmd_fenchel(const Options& o, std::ostream& out) {
  const Scenario s = load(o);
  const MapSpec m = s.dual_map();
  const auto conj = fenchel_conjugate(m, require_q(s), s.solver);
  std::vector<std::string> cells;
  for (const auto& v : conj) cells.push_back(v ? format_value(*v) : "qnull");
  out << atom_value_csv(s, m.g_partition(), cells, "conjugate");
  return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const Scenario s = load(o);
  if (!s.map) s.dual_map();  // throws the primal-only error
  const MapSpec& m = *s.map;
  std::optional<Density> fallback;
  const Density& q = density_or_reference(s, fallback);
  const auto partitions = enumerate_partitions(s.g);
  const auto sweep = h_value_sweep(m, s.x, partitions, s.solver);
  out << header("gamma,block,pi_gamma,h_gamma,k_gamma,gap");
  for (std::size_t p = 0; p < partitions.size(); ++p) {
    const Partition& gamma = partitions[p];
    const MapSpec mc = coarsen(m, gamma);
    const auto k = k_value(mc, s.x, q, s.solver);
    std::string name;
    for (const auto& block : gamma.blocks()) {
      if (!name.empty()) name += '|';
      name += s.block_name(block);
    }
    const auto& rep = sweep.per_gamma[p];
    for (std::size_t b = 0; b < gamma.num_blocks(); ++b) {
      const auto& a = rep.atoms[b];
      out << version() << ',' << name << ',' << s.block_name(gamma.block(b)) << ','
          << format_value(a.primal) << ',' << format_value(a.dual) << ',' << format_value(k[b])
          << ',' << format_value(a.gap) << '\n';
    }
  }
  return kExitOk;
}

int cmd_props(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.cases == 0) throw Error(ErrorCode::InvalidParameter, "--cases must be >= 1");
  const auto report = run_property_suite(o.seed_given ? o.seed : 42, o.cases);
  out << report.to_csv();
  err << report.summary();
  return report.passed() ? kExitOk : kExitGap;
}

int cmd_oracle(const Options& o, std::ostream& out) {
  const Scenario s = load(o);
  if (!s.map) s.dual_map();
  const MapSpec& m = *s.map;
  std::optional<Density> fallback;
  const Density& q = density_or_reference(s, fallback);
  GridCfg grid{-o.box, o.box, o.step};
  grid.validate();
  const auto k = k_value(m, s.x, q, s.solver);
  const auto gk = grid_k(m, s.x, q, grid);
  const auto ek = equality_k(m, s.x, q, grid);
  const double bound = gk.slope * grid.step;
  out << header("atom,k_value,grid_k,equality_k,slope_bound,step,agree");
  for (std::size_t a = 0; a < s.g.num_blocks(); ++a) {
    out << version() << ',' << s.block_name(s.g.block(a)) << ',' << format_value(k[a]) << ',';
    if (!gk.values[a]) {
      out << "qnull,qnull," << format_value(gk.slope) << ',' << format_weight(grid.step)
          << ",1\n";
      continue;
    }
    const bool agree = std::abs(*gk.values[a] - k[a]) <= bound + 1e-6;
    out << format_value(*gk.values[a]) << ',' << format_value(*ek.values[a]) << ','
        << format_value(gk.slope) << ',' << format_weight(grid.step) << ',' << (agree ? 1 : 0)
        << '\n';
  }
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::BracketExhausted:
    case ErrorCode::SolverDiverged:
      return kExitSolver;
    default:
      return kExitInput;
  }
}

}  // namespace

std::string dual_report_csv(const Scenario& s, const DualReport& r) {
  std::string csv = header("atom,primal,dual,gap,argmax_weights,iterations");
  for (std::size_t b = 0; b < r.atoms.size(); ++b) {
    const auto& a = r.atoms[b];
    std::string w;
    for (double v : a.argmax_weights) {
      if (!w.empty()) w += ',';
      w += format_weight(v);
    }
    csv += version() + "," + s.block_name(r.blocks[b]) + "," + format_value(a.primal) + "," +
           format_value(a.dual) + "," + format_value(a.gap) + ",\"" + w + "\"," +
           std::to_string(a.iterations) + "\n";
  }
  return csv;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual representation of quasiconvex conditional maps on finite spaces"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--tol", o.tol, "gap tolerance for the gap command")->capture_default_str();
  auto* seed = app.add_option("--seed", o.seed, "solver or suite seed")->envname("QUASIDUAL_SEED");
  app.add_option("--cases", o.cases, "instances per family for props")->capture_default_str();
  app.add_option("--step", o.step, "oracle grid step")->capture_default_str();
  app.add_option("--box", o.box, "oracle grid half-width")->capture_default_str();
  app.add_option("--restarts", o.restarts, "random simplex starts (overrides the scenario)");

  struct Cmd {
    const char* name;
    const char* help;
    bool scenario;
  };
  static constexpr Cmd kCmds[] = {
      {"eval", "pi(X) per atom", true},
      {"k", "K(X,Q) per atom (needs q)", true},
      {"h", "H(X) per atom with the maximizing weights", true},
      {"gap", "primal, dual and gap; exit 3 when a gap exceeds --tol", true},
      {"fenchel", "pi*(Q) per atom (needs q and a cash-invariant map)", true},
      {"coarsen-sweep", "K, H and pi for every coarsening of G", true},
      {"props", "run the property suite", false},
      {"oracle", "grid oracle against k_value", true},
  };
  for (const auto& c : kCmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    if (c.scenario) sub->add_option("scenario", o.scenario, "scenario file")->required();
  }

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  o.seed_given = seed->count() > 0;

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "eval") return cmd_eval(o, out);
    if (cmd == "k") return cmd_k(o, out);
    if (cmd == "h") return cmd_h(o, out, false);
    if (cmd == "gap") return cmd_h(o, out, true);
    if (cmd == "fenchel") return cmd_fenchel(o, out);
    if (cmd == "coarsen-sweep") return cmd_sweep(o, out);
    if (cmd == "props") return cmd_props(o, out, err);
    return cmd_oracle(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitSolver;
  }
}

}  // namespace quasidual
