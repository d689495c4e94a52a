#include "quasidual/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace quasidual {

namespace {

using json = nlohmann::json;

constexpr const char* kFamilies =
    "entropic, worst_case, composite, transformed, mirrored, cce";

[[noreturn]] void parse_fail(const std::string& source, const std::string& what) {
  throw Error(ErrorCode::ParseError, source + ": " + what);
}

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  const json& field(const json& obj, const std::string& key, const std::string& path) const {
    if (!obj.is_object()) parse_fail(source_, "'" + path + "' must be an object");
    auto it = obj.find(key);
    if (it == obj.end()) parse_fail(source_, "missing field '" + join(path, key) + "'");
    return *it;
  }

  double number(const json& v, const std::string& path) const {
    if (!v.is_number()) parse_fail(source_, "'" + path + "' must be a number");
    return v.get<double>();
  }

  std::string string(const json& v, const std::string& path) const {
    if (!v.is_string()) parse_fail(source_, "'" + path + "' must be a string");
    return v.get<std::string>();
  }

  double number_or(const json& obj, const std::string& key, const std::string& path,
                   double fallback) const {
    auto it = obj.find(key);
    return it == obj.end() ? fallback : number(*it, join(path, key));
  }

  std::size_t index(const FiniteSpace& space, const json& v, const std::string& path) const {
    const auto label = string(v, path);
    const auto i = space.index_of(label);
    if (!i) {
      throw Error(ErrorCode::ValidationError,
                  source_ + ": unknown label '" + label + "' at '" + path + "'");
    }
    return *i;
  }

  std::vector<Block> blocks(const FiniteSpace& space, const json& v,
                            const std::string& path) const {
    if (!v.is_array()) parse_fail(source_, "'" + path + "' must be an array of label arrays");
    std::vector<Block> out;
    for (std::size_t b = 0; b < v.size(); ++b) {
      const auto bp = path + "[" + std::to_string(b) + "]";
      if (!v[b].is_array()) parse_fail(source_, "'" + bp + "' must be an array of labels");
      Block block;
      for (std::size_t k = 0; k < v[b].size(); ++k) {
        block.push_back(index(space, v[b][k], bp + "[" + std::to_string(k) + "]"));
      }
      out.push_back(std::move(block));
    }
    return out;
  }

  // A label -> number object covering every point exactly once.
  std::vector<double> by_label(const FiniteSpace& space, const json& v,
                               const std::string& path) const {
    if (!v.is_object()) parse_fail(source_, "'" + path + "' must be an object keyed by label");
    std::vector<double> out(space.size(), 0.0);
    std::vector<bool> seen(space.size(), false);
    for (auto it = v.begin(); it != v.end(); ++it) {
      const auto i = space.index_of(it.key());
      if (!i) {
        throw Error(ErrorCode::ValidationError,
                    source_ + ": unknown label '" + it.key() + "' in '" + path + "'");
      }
      out[*i] = number(it.value(), join(path, it.key()));
      seen[*i] = true;
    }
    for (std::size_t i = 0; i < space.size(); ++i) {
      if (!seen[i]) {
        throw Error(ErrorCode::ValidationError,
                    source_ + ": '" + path + "' has no value for label '" + space.labels()[i] +
                        "'");
      }
    }
    return out;
  }

  const std::string& source() const { return source_; }

 private:
  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  std::string source_;
};

template <typename Enum>
Enum pick(const Reader& r, const std::string& value, const std::string& path,
          std::initializer_list<std::pair<const char*, Enum>> options) {
  std::string names;
  for (const auto& [name, e] : options) {
    if (value == name) return e;
    names += names.empty() ? name : std::string(", ") + name;
  }
  parse_fail(r.source(), "'" + path + "' is '" + value + "'; expected one of " + names);
}

struct MapRead {
  std::optional<MapSpec> map;
  std::optional<Utility> cce;
};

MapRead read_map(const Reader& r, const json& v, const std::string& path,
                 const std::shared_ptr<const FiniteSpace>& space, const Partition& g) {
  const auto family = r.string(r.field(v, "family", path), path + ".family");
  if (family == "entropic") {
    return {MapSpec::entropic(space, g, r.number(r.field(v, "gamma", path), path + ".gamma")),
            std::nullopt};
  }
  if (family == "worst_case") return {MapSpec::worst_case(space, g), std::nullopt};
  if (family == "composite") {
    Loss loss;
    loss.kind = pick<LossKind>(r, r.string(r.field(v, "loss", path), path + ".loss"),
                               path + ".loss", {{"exp", LossKind::Exp},
                                                {"softplus", LossKind::Softplus}});
    loss.alpha = r.number_or(v, "alpha", path, 1.0);
    const auto outer = pick<OuterKind>(
        r, r.string(r.field(v, "outer", path), path + ".outer"), path + ".outer",
        {{"identity", OuterKind::Identity}, {"log", OuterKind::Log}, {"sqrt", OuterKind::Sqrt}});
    return {MapSpec::composite(space, g, loss, outer), std::nullopt};
  }
  if (family == "transformed" || family == "mirrored") {
    auto inner = read_map(r, r.field(v, "inner", path), path + ".inner", space, g);
    if (!inner.map) {
      throw Error(ErrorCode::ValidationError,
                  r.source() + ": '" + path + ".inner' has no dual form to wrap");
    }
    if (family == "mirrored") return {mirror(*inner.map), std::nullopt};
    Transform t;
    t.kind = pick<TransformKind>(
        r, r.string(r.field(v, "transform", path), path + ".transform"), path + ".transform",
        {{"arctan", TransformKind::Arctan}, {"shifted_cubic", TransformKind::ShiftedCubic}});
    t.shift = r.number_or(v, "shift", path, 0.0);
    return {MapSpec::transformed(*inner.map, t), std::nullopt};
  }
  if (family == "cce") {
    Utility u;
    u.kind = pick<UtilityKind>(
        r, r.string(r.field(v, "utility", path), path + ".utility"), path + ".utility",
        {{"exponential", UtilityKind::Exponential},
         {"power", UtilityKind::Power},
         {"log", UtilityKind::Log}});
    u.param = r.number_or(v, "param", path, 1.0);
    u.validate();
    MapRead out{std::nullopt, u};
    // u(x) = 1 - exp(-a x) gives the mirrored entropic map.
    if (u.kind == UtilityKind::Exponential) out.map = mirror(MapSpec::entropic(space, g, u.param));
    return out;
  }
  parse_fail(r.source(),
             "unknown map family '" + family + "' at '" + path + "'; supported: " + kFamilies);
}

void read_solver(const Reader& r, const json& v, SolverCfg& cfg) {
  if (!v.is_object()) parse_fail(r.source(), "'solver' must be an object");
  for (auto it = v.begin(); it != v.end(); ++it) {
    const std::string path = "solver." + it.key();
    if (it.key() == "bisect_tol") {
      cfg.bisect_tol = r.number(it.value(), path);
    } else if (it.key() == "restarts" || it.key() == "grid_fallback_resolution" ||
               it.key() == "seed") {
      if (!it.value().is_number_integer() || it.value().get<long long>() < 0) {
        parse_fail(r.source(), "'" + path + "' must be a nonnegative integer");
      }
      const auto n = it.value().get<long long>();
      if (it.key() == "restarts") cfg.restarts = static_cast<int>(n);
      if (it.key() == "grid_fallback_resolution") cfg.grid_fallback_resolution = static_cast<int>(n);
      if (it.key() == "seed") cfg.seed = static_cast<std::uint64_t>(n);
    } else {
      parse_fail(r.source(), "unknown field '" + path +
                                 "'; expected bisect_tol, restarts, grid_fallback_resolution, seed");
    }
  }
  validate(cfg);
}

Scenario build(const Reader& r, const json& doc) {
  if (!doc.is_object()) parse_fail(r.source(), "top level must be an object");
  static const char* kKeys[] = {"space", "g_atoms", "map", "x", "q", "gamma_blocks", "solver"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (std::find(std::begin(kKeys), std::end(kKeys), it.key()) == std::end(kKeys)) {
      parse_fail(r.source(), "unknown top-level field '" + it.key() + "'");
    }
  }

  const json& sp = r.field(doc, "space", "");
  const json& labels_v = r.field(sp, "labels", "space");
  const json& probs_v = r.field(sp, "probs", "space");
  if (!labels_v.is_array()) parse_fail(r.source(), "'space.labels' must be an array");
  if (!probs_v.is_array()) parse_fail(r.source(), "'space.probs' must be an array");
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < labels_v.size(); ++i) {
    labels.push_back(r.string(labels_v[i], "space.labels[" + std::to_string(i) + "]"));
  }
  std::vector<double> probs;
  for (std::size_t i = 0; i < probs_v.size(); ++i) {
    probs.push_back(r.number(probs_v[i], "space.probs[" + std::to_string(i) + "]"));
  }
  auto space = std::make_shared<const FiniteSpace>(FiniteSpace::build(labels, probs));

  Partition g =
      Partition::build(space->size(), r.blocks(*space, r.field(doc, "g_atoms", ""), "g_atoms"));
  auto mr = read_map(r, r.field(doc, "map", ""), "map", space, g);
  Rv x = r.by_label(*space, r.field(doc, "x", ""), "x");

  std::optional<Density> q;
  if (auto it = doc.find("q"); it != doc.end()) {
    q = Density::make(*space, r.by_label(*space, *it, "q"));
  }
  std::optional<Partition> gamma;
  if (auto it = doc.find("gamma_blocks"); it != doc.end()) {
    gamma = Partition::build(space->size(), r.blocks(*space, *it, "gamma_blocks"));
    if (!mr.map) {
      throw Error(ErrorCode::ValidationError,
                  r.source() + ": gamma_blocks needs a map with a dual form");
    }
    coarsen(*mr.map, *gamma);  // validates the blocks against G
  }
  SolverCfg cfg;
  if (auto it = doc.find("solver"); it != doc.end()) read_solver(r, *it, cfg);

  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "x must be finite");
  }
  return Scenario{std::move(space), std::move(g), std::move(mr.map), mr.cce, std::move(x),
                  std::move(q), std::move(gamma), cfg};
}

}  // namespace

MapSpec Scenario::dual_map() const {
  if (!map) {
    throw Error(ErrorCode::ValidationError,
                "this certainty equivalent has no dual form; use the exponential utility");
  }
  return gamma ? coarsen(*map, *gamma) : *map;
}

Rv Scenario::primal() const {
  if (cce && !map) return cce_evaluate(*cce, *space, x, g);
  return evaluate(dual_map(), x);
}

std::string Scenario::block_name(const Block& block) const {
  std::string s;
  for (auto i : block) {
    if (!s.empty()) s += '+';
    s += space->labels()[i];
  }
  return s;
}

Scenario parse_scenario(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = text.substr(0, std::min(e.byte, text.size()));
    const auto line = 1 + std::count(upto.begin(), upto.end(), '\n');
    parse_fail(source, "line " + std::to_string(line) + ": malformed JSON (" + e.what() + ")");
  }
  const Reader r(source);
  try {
    return build(r, doc);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError || e.code() == ErrorCode::ValidationError) throw;
    throw Error(ErrorCode::ValidationError, source + ": " + e.what());
  }
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, path + ": cannot read file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

}  // namespace quasidual
