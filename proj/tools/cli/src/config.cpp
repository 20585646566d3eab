#include "wbt_cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace wbt::cli {

namespace {

using nlohmann::json;

std::string join(const std::string& field, const std::string& key) { return field.empty() ? key : field + "." + key; }

const json& require(const json& parent, const std::string& key, const std::string& field) {
  if (!parent.is_object() || !parent.contains(key)) throw ConfigError(join(field, key), "missing required field");
  return parent.at(key);
}

bool is_parameter(const json& j) {
  if (!j.is_object() || !j.contains("coef")) return false;
  for (const auto& [k, v] : j.items())
    if (k != "base" && k != "coef" && k != "power") return false;
  return true;
}

std::size_t count_value(const json& j, const std::string& field) {
  if (j.is_number_unsigned()) return j.get<std::size_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::size_t>(j.get<std::int64_t>());
  if (j.is_number_float()) {
    const double x = j.get<double>();
    if (x >= 0.0 && x == std::floor(x) && x < 1e18) return static_cast<std::size_t>(x);
  }
  throw ConfigError(field, "expected a nonnegative integer");
}

double number_value(const json& j, const std::string& field) {
  if (!j.is_number()) throw ConfigError(field, "expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) throw ConfigError(field, "expected a finite number");
  return x;
}

template <class F>
auto wrap(const std::string& field, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const MissingMoments&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(field, e.what());
  }
}

Moments parse_moments(const json& j, TreeMode mode, const std::string& field) {
  Moments m;
  m.rho = number_value(require(j, "rho", field), join(field, "rho"));
  m.mean_abs_q = number_value(require(j, "mean_abs_q", field), join(field, "mean_abs_q"));
  m.mean_offspring = number_value(require(j, "mean_offspring", field), join(field, "mean_offspring"));
  if (mode == TreeMode::wbt)
    m.mean_abs_cq = number_value(require(j, "mean_abs_cq", field), join(field, "mean_abs_cq"));
  else
    m.mean_abs_cq = std::numeric_limits<double>::quiet_NaN();
  return m;
}

BranchingSampler parse_custom(const json& j, TreeMode mode, const std::string& field) {
  if (mode != TreeMode::wbt) throw ConfigError(join(field, "mode"), "custom rules are defined for wbt samplers only");
  const std::string rule = require(j, "rule", field).get<std::string>();
  const Distribution mark = parse_distribution(require(j, "mark", field), join(field, "mark"));
  const Distribution offspring = parse_distribution(require(j, "offspring", field), join(field, "offspring"));
  const double coef = number_in(j, "coef", 1.0, field);
  if (!offspring.integer_valued() || !offspring.nonnegative())
    throw ConfigError(join(field, "offspring"), "offspring law must live on {0, 1, 2, ...}");
  DrawFunction draw;
  bool nonneg = coef >= 0.0;
  if (rule == "weight_times_mark") {
    nonneg = nonneg && mark.nonnegative();
    draw = [mark, offspring, coef](const NodeUniforms& u, BranchingDraw& d) {
      d.mark = mark.quantile(u.at(kMarkSlot));
      d.offspring = static_cast<std::size_t>(offspring.quantile(u.at(kOffspringSlot)));
      d.weights.assign(1, coef * d.mark);
    };
  } else if (rule == "weight_over_offspring") {
    draw = [mark, offspring, coef](const NodeUniforms& u, BranchingDraw& d) {
      d.mark = mark.quantile(u.at(kMarkSlot));
      d.offspring = static_cast<std::size_t>(offspring.quantile(u.at(kOffspringSlot)));
      d.weights.assign(1, coef / static_cast<double>(std::max<std::size_t>(1, d.offspring)));
    };
  } else {
    throw ConfigError(join(field, "rule"), "unknown rule '" + rule + "' (weight_times_mark | weight_over_offspring)");
  }
  std::optional<Moments> declared;
  if (j.contains("moments")) declared = parse_moments(j.at("moments"), mode, join(field, "moments"));
  return BranchingSampler::custom(mode, std::move(draw), declared, nonneg);
}

std::vector<JointVector::Atom> parse_atoms(const json& j, TreeMode mode, const std::string& field) {
  if (!j.is_array() || j.empty()) throw ConfigError(field, "expected a nonempty array of atoms");
  std::vector<JointVector::Atom> atoms;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string f = field + "[" + std::to_string(i) + "]";
    JointVector::Atom a;
    a.mark = number_value(require(j[i], "mark", f), join(f, "mark"));
    const auto& w = require(j[i], "weights", f);
    if (!w.is_array()) throw ConfigError(join(f, "weights"), "expected an array");
    for (std::size_t k = 0; k < w.size(); ++k) a.weights.push_back(number_value(w[k], join(f, "weights")));
    a.offspring = mode == TreeMode::wbp ? a.weights.size() : count_value(require(j[i], "offspring", f), join(f, "offspring"));
    atoms.push_back(std::move(a));
  }
  return atoms;
}

std::vector<double> parse_numbers(const json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError(field, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : j) out.push_back(number_value(x, field));
  return out;
}

std::vector<RootSampler::Atom> parse_root_atoms(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw ConfigError(field, "expected a nonempty array of atoms");
  std::vector<RootSampler::Atom> atoms;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string f = field + "[" + std::to_string(i) + "]";
    atoms.push_back({number_value(require(j[i], "mark", f), join(f, "mark")),
                     count_value(require(j[i], "offspring", f), join(f, "offspring"))});
  }
  return atoms;
}

}  // namespace

ConfigError::ConfigError(std::string field, const std::string& message)
    : std::runtime_error(field.empty() ? message : "config field '" + field + "': " + message), field_(std::move(field)) {}

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::simulate: return "simulate";
    case ExperimentKind::certify: return "certify";
    case ExperimentKind::converge: return "converge";
    case ExperimentKind::graph: return "graph";
    case ExperimentKind::sizebias: return "sizebias";
    case ExperimentKind::rank: return "rank";
  }
  return "unknown";
}

Config parse_config(const json& doc, std::filesystem::path base_dir) {
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
  Config c;
  c.doc = doc;
  c.base_dir = std::move(base_dir);
  const std::string kind = require(doc, "experiment", "").get<std::string>();
  const std::vector<std::pair<std::string, ExperimentKind>> kinds = {
      {"simulate", ExperimentKind::simulate}, {"certify", ExperimentKind::certify}, {"converge", ExperimentKind::converge},
      {"graph", ExperimentKind::graph},       {"sizebias", ExperimentKind::sizebias}, {"rank", ExperimentKind::rank}};
  const auto it = std::find_if(kinds.begin(), kinds.end(), [&](const auto& p) { return p.first == kind; });
  if (it == kinds.end())
    throw ConfigError("experiment", "unknown kind '" + kind + "' (simulate | certify | converge | graph | sizebias | rank)");
  c.kind = it->second;
  c.id = doc.value("id", kind);
  if (c.id.empty() || c.id.find_first_of(",\n\r") != std::string::npos)
    throw ConfigError("id", "must be nonempty and free of commas and line breaks");
  if (doc.contains("seed")) c.seed = count_value(doc.at("seed"), "seed");
  if (doc.contains("threads")) {
    const auto t = count_value(doc.at("threads"), "threads");
    if (t == 0) throw ConfigError("threads", "must be positive");
    c.threads = static_cast<unsigned>(t);
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

json instantiate(const json& spec, std::optional<std::size_t> n) {
  if (is_parameter(spec)) {
    const double base = spec.value("base", 0.0);
    if (!n) return base;
    const double coef = spec.at("coef").get<double>();
    const double power = spec.value("power", 1.0);
    return base + coef * std::pow(static_cast<double>(*n), -power);
  }
  if (spec.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : spec.items()) out[k] = instantiate(v, n);
    return out;
  }
  if (spec.is_array()) {
    json out = json::array();
    for (const auto& v : spec) out.push_back(instantiate(v, n));
    return out;
  }
  return spec;
}

Distribution parse_distribution(const json& j, const std::string& field) {
  return wrap(field, [&] { return j.get<Distribution>(); });
}

BranchingSampler parse_sampler(const json& j, const std::string& field) {
  if (!j.is_object()) throw ConfigError(field, "expected a sampler object");
  const TreeMode mode =
      wrap(join(field, "mode"), [&] { return tree_mode_from_string(require(j, "mode", field).get<std::string>()); });
  const std::string type = j.value("type", "independent");
  if (type == "custom") return parse_custom(j, mode, field);
  BranchingSampler s = wrap(field, [&]() -> BranchingSampler {
    if (type == "independent") {
      std::map<std::size_t, Distribution> given;
      if (j.contains("weight_given_offspring")) {
        for (const auto& [k, v] : j.at("weight_given_offspring").items()) {
          const std::string f = join(join(field, "weight_given_offspring"), k);
          std::size_t count = 0;
          try {
            count = std::stoul(k);
          } catch (const std::exception&) {
            throw ConfigError(f, "keys must be offspring counts");
          }
          given.emplace(count, parse_distribution(v, f));
        }
      }
      return BranchingSampler::independent(mode, parse_distribution(require(j, "mark", field), join(field, "mark")),
                                           parse_distribution(require(j, "offspring", field), join(field, "offspring")),
                                           parse_distribution(require(j, "weight", field), join(field, "weight")),
                                           std::move(given));
    }
    if (type == "deterministic") {
      const double mark = number_in(j, "mark", 1.0, field);
      if (mode == TreeMode::wbp)
        return BranchingSampler::deterministic_wbp(mark, parse_numbers(require(j, "weights", field), join(field, "weights")));
      return BranchingSampler::deterministic_wbt(mark, count_value(require(j, "offspring", field), join(field, "offspring")),
                                                 number_value(require(j, "weight", field), join(field, "weight")));
    }
    if (type == "joint")
      return BranchingSampler::joint(mode, parse_atoms(require(j, "atoms", field), mode, join(field, "atoms")),
                                     parse_numbers(require(j, "probs", field), join(field, "probs")));
    throw ConfigError(join(field, "type"), "unknown sampler type '" + type + "' (independent | deterministic | joint | custom)");
  });
  if (j.contains("moments")) s = s.with_declared_moments(parse_moments(j.at("moments"), mode, join(field, "moments")));
  return s;
}

std::optional<RootSampler> parse_root(const json& parent, const std::string& key, const std::string& field) {
  if (!parent.contains(key) || parent.at(key).is_null()) return std::nullopt;
  const json& j = parent.at(key);
  const std::string f = join(field, key);
  if (!j.is_object()) throw ConfigError(f, "expected a root sampler object");
  return wrap(f, [&] {
    if (j.contains("atoms"))
      return RootSampler::joint(parse_root_atoms(j.at("atoms"), join(f, "atoms")),
                                parse_numbers(require(j, "probs", f), join(f, "probs")));
    return RootSampler::independent(parse_distribution(require(j, "mark", f), join(f, "mark")),
                                    parse_distribution(require(j, "offspring", f), join(f, "offspring")));
  });
}

CoupledSampler parse_coupling(const json& j, const std::string& field) {
  if (!j.is_object()) throw ConfigError(field, "expected a coupling object");
  const auto kind = wrap(join(field, "kind"), [&] { return coupling_kind_from_string(j.value("kind", "quantile")); });
  if (kind == CouplingKind::table) {
    const TreeMode mode = wrap(join(field, "mode"), [&] { return tree_mode_from_string(require(j, "mode", field).get<std::string>()); });
    const json& t = require(j, "table", field);
    const std::string tf = join(field, "table");
    CouplingTable table{parse_atoms(require(t, "base", tf), mode, join(tf, "base")),
                        parse_atoms(require(t, "alternative", tf), mode, join(tf, "alternative")),
                        parse_numbers(require(t, "probs", tf), join(tf, "probs"))};
    std::optional<RootCouplingTable> roots;
    if (j.contains("root_table")) {
      const json& r = j.at("root_table");
      const std::string rf = join(field, "root_table");
      roots = RootCouplingTable{parse_root_atoms(require(r, "base", rf), join(rf, "base")),
                                parse_root_atoms(require(r, "alternative", rf), join(rf, "alternative")),
                                parse_numbers(require(r, "probs", rf), join(rf, "probs"))};
    }
    return wrap(field, [&] { return CoupledSampler::table(mode, table, roots); });
  }
  const BranchingSampler base = parse_sampler(require(j, "base", field), join(field, "base"));
  auto base_root = parse_root(j, "base_root", field);
  if (kind == CouplingKind::identity) return wrap(field, [&] { return CoupledSampler::identity(base, base_root); });
  const BranchingSampler alt = parse_sampler(require(j, "alternative", field), join(field, "alternative"));
  auto alt_root = parse_root(j, "alternative_root", field);
  return wrap(field, [&] {
    return kind == CouplingKind::independent ? CoupledSampler::independent(base, alt, base_root, alt_root)
                                             : CoupledSampler::quantile(base, alt, base_root, alt_root);
  });
}

SamplerSequence parse_family(const json& j, const std::string& field) {
  if (!j.is_object()) throw ConfigError(field, "expected a family object");
  const json sampler = require(j, "sampler", field);
  const json root = j.contains("root") ? j.at("root") : json();
  auto element_at = [sampler, root, field](std::optional<std::size_t> n) {
    const json wrapper = {{"root", root.is_null() ? json() : instantiate(root, n)}};
    SequenceElement e{parse_sampler(instantiate(sampler, n), join(field, "sampler")),
                      parse_root(wrapper, "root", field)};
    return e;
  };
  SequenceElement limit = element_at(std::nullopt);
  // Parse one finite element now so errors surface at load time.
  element_at(1);
  SamplerSequence seq{[element_at](std::size_t n) { return element_at(n); }, std::move(limit), {}, {}};
  auto distance = [&](const char* key) -> std::function<double(std::size_t)> {
    if (!j.contains(key)) return {};
    const json expr = j.at(key);
    if (!is_parameter(expr) && !expr.is_number()) throw ConfigError(join(field, key), "expected {\"base\", \"coef\", \"power\"} or a number");
    return [expr](std::size_t n) { return instantiate(expr, n).get<double>(); };
  };
  seq.node_distance = distance("node_distance");
  seq.root_distance = distance("root_distance");
  if (seq.root_distance && !seq.node_distance)
    throw ConfigError(join(field, "root_distance"), "declare node_distance as well");
  return seq;
}

Schedule parse_schedule(const json& j, const std::string& field) {
  if (j.is_number()) return Schedule::constant(count_value(j, field));
  if (!j.is_object()) throw ConfigError(field, "expected a schedule object or an integer level");
  const std::string kind = require(j, "kind", field).get<std::string>();
  const double a = number_in(j, "a", 1.0, field);
  const auto b = j.contains("b") ? count_value(j.at("b"), join(field, "b")) : std::size_t{0};
  if (kind == "constant") return Schedule::constant(b);
  if (kind == "logarithmic") return Schedule::logarithmic(a, b);
  if (kind == "loglog") return Schedule::loglog(a, j.contains("b") ? b : 1);
  if (kind == "linear") return Schedule::linear(a, b);
  if (kind == "power") return Schedule::power(a, number_value(require(j, "p", field), join(field, "p")), b);
  throw ConfigError(join(field, "kind"), "unknown schedule '" + kind + "' (constant | logarithmic | loglog | linear | power)");
}

std::vector<std::size_t> parse_grid(const json& parent, const std::string& key, const std::string& field) {
  const json& g = require(parent, key, field);
  const std::string f = join(field, key);
  if (!g.is_array() || g.empty()) throw ConfigError(f, "expected a nonempty array of sizes");
  std::vector<std::size_t> out;
  for (const auto& x : g) {
    const auto v = count_value(x, f);
    if (v == 0) throw ConfigError(f, "sizes must be positive");
    out.push_back(v);
  }
  if (!std::is_sorted(out.begin(), out.end()) || std::adjacent_find(out.begin(), out.end()) != out.end())
    throw ConfigError(f, "sizes must be strictly increasing");
  return out;
}

std::size_t positive_count(const json& parent, const std::string& key, std::size_t fallback, const std::string& field) {
  if (!parent.contains(key)) return fallback;
  const auto v = count_value(parent.at(key), join(field, key));
  if (v == 0) throw ConfigError(join(field, key), "must be positive");
  return v;
}

double number_in(const json& parent, const std::string& key, double fallback, const std::string& field) {
  if (!parent.contains(key)) return fallback;
  return number_value(parent.at(key), join(field, key));
}

DegreeInput parse_degree_input(const json& doc, const std::filesystem::path& base_dir, StreamKey key) {
  auto resolve = [&](const std::string& p) { return std::filesystem::path(p).is_absolute() ? std::filesystem::path(p) : base_dir / p; };
  if (doc.contains("degrees")) {
    DegreeSequence ds;
    const auto& d = doc.at("degrees");
    if (!d.is_array()) throw ConfigError("degrees", "expected an array of integers");
    for (const auto& x : d) ds.degrees.push_back(count_value(x, "degrees"));
    return ds;
  }
  if (doc.contains("degrees_file") || doc.contains("bidegrees_file")) {
    const bool bi = doc.contains("bidegrees_file");
    const std::string f = bi ? "bidegrees_file" : "degrees_file";
    std::ifstream in(resolve(doc.at(f).get<std::string>()));
    if (!in) throw ConfigError(f, "cannot read " + doc.at(f).get<std::string>());
    DegreeInput d = wrap(f, [&] { return read_degrees(in); });
    if (bi != std::holds_alternative<BiDegreeSequence>(d))
      throw ConfigError(f, bi ? "expected in,out pairs" : "expected one degree per line");
    return d;
  }
  if (doc.contains("bidegrees")) {
    BiDegreeSequence ds;
    const auto& d = doc.at("bidegrees");
    if (!d.is_array()) throw ConfigError("bidegrees", "expected an array of [in, out] pairs");
    for (const auto& p : d) {
      if (!p.is_array() || p.size() != 2) throw ConfigError("bidegrees", "expected [in, out] pairs");
      ds.in.push_back(count_value(p[0], "bidegrees"));
      ds.out.push_back(count_value(p[1], "bidegrees"));
    }
    return ds;
  }
  if (doc.contains("regular")) {
    const auto& r = doc.at("regular");
    const auto n = positive_count(r, "n", 0, "regular");
    if (n == 0) throw ConfigError("regular.n", "missing required field");
    const auto d = count_value(require(r, "d", "regular"), "regular.d");
    return BiDegreeSequence{std::vector<std::size_t>(n, d), std::vector<std::size_t>(n, d)};
  }
  if (doc.contains("in_law") || doc.contains("out_law")) {
    const auto n = positive_count(doc, "n", 0, "");
    if (n == 0) throw ConfigError("n", "missing required field");
    const Distribution in = parse_distribution(require(doc, "in_law", ""), "in_law");
    const Distribution out = parse_distribution(require(doc, "out_law", ""), "out_law");
    return wrap("in_law", [&] { return sample_bidegrees(in, out, n, key); });
  }
  if (doc.contains("degree_law")) {
    const auto n = positive_count(doc, "n", 0, "");
    if (n == 0) throw ConfigError("n", "missing required field");
    const Distribution f = parse_distribution(doc.at("degree_law"), "degree_law");
    return wrap("degree_law", [&] { return sample_degrees(f, n, key); });
  }
  throw ConfigError("degrees", "give one of degrees, degrees_file, degree_law + n, bidegrees, bidegrees_file, regular, "
                               "in_law + out_law + n");
}

}  // namespace wbt::cli
