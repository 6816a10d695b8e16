#pragma once

// Multi-objective linear / mixed-binary program data model and its JSON form.

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace refpoint {

using json = nlohmann::json;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class VarKind { Continuous, Binary };
enum class Sense { LessEqual, Equal, GreaterEqual };

struct VariableDef {
  std::string name;
  double lower = 0.0;
  double upper = kInfinity;
  VarKind kind = VarKind::Continuous;

  bool operator==(const VariableDef&) const = default;
};

/// Sparse affine expression keyed by variable name.
struct LinearExpr {
  std::map<std::string, double> terms;
  double constant = 0.0;

  LinearExpr& add(const std::string& var, double coef) {
    terms[var] += coef;
    return *this;
  }

  LinearExpr scaled(double factor) const {
    LinearExpr out;
    out.constant = constant * factor;
    for (const auto& [v, c] : terms) out.terms.emplace(v, c * factor);
    return out;
  }

  bool operator==(const LinearExpr&) const = default;
};

struct Constraint {
  LinearExpr expr;
  Sense sense = Sense::LessEqual;
  double rhs = 0.0;

  bool operator==(const Constraint&) const = default;
};

/// One criterion. `expr` is always stored in maximization form; a criterion
/// ingested as a minimization keeps its negated expression and `minimize`
/// set so reported values can be flipped back.
struct Objective {
  std::string name;
  LinearExpr expr;
  bool minimize = false;

  double reported(double canonical) const { return (minimize ? -canonical : canonical) + 0.0; }
  double canonical(double reported_value) const { return minimize ? -reported_value : reported_value; }

  bool operator==(const Objective&) const = default;
};

struct MoLpModel {
  std::vector<VariableDef> variables;
  std::vector<Constraint> constraints;
  std::vector<Objective> objectives;
  json meta = json::object();

  std::size_t criteria() const { return objectives.size(); }

  bool has_binaries() const {
    for (const auto& v : variables)
      if (v.kind == VarKind::Binary) return true;
    return false;
  }

  std::unordered_map<std::string, std::size_t> variable_index() const {
    std::unordered_map<std::string, std::size_t> idx;
    idx.reserve(variables.size());
    for (std::size_t i = 0; i < variables.size(); ++i) idx.emplace(variables[i].name, i);
    return idx;
  }

  void add_objective(std::string name, LinearExpr expr, bool minimize = false) {
    objectives.push_back({std::move(name), minimize ? expr.scaled(-1.0) : std::move(expr), minimize});
  }

  bool operator==(const MoLpModel&) const = default;
};

/// Evaluate an expression at an assignment aligned with `index`.
inline double evaluate(const LinearExpr& expr, const std::unordered_map<std::string, std::size_t>& index,
                       const std::vector<double>& values) {
  double acc = expr.constant;
  for (const auto& [v, c] : expr.terms) acc += c * values.at(index.at(v));
  return acc;
}

/// Canonical (maximization-form) criterion vector of an assignment.
inline std::vector<double> evaluate_criteria(const MoLpModel& model, const std::vector<double>& values) {
  const auto index = model.variable_index();
  std::vector<double> out;
  out.reserve(model.objectives.size());
  for (const auto& obj : model.objectives) out.push_back(evaluate(obj.expr, index, values));
  return out;
}

inline std::vector<double> reported_criteria(const MoLpModel& model, std::vector<double> canonical) {
  for (std::size_t j = 0; j < canonical.size() && j < model.objectives.size(); ++j)
    canonical[j] = model.objectives[j].reported(canonical[j]);
  return canonical;
}

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto head = [](char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'; };
  auto tail = [&](char c) { return head(c) || (c >= '0' && c <= '9') || c == '.' || c == '-'; };
  if (!head(s.front())) return false;
  for (char c : s.substr(1))
    if (!tail(c)) return false;
  return true;
}

namespace detail {

inline std::string fmt_num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

inline void check_expr(const LinearExpr& expr, const std::set<std::string>& declared, const std::string& where,
                       std::vector<std::string>& out) {
  for (const auto& [v, c] : expr.terms) {
    if (!declared.count(v)) out.push_back("unknown variable " + v + " in " + where);
    if (!std::isfinite(c)) out.push_back("non-finite coefficient for " + v + " in " + where);
  }
  if (!std::isfinite(expr.constant)) out.push_back("non-finite constant in " + where);
}

}  // namespace detail

/// Lists every invariant violation of `model`; empty means well-formed.
inline std::vector<std::string> validate(const MoLpModel& model) {
  std::vector<std::string> out;
  std::set<std::string> declared;
  for (std::size_t i = 0; i < model.variables.size(); ++i) {
    const auto& v = model.variables[i];
    if (!is_identifier(v.name)) out.push_back("invalid identifier '" + v.name + "' for variable " + std::to_string(i));
    if (!declared.insert(v.name).second) out.push_back("duplicate variable name " + v.name);
    if (std::isnan(v.lower) || std::isnan(v.upper)) {
      out.push_back("variable " + v.name + " has a NaN bound");
      continue;
    }
    if (v.lower == kInfinity || v.upper == -kInfinity)
      out.push_back("variable " + v.name + " has an unsatisfiable infinite bound");
    if (v.lower > v.upper)
      out.push_back("variable " + v.name + " has lower bound " + detail::fmt_num(v.lower) + " greater than upper bound " +
                    detail::fmt_num(v.upper));
    if (v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0))
      out.push_back("binary variable " + v.name + " has bounds [" + detail::fmt_num(v.lower) + "," +
                    detail::fmt_num(v.upper) + "] outside [0,1]");
  }
  for (std::size_t i = 0; i < model.constraints.size(); ++i) {
    const auto& c = model.constraints[i];
    const std::string where = "constraint " + std::to_string(i);
    detail::check_expr(c.expr, declared, where, out);
    if (!std::isfinite(c.rhs)) out.push_back("non-finite rhs in " + where);
  }
  if (model.objectives.empty()) out.push_back("model has no objectives");
  std::set<std::string> names;
  for (std::size_t j = 0; j < model.objectives.size(); ++j) {
    const auto& o = model.objectives[j];
    if (!is_identifier(o.name)) out.push_back("invalid identifier '" + o.name + "' for objective " + std::to_string(j));
    if (!names.insert(o.name).second) out.push_back("duplicate objective name " + o.name);
    detail::check_expr(o.expr, declared, "objective " + o.name, out);
  }
  return out;
}

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position) : std::runtime_error(what), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : std::runtime_error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "invalid model:";
    for (const auto& e : v) s += " " + e + ";";
    return s;
  }
  std::vector<std::string> violations_;
};

namespace detail {

inline json bound_to_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double bound_from_json(const json& j, double when_null) {
  if (j.is_null()) return when_null;
  if (!j.is_number()) throw ValidationError({"bound must be a number or null"});
  return j.get<double>();
}

inline json expr_to_json(const LinearExpr& e) {
  json terms = json::object();
  for (const auto& [v, c] : e.terms) terms[v] = c;
  return {{"terms", terms}, {"constant", e.constant}};
}

inline LinearExpr expr_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ValidationError({where + " must be an object"});
  LinearExpr e;
  if (j.contains("terms")) {
    const auto& t = j.at("terms");
    if (!t.is_object()) throw ValidationError({where + ".terms must be an object"});
    for (const auto& [k, v] : t.items()) {
      if (!v.is_number()) throw ValidationError({where + ".terms." + k + " must be a number"});
      e.terms[k] = v.get<double>();
    }
  }
  if (j.contains("constant")) {
    if (!j.at("constant").is_number()) throw ValidationError({where + ".constant must be a number"});
    e.constant = j.at("constant").get<double>();
  }
  return e;
}

inline const char* sense_text(Sense s) {
  switch (s) {
    case Sense::LessEqual: return "<=";
    case Sense::Equal: return "=";
    case Sense::GreaterEqual: return ">=";
  }
  return "?";
}

inline Sense sense_from_text(const std::string& s) {
  if (s == "<=") return Sense::LessEqual;
  if (s == "=" || s == "==") return Sense::Equal;
  if (s == ">=") return Sense::GreaterEqual;
  throw ValidationError({"unknown constraint sense '" + s + "'"});
}

// Tree-level conversion shared with the document container.
inline MoLpModel model_from_tree(const json& doc) {
  if (!doc.is_object()) throw ValidationError({"model document must be a JSON object"});
  for (const auto& [k, v] : doc.items()) {
    if (k != "variables" && k != "constraints" && k != "objectives" && k != "meta" && k != "mdp" && k != "grid")
      throw ValidationError({"unknown top-level key '" + k + "'"});
  }
  for (const char* key : {"variables", "constraints", "objectives"})
    if (!doc.contains(key) || !doc.at(key).is_array())
      throw ValidationError({std::string("missing array '") + key + "'"});

  MoLpModel m;
  for (const auto& v : doc.at("variables")) {
    if (!v.is_object() || !v.contains("name") || !v.at("name").is_string())
      throw ValidationError({"variable entries need a string 'name'"});
    VariableDef d;
    d.name = v.at("name").get<std::string>();
    d.lower = v.contains("lower") ? bound_from_json(v.at("lower"), -kInfinity) : 0.0;
    d.upper = v.contains("upper") ? bound_from_json(v.at("upper"), kInfinity) : kInfinity;
    const std::string kind = v.value("kind", std::string("continuous"));
    if (kind == "binary") {
      d.kind = VarKind::Binary;
      if (!v.contains("upper")) d.upper = 1.0;
    } else if (kind != "continuous") {
      throw ValidationError({"variable " + d.name + " has unknown kind '" + kind + "'"});
    }
    m.variables.push_back(std::move(d));
  }
  std::size_t ci = 0;
  for (const auto& c : doc.at("constraints")) {
    const std::string where = "constraint " + std::to_string(ci++);
    Constraint con;
    con.expr = expr_from_json(c, where);
    if (!c.contains("sense") || !c.at("sense").is_string()) throw ValidationError({where + " needs a string 'sense'"});
    con.sense = sense_from_text(c.at("sense").get<std::string>());
    if (!c.contains("rhs") || !c.at("rhs").is_number()) throw ValidationError({where + " needs a numeric 'rhs'"});
    con.rhs = c.at("rhs").get<double>();
    m.constraints.push_back(std::move(con));
  }
  for (const auto& o : doc.at("objectives")) {
    if (!o.is_object() || !o.contains("name") || !o.at("name").is_string())
      throw ValidationError({"objective entries need a string 'name'"});
    const std::string name = o.at("name").get<std::string>();
    const std::string sense = o.value("sense", std::string("max"));
    if (sense != "max" && sense != "min") throw ValidationError({"objective " + name + " has unknown sense '" + sense + "'"});
    m.add_objective(name, expr_from_json(o, "objective " + name), sense == "min");
  }
  if (doc.contains("meta")) m.meta = doc.at("meta");

  if (auto violations = validate(m); !violations.empty()) throw ValidationError(std::move(violations));
  return m;
}

inline json model_to_tree(const MoLpModel& model) {
  json vars = json::array();
  for (const auto& v : model.variables) {
    vars.push_back({{"name", v.name},
                    {"lower", bound_to_json(v.lower)},
                    {"upper", bound_to_json(v.upper)},
                    {"kind", v.kind == VarKind::Binary ? "binary" : "continuous"}});
  }
  json cons = json::array();
  for (const auto& c : model.constraints) {
    json e = expr_to_json(c.expr);
    e["sense"] = sense_text(c.sense);
    e["rhs"] = c.rhs;
    cons.push_back(std::move(e));
  }
  json objs = json::array();
  for (const auto& o : model.objectives) {
    json e = expr_to_json(o.minimize ? o.expr.scaled(-1.0) : o.expr);
    e["name"] = o.name;
    e["sense"] = o.minimize ? "min" : "max";
    objs.push_back(std::move(e));
  }
  return {{"variables", vars}, {"constraints", cons}, {"objectives", objs}, {"meta", model.meta}};
}

inline json parse_document(std::string_view bytes) {
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  } catch (const json::out_of_range& e) {
    // Number overflow; the message quotes the offending literal.
    const std::string what = e.what();
    std::size_t pos = 0;
    if (auto a = what.find('\''), b = what.rfind('\''); a != std::string::npos && b > a)
      if (auto at = bytes.find(what.substr(a + 1, b - a - 1)); at != std::string_view::npos) pos = at;
    throw ParseError(what, pos);
  }
}

}  // namespace detail

/// Serializes a well-formed model. Throws ValidationError otherwise.
inline std::string to_json(const MoLpModel& model, int indent = -1) {
  if (auto violations = validate(model); !violations.empty()) throw ValidationError(std::move(violations));
  return detail::model_to_tree(model).dump(indent);
}

/// Parses a model document. Throws ParseError (with byte position) on
/// malformed JSON and ValidationError on well-formed JSON that breaks an
/// invariant.
inline MoLpModel from_json(std::string_view bytes) { return detail::model_from_tree(detail::parse_document(bytes)); }

}  // namespace refpoint
