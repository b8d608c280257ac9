#pragma once

// JSON system-spec documents:
//
//   {
//     "name": "my-system",
//     "eta": "1/(x1*x2)",                                 // x1, x2, x3
//     "axes": [ {"phi": "1", "psi": "u", "zeta": "u"},   // u only; zeta optional
//               {"phi": "2*u", "psi": "u^2"},
//               {"phi": "exp(u)", "psi": "exp(u)", "zeta": "ln(u)"} ],
//     "kappa": [k12, k23],                               // k31 is derived
//     "domain": {"box": [[lo, hi], [lo, hi], [lo, hi]], "predicate": "x1 - x2"},
//     "hamiltonian": "x1 + x2 + x3"                      // optional
//   }
//
// A document may instead carry "matrix": {"j12": ..., "j23": ..., "j31": ...}
// (expressions in x1..x3) together with "domain"; such raw fields can only be
// verified, not reduced.

#include <poisson3d/domain.hpp>
#include <poisson3d/error.hpp>
#include <poisson3d/expr.hpp>
#include <poisson3d/family.hpp>
#include <poisson3d/scalar_fields.hpp>

#include <json.hpp>

#include <array>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

namespace poisson3d {

struct SystemDefinition {
  std::string name;
  std::optional<PoissonFamilySpec> family;
  std::optional<std::array<Expr, 3>> raw_matrix;
  DomainBox domain;
  std::optional<Expr> hamiltonian;
};

namespace detail {
inline const nlohmann::json& require_key(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw Error(ErrorKind::invalid_spec, "missing key '" + std::string(key) + "' in " + where);
  return j.at(key);
}

inline std::string require_string(const nlohmann::json& j, const char* key, const std::string& where) {
  const auto& v = require_key(j, key, where);
  if (!v.is_string()) throw Error(ErrorKind::invalid_spec, "'" + std::string(key) + "' in " + where + " must be a string");
  return v.get<std::string>();
}

inline double require_number(const nlohmann::json& v, const std::string& what) {
  if (!v.is_number()) throw Error(ErrorKind::invalid_spec, what + " must be a number");
  return v.get<double>();
}

inline DomainBox parse_domain(const nlohmann::json& j) {
  const auto& box = require_key(j, "box", "domain");
  if (!box.is_array() || box.size() != 3) throw Error(ErrorKind::invalid_spec, "domain.box must hold three intervals");
  std::array<Interval, 3> iv{};
  for (std::size_t a = 0; a < 3; ++a) {
    if (!box[a].is_array() || box[a].size() != 2)
      throw Error(ErrorKind::invalid_spec, "domain.box entries must be [lo, hi] pairs");
    iv[a] = {require_number(box[a][0], "domain.box bound"), require_number(box[a][1], "domain.box bound")};
  }
  std::optional<Expr> predicate;
  if (j.contains("predicate"))
    predicate = parse_restricted(require_string(j, "predicate", "domain"), kSpatialVars, "domain.predicate");
  return DomainBox(iv, std::move(predicate));
}
}  // namespace detail

inline SystemDefinition parse_system_spec(const nlohmann::json& doc) {
  using detail::require_key;
  using detail::require_string;
  if (!doc.is_object()) throw Error(ErrorKind::invalid_spec, "system spec must be a JSON object");
  SystemDefinition def;
  def.name = doc.contains("name") ? require_string(doc, "name", "spec") : std::string("custom");
  def.domain = detail::parse_domain(require_key(doc, "domain", "spec"));
  if (doc.contains("hamiltonian"))
    def.hamiltonian = parse_restricted(require_string(doc, "hamiltonian", "spec"), kSpatialVars, "hamiltonian");

  if (doc.contains("matrix")) {
    const auto& m = doc.at("matrix");
    def.raw_matrix = std::array<Expr, 3>{parse_restricted(require_string(m, "j12", "matrix"), kSpatialVars, "matrix.j12"),
                                         parse_restricted(require_string(m, "j23", "matrix"), kSpatialVars, "matrix.j23"),
                                         parse_restricted(require_string(m, "j31", "matrix"), kSpatialVars, "matrix.j31")};
    return def;
  }

  Expr eta = parse_restricted(require_string(doc, "eta", "spec"), kSpatialVars, "eta");
  const auto& axes = require_key(doc, "axes", "spec");
  if (!axes.is_array() || axes.size() != 3) throw Error(ErrorKind::invalid_spec, "'axes' must hold three objects");
  auto field = [&](std::size_t a) {
    std::string where = "axes[" + std::to_string(a) + "]";
    Expr phi = parse_restricted(require_string(axes[a], "phi", where), kAxisVars, where + ".phi");
    Expr psi = parse_restricted(require_string(axes[a], "psi", where), kAxisVars, where + ".psi");
    std::optional<Expr> zeta;
    if (axes[a].contains("zeta"))
      zeta = parse_restricted(require_string(axes[a], "zeta", where), kAxisVars, where + ".zeta");
    return build_scalar_field(phi, psi, zeta, def.domain.box()[a]);
  };
  const auto& kappa = require_key(doc, "kappa", "spec");
  if (!kappa.is_array() || kappa.size() != 2)
    throw Error(ErrorKind::invalid_spec, "'kappa' must be [k12, k23]; k31 is derived");
  KappaMatrix k = make_kappa(detail::require_number(kappa[0], "kappa[0]"), detail::require_number(kappa[1], "kappa[1]"));
  def.family = PoissonFamilySpec::create(def.name, eta, {field(0), field(1), field(2)}, k, def.domain);
  return def;
}

inline SystemDefinition load_system_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::invalid_spec, "cannot open spec file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_spec, "malformed JSON in " + path + ": " + e.what());
  }
  return parse_system_spec(doc);
}

}  // namespace poisson3d
