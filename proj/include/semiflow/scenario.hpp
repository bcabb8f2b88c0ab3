#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "semiflow/errors.hpp"

namespace semiflow {

using ordered_json = nlohmann::ordered_json;

enum class ScenarioKind { analyze1d, analyze_general1d, flow, escape3_6, weak_residual, matrix_lab };

inline const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::analyze1d: return "Analyze1D";
    case ScenarioKind::analyze_general1d: return "AnalyzeGeneral1D";
    case ScenarioKind::flow: return "Flow";
    case ScenarioKind::escape3_6: return "Escape3_6";
    case ScenarioKind::weak_residual: return "WeakResidual";
    case ScenarioKind::matrix_lab: return "MatrixLab";
  }
  return "?";
}

/// One fully validated scenario. Fields are populated according to `kind`;
/// untouched fields keep their defaults and are never read by the runner.
struct Scenario {
  std::string name;
  ScenarioKind kind = ScenarioKind::analyze1d;
  std::uint64_t seed = 0;
  std::optional<std::string> out_dir;

  int dim = 1;
  std::vector<std::string> b;  // drift components, one expression per coordinate

  // analyze kinds
  double lambda = 1.0;
  std::optional<std::string> exact_antiderivative;
  double c0 = 0.0, cN = 0.0;
  double residual_tol = 1e-5;
  double glue_tol = 1e-6;

  // flow
  std::vector<double> x0;
  double t_final = 0.0;
  double rtol = 1e-9;
  double atol = 1e-12;

  // escape certificate
  std::string beta;
  double inner_radius = 1.0;
  std::vector<double> test_radii;
  double t_max = 0.0;
  int n_directions = 32;
  double tol_cert = 1e-6;

  // weak residual
  std::string density;
  std::vector<double> box_lo, box_hi;
  long n_particles = 0;
  double t = 0.0;
  int n_time = 0;
  std::vector<double> f_center;
  double f_radius = 0.0;
  double jitter = 0.0;
  std::vector<double> audit_times;

  // matrix lab
  bool lab_explicit = false;
  int n = 0, k = 0;
  double target_phi_ru = 0.3;
  std::vector<std::vector<double>> L, D_basis;  // row-major nested arrays
  std::vector<double> phi, u;
  double lambda0 = 0.0;
  std::vector<double> t_grid{0.25, 0.5, 1.0, 2.0};
  std::optional<double> probe_lambda;
  double similarity_tol = 1e-12;
  double agreement_tol = 1e-14;

  ordered_json raw;  // the document as read, echoed into reports
};

namespace schema {

inline std::string type_name(const ordered_json& j) {
  switch (j.type()) {
    case nlohmann::detail::value_t::null: return "null";
    case nlohmann::detail::value_t::object: return "object";
    case nlohmann::detail::value_t::array: return "array";
    case nlohmann::detail::value_t::string: return "string";
    case nlohmann::detail::value_t::boolean: return "boolean";
    case nlohmann::detail::value_t::number_integer:
    case nlohmann::detail::value_t::number_unsigned:
    case nlohmann::detail::value_t::number_float: return "number";
    default: return "binary";
  }
}

inline const ordered_json& require_key(const ordered_json& o, const std::string& key) {
  auto it = o.find(key);
  if (it == o.end()) throw SchemaError("/" + key, "missing required key");
  return *it;
}

inline std::string get_string(const ordered_json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path, "expected string, got " + type_name(j));
  return j.get<std::string>();
}

inline double get_number(const ordered_json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected number, got " + type_name(j));
  return j.get<double>();
}

inline long get_integer(const ordered_json& j, const std::string& path) {
  if (!j.is_number_integer() && !j.is_number_unsigned())
    throw SchemaError(path, "expected integer, got " + type_name(j));
  return j.get<long>();
}

inline std::uint64_t get_u64(const ordered_json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<long long>() >= 0) return j.get<std::uint64_t>();
  throw SchemaError(path, "expected nonnegative integer, got " +
                              (j.is_number() ? j.dump() : type_name(j)));
}

inline std::vector<double> get_number_array(const ordered_json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected array of numbers, got " + type_name(j));
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw SchemaError(path + "/" + std::to_string(i), "expected number, got " + type_name(j[i]));
    out.push_back(j[i].get<double>());
  }
  return out;
}

inline std::vector<std::string> get_string_array(const ordered_json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected array of strings, got " + type_name(j));
  std::vector<std::string> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string())
      throw SchemaError(path + "/" + std::to_string(i), "expected string, got " + type_name(j[i]));
    out.push_back(j[i].get<std::string>());
  }
  return out;
}

inline std::vector<std::vector<double>> get_matrix(const ordered_json& j, const std::string& path) {
  if (!j.is_array() || j.empty())
    throw SchemaError(path, "expected nonempty array of number rows");
  std::vector<std::vector<double>> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(get_number_array(j[i], path + "/" + std::to_string(i)));
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].size() != out[0].size())
      throw SchemaError(path + "/" + std::to_string(i), "ragged matrix: row length differs from row 0");
  return out;
}

inline void check_positive(double v, const std::string& path) {
  if (!(v > 0.0)) throw SchemaError(path, "expected a positive number");
}

inline void reject_unknown_keys(const ordered_json& o, const std::set<std::string>& allowed) {
  for (const auto& item : o.items())
    if (!allowed.contains(item.key())) throw SchemaError("/" + item.key(), "unknown key");
}

}  // namespace schema

inline ScenarioKind kind_from_string(const std::string& s) {
  if (s == "Analyze1D") return ScenarioKind::analyze1d;
  if (s == "AnalyzeGeneral1D") return ScenarioKind::analyze_general1d;
  if (s == "Flow") return ScenarioKind::flow;
  if (s == "Escape3_6") return ScenarioKind::escape3_6;
  if (s == "WeakResidual") return ScenarioKind::weak_residual;
  if (s == "MatrixLab") return ScenarioKind::matrix_lab;
  throw SchemaError("/kind", "unknown kind \"" + s +
                                 "\"; expected one of Analyze1D, AnalyzeGeneral1D, Flow, "
                                 "Escape3_6, WeakResidual, MatrixLab");
}

/// Validates `doc` against the strict scenario schema and extracts a
/// Scenario. Unknown keys, missing required keys, and type mismatches all
/// throw SchemaError with a JSON pointer to the offending element.
inline Scenario scenario_from_json(const ordered_json& doc) {
  using namespace schema;
  if (!doc.is_object()) throw SchemaError("", "scenario must be a JSON object");

  Scenario sc;
  sc.raw = doc;
  sc.name = get_string(require_key(doc, "name"), "/name");
  if (sc.name.empty()) throw SchemaError("/name", "name must not be empty");
  sc.kind = kind_from_string(get_string(require_key(doc, "kind"), "/kind"));
  if (doc.contains("seed")) sc.seed = get_u64(doc["seed"], "/seed");
  if (doc.contains("out_dir")) sc.out_dir = get_string(doc["out_dir"], "/out_dir");

  std::set<std::string> allowed{"name", "kind", "seed", "out_dir"};

  switch (sc.kind) {
    case ScenarioKind::analyze1d:
    case ScenarioKind::analyze_general1d: {
      allowed.insert({"b", "lambda", "exact_antiderivative", "residual_tol"});
      sc.dim = 1;
      sc.b = {get_string(require_key(doc, "b"), "/b")};
      if (doc.contains("lambda")) {
        sc.lambda = get_number(doc["lambda"], "/lambda");
        check_positive(sc.lambda, "/lambda");
      }
      if (doc.contains("exact_antiderivative"))
        sc.exact_antiderivative = get_string(doc["exact_antiderivative"], "/exact_antiderivative");
      if (doc.contains("residual_tol")) {
        sc.residual_tol = get_number(doc["residual_tol"], "/residual_tol");
        check_positive(sc.residual_tol, "/residual_tol");
      }
      if (sc.kind == ScenarioKind::analyze_general1d) {
        allowed.insert({"c0", "cN", "glue_tol"});
        sc.c0 = get_number(require_key(doc, "c0"), "/c0");
        sc.cN = get_number(require_key(doc, "cN"), "/cN");
        if (!(sc.c0 < sc.cN)) throw SchemaError("/cN", "need c0 < cN");
        if (doc.contains("glue_tol")) {
          sc.glue_tol = get_number(doc["glue_tol"], "/glue_tol");
          check_positive(sc.glue_tol, "/glue_tol");
        }
      }
      break;
    }

    case ScenarioKind::flow: {
      allowed.insert({"b", "x0", "t_final", "rtol", "atol"});
      sc.b = get_string_array(require_key(doc, "b"), "/b");
      if (sc.b.empty()) throw SchemaError("/b", "need at least one drift component");
      sc.dim = static_cast<int>(sc.b.size());
      sc.x0 = get_number_array(require_key(doc, "x0"), "/x0");
      if (sc.x0.size() != sc.b.size())
        throw SchemaError("/x0", "length must match the number of drift components");
      sc.t_final = get_number(require_key(doc, "t_final"), "/t_final");
      if (!(sc.t_final >= 0.0)) throw SchemaError("/t_final", "expected a nonnegative number");
      if (doc.contains("rtol")) {
        sc.rtol = get_number(doc["rtol"], "/rtol");
        check_positive(sc.rtol, "/rtol");
      }
      if (doc.contains("atol")) {
        sc.atol = get_number(doc["atol"], "/atol");
        check_positive(sc.atol, "/atol");
      }
      break;
    }

    case ScenarioKind::escape3_6: {
      allowed.insert({"b", "beta", "inner_radius", "test_radii", "t_max", "n_directions", "tol_cert"});
      sc.b = get_string_array(require_key(doc, "b"), "/b");
      if (sc.b.empty()) throw SchemaError("/b", "need at least one drift component");
      sc.dim = static_cast<int>(sc.b.size());
      sc.beta = get_string(require_key(doc, "beta"), "/beta");
      sc.inner_radius = get_number(require_key(doc, "inner_radius"), "/inner_radius");
      check_positive(sc.inner_radius, "/inner_radius");
      sc.test_radii = get_number_array(require_key(doc, "test_radii"), "/test_radii");
      if (sc.test_radii.empty()) throw SchemaError("/test_radii", "need at least one radius");
      for (std::size_t i = 0; i < sc.test_radii.size(); ++i)
        if (!(sc.test_radii[i] > sc.inner_radius))
          throw SchemaError("/test_radii/" + std::to_string(i),
                            "test radius must exceed inner_radius");
      sc.t_max = get_number(require_key(doc, "t_max"), "/t_max");
      check_positive(sc.t_max, "/t_max");
      if (doc.contains("n_directions")) {
        sc.n_directions = static_cast<int>(get_integer(doc["n_directions"], "/n_directions"));
        if (sc.n_directions < 1) throw SchemaError("/n_directions", "need at least one direction");
      }
      if (doc.contains("tol_cert")) {
        sc.tol_cert = get_number(doc["tol_cert"], "/tol_cert");
        check_positive(sc.tol_cert, "/tol_cert");
      }
      break;
    }

    case ScenarioKind::weak_residual: {
      allowed.insert({"b", "density", "box_lo", "box_hi", "n_particles", "t", "n_time", "f_center",
                      "f_radius", "jitter", "audit_times", "residual_tol"});
      sc.b = get_string_array(require_key(doc, "b"), "/b");
      if (sc.b.empty()) throw SchemaError("/b", "need at least one drift component");
      sc.dim = static_cast<int>(sc.b.size());
      sc.density = get_string(require_key(doc, "density"), "/density");
      sc.box_lo = get_number_array(require_key(doc, "box_lo"), "/box_lo");
      sc.box_hi = get_number_array(require_key(doc, "box_hi"), "/box_hi");
      if (sc.box_lo.size() != sc.b.size())
        throw SchemaError("/box_lo", "length must match the number of drift components");
      if (sc.box_hi.size() != sc.b.size())
        throw SchemaError("/box_hi", "length must match the number of drift components");
      for (std::size_t i = 0; i < sc.box_lo.size(); ++i)
        if (!(sc.box_lo[i] < sc.box_hi[i]))
          throw SchemaError("/box_hi/" + std::to_string(i), "box must have positive extent");
      sc.n_particles = get_integer(require_key(doc, "n_particles"), "/n_particles");
      if (sc.n_particles < 1) throw SchemaError("/n_particles", "need at least one particle");
      sc.t = get_number(require_key(doc, "t"), "/t");
      check_positive(sc.t, "/t");
      sc.n_time = static_cast<int>(get_integer(require_key(doc, "n_time"), "/n_time"));
      if (sc.n_time < 2 || sc.n_time % 2 != 0)
        throw SchemaError("/n_time", "need an even number of time intervals, at least 2");
      sc.f_center = get_number_array(require_key(doc, "f_center"), "/f_center");
      if (sc.f_center.size() != sc.b.size())
        throw SchemaError("/f_center", "length must match the number of drift components");
      sc.f_radius = get_number(require_key(doc, "f_radius"), "/f_radius");
      check_positive(sc.f_radius, "/f_radius");
      if (doc.contains("jitter")) {
        sc.jitter = get_number(doc["jitter"], "/jitter");
        if (!(sc.jitter >= 0.0 && sc.jitter <= 1.0))
          throw SchemaError("/jitter", "expected a number in [0, 1]");
      }
      if (doc.contains("audit_times")) {
        sc.audit_times = get_number_array(doc["audit_times"], "/audit_times");
        if (sc.audit_times.empty()) throw SchemaError("/audit_times", "need at least one time");
        for (std::size_t i = 0; i < sc.audit_times.size(); ++i) {
          if (!(sc.audit_times[i] >= 0.0))
            throw SchemaError("/audit_times/" + std::to_string(i), "times must be nonnegative");
          if (i > 0 && !(sc.audit_times[i] > sc.audit_times[i - 1]))
            throw SchemaError("/audit_times/" + std::to_string(i), "times must be increasing");
        }
      }
      if (doc.contains("residual_tol")) {
        sc.residual_tol = get_number(doc["residual_tol"], "/residual_tol");
        check_positive(sc.residual_tol, "/residual_tol");
      }
      break;
    }

    case ScenarioKind::matrix_lab: {
      allowed.insert({"n", "k", "target_phi_ru", "L", "D_basis", "phi", "u", "lambda0", "t_grid",
                      "lambda", "similarity_tol", "agreement_tol"});
      sc.lab_explicit = doc.contains("L");
      if (sc.lab_explicit) {
        for (const char* key : {"n", "k", "target_phi_ru"})
          if (doc.contains(key))
            throw SchemaError(std::string("/") + key,
                              "generator keys cannot be combined with explicit matrices");
        sc.L = get_matrix(require_key(doc, "L"), "/L");
        sc.n = static_cast<int>(sc.L.size());
        if (sc.L[0].size() != sc.L.size()) throw SchemaError("/L", "expected a square matrix");
        sc.D_basis = get_matrix(require_key(doc, "D_basis"), "/D_basis");
        if (sc.D_basis.size() != sc.L.size())
          throw SchemaError("/D_basis", "row count must match the order of L");
        sc.k = static_cast<int>(sc.D_basis[0].size());
        if (sc.k < 1 || sc.k >= sc.n)
          throw SchemaError("/D_basis", "need 1 <= column count < order of L");
        sc.phi = get_number_array(require_key(doc, "phi"), "/phi");
        if (sc.phi.size() != sc.L.size())
          throw SchemaError("/phi", "length must match the order of L");
        sc.u = get_number_array(require_key(doc, "u"), "/u");
        if (sc.u.size() != sc.L.size())
          throw SchemaError("/u", "length must match the order of L");
        sc.lambda0 = get_number(require_key(doc, "lambda0"), "/lambda0");
      } else {
        for (const char* key : {"D_basis", "phi", "u", "lambda0"})
          if (doc.contains(key))
            throw SchemaError(std::string("/") + key,
                              "explicit-matrix keys require L to be present as well");
        sc.n = static_cast<int>(get_integer(require_key(doc, "n"), "/n"));
        if (sc.n < 2) throw SchemaError("/n", "need order at least 2");
        sc.k = static_cast<int>(get_integer(require_key(doc, "k"), "/k"));
        if (sc.k < 1 || sc.k >= sc.n) throw SchemaError("/k", "need 1 <= k < n");
        if (doc.contains("target_phi_ru")) {
          sc.target_phi_ru = get_number(doc["target_phi_ru"], "/target_phi_ru");
          if (!(sc.target_phi_ru > 0.0 && sc.target_phi_ru < 1.0))
            throw SchemaError("/target_phi_ru", "expected a number in (0, 1)");
        }
      }
      if (doc.contains("t_grid")) {
        sc.t_grid = schema::get_number_array(doc["t_grid"], "/t_grid");
        if (sc.t_grid.empty()) throw SchemaError("/t_grid", "need at least one time");
        for (std::size_t i = 0; i < sc.t_grid.size(); ++i) {
          if (!(sc.t_grid[i] > 0.0))
            throw SchemaError("/t_grid/" + std::to_string(i), "times must be positive");
          if (i > 0 && !(sc.t_grid[i] > sc.t_grid[i - 1]))
            throw SchemaError("/t_grid/" + std::to_string(i), "times must be increasing");
        }
      }
      if (doc.contains("lambda")) sc.probe_lambda = get_number(doc["lambda"], "/lambda");
      if (doc.contains("similarity_tol")) {
        sc.similarity_tol = get_number(doc["similarity_tol"], "/similarity_tol");
        check_positive(sc.similarity_tol, "/similarity_tol");
      }
      if (doc.contains("agreement_tol")) {
        sc.agreement_tol = get_number(doc["agreement_tol"], "/agreement_tol");
        check_positive(sc.agreement_tol, "/agreement_tol");
      }
      break;
    }
  }

  schema::reject_unknown_keys(doc, allowed);
  return sc;
}

/// Reads and validates a scenario file. Throws IoError if the file cannot be
/// read, nlohmann's parse_error (with line diagnostics) on malformed JSON,
/// and SchemaError on schema violations.
inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  ordered_json doc = ordered_json::parse(buf.str());
  return scenario_from_json(doc);
}

/// Machine-readable description of the scenario schema, as served by the
/// `schema` subcommand. Mirrors the validation tables above.
inline ordered_json scenario_schema() {
  ordered_json s;
  s["common"] = {{"required", {{"name", "string"}, {"kind", "one of Analyze1D, AnalyzeGeneral1D, Flow, Escape3_6, WeakResidual, MatrixLab"}}},
                 {"optional", {{"seed", "nonnegative integer"}, {"out_dir", "string"}}}};
  s["Analyze1D"] = {{"required", {{"b", "string (1-d drift expression in x1)"}}},
                    {"optional", {{"lambda", "positive number"},
                                  {"exact_antiderivative", "string (F with F' = 1/b on the tails)"},
                                  {"residual_tol", "positive number"}}}};
  s["AnalyzeGeneral1D"] = {{"required", {{"b", "string"}, {"c0", "number"}, {"cN", "number, > c0"}}},
                           {"optional", {{"lambda", "positive number"},
                                         {"exact_antiderivative", "string"},
                                         {"residual_tol", "positive number"},
                                         {"glue_tol", "positive number"}}}};
  s["Flow"] = {{"required", {{"b", "array of strings, one component per coordinate"},
                             {"x0", "number array of matching length"},
                             {"t_final", "nonnegative number"}}},
               {"optional", {{"rtol", "positive number"}, {"atol", "positive number"}}}};
  s["Escape3_6"] = {{"required", {{"b", "array of strings"},
                                  {"beta", "string (radial bound in x1 = r)"},
                                  {"inner_radius", "positive number"},
                                  {"test_radii", "number array, each > inner_radius"},
                                  {"t_max", "positive number"}}},
                    {"optional", {{"n_directions", "integer >= 1"}, {"tol_cert", "positive number"}}}};
  s["WeakResidual"] = {{"required", {{"b", "array of strings"},
                                     {"density", "string (nonnegative initial density)"},
                                     {"box_lo", "number array"},
                                     {"box_hi", "number array"},
                                     {"n_particles", "integer >= 1"},
                                     {"t", "positive number"},
                                     {"n_time", "even integer >= 2"},
                                     {"f_center", "number array"},
                                     {"f_radius", "positive number"}}},
                       {"optional", {{"jitter", "number in [0, 1]"},
                                     {"audit_times", "increasing nonnegative number array"},
                                     {"residual_tol", "positive number"}}}};
  s["MatrixLab"] = {{"required", {{"n", "integer >= 2 (generator form)"},
                                  {"k", "integer in [1, n)"}}},
                    {"alternative", {{"L", "n x n number matrix (row-major rows)"},
                                     {"D_basis", "n x k matrix"},
                                     {"phi", "number array of length n"},
                                     {"u", "number array of length n"},
                                     {"lambda0", "number"}}},
                    {"optional", {{"target_phi_ru", "number in (0, 1), generator form only"},
                                  {"t_grid", "increasing positive number array"},
                                  {"lambda", "number, must exceed both growth bounds"},
                                  {"similarity_tol", "positive number"},
                                  {"agreement_tol", "positive number"}}}};
  return s;
}

}  // namespace semiflow
