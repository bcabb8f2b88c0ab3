#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "semiflow/escape.hpp"
#include "semiflow/lab.hpp"
#include "semiflow/ode.hpp"
#include "semiflow/particles.hpp"
#include "semiflow/scenario.hpp"
#include "semiflow/uniqueness.hpp"

namespace semiflow {

inline constexpr const char* kToolName = "semiflow";
inline constexpr const char* kToolVersion = "0.1.0";

/// Command-line overrides applied on top of the scenario file.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<std::string> exact_antiderivative;
};

/// Everything a run produces: the JSON report, sidecar CSV files (name ->
/// content), and the process exit code under the 0/2/3/1 contract.
struct RunOutcome {
  int exit_code = 0;
  ordered_json report;
  std::vector<std::pair<std::string, std::string>> files;
};

namespace reportfmt {

/// Shortest round-trip decimal form; the same byte sequence every run.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

/// JSON has no inf/nan literals; non-finite values become strings.
inline ordered_json jnum(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

inline ordered_json vrow(double value, double tol, bool pass) {
  return ordered_json{{"value", jnum(value)}, {"tol", jnum(tol)}, {"pass", pass}};
}

inline ordered_json vrow(double value, double tol) {
  return ordered_json{{"value", jnum(value)}, {"tol", jnum(tol)}};
}

inline ordered_json number_list(const std::vector<double>& xs) {
  ordered_json a = ordered_json::array();
  for (double x : xs) a.push_back(jnum(x));
  return a;
}

inline ordered_json matrix_json(const Eigen::MatrixXd& M) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(jnum(M(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ordered_json vector_json(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(jnum(v(i)));
  return a;
}

inline std::string wall_clock_utc() {
  auto now = std::chrono::system_clock::now();
  auto secs = std::chrono::time_point_cast<std::chrono::seconds>(now);
  int ms = static_cast<int>(
      std::chrono::duration_cast<std::chrono::milliseconds>(now - secs).count());
  std::time_t tt = std::chrono::system_clock::to_time_t(secs);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, ms);
  return buf;
}

inline ordered_json divergence_json(const DivergenceVerdict& v) {
  ordered_json j;
  j["verdict"] = to_string(v.kind);
  if (v.kind == DivergenceKind::converges) {
    j["value"] = jnum(v.value);
    j["abs_err"] = jnum(v.abs_err);
  }
  if (std::isfinite(v.growth_exponent_fit)) j["growth_exponent_fit"] = jnum(v.growth_exponent_fit);
  j["identically_zero"] = v.identically_zero;
  j["threshold_rule"] = v.threshold_rule;
  j["exponent_rule"] = v.exponent_rule;
  j["exact_mode"] = v.exact_mode;
  ordered_json cutoffs = ordered_json::array();
  for (const auto& rec : v.cutoffs)
    cutoffs.push_back({{"cutoff", jnum(rec.cutoff)},
                       {"partial", jnum(rec.partial)},
                       {"quad_error", jnum(rec.quad_error)}});
  j["cutoffs"] = std::move(cutoffs);
  if (!v.detail.empty()) j["detail"] = v.detail;
  return j;
}

}  // namespace reportfmt

namespace detail {

using reportfmt::fmt;
using reportfmt::jnum;
using reportfmt::vrow;

inline void run_analyze(const Scenario& sc, RunOutcome& out) {
  VectorField b = VectorField::parse(1, sc.b);
  AnalyzeOptions opts;
  opts.lambda = sc.lambda;
  opts.residual_tol = sc.residual_tol;
  opts.glue_tol = sc.glue_tol;
  if (sc.exact_antiderivative)
    opts.tail.antiderivative = Expr::parse(*sc.exact_antiderivative, 1);

  UniquenessReport rep = sc.kind == ScenarioKind::analyze1d
                             ? analyze_positive_b(b, opts)
                             : analyze_general_b(b, sc.c0, sc.cN, opts);

  ordered_json verdicts;
  verdicts["verdict"] = to_string(rep.verdict);
  if (rep.residual)
    verdicts["max_normalized_residual"] =
        vrow(rep.residual->max_normalized, opts.residual_tol,
             rep.residual->max_normalized <= opts.residual_tol);
  if (rep.witness) {
    verdicts["witness_l1_norm"] = vrow(rep.witness->l1_norm, rep.witness->l1_abs_err);
    if (!rep.witness->glue_probes.empty()) {
      double flux = rep.witness->glue_probes.back().flux;
      verdicts["glue_flux"] = vrow(flux, opts.glue_tol, flux <= opts.glue_tol);
    }
  }
  if (rep.verdict == UniquenessVerdict::unique && !rep.blowup_partials.empty()) {
    double mass = rep.blowup_partials.back().partial;
    verdicts["witness_mass_blowup"] = vrow(mass, opts.tail.threshold_m, mass > opts.tail.threshold_m);
  }
  out.report["verdicts"] = std::move(verdicts);

  ordered_json ev;
  ev["lambda"] = jnum(rep.lambda);
  if (rep.left_tail) ev["left_tail"] = reportfmt::divergence_json(*rep.left_tail);
  if (rep.right_tail) ev["right_tail"] = reportfmt::divergence_json(*rep.right_tail);
  if (rep.zeros) {
    ev["zeros"] = {{"zeros", reportfmt::number_list(rep.zeros->zeros)},
                   {"tangent_zeros", reportfmt::number_list(rep.zeros->tangent_zeros)},
                   {"interval_signs", rep.zeros->interval_signs},
                   {"tangent_warning", rep.zeros->tangent_warning}};
  }
  if (!rep.blowup_partials.empty()) {
    ordered_json rows = ordered_json::array();
    for (const auto& rec : rep.blowup_partials)
      rows.push_back({{"cutoff", jnum(rec.cutoff)}, {"mass", jnum(rec.partial)}});
    ev["blowup_partials"] = std::move(rows);
  }
  if (rep.witness) {
    const Witness& w = *rep.witness;
    ordered_json wj;
    wj["base_point"] = jnum(w.base_point());
    wj["lambda"] = jnum(w.lambda());
    wj["support"] = {jnum(w.support_lo()), jnum(w.support_hi())};
    wj["b_at_base"] = jnum(w.b_at_base());
    wj["l1_norm"] = jnum(w.l1_norm);
    wj["l1_abs_err"] = jnum(w.l1_abs_err);
    wj["l1_partials"] = reportfmt::number_list(w.l1_partials);
    if (std::isfinite(w.glue_boundary)) {
      wj["glue_boundary"] = jnum(w.glue_boundary);
      ordered_json probes = ordered_json::array();
      for (const auto& p : w.glue_probes)
        probes.push_back({{"epsilon", jnum(p.epsilon)}, {"x", jnum(p.x)}, {"flux", jnum(p.flux)}});
      wj["glue_probes"] = std::move(probes);
    }
    ev["witness"] = std::move(wj);
  }
  if (rep.residual) {
    ordered_json rows = ordered_json::array();
    for (const auto& r : rep.residual->bumps)
      rows.push_back({{"center", jnum(r.center)},
                      {"radius", jnum(r.radius)},
                      {"integral", jnum(r.integral)},
                      {"normalization", jnum(r.normalization)},
                      {"normalized", jnum(r.normalized)}});
    ev["residual_battery"] = std::move(rows);
  }
  ev["notes"] = rep.notes;
  out.report["evidence"] = std::move(ev);

  if (rep.witness) {
    const Witness& w = *rep.witness;
    double c = w.base_point();
    double width = 16.0 * (1.0 + std::abs(c));
    double pad_lo = 1e-6 * (1.0 + std::abs(w.support_lo()));
    double pad_hi = 1e-6 * (1.0 + std::abs(w.support_hi()));
    double lo = std::max(std::isfinite(w.support_lo()) ? w.support_lo() + pad_lo : c - width, c - width);
    double hi = std::min(std::isfinite(w.support_hi()) ? w.support_hi() - pad_hi : c + width, c + width);
    std::ostringstream csv;
    csv << "x,h,b_h\n";
    const int n = 512;
    for (int i = 0; i <= n; ++i) {
      double x = lo + (hi - lo) * static_cast<double>(i) / n;
      csv << fmt(x) << "," << fmt(w.h(x)) << "," << fmt(w.flux(x)) << "\n";
    }
    out.files.emplace_back("witness.csv", csv.str());
  }

  switch (rep.verdict) {
    case UniquenessVerdict::unique: out.exit_code = 0; break;
    case UniquenessVerdict::not_unique: out.exit_code = 2; break;
    case UniquenessVerdict::inconclusive: out.exit_code = 3; break;
  }
}

inline void run_flow(const Scenario& sc, RunOutcome& out) {
  VectorField b = VectorField::parse(sc.dim, sc.b);
  FlowOptions opts;
  opts.rtol = sc.rtol;
  opts.atol = sc.atol;
  Trajectory traj = integrate(b, sc.x0, sc.t_final, opts);

  ordered_json verdicts;
  verdicts["status"] = to_string(traj.status);
  if (traj.explosion)
    verdicts["explosion_time"] =
        vrow(traj.explosion->tau, traj.explosion->bracket_width(), true);
  out.report["verdicts"] = std::move(verdicts);

  ordered_json ev;
  ev["final_time"] = jnum(traj.final_time());
  ev["final_state"] = reportfmt::number_list(traj.final_state());
  ev["steps_accepted"] = traj.steps_accepted;
  ev["steps_rejected"] = traj.steps_rejected;
  ev["tolerances"] = {{"rtol", jnum(opts.rtol)}, {"atol", jnum(opts.atol)}};
  if (traj.explosion)
    ev["explosion"] = {{"tau", jnum(traj.explosion->tau)},
                       {"bracket_lo", jnum(traj.explosion->bracket_lo)},
                       {"bracket_hi", jnum(traj.explosion->bracket_hi)}};
  if (traj.status == FlowStatus::step_failure) ev["failure_time"] = jnum(traj.failure_time);
  if (!traj.note.empty()) ev["note"] = traj.note;
  out.report["evidence"] = std::move(ev);

  std::ostringstream csv;
  csv << "t";
  for (int i = 1; i <= sc.dim; ++i) csv << ",x" << i;
  csv << "\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    csv << fmt(traj.times[i]);
    for (double xi : traj.states[i]) csv << "," << fmt(xi);
    csv << "\n";
  }
  out.files.emplace_back("trajectory.csv", csv.str());

  out.exit_code = traj.status == FlowStatus::step_failure ? 3 : 0;
}

inline std::string margin_csv(const std::vector<CheckedPoint>& points) {
  std::ostringstream csv;
  csv << "start_radius,direction,t,radius,h,budget,margin\n";
  for (const auto& p : points)
    csv << fmt(p.start_radius) << "," << p.direction << "," << fmt(p.t) << "," << fmt(p.radius)
        << "," << fmt(p.h_at_state) << "," << fmt(p.budget) << "," << fmt(p.margin) << "\n";
  return csv.str();
}

inline void run_escape(const Scenario& sc, RunOutcome& out) {
  VectorField b = VectorField::parse(sc.dim, sc.b);
  RadialBound bound = RadialBound::parse(sc.beta, sc.inner_radius);
  EscapeOptions opts;
  opts.n_directions = sc.n_directions;
  opts.seed = sc.seed;
  opts.tol_cert = sc.tol_cert;

  try {
    EscapeCertificate cert = escape_certificate(b, bound, sc.test_radii, sc.t_max, opts);

    ordered_json verdicts;
    verdicts["certified"] = "Certified";
    verdicts["min_margin"] =
        vrow(cert.min_margin, opts.tol_cert, cert.min_margin >= -opts.tol_cert);
    verdicts["tail_divergence"] = to_string(cert.tail.kind);
    out.report["verdicts"] = std::move(verdicts);

    ordered_json ev;
    ev["tail"] = reportfmt::divergence_json(cert.tail);
    ev["points_checked"] = cert.checked.size();
    ev["n_entered_core"] = cert.n_entered_core;
    ev["n_exploded"] = cert.n_exploded;
    ordered_json trend = ordered_json::array();
    for (const auto& r : cert.trend)
      trend.push_back({{"start_radius", jnum(r.start_radius)},
                       {"min_final_radius", jnum(r.min_final_radius)}});
    ev["trend"] = std::move(trend);
    ev["trend_nondecreasing"] = cert.trend_nondecreasing;
    out.report["evidence"] = std::move(ev);

    out.files.emplace_back("margins.csv", margin_csv(cert.checked));
    std::ostringstream h_csv;
    h_csv << "r,h\n";
    for (const auto& [r, h] : cert.h_table) h_csv << fmt(r) << "," << fmt(h) << "\n";
    out.files.emplace_back("h_table.csv", h_csv.str());
    out.exit_code = 0;
  } catch (const CertificateFailure& cf) {
    ordered_json verdicts;
    verdicts["certified"] = "Failed";
    double worst = cf.violations.empty() ? 0.0 : cf.violations.front().margin;
    verdicts["min_margin"] = vrow(worst, opts.tol_cert, false);
    out.report["verdicts"] = std::move(verdicts);

    ordered_json rows = ordered_json::array();
    for (const auto& v : cf.violations)
      rows.push_back({{"start_radius", jnum(v.start_radius)},
                      {"direction", v.direction},
                      {"t", jnum(v.t)},
                      {"margin", jnum(v.margin)}});
    out.report["evidence"] = {{"violations", std::move(rows)}, {"detail", cf.what()}};

    std::ostringstream csv;
    csv << "start_radius,direction,t,margin\n";
    for (const auto& v : cf.violations)
      csv << fmt(v.start_radius) << "," << v.direction << "," << fmt(v.t) << "," << fmt(v.margin)
          << "\n";
    out.files.emplace_back("violations.csv", csv.str());
    out.exit_code = 1;
  }
}

inline void run_weak_residual(const Scenario& sc, RunOutcome& out) {
  VectorField b = VectorField::parse(sc.dim, sc.b);
  Expr density = Expr::parse(sc.density, sc.dim);
  ParticleCloud cloud =
      sample_cloud(density, sc.box_lo, sc.box_hi, sc.n_particles, sc.seed, sc.jitter, sc.density);
  BumpFunction f(sc.f_center, sc.f_radius);
  WeakIdentityReport rep = weak_residual(b, cloud, f, sc.t, sc.n_time);

  ordered_json verdicts;
  verdicts["residual"] = vrow(rep.residual, sc.residual_tol, rep.residual <= sc.residual_tol);
  out.report["verdicts"] = std::move(verdicts);

  ordered_json ev;
  ev["raw_residual"] = jnum(rep.raw);
  ev["lhs"] = jnum(rep.lhs);
  ev["time_integral"] = jnum(rep.time_integral);
  ev["weight_scale"] = jnum(rep.weight_scale);
  ev["n_time"] = sc.n_time;
  ev["n_died"] = rep.n_died;
  ev["cloud"] = {{"particles", cloud.size()},
                 {"total_weight", jnum(cloud.total_weight())},
                 {"total_abs_weight", jnum(cloud.total_abs_weight())},
                 {"riemann_error", jnum(cloud.riemann_error)},
                 {"sampling_rule", cloud.provenance.sampling_rule}};
  out.report["evidence"] = std::move(ev);

  std::ostringstream pair_csv;
  pair_csv << "t,pair_f_u\n";
  for (std::size_t j = 0; j < rep.nodes.size(); ++j)
    pair_csv << fmt(rep.nodes[j]) << "," << fmt(rep.pairings[j]) << "\n";
  out.files.emplace_back("pairings.csv", pair_csv.str());

  std::ostringstream cloud_csv;
  cloud_csv << "id";
  for (int i = 1; i <= sc.dim; ++i) cloud_csv << ",x" << i;
  cloud_csv << ",w,alive\n";
  for (std::size_t i = 0; i < cloud.particles.size(); ++i) {
    const Particle& p = cloud.particles[i];
    cloud_csv << i;
    for (double xi : p.x) cloud_csv << "," << fmt(xi);
    cloud_csv << "," << fmt(p.weight) << "," << (p.alive ? 1 : 0) << "\n";
  }
  out.files.emplace_back("cloud.csv", cloud_csv.str());

  if (!sc.audit_times.empty()) {
    std::vector<MassAuditRow> audit = mass_audit(b, cloud, sc.audit_times);
    std::ostringstream audit_csv;
    audit_csv << "t,alive_mass,dead_mass,n_alive,n_dead\n";
    for (const auto& row : audit)
      audit_csv << fmt(row.t) << "," << fmt(row.alive_mass) << "," << fmt(row.dead_mass) << ","
                << row.n_alive << "," << row.n_dead << "\n";
    out.files.emplace_back("mass_audit.csv", audit_csv.str());
  }

  out.exit_code = rep.residual <= sc.residual_tol ? 0 : 3;
}

inline LabScenario lab_scenario_from(const Scenario& sc) {
  if (!sc.lab_explicit) return random_scenario(sc.n, sc.k, sc.seed, sc.target_phi_ru);
  LabScenario s;
  s.n = sc.n;
  s.L.resize(sc.n, sc.n);
  for (int i = 0; i < sc.n; ++i)
    for (int j = 0; j < sc.n; ++j) s.L(i, j) = sc.L[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  s.D_basis.resize(sc.n, sc.k);
  for (int i = 0; i < sc.n; ++i)
    for (int j = 0; j < sc.k; ++j)
      s.D_basis(i, j) = sc.D_basis[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  s.phi.resize(sc.n);
  for (int i = 0; i < sc.n; ++i) s.phi(i) = sc.phi[static_cast<std::size_t>(i)];
  s.u.resize(sc.n);
  for (int i = 0; i < sc.n; ++i) s.u(i) = sc.u[static_cast<std::size_t>(i)];
  s.lambda0 = sc.lambda0;
  validate_scenario(s);
  return s;
}

inline void run_matrix_lab(const Scenario& sc, RunOutcome& out) {
  LabScenario s1 = lab_scenario_from(sc);
  PerturbationBundle b1 = build_bundle(s1);
  LabScenario s2 = s1;
  s2.u = -s1.u;  // second admissible extension: same smallness, distinct semigroup
  PerturbationBundle b2 = build_bundle(s2);

  double defect1 = similarity_check(s1, b1);
  double defect2 = similarity_check(s2, b2);
  double defect = std::max(defect1, defect2);
  double inv_agree = std::max(b1.inv_agreement, b2.inv_agreement);

  std::vector<ExtensionRow> rows1 = extension_divergence(s1, b1, sc.t_grid);
  std::vector<ExtensionRow> rows2 = extension_divergence(s2, b2, sc.t_grid);

  double agreement = 0.0;
  double min_gap = std::numeric_limits<double>::infinity();
  ordered_json curves = ordered_json::array();
  for (std::size_t i = 0; i < sc.t_grid.size(); ++i) {
    double t = sc.t_grid[i];
    const Eigen::MatrixXd T1 = (t * (s1.L + b1.C)).exp();
    const Eigen::MatrixXd T2 = (t * (s2.L + b2.C)).exp();
    double gap = (T1 - T2).norm();
    min_gap = std::min(min_gap, gap);
    agreement = std::max(agreement, std::max(rows1[i].agreement_on_D, rows2[i].agreement_on_D));
    curves.push_back({{"t", jnum(t)},
                      {"agreement_on_D", jnum(std::max(rows1[i].agreement_on_D, rows2[i].agreement_on_D))},
                      {"divergence_off_D_1", jnum(rows1[i].divergence_off_D)},
                      {"divergence_off_D_2", jnum(rows2[i].divergence_off_D)},
                      {"extension_gap", jnum(gap)}});
  }

  double probe_lambda = sc.probe_lambda
                            ? *sc.probe_lambda
                            : 1.0 + std::max({growth_bound(s1.L), growth_bound(s1.L + b1.C),
                                              growth_bound(s2.L + b2.C)});
  KernelReport kernel = semigroup_uniqueness_probe(s1, b1, probe_lambda);
  int expected_dim = s1.n - static_cast<int>(s1.D_basis.cols());

  const double inv_tol = 1e-10;
  const double gap_tol = 1e-12;
  const double kernel_tol = 1e-10;
  ordered_json verdicts;
  verdicts["similarity_defect"] = vrow(defect, sc.similarity_tol, defect <= sc.similarity_tol);
  verdicts["inverse_agreement"] = vrow(inv_agree, inv_tol, inv_agree <= inv_tol);
  verdicts["agreement_on_D"] = vrow(agreement, sc.agreement_tol, agreement <= sc.agreement_tol);
  verdicts["extension_distinctness"] = vrow(min_gap, gap_tol, min_gap > gap_tol);
  verdicts["annihilator_dimension"] = ordered_json{{"value", kernel.dimension},
                                                   {"expected", expected_dim},
                                                   {"tol", 0},
                                                   {"pass", kernel.dimension == expected_dim}};
  verdicts["annihilator_residual"] = vrow(kernel.residual, kernel_tol, kernel.residual <= kernel_tol);
  bool all_pass = true;
  for (const auto& item : verdicts.items())
    if (item.value().is_object() && !item.value()["pass"].get<bool>()) all_pass = false;
  out.report["verdicts"] = std::move(verdicts);

  ordered_json ev;
  ev["n"] = s1.n;
  ev["k"] = static_cast<int>(s1.D_basis.cols());
  ev["lambda0"] = jnum(s1.lambda0);
  ev["phi_Ru"] = {jnum(b1.phi_Ru), jnum(b2.phi_Ru)};
  ev["resolvent_cond"] = jnum(b1.resolvent_cond);
  ev["growth_bound_L"] = jnum(growth_bound(s1.L));
  ev["probe_lambda"] = jnum(probe_lambda);
  ev["curves"] = std::move(curves);
  ev["annihilator"] = {{"lambda", jnum(kernel.lambda)},
                       {"dimension", kernel.dimension},
                       {"is_core", kernel.is_core},
                       {"residual", jnum(kernel.residual)},
                       {"basis", reportfmt::matrix_json(kernel.basis)}};
  ev["scenario_matrices"] = {{"L", reportfmt::matrix_json(s1.L)},
                             {"D_basis", reportfmt::matrix_json(s1.D_basis)},
                             {"phi", reportfmt::vector_json(s1.phi.transpose())},
                             {"u", reportfmt::vector_json(s1.u)},
                             {"u_second", reportfmt::vector_json(s2.u)}};
  out.report["evidence"] = std::move(ev);

  out.exit_code = all_pass ? 0 : 3;
}

}  // namespace detail

/// Runs one scenario and assembles the full report. Module errors (sign
/// violations, parse failures, singular resolvents, ...) propagate to the
/// caller, which maps them to exit code 1.
inline RunOutcome run_scenario(const Scenario& input, const RunOverrides& ov = {}) {
  Scenario sc = input;
  if (ov.seed) sc.seed = *ov.seed;
  if (ov.lambda) {
    if (!(*ov.lambda > 0.0) &&
        (sc.kind == ScenarioKind::analyze1d || sc.kind == ScenarioKind::analyze_general1d))
      throw InvalidScenario("lambda override must be positive");
    sc.lambda = *ov.lambda;
    sc.probe_lambda = *ov.lambda;
  }
  if (ov.exact_antiderivative) sc.exact_antiderivative = *ov.exact_antiderivative;

  RunOutcome out;
  out.report["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  out.report["name"] = sc.name;
  out.report["kind"] = to_string(sc.kind);
  out.report["seed"] = sc.seed;
  if (ov.seed || ov.lambda || ov.exact_antiderivative) {
    ordered_json o;
    if (ov.seed) o["seed"] = *ov.seed;
    if (ov.lambda) o["lambda"] = reportfmt::jnum(*ov.lambda);
    if (ov.exact_antiderivative) o["exact_antiderivative"] = *ov.exact_antiderivative;
    out.report["overrides"] = std::move(o);
  }
  out.report["scenario"] = sc.raw;

  switch (sc.kind) {
    case ScenarioKind::analyze1d:
    case ScenarioKind::analyze_general1d: detail::run_analyze(sc, out); break;
    case ScenarioKind::flow: detail::run_flow(sc, out); break;
    case ScenarioKind::escape3_6: detail::run_escape(sc, out); break;
    case ScenarioKind::weak_residual: detail::run_weak_residual(sc, out); break;
    case ScenarioKind::matrix_lab: detail::run_matrix_lab(sc, out); break;
  }

  ordered_json outputs = ordered_json::array();
  outputs.push_back("report.json");
  for (const auto& [name, content] : out.files) outputs.push_back(name);
  out.report["outputs"] = std::move(outputs);
  out.report["wall_clock"] = reportfmt::wall_clock_utc();
  return out;
}

/// Writes report.json plus all sidecar CSVs into `out_dir` (created if
/// needed). Returns the paths written.
inline std::vector<std::string> emit(const RunOutcome& out, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());
  auto write = [&](const std::string& name, const std::string& content) {
    fs::path p = fs::path(out_dir) / name;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot open " + p.string() + " for writing");
    f << content;
    f.flush();
    if (!f) throw IoError("write failed for " + p.string());
    return p.string();
  };
  std::vector<std::string> written;
  written.push_back(write("report.json", out.report.dump(2) + "\n"));
  for (const auto& [name, content] : out.files) written.push_back(write(name, content));
  return written;
}

/// Structural check used by tests and by the schema round-trip property:
/// required envelope keys are present and every numeric verdict carries a
/// tolerance next to it.
inline void validate_report(const ordered_json& rep) {
  for (const char* key : {"tool", "name", "kind", "seed", "scenario", "verdicts", "evidence",
                          "outputs", "wall_clock"})
    if (!rep.contains(key)) throw SchemaError(std::string("/") + key, "missing report key");
  if (!rep["verdicts"].is_object()) throw SchemaError("/verdicts", "expected object");
  for (const auto& item : rep["verdicts"].items()) {
    const ordered_json& v = item.value();
    if (v.is_string() || v.is_boolean()) continue;
    if (!v.is_object()) throw SchemaError("/verdicts/" + item.key(), "expected string or object");
    if (!v.contains("value") || !v.contains("tol"))
      throw SchemaError("/verdicts/" + item.key(), "numeric verdict must pair value with tol");
  }
}

}  // namespace semiflow
