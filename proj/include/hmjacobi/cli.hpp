// Scenario runner behind the hmjacobi command line tool.
#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hmjacobi/rigidity.hpp"
#include "hmjacobi/spectral.hpp"

namespace hmjacobi {

using Json = nlohmann::ordered_json;

/// Every pass/fail threshold used by the runner.
struct ToleranceTable {
  double composition = 1e-4;
  double composition_critical_rel = 1e-4;  // 1e-4 (1 + |J^psi V|) where lambda < 1e-6
  double harmonic = kHarmonicTolerance;
  double conformality = kConformalityTolerance;
  double symmetry = 1e-10;
  double transported_rel = 1e-4;
  double cross_term = 1e-5;
  double energy_rel = 1e-3;
  RigidityTolerances rigidity;

  Json to_json() const {
    Json j;
    j["composition"] = composition;
    j["composition_critical_rel"] = composition_critical_rel;
    j["harmonic"] = harmonic;
    j["conformality"] = conformality;
    j["symmetry"] = symmetry;
    j["transported_rel"] = transported_rel;
    j["cross_term"] = cross_term;
    j["energy_rel"] = energy_rel;
    j["jacobi"] = rigidity.jacobi;
    j["k_condition"] = rigidity.k_condition;
    j["norm_variation_rel"] = rigidity.norm_variation;
    j["projectability"] = rigidity.projectability;
    j["flow_tension"] = rigidity.flow_tension;
    j["fit"] = rigidity.fit;
    j["flow_mismatch"] = rigidity.flow_mismatch;
    j["geodesic"] = rigidity.geodesic;
    j["fit_condition"] = rigidity.condition;
    return j;
  }
};

struct Scenario {
  std::string command;
  std::string phi, psi, map, field, generator;
  int grid = 0;  // 0 selects a per-dimension default
  int mmax = 8;
  double zero_tolerance = -1.0;
  std::string t_samples;
  std::string output;
  std::string format = "json";
  bool fit = false;
  bool local = false;
  double perturb = 0.0;
  int fiber_samples = kDefaultFiberSamples;
  bool json_listing = false;
  bool morphisms_only = false;
  std::optional<double> expect_energy;
};

struct ScenarioResult {
  Json report;
  std::string csv;  // spectrum only
  bool pass = false;
};

inline int default_resolution(const Manifold& M) {
  switch (M.dim()) {
    case 1: return 64;
    case 2: return 32;
    default: return 10;
  }
}

inline std::vector<double> parse_t_samples(const std::string& text, std::vector<double> fallback) {
  if (text.empty()) return fallback;
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad t sample '" + item + "'");
    }
  }
  return out;
}

namespace detail {

inline Grid scenario_grid(const Manifold& M, int res) {
  const int r = res > 0 ? res : default_resolution(M);
  if (r < 4) throw Error(ErrorCode::InvalidArgument, "grid resolution must be >= 4");
  return quadrature_grid(M, r);
}

inline Json vec_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Json variation_json(const VariationReport& r) {
  Json j;
  j["jacobi_residual"] = r.jacobi_residual;
  j["k_residual"] = r.k_residual;
  j["norm_variation"] = r.norm_variation;
  if (r.projectability_residual) j["projectability_residual"] = *r.projectability_residual;
  else j["projectability_residual"] = nullptr;
  j["in_J"] = r.in_J;
  j["in_K"] = r.in_K;
  j["in_H"] = r.in_H;
  return j;
}

}  // namespace detail

inline Json spectral_report_json(const SpectralReport& rep) {
  Json j;
  j["map"] = rep.map;
  j["M_max"] = rep.M_max;
  j["eigenvalues"] = rep.eigenvalues;
  j["index"] = rep.index;
  j["nullity"] = rep.nullity;
  j["zero_tolerance"] = rep.zero_tolerance;
  return j;
}

inline std::string spectral_report_csv(const SpectralReport& rep) {
  std::string out = "mode_index,eigenvalue\n";
  for (std::size_t i = 0; i < rep.eigenvalues.size(); ++i)
    out += std::to_string(i) + "," + Json(rep.eigenvalues[i]).dump() + "\n";
  return out;
}

// ---- scenarios ----------------------------------------------------------------------------

inline ScenarioResult run_verify_theorem(const Scenario& sc, const ToleranceTable& tol) {
  const SmoothMap phi = catalog_map(sc.phi);
  const SmoothMap psi = catalog_map(sc.psi);
  const SectionAlongMap V = catalog_section(sc.field, psi);
  const Grid grid = detail::scenario_grid(phi.domain, sc.grid);
  const Grid psi_grid = detail::scenario_grid(psi.domain, sc.grid);
  const MorphismReport mr = morphism_report(phi, grid, tol.harmonic);
  const HarmonicityReport hr = harmonicity_report(psi, psi_grid, tol.harmonic);
  compose(phi, psi);  // DomainMismatch surfaces before any evaluation

  const auto rows = parallel_map<CompositionResidual>(
      grid.size(), [&](std::size_t i) { return composition_residual_at(phi, psi, V, grid[i].point); });
  double max_res = 0.0, lam_min = std::numeric_limits<double>::infinity(), lam_max = 0.0;
  bool within = true;
  for (const auto& r : rows) {
    max_res = std::max(max_res, r.residual);
    lam_min = std::min(lam_min, r.lambda);
    lam_max = std::max(lam_max, r.lambda);
    const double bound = r.lambda < 1e-6 ? tol.composition_critical_rel * (1.0 + r.jpsi_norm) : tol.composition;
    within = within && r.residual < bound;
  }
  ScenarioResult out;
  Json& j = out.report;
  j["command"] = "verify-theorem";
  j["phi"] = phi.name;
  j["psi"] = psi.name;
  j["field"] = sc.field;
  j["grid_points"] = grid.size();
  j["max_residual"] = max_res;
  j["lambda_min"] = lam_min;
  j["lambda_max"] = lam_max;
  j["phi_harmonic_residual"] = mr.harmonic_residual;
  j["phi_conformality_residual"] = mr.conformality_residual;
  j["phi_is_morphism"] = mr.is_morphism;
  j["phi_critical_points"] = Json::array();
  for (const Vec& c : mr.critical_points) j["phi_critical_points"].push_back(detail::vec_json(c));
  j["phi_indeterminate_points"] = mr.indeterminate_points;
  j["psi_harmonic_residual"] = hr.residual;
  j["psi_is_harmonic"] = hr.harmonic;
  out.pass = within && mr.is_morphism && hr.harmonic;
  j["pass"] = out.pass;
  j["tolerances"] = tol.to_json();
  return out;
}

inline ScenarioResult run_spectrum(const Scenario& sc, const ToleranceTable& tol) {
  const SmoothMap phi = catalog_map(sc.map);
  const DiscreteJacobiOperator op = assemble_circle_domain(phi, sc.mmax);
  const SpectralReport rep = index_nullity(op, sc.zero_tolerance);
  ScenarioResult out;
  out.report = spectral_report_json(rep);
  out.report["symmetry_error"] = op.symmetry_error;
  out.report["harmonic_residual"] = op.harmonic_residual;
  out.report["frame_construction"] = op.frame_construction;
  out.pass = op.symmetry_error < tol.symmetry && op.harmonic_residual < tol.harmonic;
  out.report["pass"] = out.pass;
  out.report["tolerances"] = tol.to_json();
  out.csv = spectral_report_csv(rep);
  return out;
}

inline ScenarioResult run_corollary(const Scenario& sc, const ToleranceTable& tol) {
  const SmoothMap phi = catalog_map(sc.phi);
  const SmoothMap psi = catalog_map(sc.psi);
  const CorollaryResult cr = corollary_check(phi, psi, sc.mmax);
  ScenarioResult out;
  Json& j = out.report;
  j["command"] = "corollary";
  j["phi"] = phi.name;
  j["psi"] = psi.name;
  j["M_max_psi"] = cr.M_psi;
  j["M_max_composite"] = cr.M_composite;
  j["index_psi"] = cr.index_psi;
  j["index_composite"] = cr.index_composite;
  j["nullity_psi"] = cr.nullity_psi;
  j["nullity_composite"] = cr.nullity_composite;

  // Transport the nonpositive eigenfields of J^psi through phi.
  const DiscreteJacobiOperator op = assemble_circle_domain(psi, cr.M_psi);
  const SpectralReport rep = index_nullity(op);
  const Grid grid = detail::scenario_grid(phi.domain, sc.grid > 0 ? sc.grid : std::max(64, op.frame.samples));
  std::vector<int> modes;
  for (int i = 0; i < static_cast<int>(rep.eigenvalues.size()); ++i)
    if (rep.eigenvalues[i] <= rep.zero_tolerance) modes.push_back(i);
  std::vector<SectionAlongMap> W;
  bool forms_ok = true;
  Json forms = Json::array();
  for (int m : modes) {
    const SectionAlongMap V = eigenfield_section(op, rep, m);
    const TransportedForm tf = transported_field_form(phi, V, rep.eigenvalues[m], grid);
    const double err = std::abs(tf.form - tf.predicted);
    const bool ok = rep.eigenvalues[m] < -rep.zero_tolerance ? err <= tol.transported_rel * std::abs(tf.predicted)
                                                             : std::abs(tf.form) < tol.cross_term;
    forms_ok = forms_ok && ok;
    Json f;
    f["mode"] = m;
    f["alpha"] = rep.eigenvalues[m];
    f["form"] = tf.form;
    f["predicted"] = tf.predicted;
    f["pass"] = ok;
    forms.push_back(f);
    W.push_back(pull_back_section(V, phi));
  }
  double cross = 0.0;
  for (std::size_t a = 0; a < modes.size(); ++a)
    for (std::size_t b = 0; b < modes.size(); ++b)
      if (std::abs(rep.eigenvalues[modes[a]] - rep.eigenvalues[modes[b]]) > 1e-6)
        cross = std::max(cross, std::abs(hessian_form(W[a], W[b], grid)));
  j["transported_forms"] = forms;
  j["max_cross_term"] = cross;
  out.pass = cr.pass && forms_ok && cross < tol.cross_term;
  j["pass"] = out.pass;
  j["tolerances"] = tol.to_json();
  return out;
}

inline ScenarioResult run_energy(const Scenario& sc, const ToleranceTable& tol) {
  const SmoothMap phi = catalog_map(sc.map);
  const Grid grid = detail::scenario_grid(phi.domain, sc.grid);
  const double e = energy(phi, grid);
  ScenarioResult out;
  Json& j = out.report;
  j["command"] = "energy";
  j["map"] = phi.name;
  j["grid_points"] = grid.size();
  j["energy"] = e;
  out.pass = std::isfinite(e);
  if (sc.expect_energy) {
    j["expected"] = *sc.expect_energy;
    const double rel = std::abs(e - *sc.expect_energy) / std::max(1e-300, std::abs(*sc.expect_energy));
    j["relative_error"] = rel;
    out.pass = out.pass && rel < tol.energy_rel;
  }
  j["pass"] = out.pass;
  j["tolerances"] = tol.to_json();
  return out;
}

inline ScenarioResult run_rigidity(const Scenario& sc, const ToleranceTable& tol) {
  const SmoothMap phi = catalog_map(sc.phi);
  SectionAlongMap V = catalog_section(sc.field, phi);
  const Grid grid = detail::scenario_grid(phi.domain, sc.grid);
  if (sc.perturb != 0.0) {
    const VectorField W = phi.codomain.dim() >= 2 ? *catalog_field("conformal:axis=0", phi.codomain)
                                                  : *catalog_field("rotation", phi.codomain);
    V = perturb_section(V, W, sc.perturb, grid);
  }
  VariationReport vr = variation_report(V, grid, tol.rigidity);
  ScenarioResult out;
  Json& j = out.report;
  j["command"] = "rigidity";
  j["phi"] = phi.name;
  j["field"] = sc.field;
  j["perturbation"] = sc.perturb;
  j["grid_points"] = grid.size();
  bool pass = vr.in_K;
  if (phi.fiber_sampler) {
    vr.projectability_residual = projectability_residual(V, grid, sc.fiber_samples);
    pass = pass && *vr.projectability_residual < tol.rigidity.projectability;
  }
  j.update(detail::variation_json(vr));
  std::optional<SkewGenerator> X;
  if (sc.fit || (sc.local && sc.generator.empty())) {
    const SkewFit fit = fit_skew_generator(V, grid, tol.rigidity);
    X = fit.generator;
    j["generator"] = detail::vec_json(fit.generator.matrix().transpose().reshaped());
    j["fit_residual"] = fit.fit_residual;
    j["fit_condition_number"] = fit.condition_number;
    pass = pass && fit.fit_residual < tol.rigidity.fit;
  }
  if (!sc.generator.empty()) {
    const auto A = catalog_skew_matrix(sc.generator, phi.codomain);
    if (!A) throw Error(ErrorCode::UnknownCatalogId, sc.generator + " is not a linear field");
    X = SkewGenerator::from_matrix(*A);
  }
  if (sc.local) {
    const auto ts = parse_t_samples(sc.t_samples, {0.3, 1.0, 2.5});
    const LocalRigidityResult lr = local_rigidity_check(V, *X, grid, ts, tol.rigidity);
    Json l;
    if (lr.outcome == RigidityOutcome::NotApplicable) {
      l["outcome"] = "not_applicable";
      l["note"] = lr.note;
    } else {
      l["outcome"] = "checked";
      l["flow_mismatch"] = lr.flow_mismatch;
      l["geodesic_residual"] = lr.geodesic_residual;
      pass = pass && lr.flow_mismatch < tol.rigidity.flow_mismatch && lr.geodesic_residual < tol.rigidity.geodesic;
    }
    j["local_rigidity"] = l;
  }
  out.pass = pass;
  j["pass"] = pass;
  j["tolerances"] = tol.to_json();
  return out;
}

inline ScenarioResult run_toth_check(const Scenario& sc, const ToleranceTable& tol) {
  const SmoothMap phi = catalog_map(sc.phi);
  const SectionAlongMap V = catalog_section(sc.field, phi);
  const Grid grid = detail::scenario_grid(phi.domain, sc.grid);
  const auto ts = parse_t_samples(sc.t_samples, {0.1, 0.5, 1.0});
  const HarmonicVariationCheck hv = harmonic_variation_check(V, grid, ts, tol.rigidity);
  ScenarioResult out;
  Json& j = out.report;
  j["command"] = "toth-check";
  j["phi"] = phi.name;
  j["field"] = sc.field;
  j["grid_points"] = grid.size();
  j.update(detail::variation_json(hv.report));
  j["t_samples"] = hv.t_samples;
  j["flow_tension"] = hv.flow_tension;
  j["criteria_verdict"] = hv.criteria_verdict;
  j["flow_verdict"] = hv.flow_verdict;
  j["agree"] = hv.agree;
  out.pass = hv.agree;
  j["pass"] = out.pass;
  j["tolerances"] = tol.to_json();
  return out;
}

inline std::string list_examples_text(bool as_json, bool morphisms_only) {
  Json arr = Json::array();
  std::ostringstream os;
  for (const auto& e : catalog_entries()) {
    if (morphisms_only && !e.morphism) continue;
    Json j;
    j["id"] = e.id;
    j["domain"] = e.domain;
    j["codomain"] = e.codomain;
    j["harmonic"] = e.harmonic;
    j["harmonic_morphism"] = e.morphism;
    arr.push_back(j);
    os << e.id << "  " << e.domain << " -> " << e.codomain << "  "
       << (e.morphism ? "harmonic morphism" : e.harmonic ? "harmonic" : "not harmonic") << "\n";
  }
  return as_json ? arr.dump(2) + "\n" : os.str();
}

// ---- config files and argument handling ---------------------------------------------------------

/// Reads `key = value` lines (# comments) into long-flag arguments.
inline std::vector<std::string> config_arguments(const std::string& text, const std::string& source = "config") {
  std::vector<std::string> args;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](std::size_t col, const std::string& what) {
    throw Error(ErrorCode::ConfigParseError,
                source + ":" + std::to_string(lineno) + ":" + std::to_string(col + 1) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    const std::string body = line.substr(0, hash);
    const auto first = body.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) fail(first, "expected 'key = value'");
    auto last = body.find_last_not_of(" \t", eq == 0 ? 0 : eq - 1);
    if (eq == first || last == std::string::npos || last < first) fail(first, "missing key");
    const std::string key = body.substr(first, last - first + 1);
    for (std::size_t i = 0; i < key.size(); ++i) {
      const char c = key[i];
      if (!(std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '_'))
        fail(first + i, "invalid character in key");
    }
    const auto vstart = body.find_first_not_of(" \t", eq + 1);
    if (vstart == std::string::npos) fail(eq + 1, "missing value");
    const auto vend = body.find_last_not_of(" \t");
    std::string value = body.substr(vstart, vend - vstart + 1);
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (value == "true") args.push_back(flag);
    else if (value != "false") {
      args.push_back(flag);
      args.push_back(value);
    }
  }
  return args;
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_output(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path);
  f << content;
  if (!f) throw Error(ErrorCode::IoError, "write failed for " + path);
}

/// Exit status: 0 all checks pass, 1 a check failed (report still written), 2 usage or runtime error.
inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  // Config-file arguments go right after the subcommand so later command-line flags win.
  try {
    for (std::size_t i = 1; i < args.size(); ++i) {
      if (args[i] == "--config" || args[i].rfind("--config=", 0) == 0) {
        const bool inline_value = args[i] != "--config";
        if (!inline_value && i + 1 >= args.size()) throw Error(ErrorCode::ConfigParseError, "--config needs a path");
        const std::string path = inline_value ? args[i].substr(9) : args[i + 1];
        args.erase(args.begin() + i, args.begin() + i + (inline_value ? 1 : 2));
        const auto extra = config_arguments(read_file(path), path);
        std::size_t at = 1;
        while (at < args.size() && args[at].rfind("-", 0) == 0) ++at;
        if (at < args.size()) ++at;  // after the subcommand
        args.insert(args.begin() + std::min(at, args.size()), extra.begin(), extra.end());
        break;
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  Scenario sc;
  CLI::App app{"Jacobi operators along harmonic maps and harmonic morphisms", "hmjacobi"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  std::string energy_expect;
  auto common = [&](CLI::App* c) {
    c->add_option("--grid", sc.grid, "quadrature resolution");
    c->add_option("--output", sc.output, "report path (default stdout)");
  };
  auto* vt = app.add_subcommand("verify-theorem", "composition law residual");
  vt->add_option("--phi", sc.phi)->required();
  vt->add_option("--psi", sc.psi)->required();
  vt->add_option("--field", sc.field)->required();
  common(vt);
  auto* sp = app.add_subcommand("spectrum", "index and nullity of a circle-domain map");
  sp->add_option("--map", sc.map)->required();
  sp->add_option("--mmax", sc.mmax);
  sp->add_option("--zero-tol", sc.zero_tolerance);
  sp->add_option("--format", sc.format)->check(CLI::IsMember({"json", "csv"}));
  common(sp);
  auto* co = app.add_subcommand("corollary", "index and nullity under composition");
  co->add_option("--phi", sc.phi)->required();
  co->add_option("--psi", sc.psi)->required();
  co->add_option("--mmax", sc.mmax);
  common(co);
  auto* en = app.add_subcommand("energy", "energy of a catalog map");
  en->add_option("--map", sc.map)->required();
  en->add_option("--expect", energy_expect);
  common(en);
  auto* ri = app.add_subcommand("rigidity", "K/H membership, projectability, generator fit");
  ri->add_option("--phi", sc.phi)->required();
  ri->add_option("--field", sc.field)->required();
  ri->add_flag("--fit", sc.fit);
  ri->add_flag("--local", sc.local);
  ri->add_option("--generator", sc.generator);
  ri->add_option("--perturb", sc.perturb);
  ri->add_option("--fiber-samples", sc.fiber_samples);
  ri->add_option("--t", sc.t_samples, "comma separated times");
  common(ri);
  auto* to = app.add_subcommand("toth-check", "harmonic variation criteria against exp(tV)");
  to->add_option("--phi", sc.phi)->required();
  to->add_option("--field", sc.field)->required();
  to->add_option("--t", sc.t_samples, "comma separated times");
  common(to);
  auto* li = app.add_subcommand("list-examples", "catalog listing");
  li->add_flag("--json", sc.json_listing);
  li->add_flag("--morphisms-only", sc.morphisms_only);

  std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  sc.command = app.get_subcommands().front()->get_name();

  const ToleranceTable tol;
  try {
    if (!energy_expect.empty()) sc.expect_energy = std::stod(energy_expect);
    if (sc.command == "list-examples") {
      out << list_examples_text(sc.json_listing, sc.morphisms_only);
      return 0;
    }
    ScenarioResult res;
    if (sc.command == "verify-theorem") res = run_verify_theorem(sc, tol);
    else if (sc.command == "spectrum") res = run_spectrum(sc, tol);
    else if (sc.command == "corollary") res = run_corollary(sc, tol);
    else if (sc.command == "energy") res = run_energy(sc, tol);
    else if (sc.command == "rigidity") res = run_rigidity(sc, tol);
    else res = run_toth_check(sc, tol);
    const std::string body = sc.format == "csv" ? res.csv : res.report.dump(2) + "\n";
    write_output(sc.output, body, out);
    return res.pass ? 0 : 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace hmjacobi
