// One PASS/FAIL line per acceptance criterion. Tolerances and time budgets
// are fixed here; the exit status is nonzero if any criterion fails.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <unistd.h>

#include "hmjacobi/cli.hpp"

using namespace hmjacobi;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

struct Criterion {
  int id;
  const char* label;
  double budget_s;  // 0 = no time limit
  std::function<void(Outcome&)> body;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// ---- 1: Killing fields are null for J of the identity ----

void killing_calibration(Outcome& o) {
  constexpr double kTol = 1e-5;
  double worst = 0.0;
  int fields = 0;
  for (int n = 1; n <= 3; ++n) {
    const SmoothMap id = catalog_map("identity:s" + std::to_string(n));
    // 64 nodes per angle on S1 and S2; S3 uses 16^3 nodes to stay in budget
    const Grid grid = quadrature_grid(id.domain, n == 3 ? 16 : 64);
    for (int a = 0; a <= n; ++a)
      for (int b = a + 1; b <= n; ++b) {
        const SectionAlongMap V = catalog_section("killing:a=" + std::to_string(a) + ",b=" + std::to_string(b), id);
        worst = std::max(worst, jacobi_residual(V, grid));
        ++fields;
      }
  }
  o.detail << fields << " Killing fields, max |J V| = " << fmt(worst);
  o.require(worst < kTol, "max |J V| < 1e-5");
}

// ---- 2: composition law residuals ----

void composition_suite(Outcome& o) {
  constexpr double kTol = 1e-4;
  struct Triple {
    std::string phi, psi, field;
  };
  std::vector<Triple> triples;
  for (int l : {2, 3})
    for (int k : {1, 2})
      for (int m : {0, 1, 3})
        triples.push_back({"circle:k=" + std::to_string(l), "great-circle:k=" + std::to_string(k), "normal:m=" + std::to_string(m)});
  for (const char* f : {"killing:x", "killing:y", "killing:z"}) {
    triples.push_back({"hopf", "identity:s2", f});
    triples.push_back({"zpow:k=2", "identity:s2", f});
  }
  double worst = 0.0;
  for (const auto& t : triples) {
    const SmoothMap phi = catalog_map(t.phi), psi = catalog_map(t.psi);
    const SectionAlongMap V = catalog_section(t.field, psi);
    const int d = phi.domain.dim();
    const Grid grid = quadrature_grid(phi.domain, d == 1 ? 64 : d == 2 ? 32 : 10);
    const auto res = parallel_map<double>(grid.size(), [&](std::size_t i) {
      const CompositionResidual r = composition_residual_at(phi, psi, V, grid[i].point);
      // near critical points of phi the bound is relative to |J^psi V|
      return r.lambda < 1e-6 ? r.residual / (1.0 + r.jpsi_norm) : r.residual;
    });
    const double w = *std::max_element(res.begin(), res.end());
    worst = std::max(worst, w);
    o.require(w < kTol, t.phi + " / " + t.psi + " / " + t.field);
  }
  o.detail << triples.size() << " triples, max residual = " << fmt(worst);
}

// ---- 3: exact circle spectra ----

std::vector<double> fourier_oracle(int k, int n, int M) {
  std::vector<double> out;
  auto block = [&](double c) {
    out.push_back(-c);
    for (int m = 1; m <= M; ++m) out.insert(out.end(), 2, m * m - c);
  };
  block(0.0);
  for (int j = 1; j < n; ++j) block(double(k) * k);
  std::sort(out.begin(), out.end());
  return out;
}

void exact_spectra(Outcome& o) {
  constexpr double kEigTol = 1e-8;
  double worst = 0.0;
  for (int k = 1; k <= 3; ++k)
    for (int M : {8, 12}) {
      const SpectralReport c = spectrum(catalog_map("circle:k=" + std::to_string(k)), M);
      o.require(c.index == 0 && c.nullity == 1, "circle:k=" + std::to_string(k) + " index 0, nullity 1");
      const auto co = fourier_oracle(k, 1, M);
      for (std::size_t i = 0; i < co.size(); ++i) worst = std::max(worst, std::abs(c.eigenvalues[i] - co[i]));

      const SpectralReport g = spectrum(catalog_map("great-circle:k=" + std::to_string(k)), M);
      o.require(g.index == 2 * k - 1 && g.nullity == 3, "great-circle:k=" + std::to_string(k) + " index 2k-1, nullity 3");
      const auto go = fourier_oracle(k, 2, M);
      for (std::size_t i = 0; i < go.size(); ++i) worst = std::max(worst, std::abs(g.eigenvalues[i] - go[i]));
    }
  o.detail << "indices/nullities exact at M_max 8 and 12, max eigenvalue error = " << fmt(worst);
  o.require(worst < kEigTol, "eigenvalues within 1e-8");
}

// ---- 4: index and nullity under composition ----

void corollary_suite(Outcome& o) {
  const ToleranceTable tol;  // transported_rel 1e-4, cross_term 1e-5
  double worst_rel = 0.0, worst_cross = 0.0;
  for (int l = 1; l <= 3; ++l)
    for (int k = 1; k <= 3; ++k) {
      Scenario sc;
      sc.phi = "circle:k=" + std::to_string(l);
      sc.psi = "great-circle:k=" + std::to_string(k);
      const ScenarioResult r = run_corollary(sc, tol);
      const Json& j = r.report;
      const std::string tag = sc.phi + " / " + sc.psi;
      o.require(j["index_composite"] == 2 * k * l - 1 && j["index_psi"] == 2 * k - 1, tag + " index");
      o.require(j["nullity_composite"] == 3 && j["nullity_psi"] == 3, tag + " nullity");
      o.require(r.pass, tag + " report");
      for (const auto& f : j["transported_forms"]) {
        const double alpha = f["alpha"], form = f["form"], pred = f["predicted"];
        // null modes carry alpha ~ 1e-14 of either sign; the spectral gap is 1
        if (alpha < -1e-6) worst_rel = std::max(worst_rel, std::abs(form - pred) / std::abs(pred));
        else worst_cross = std::max(worst_cross, std::abs(form));
      }
      worst_cross = std::max(worst_cross, j["max_cross_term"].get<double>());
    }
  o.detail << "9 pairs, transported form rel err = " << fmt(worst_rel) << ", max cross/null term = " << fmt(worst_cross);
  o.require(worst_rel < 1e-4, "transported forms within 1e-4");
  o.require(worst_cross < 1e-5, "cross terms below 1e-5");
}

// ---- 5: energies ----

void energies(Outcome& o) {
  const Grid circle = quadrature_grid(Manifold::sphere(1), 64);
  double worst = 0.0;
  for (int k = 1; k <= 3; ++k)
    worst = std::max(worst, std::abs(energy(catalog_map("great-circle:k=" + std::to_string(k)), circle) - kPi * k * k));
  const double e = energy(catalog_map("identity:s2"), quadrature_grid(Manifold::sphere(2), 128));
  const double rel = std::abs(e - 4 * kPi) / (4 * kPi);
  o.detail << "max |E(gamma_k) - pi k^2| = " << fmt(worst) << ", E(id S2) rel err = " << fmt(rel);
  o.require(worst < 1e-6, "great circles within 1e-6");
  o.require(rel < 1e-3, "identity within 1e-3 relative");
}

// ---- 6: harmonic variations ----

void toth_consistency(Outcome& o) {
  struct Pair {
    const char* map;
    const char* field;
  };
  const std::vector<Pair> pairs = {{"great-circle:k=1", "tangent:m=0"}, {"circle:k=2", "rotation"},
                                   {"great-circle:k=1,n=3", "complex"}, {"identity:s3", "complex"},
                                   {"great-circle:k=1", "zero"},        {"identity:s2", "killing:z"},
                                   {"great-circle:k=2", "normal:m=0"},  {"great-circle:k=1", "normal:m=1"},
                                   {"hopf", "killing:x"},               {"zpow:k=2", "killing:z"}};
  RigidityTolerances tol;
  tol.flow_tension = 1e-4;
  int in_H = 0;
  for (const auto& p : pairs) {
    const SmoothMap phi = catalog_map(p.map);
    const int d = phi.domain.dim();
    const Grid grid = quadrature_grid(phi.domain, d == 1 ? 64 : d == 2 ? 16 : 8);
    const HarmonicVariationCheck h = harmonic_variation_check(catalog_section(p.field, phi), grid, {0.1, 0.5, 1.0}, tol);
    in_H += h.criteria_verdict;
    o.require(h.agree, std::string(p.map) + " / " + p.field + " verdicts disagree");
    if (std::string(p.map) == "identity:s2")
      o.require(!h.report.in_H && h.report.in_K && h.flow_tension[1] > tol.flow_tension, "Killing field on S2 negative");
  }
  o.detail << pairs.size() << " pairs (" << in_H << " in H, " << pairs.size() - in_H << " not), all verdicts agree";
}

// ---- 7: generator recovery ----

void infinitesimal_rigidity(Outcome& o) {
  double worst = 0.0;
  const SmoothMap h = catalog_map("hopf");
  const Grid hg = quadrature_grid(h.domain, 8);
  for (int idx = 0; idx < 3; ++idx) {
    const SkewGenerator X0 = SkewGenerator::from_matrix(SkewGenerator::basis(3, idx));
    const SkewFit f = fit_skew_generator(generator_section(X0, h, "X0"), hg);
    worst = std::max({worst, f.fit_residual, (f.generator.matrix() - X0.matrix()).norm()});
  }
  for (int k = 1; k <= 3; ++k) {
    const SmoothMap c = catalog_map("circle:k=" + std::to_string(k));
    const Grid cg = quadrature_grid(c.domain, 64);
    const SkewGenerator X0 = SkewGenerator::from_matrix(so_basis(2, 1, 0));
    const SkewFit f = fit_skew_generator(generator_section(X0, c, "X0"), cg);
    worst = std::max({worst, f.fit_residual, (f.generator.matrix() - X0.matrix()).norm()});
  }
  constexpr double eps = 1e-2;
  const SectionAlongMap Vp =
      perturb_section(catalog_section("killing:z", h), *catalog_field("conformal:axis=0", h.codomain), eps, hg);
  const double pr = fit_skew_generator(Vp, hg).fit_residual;
  o.detail << "exact recovery max residual = " << fmt(worst) << ", perturbed residual = " << fmt(pr) << " at eps = 1e-2";
  o.require(worst < 1e-8, "exact recovery below 1e-8");
  o.require(pr >= 0.3 * eps && pr <= 3 * eps, "perturbed residual in [0.3 eps, 3 eps]");
}

// ---- 8: Killing flows ----

void local_rigidity(Outcome& o) {
  const std::vector<double> ts = {0.3, 1.0, 2.5};
  double mismatch = 0.0, geo = 0.0;
  auto check = [&](const SmoothMap& phi, const SectionAlongMap& V, const SkewGenerator& X, const Grid& grid) {
    const LocalRigidityResult r = local_rigidity_check(V, X, grid, ts);
    o.require(r.outcome == RigidityOutcome::Checked, phi.name + " checked");
    mismatch = std::max(mismatch, r.flow_mismatch);
    geo = std::max(geo, r.geodesic_residual);
  };
  for (int k = 1; k <= 3; ++k) {
    const SmoothMap c = catalog_map("circle:k=" + std::to_string(k));
    const Grid g = quadrature_grid(c.domain, 64);
    const SectionAlongMap V = catalog_section("rotation:c=1.5", c);
    check(c, V, fit_skew_generator(V, g).generator, g);
  }
  {
    const SmoothMap id = catalog_map("identity:s3");
    const Grid g = quadrature_grid(id.domain, 8);
    const SectionAlongMap V = catalog_section("complex", id);
    check(id, V, fit_skew_generator(V, g).generator, g);
  }
  {
    // the equator does not determine so(4), so the generator is supplied
    const SmoothMap e = catalog_map("great-circle:k=1,n=3");
    check(e, catalog_section("complex", e), SkewGenerator::from_matrix(complex_structure(4)), quadrature_grid(e.domain, 64));
  }
  const SmoothMap h = catalog_map("hopf");
  const LocalRigidityResult even =
      local_rigidity_check(catalog_section("killing:z", h), SkewGenerator(3), quadrature_grid(h.domain, 6), ts);
  o.detail << "5 odd-n cases, flow mismatch = " << fmt(mismatch) << ", |grad_X X| = " << fmt(geo)
           << ", even n -> " << (even.outcome == RigidityOutcome::NotApplicable ? "NotApplicable" : "Checked");
  o.require(mismatch < 1e-6, "flow mismatch below 1e-6");
  o.require(geo < 1e-6, "geodesic residual below 1e-6");
  o.require(even.outcome == RigidityOutcome::NotApplicable, "even n not applicable");
}

// ---- 9: analytic vs finite differences, reproducibility ----

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void cross_validation(Outcome& o) {
  constexpr double kTol = 1e-6;
  std::mt19937_64 rng(2024);
  double chr = 0.0, dif = 0.0, pb = 0.0;
  const std::vector<Manifold> manifolds = {Manifold::sphere(1), Manifold::sphere(2), Manifold::sphere(3),
                                           Manifold::sphere(1, std::sin(1.0)), Manifold::flat_torus({kTwoPi, kTwoPi})};
  for (const auto& M : manifolds)
    for (int i = 0; i < 100; ++i) {
      const Point p = random_point(M, rng);
      const Christoffel a = christoffel_at(M, p), f = christoffel_fd(M, p);
      for (int k = 0; k < M.dim(); ++k) chr = std::max(chr, (a[k] - f[k]).cwiseAbs().maxCoeff());
    }
  const std::vector<std::pair<std::string, std::string>> objects = {
      {"circle:k=3", "tangent:m=2"},       {"great-circle:k=2", "normal:m=1"}, {"great-circle:k=1,n=3", "complex"},
      {"latitude:theta=1", "conformal"},   {"hopf", "killing:x"},           {"zpow:k=2", "conformal:axis=0"},
      {"identity:s2", "killing:z"},        {"identity:s3", "complex"},      {"torus-proj:1", "rotation"},
      {"constant:s2", "conformal"}};
  for (const auto& [map, field] : objects) {
    const SmoothMap phi = catalog_map(map);
    const SectionAlongMap V = catalog_section(field, phi);
    for (int i = 0; i < 100; ++i) {
      const Point p = random_point(phi.domain, rng);
      const TangentVector X = random_tangent(phi.domain, p, rng);
      dif = std::max(dif, (differential_at(phi, p, X).ambient -
                           differential_at(phi, p, X, DerivativeMode::FiniteDifference).ambient).norm());
      pb = std::max(pb, (pullback_derivative_at(V, p, X).ambient -
                         pullback_derivative_at(V, p, X, DerivativeMode::FiniteDifference).ambient).norm());
    }
  }
  o.detail << "Christoffel " << fmt(chr) << ", differential " << fmt(dif) << ", pullback " << fmt(pb);
  o.require(chr < kTol && dif < kTol && pb < kTol, "analytic vs FD within 1e-6");

  const std::string bin = HMJACOBI_CLI_PATH;
  const auto dir = std::filesystem::temp_directory_path() / ("hmjacobi_accept_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const std::vector<std::string> scenarios = {"spectrum --map great-circle:k=2 --mmax 8",
                                              "verify-theorem --phi zpow:k=2 --psi identity:s2 --field killing:x --grid 16",
                                              "toth-check --phi great-circle:k=1 --field tangent:m=0"};
  int same = 0;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const auto a = dir / ("a" + std::to_string(i) + ".json"), b = dir / ("b" + std::to_string(i) + ".json");
    const int ra = std::system((bin + " " + scenarios[i] + " --output " + a.string()).c_str());
    const int rb = std::system((bin + " " + scenarios[i] + " --output " + b.string()).c_str());
    const std::string ta = slurp(a);
    const bool ok = ra == 0 && rb == 0 && !ta.empty() && ta == slurp(b);
    same += ok;
    o.require(ok, "byte-identical report for '" + scenarios[i] + "'");
  }
  std::filesystem::remove_all(dir);
  o.detail << ", " << same << "/" << scenarios.size() << " reports byte-identical";
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "Killing sign calibration", 5.0, killing_calibration},
      {2, "composition law residuals", 60.0, composition_suite},
      {3, "exact circle spectra", 10.0, exact_spectra},
      {4, "index/nullity under composition", 30.0, corollary_suite},
      {5, "energy values", 0.0, energies},
      {6, "harmonic variation criteria", 0.0, toth_consistency},
      {7, "skew generator recovery", 0.0, infinitesimal_rigidity},
      {8, "Killing flow rigidity", 0.0, local_rigidity},
      {9, "analytic/FD agreement and reproducibility", 0.0, cross_validation},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.body(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs >= c.budget_s) o.require(false, "time budget " + fmt(c.budget_s) + " s");
    std::printf("%s  criterion %d  %-42s %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.label, o.detail.str().c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
