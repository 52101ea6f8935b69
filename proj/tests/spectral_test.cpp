#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "hmjacobi/catalog.hpp"
#include "hmjacobi/spectral.hpp"

using namespace hmjacobi;

namespace {

// Eigenvalues of -v'' - c v on the unit circle truncated at |m| <= M, each
// nonzero frequency twice.
std::vector<double> fourier_block(int M, double c) {
  std::vector<double> out{-c};
  for (int m = 1; m <= M; ++m) out.insert(out.end(), 2, m * m - c);
  return out;
}

std::vector<double> great_circle_oracle(int k, int n, int M) {
  std::vector<double> out = fourier_block(M, 0.0);  // tangential
  for (int j = 1; j < n; ++j) {
    const auto nb = fourier_block(M, k * k);
    out.insert(out.end(), nb.begin(), nb.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

double max_gap(const std::vector<double>& a, const std::vector<double>& b) {
  EXPECT_EQ(a.size(), b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

int count_below(const std::vector<double>& v, double t) {
  return static_cast<int>(std::count_if(v.begin(), v.end(), [t](double e) { return e < -t; }));
}

}  // namespace

TEST(Assembly, FlatCircleIsDiagonal) {
  const DiscreteJacobiOperator op = assemble_circle_domain(catalog_map("circle:k=2"), 8);
  ASSERT_EQ(op.dimension(), 17);
  EXPECT_LT(op.symmetry_error, 1e-10);
  for (int a = 0; a < op.dimension(); ++a)
    for (int b = 0; b < op.dimension(); ++b) {
      if (a == b) {
        const int m = mode_frequency(op.slot_of(a));
        EXPECT_NEAR(op.A(a, a), m * m, 1e-9);
      } else {
        EXPECT_LT(std::abs(op.A(a, b)), 1e-10);
      }
    }
}

TEST(Assembly, GreatCircleBlocks) {
  const DiscreteJacobiOperator op = assemble_circle_domain(catalog_map("great-circle:k=1"), 8);
  ASSERT_EQ(op.rank, 2);
  EXPECT_LT((op.A - op.A.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  // the diagonal in the parallel frame {T, nu} carries m^2 and m^2 - 1
  std::vector<double> diag;
  for (int a = 0; a < op.dimension(); ++a) diag.push_back(op.A(a, a));
  std::sort(diag.begin(), diag.end());
  EXPECT_LT(max_gap(diag, great_circle_oracle(1, 2, 8)), 1e-8);
  EXPECT_LT((op.A - Mat(op.A.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Assembly, SymmetricForEveryCatalogCircleMap) {
  for (const char* id : {"circle:k=1", "circle:k=3", "great-circle:k=2", "great-circle:k=3,n=3", "latitude:theta=1"}) {
    const DiscreteJacobiOperator op = assemble_circle_domain(catalog_map(id), 6);
    EXPECT_LT(op.symmetry_error, 1e-10) << id;
    EXPECT_TRUE(op.A.allFinite()) << id;
  }
}

TEST(Assembly, HigherDimensionalDomainsAreRejected) {
  for (const char* id : {"hopf", "zpow:k=2", "torus-proj:1"}) {
    try {
      assemble_circle_domain(catalog_map(id), 4);
      ADD_FAILURE() << id;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::UnsupportedDomain) << id;
    }
  }
}

TEST(Frame, LatitudeHolonomyIsTheEnclosedArea) {
  for (double th : {0.6, 1.0, 2.2}) {
    const CircleFrame cf = build_circle_frame(latitude_circle(th), 128);
    const double angle = std::atan2(cf.holonomy(1, 0), cf.holonomy(0, 0));
    const double area = std::remainder(kTwoPi * (1 - std::cos(th)), kTwoPi);
    EXPECT_NEAR(std::abs(angle), std::abs(area), 1e-8) << th;
    for (const Mat& E : cf.frames) {
      EXPECT_LT((E.transpose() * E - Mat::Identity(2, 2)).norm(), 1e-10);
    }
    EXPECT_LT(cf.closure_error, 1e-8);
  }
}

TEST(Frame, ParallelAlongGeodesics) {
  const CircleFrame cf = build_circle_frame(catalog_map("great-circle:k=2,n=3"), 64);
  EXPECT_LT(cf.omega.norm(), 1e-8);
  EXPECT_LT((cf.holonomy - Mat::Identity(3, 3)).norm(), 1e-8);
}

TEST(Spectrum, CircleCovers) {
  for (int k = 1; k <= 3; ++k) {
    const SpectralReport r = spectrum(catalog_map("circle:k=" + std::to_string(k)), 8);
    EXPECT_EQ(r.index, 0);
    EXPECT_EQ(r.nullity, 1);
    auto oracle = fourier_block(8, 0.0);
    std::sort(oracle.begin(), oracle.end());
    EXPECT_LT(max_gap(r.eigenvalues, oracle), 1e-8);
  }
}

TEST(Spectrum, GreatCircles) {
  for (int n : {2, 3})
    for (int k = 1; k <= 3; ++k) {
      const std::string id = "great-circle:k=" + std::to_string(k) + (n == 3 ? ",n=3" : "");
      for (int M : {8, 12}) {
        const SpectralReport r = spectrum(catalog_map(id), M);
        const auto oracle = great_circle_oracle(k, n, M);
        EXPECT_LT(max_gap(r.eigenvalues, oracle), 1e-8) << id << " M=" << M;
        EXPECT_EQ(r.index, count_below(oracle, 0.5)) << id;
        if (n == 2) {
          EXPECT_EQ(r.index, 2 * k - 1) << id;
          EXPECT_EQ(r.nullity, 3) << id;
        }
      }
    }
}

TEST(Spectrum, TruncationStability) {
  for (const char* id : {"great-circle:k=1", "great-circle:k=2", "circle:k=3", "latitude:theta=1"}) {
    const SmoothMap phi = catalog_map(id);
    const int M = recommended_mmax(phi);
    const SpectralReport a = spectrum(phi, M), b = spectrum(phi, M + 4);
    EXPECT_EQ(a.index, b.index) << id;
    EXPECT_EQ(a.nullity, b.nullity) << id;
  }
  const SmoothMap g1 = catalog_map("great-circle:k=1");
  EXPECT_EQ(spectrum(g1, 4).index, spectrum(g1, 8).index);
  EXPECT_EQ(spectrum(g1, 4).nullity, spectrum(g1, 8).nullity);
}

TEST(Spectrum, CountsFollowTheTolerance) {
  const SpectralReport r = spectrum(catalog_map("great-circle:k=2"), 8);
  int neg = 0, zero = 0;
  for (double e : r.eigenvalues) {
    neg += e < -r.zero_tolerance;
    zero += std::abs(e) <= r.zero_tolerance;
  }
  EXPECT_EQ(neg, r.index);
  EXPECT_EQ(zero, r.nullity);
  EXPECT_TRUE(std::is_sorted(r.eigenvalues.begin(), r.eigenvalues.end()));
  EXPECT_NEAR(r.zero_tolerance, 1e-7 * (1 + 64.0), 1e-12);
  // |e| <= 1.5 also catches the tangential m = 1 pair: 1 + 2 + 2
  EXPECT_EQ(index_nullity(assemble_circle_domain(catalog_map("great-circle:k=2"), 8), 1.5).nullity, 5);
}

TEST(Spectrum, VariationalConsistency) {
  std::mt19937_64 rng(40);
  std::normal_distribution<double> n;
  for (const char* id : {"great-circle:k=2", "latitude:theta=1", "great-circle:k=1,n=3"}) {
    const DiscreteJacobiOperator op = assemble_circle_domain(catalog_map(id), 6);
    const Grid grid = quadrature_grid(op.map.domain, op.frame.samples);
    for (int t = 0; t < 3; ++t) {
      Vec c(op.dimension());
      for (int i = 0; i < c.size(); ++i) c(i) = n(rng);
      const SectionAlongMap V = coefficient_section(op, c, "random");
      const double quad = c.dot(op.A * c);
      EXPECT_NEAR(hessian_form(V, V, grid), quad, 1e-6 * std::abs(quad)) << id;
      EXPECT_LT((project_onto_basis(op, V) - c).norm(), 1e-9 * c.norm()) << id;
    }
  }
}

TEST(Spectrum, RayleighCertificates) {
  for (int k = 1; k <= 3; ++k) {
    const DiscreteJacobiOperator op = assemble_circle_domain(catalog_map("great-circle:k=" + std::to_string(k)), 8);
    const SpectralReport rep = index_nullity(op);
    const auto certs = rayleigh_certificates(op, rep);
    ASSERT_EQ(static_cast<int>(certs.size()), rep.index);
    for (const auto& c : certs) {
      EXPECT_LT(c.hessian, 0.0);
      EXPECT_NEAR(c.hessian, c.eigenvalue, 1e-6);
    }
  }
}

TEST(Spectrum, EigenfieldsSolveTheStrongForm) {
  const DiscreteJacobiOperator op = assemble_circle_domain(catalog_map("great-circle:k=2"), 8);
  const SpectralReport rep = index_nullity(op);
  for (int mode : {0, 1, 2, 3, 5, 9}) {
    const SectionAlongMap V = eigenfield_section(op, rep, mode);
    for (const auto& g : quadrature_grid(op.map.domain, 20)) {
      const Vec j = jacobi_apply_at(V, g.point).value.ambient;
      EXPECT_LT((j - rep.eigenvalues[mode] * V.eval(g.point.ambient)).norm(), 1e-6) << mode;
    }
  }
}

TEST(Corollary, AllCircleChains) {
  for (int l = 1; l <= 3; ++l)
    for (int k = 1; k <= 3; ++k) {
      const CorollaryResult r = corollary_check(catalog_map("circle:k=" + std::to_string(l)),
                                                catalog_map("great-circle:k=" + std::to_string(k)), 8);
      EXPECT_TRUE(r.pass);
      EXPECT_EQ(r.index_psi, 2 * k - 1);
      EXPECT_EQ(r.index_composite, 2 * k * l - 1);
      EXPECT_EQ(r.nullity_psi, 3);
      EXPECT_EQ(r.nullity_composite, 3);
      if (l == 1) {
        EXPECT_EQ(r.index_psi, r.index_composite);
        EXPECT_EQ(r.nullity_psi, r.nullity_composite);
      }
    }
}

TEST(Corollary, TransportedForms) {
  const SmoothMap phi = catalog_map("circle:k=2"), psi = catalog_map("great-circle:k=1");
  const Grid grid = quadrature_grid(phi.domain, 64);
  const TransportedForm f = transported_field_form(phi, catalog_section("normal:m=0", psi), -1.0, grid);
  EXPECT_NEAR(f.predicted, -8 * kPi, 1e-10);
  EXPECT_NEAR(f.form, f.predicted, 1e-4 * std::abs(f.predicted));

  for (const char* v : {"normal:m=1", "normal-sin:m=1", "tangent:m=0"}) {
    const TransportedForm z = transported_field_form(phi, catalog_section(v, psi), 0.0, grid);
    EXPECT_LT(std::abs(z.form), 1e-6) << v;
  }
  const TransportedForm p = transported_field_form(phi, catalog_section("normal:m=3", psi), 8.0, grid);
  EXPECT_NEAR(p.form, p.predicted, 1e-4 * std::abs(p.predicted));
}

TEST(Corollary, CrossTermsVanish) {
  const SmoothMap phi = catalog_map("circle:k=3"), psi = catalog_map("great-circle:k=2");
  const Grid grid = quadrature_grid(phi.domain, 96);
  const std::vector<std::string> fields = {"normal:m=0", "normal:m=1", "normal-sin:m=1", "normal:m=3", "tangent:m=2"};
  for (std::size_t i = 0; i < fields.size(); ++i)
    for (std::size_t j = i + 1; j < fields.size(); ++j) {
      const SectionAlongMap Wi = pull_back_section(catalog_section(fields[i], psi), phi);
      const SectionAlongMap Wj = pull_back_section(catalog_section(fields[j], psi), phi);
      EXPECT_LT(std::abs(hessian_form(Wi, Wj, grid)), 1e-5) << fields[i] << " " << fields[j];
    }
}

TEST(Probe, SphereIdentities) {
  const RayleighProbe s2 = rayleigh_probe(catalog_map("identity:s2"), quadrature_grid(Manifold::sphere(2), 24));
  EXPECT_EQ(s2.index_lower_bound, 0);
  const RayleighProbe s3 = rayleigh_probe(catalog_map("identity:s3"), quadrature_grid(Manifold::sphere(3), 8));
  // the restricted linear fields P(e_a) span the n+1 destabilizing directions
  EXPECT_EQ(s3.index_lower_bound, 4);
  EXPECT_EQ(s3.dictionary_size, 4 + 16);
}

TEST(Probe, HopfBoundDominatesIdentity) {
  const RayleighProbe h = rayleigh_probe(catalog_map("hopf"), quadrature_grid(Manifold::sphere(3), 8));
  const RayleighProbe id = rayleigh_probe(catalog_map("identity:s2"), quadrature_grid(Manifold::sphere(2), 24));
  EXPECT_GE(h.index_lower_bound, id.index_lower_bound);
}
