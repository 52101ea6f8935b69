// Pull-back connection, second covariant derivative, rough Laplacian,
// curvature term and the Jacobi operator along a smooth map, plus the
// energy, its Hessian and the pointwise residual of the composition law
// J^{psi o phi}(V o phi) = lambda^2 J^psi(V) o phi.
#pragma once

#include <optional>
#include <string>
#include <utility>

#include "hmjacobi/maps.hpp"

namespace hmjacobi {

/// A tangent vector field on a manifold, given on ambient coordinates.
struct VectorField {
  std::string name;
  Manifold manifold;
  std::function<Vec(const Vec&)> eval;
  std::function<JetVec(const JetVec&)> eval_jet;
};

template <class F>
VectorField make_field(std::string name, Manifold M, F f) {
  VectorField X{std::move(name), std::move(M), {}, {}};
  X.eval = [f](const Vec& y) -> Vec { return f(y); };
  X.eval_jet = [f](const JetVec& y) -> JetVec { return f(y); };
  return X;
}

/// A section V of phi^{-1}TN, V(x) in T_{phi(x)}N, as a function of the
/// domain's ambient coordinates.
struct SectionAlongMap {
  std::string name;
  SmoothMap base;
  std::function<Vec(const Vec&)> eval;
  std::function<JetVec(const JetVec&)> eval_jet;
  /// Present when V = X o phi; such sections are projectable by construction.
  std::optional<VectorField> factor;
};

template <class F>
SectionAlongMap make_section(std::string name, SmoothMap base, F f) {
  SectionAlongMap V{std::move(name), std::move(base), {}, {}, std::nullopt};
  V.eval = [f](const Vec& x) -> Vec { return f(x); };
  V.eval_jet = [f](const JetVec& x) -> JetVec { return f(x); };
  return V;
}

/// V = X o phi.
inline SectionAlongMap compose_field(const VectorField& X, const SmoothMap& phi) {
  if (!(X.manifold == phi.codomain))
    throw Error(ErrorCode::DomainMismatch, "field " + X.name + " does not live on the codomain of " + phi.name);
  SectionAlongMap V{X.name + " o " + phi.name, phi, {}, {}, X};
  V.eval = [f = phi.eval, g = X.eval](const Vec& x) { return g(f(x)); };
  if (phi.eval_jet && X.eval_jet)
    V.eval_jet = [f = phi.eval_jet, g = X.eval_jet](const JetVec& x) { return g(f(x)); };
  return V;
}

/// W = V o phi, a section along psi o phi for V along psi.
inline SectionAlongMap pull_back_section(const SectionAlongMap& V, const SmoothMap& phi) {
  SectionAlongMap W{V.name + " o " + phi.name, compose(phi, V.base), {}, {}, std::nullopt};
  W.eval = [f = phi.eval, g = V.eval](const Vec& x) { return g(f(x)); };
  if (phi.eval_jet && V.eval_jet)
    W.eval_jet = [f = phi.eval_jet, g = V.eval_jet](const JetVec& x) { return g(f(x)); };
  return W;
}

inline SectionAlongMap scale_section(const SectionAlongMap& V, double c) {
  SectionAlongMap out = V;
  out.name = std::to_string(c) + "*" + V.name;
  out.eval = [g = V.eval, c](const Vec& x) { return Vec(c * g(x)); };
  if (V.eval_jet) out.eval_jet = [g = V.eval_jet, c](const JetVec& x) { return JetVec(g(x) * Jet(c)); };
  if (out.factor) {
    out.factor->eval = [g = V.factor->eval, c](const Vec& y) { return Vec(c * g(y)); };
    if (V.factor->eval_jet)
      out.factor->eval_jet = [g = V.factor->eval_jet, c](const JetVec& y) { return JetVec(g(y) * Jet(c)); };
  }
  return out;
}

inline SectionAlongMap add_sections(const SectionAlongMap& A, const SectionAlongMap& B) {
  SectionAlongMap out{A.name + "+" + B.name, A.base, {}, {}, std::nullopt};
  out.eval = [a = A.eval, b = B.eval](const Vec& x) { return Vec(a(x) + b(x)); };
  if (A.eval_jet && B.eval_jet)
    out.eval_jet = [a = A.eval_jet, b = B.eval_jet](const JetVec& x) { return JetVec(a(x) + b(x)); };
  return out;
}

/// 2-jet of t -> V(exp_x(t v)).
inline CurveJet section_curve_jet(const SectionAlongMap& V, const Vec& x, const Vec& v,
                                  DerivativeMode mode = DerivativeMode::Analytic) {
  if (mode == DerivativeMode::Analytic && V.eval_jet)
    return from_jet(V.eval_jet(to_jet(V.base.domain.geodesic_jet(x, v))));
  const Manifold values = Manifold::euclidean(V.base.codomain.ambient_dim());
  return fd_curve_jet(V.base.domain, values, x, v, V.eval);
}

// ---- first and second covariant derivatives ----------------------------------------

inline TangentVector pullback_derivative_at(const SectionAlongMap& V, const Point& p, const TangentVector& X,
                                            DerivativeMode mode = DerivativeMode::Analytic) {
  require_same_base(p, X);
  require_chart_interior(V.base.domain, p);
  const Manifold& N = V.base.codomain;
  const Vec y = V.base.eval(p.ambient);
  const CurveJet vj = section_curve_jet(V, p.ambient, X.ambient, mode);
  return tangent_from_ambient(N, make_point(N, y), N.project_tangent(y, vj.v));
}

/// Chart route: d_X V^c + Gamma^c_ab (dphi X)^a V^b in a codomain chart.
inline TangentVector pullback_derivative_chart(const SectionAlongMap& V, const Point& p, const TangentVector& X,
                                               double h = 1e-5) {
  require_same_base(p, X);
  const Manifold& M = V.base.domain;
  const Manifold& N = V.base.codomain;
  const Point q = make_point(N, V.base.eval(p.ambient));
  const int chart = q.chart;
  auto components = [&](const Vec& x) {
    const Vec y = V.base.eval(x);
    const Vec u = N.chart_coords(chart, y);
    const Mat J = N.chart_jacobian(chart, u);
    return Vec((J.transpose() * J).ldlt().solve(J.transpose() * V.eval(x)));
  };
  const Vec dc = (components(exponential_ambient(M, p.ambient, X.ambient, h)) -
                  components(exponential_ambient(M, p.ambient, X.ambient, -h))) /
                 (2.0 * h);
  const Vec c0 = components(p.ambient);
  const TangentVector dphiX = differential_at(V.base, p, X);
  const Christoffel G = christoffel_at(N, q);
  Vec out = dc;
  for (int k = 0; k < N.dim(); ++k) out(k) += dphiX.components.dot(G[k] * c0);
  return tangent_from_components(N, q, out);
}

/// grad^2_{X,Y} V = grad_X(grad_Y V) - grad_{grad_X Y} V. Y is extended by
/// tangential projection along the geodesic in direction X, which has zero
/// covariant derivative at p; the outer derivative is a central difference.
inline TangentVector second_cov_derivative_at(const SectionAlongMap& V, const Point& p, const TangentVector& X,
                                              const TangentVector& Y, double h_outer = 1e-4) {
  require_same_base(p, X);
  require_same_base(p, Y);
  require_chart_interior(V.base.domain, p);
  const Manifold& M = V.base.domain;
  const Manifold& N = V.base.codomain;
  auto inner = [&](double t) {
    const Vec x = exponential_ambient(M, p.ambient, X.ambient, t);
    const Vec Yt = M.project_tangent(x, Y.ambient);
    const Vec y = V.base.eval(x);
    return Vec(N.project_tangent(y, section_curve_jet(V, x, Yt).v));
  };
  auto central = [&](double h) { return Vec((inner(h) - inner(-h)) / (2.0 * h)); };
  const Vec d = (4.0 * central(0.5 * h_outer) - central(h_outer)) / 3.0;
  const Vec y0 = V.base.eval(p.ambient);
  return tangent_from_ambient(N, make_point(N, y0), N.project_tangent(y0, d));
}

// ---- Jacobi operator ----------------------------------------------------------------------

/// Per-point ingredients of the Jacobi operator, all ambient vectors at phi(p).
struct JacobiTerms {
  Vec image;             // phi(p)
  Vec value;             // V(p), projected to the tangent space
  Mat dphi;              // columns dphi(e_i)
  Mat nabla;             // columns grad^phi_{e_i} V
  Vec rough_laplacian;   // -sum_i grad^2_{e_i,e_i} V
  Vec curvature_term;    // sum_i R(dphi e_i, V) dphi e_i
  Vec jacobi;            // rough_laplacian - curvature_term
};

inline JacobiTerms jacobi_terms(const SectionAlongMap& V, const Point& p,
                                DerivativeMode mode = DerivativeMode::Analytic) {
  const SmoothMap& phi = V.base;
  const Manifold& N = phi.codomain;
  const auto frame = orthonormal_frame(phi.domain, p);
  const int m = phi.domain.dim();
  const int l = N.ambient_dim();
  JacobiTerms t;
  t.dphi.resize(l, m);
  t.nabla.resize(l, m);
  t.rough_laplacian = Vec::Zero(l);
  t.curvature_term = Vec::Zero(l);
  for (int i = 0; i < m; ++i) {
    const CurveJet yj = map_curve_jet(phi, p.ambient, frame[i].ambient, mode);
    const CurveJet vj = section_curve_jet(V, p.ambient, frame[i].ambient, mode);
    if (i == 0) {
      t.image = yj.x;
      t.value = N.project_tangent(yj.x, vj.x);
    }
    t.dphi.col(i) = yj.v;
    t.nabla.col(i) = N.project_tangent(yj.x, vj.v);
    const Vec second = vj.a + N.projector_derivative_apply(yj.x, yj.v, vj.v);
    t.rough_laplacian -= N.project_tangent(yj.x, second);
  }
  for (int i = 0; i < m; ++i)
    t.curvature_term += N.curvature_ambient(t.image, t.dphi.col(i), t.value, t.dphi.col(i));
  t.jacobi = t.rough_laplacian - t.curvature_term;
  return t;
}

inline TangentVector rough_laplacian_at(const SectionAlongMap& V, const Point& p) {
  const JacobiTerms t = jacobi_terms(V, p);
  const Manifold& N = V.base.codomain;
  return tangent_from_ambient(N, make_point(N, t.image), t.rough_laplacian);
}

inline TangentVector curvature_term_at(const SectionAlongMap& V, const Point& p) {
  const JacobiTerms t = jacobi_terms(V, p);
  const Manifold& N = V.base.codomain;
  return tangent_from_ambient(N, make_point(N, t.image), t.curvature_term);
}

struct JacobiValue {
  TangentVector value;
  /// Set when |tau_phi(p)| exceeds the harmonicity tolerance; the operator
  /// is still evaluated.
  bool not_harmonic_warning = false;
};

inline JacobiValue jacobi_apply_at(const SectionAlongMap& V, const Point& p,
                                   double harmonic_tolerance = kHarmonicTolerance) {
  const JacobiTerms t = jacobi_terms(V, p);
  const Manifold& N = V.base.codomain;
  return {tangent_from_ambient(N, make_point(N, t.image), t.jacobi),
          tension_ambient(V.base, p).norm() > harmonic_tolerance};
}

/// Independent route for the rough Laplacian: trace of second_cov_derivative_at.
inline Vec trace_second_cov(const SectionAlongMap& V, const Point& p) {
  Vec acc = Vec::Zero(V.base.codomain.ambient_dim());
  for (const auto& e : orthonormal_frame(V.base.domain, p)) acc += second_cov_derivative_at(V, p, e, e).ambient;
  return acc;
}

// ---- composition law ------------------------------------------------------------------------

struct CompositionResidual {
  double residual = 0.0;   // |J^{psi o phi}(V o phi) - lambda^2 J^psi(V) o phi|
  double lambda = 0.0;
  double lhs_norm = 0.0;
  double rhs_norm = 0.0;
  double jpsi_norm = 0.0;  // |J^psi V| at phi(p)
};

inline bool same_map(const SmoothMap& a, const SmoothMap& b) {
  return a.name == b.name && a.domain == b.domain && a.codomain == b.codomain;
}

inline CompositionResidual composition_residual_at(const SmoothMap& phi, const SmoothMap& psi,
                                                   const SectionAlongMap& V, const Point& p) {
  if (!same_map(V.base, psi)) throw Error(ErrorCode::DomainMismatch, V.name + " is not a section along " + psi.name);
  const SectionAlongMap W = pull_back_section(V, phi);  // also checks phi/psi compatibility
  const JacobiTerms lhs = jacobi_terms(W, p);
  const Point q = make_point(phi.codomain, phi.eval(p.ambient));
  const JacobiTerms rhs = jacobi_terms(V, q);
  const double lambda = conformality_at(phi, p).lambda;
  CompositionResidual r;
  r.lambda = lambda;
  r.lhs_norm = lhs.jacobi.norm();
  r.jpsi_norm = rhs.jacobi.norm();
  r.rhs_norm = lambda * lambda * r.jpsi_norm;
  r.residual = (lhs.jacobi - lambda * lambda * rhs.jacobi).norm();
  return r;
}

/// |trace R(d(psi o phi), W) d(psi o phi) - lambda^2 trace R(dpsi, V) dpsi o phi|.
inline double curvature_scaling_residual(const SmoothMap& phi, const SectionAlongMap& V, const Point& p) {
  const SectionAlongMap W = pull_back_section(V, phi);
  const JacobiTerms lhs = jacobi_terms(W, p);
  const JacobiTerms rhs = jacobi_terms(V, make_point(phi.codomain, phi.eval(p.ambient)));
  const double lambda = conformality_at(phi, p).lambda;
  return (lhs.curvature_term - lambda * lambda * rhs.curvature_term).norm();
}

/// Builds e_i, f_i with dphi(e_i) = lambda f_i from the SVD of dphi and
/// returns max_i |dphi(e_i) - lambda f_i| over the horizontal directions.
inline double adapted_frame_residual(const SmoothMap& phi, const Point& p) {
  Mat F;
  const Mat A = differential_matrix(phi, p, &F);
  const double lambda = conformality_at(phi, p).lambda;
  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const int n = phi.codomain.dim();
  double worst = 0.0;
  for (int i = 0; i < n && i < A.cols(); ++i) {
    const Vec e = svd.matrixV().col(i);  // domain frame coordinates
    const Vec f = F * svd.matrixU().col(i);
    const Vec dphi_e = F * (A * e);
    worst = std::max(worst, (dphi_e - lambda * f).norm());
  }
  return worst;
}

/// Frame-field route for the tension: the chart Gram-Schmidt frame is
/// extended as a field, and both sums sum_i dphi(grad^M_{e_i} e_i) and
/// sum_i grad^phi_{e_i}(dphi(e_i)) are returned (their difference is tau).
struct FrameSums {
  Vec dphi_of_connection;  // sum_i dphi(grad^M_{e_i} e_i)
  Vec pullback_of_dphi;    // sum_i grad^phi_{e_i} dphi(e_i)
};

inline FrameSums frame_field_sums(const SmoothMap& phi, const Point& p, double h = 1e-5) {
  const Manifold& M = phi.domain;
  const Manifold& N = phi.codomain;
  const int m = M.dim();
  const auto frame0 = orthonormal_frame(M, p);
  auto frame_at = [&](const Vec& u) { return orthonormal_frame(M, point_from_chart(M, p.chart, u)); };
  auto dphi = [&](const Vec& x, const Vec& v) { return map_curve_jet(phi, x, v).v; };
  const Vec y0 = phi.eval(p.ambient);
  FrameSums s{Vec::Zero(N.ambient_dim()), Vec::Zero(N.ambient_dim())};
  for (int i = 0; i < m; ++i) {
    const Vec c = frame0[i].components;
    const auto fp = frame_at(p.coords + h * c);
    const auto fm = frame_at(p.coords - h * c);
    const Vec de = (fp[i].ambient - fm[i].ambient) / (2.0 * h);
    const Vec conn = M.project_tangent(p.ambient, de);
    s.dphi_of_connection += dphi(p.ambient, conn);
    const Vec dv = (dphi(fp[i].base.ambient, fp[i].ambient) - dphi(fm[i].base.ambient, fm[i].ambient)) / (2.0 * h);
    s.pullback_of_dphi += N.project_tangent(y0, dv);
  }
  return s;
}

// ---- integrals ------------------------------------------------------------------------------------

inline double energy(const SmoothMap& phi, const Grid& grid) {
  const auto dens = parallel_map<double>(grid.size(), [&](std::size_t i) {
    double e = 0.0;
    for (const auto& f : orthonormal_frame(phi.domain, grid[i].point))
      e += map_curve_jet(phi, grid[i].point.ambient, f.ambient).v.squaredNorm();
    return 0.5 * e * grid[i].weight;
  });
  double total = 0.0;
  for (double d : dens) total += d;
  return total;
}

/// int <J^phi V, W> over the grid.
inline double hessian_form(const SectionAlongMap& V, const SectionAlongMap& W, const Grid& grid) {
  if (!same_map(V.base, W.base)) throw Error(ErrorCode::DomainMismatch, "sections along different maps");
  const auto vals = parallel_map<double>(grid.size(), [&](std::size_t i) {
    const JacobiTerms t = jacobi_terms(V, grid[i].point);
    const Vec w = V.base.codomain.project_tangent(t.image, W.eval(grid[i].point.ambient));
    return grid[i].weight * t.jacobi.dot(w);
  });
  double total = 0.0;
  for (double v : vals) total += v;
  return total;
}

/// int <A, B> over the grid for two sections along the same map.
inline double l2_inner(const SectionAlongMap& A, const SectionAlongMap& B, const Grid& grid) {
  double total = 0.0;
  for (const auto& g : grid) total += g.weight * A.eval(g.point.ambient).dot(B.eval(g.point.ambient));
  return total;
}

}  // namespace hmjacobi
