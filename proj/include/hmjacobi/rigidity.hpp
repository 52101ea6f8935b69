// Harmonic variations of maps into spheres: membership in J, K and H,
// projectability, skew-generator fits and rotation-flow comparison.
#pragma once

#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "hmjacobi/catalog.hpp"

namespace hmjacobi {

struct RigidityTolerances {
  double jacobi = 1e-5;
  double k_condition = 1e-6;
  double norm_variation = 1e-6;  // (max - min) / max
  double projectability = 1e-8;
  double flow_tension = 1e-4;
  double fit = 1e-8;
  double flow_mismatch = 1e-6;
  double geodesic = 1e-6;
  double condition = 1e8;
};

/// Element of so(n+1), kept as the strictly lower triangle so X^T = -X holds exactly.
class SkewGenerator {
 public:
  explicit SkewGenerator(int size) : size_(size), lower_(Vec::Zero(size * (size - 1) / 2)) {}

  static SkewGenerator from_matrix(const Mat& A) {
    SkewGenerator g(static_cast<int>(A.rows()));
    int idx = 0;
    for (int i = 1; i < g.size_; ++i)
      for (int j = 0; j < i; ++j) g.lower_(idx++) = 0.5 * (A(i, j) - A(j, i));
    return g;
  }
  static SkewGenerator from_coefficients(int size, const Vec& lower) {
    SkewGenerator g(size);
    g.lower_ = lower;
    return g;
  }

  int size() const { return size_; }
  const Vec& coefficients() const { return lower_; }
  /// Basis element for coefficient slot idx: e_i e_j^T - e_j e_i^T with i > j.
  static Mat basis(int size, int idx) {
    for (int i = 1, k = 0; i < size; ++i)
      for (int j = 0; j < i; ++j, ++k)
        if (k == idx) return so_basis(size, i, j);
    throw Error(ErrorCode::InvalidArgument, "so basis index out of range");
  }
  Mat matrix() const {
    Mat X = Mat::Zero(size_, size_);
    int idx = 0;
    for (int i = 1; i < size_; ++i)
      for (int j = 0; j < i; ++j, ++idx) {
        X(i, j) = lower_(idx);
        X(j, i) = -lower_(idx);
      }
    return X;
  }
  Vec apply(const Vec& y) const { return matrix() * y; }
  /// g_t = exp(t X).
  Mat flow(double t) const { return (t * matrix()).exp(); }

 private:
  int size_;
  Vec lower_;
};

struct VariationReport {
  double jacobi_residual = 0.0;
  double k_residual = 0.0;
  double norm_variation = 0.0;  // max |V| - min |V|
  double norm_max = 0.0;
  std::optional<double> projectability_residual;
  bool in_J = false;
  bool in_K = false;
  bool in_H = false;
};

namespace detail {

inline void require_sphere_codomain(const SmoothMap& phi) {
  if (phi.codomain.kind() != ManifoldKind::Sphere)
    throw Error(ErrorCode::InvalidArgument, phi.name + ": codomain must be a sphere");
}

}  // namespace detail

inline double k_condition_at(const SectionAlongMap& V, const Point& p) {
  const JacobiTerms t = jacobi_terms(V, p);
  double s = 0.0;
  for (Eigen::Index i = 0; i < t.dphi.cols(); ++i) s += t.dphi.col(i).dot(t.nabla.col(i));
  return s;
}

/// max over the grid of |sum_i <dphi(e_i), grad^phi_{e_i} V>|.
inline double k_condition_residual(const SectionAlongMap& V, const Grid& grid) {
  const auto v = parallel_map<double>(grid.size(), [&](std::size_t i) { return std::abs(k_condition_at(V, grid[i].point)); });
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

inline double jacobi_residual(const SectionAlongMap& V, const Grid& grid) {
  const auto v = parallel_map<double>(grid.size(), [&](std::size_t i) { return jacobi_terms(V, grid[i].point).jacobi.norm(); });
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

inline constexpr int kDefaultFiberSamples = 20;

/// max over grid points x and fiber points x' of |V(x) - V(x')|.
inline double projectability_residual(const SectionAlongMap& V, const Grid& grid, int fiber_samples = kDefaultFiberSamples) {
  if (!V.base.fiber_sampler)
    throw Error(ErrorCode::FiberSamplingUnavailable, V.base.name + " has no fiber sampler");
  const auto v = parallel_map<double>(grid.size(), [&](std::size_t i) {
    const Vec& x = grid[i].point.ambient;
    const Vec v0 = V.eval(x);
    double worst = 0.0;
    for (const Vec& xp : V.base.fiber_sampler(x, fiber_samples)) worst = std::max(worst, (V.eval(xp) - v0).norm());
    return worst;
  });
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

inline VariationReport variation_report(const SectionAlongMap& V, const Grid& grid, const RigidityTolerances& tol = {},
                                        bool with_projectability = false) {
  VariationReport r;
  r.jacobi_residual = jacobi_residual(V, grid);
  r.k_residual = k_condition_residual(V, grid);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& g : grid) {
    const double n = V.eval(g.point.ambient).norm();
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  r.norm_max = hi;
  r.norm_variation = grid.empty() ? 0.0 : hi - lo;
  if (with_projectability) r.projectability_residual = projectability_residual(V, grid);
  r.in_J = r.jacobi_residual < tol.jacobi;
  r.in_K = r.in_J && r.k_residual < tol.k_condition;
  r.in_H = r.in_K && (hi == 0.0 || r.norm_variation / hi < tol.norm_variation);
  return r;
}

/// phi_t(x) = exp_{phi(x)}(t V(x)) for a map into a sphere.
inline SmoothMap variation_flow(const SectionAlongMap& V, double t) {
  const SmoothMap& phi = V.base;
  detail::require_sphere_codomain(phi);
  const double r2 = phi.codomain.radius() * phi.codomain.radius();
  const int l = phi.codomain.ambient_dim();
  auto body = [t, r2, l](const auto& y, auto v) {
    using S = detail::scalar_of<decltype(y)>;
    S dot(0.0);
    for (int i = 0; i < l; ++i) dot += v(i) * y(i);
    for (int i = 0; i < l; ++i) v(i) -= dot * y(i) / S(r2);
    S n2(0.0);
    for (int i = 0; i < l; ++i) n2 += v(i) * v(i);
    const S s = n2 * S(t * t / r2);
    const S c = cos_sqrt(s), sn = sinc_sqrt(s) * S(t);
    VecT<S> out(l);
    for (int i = 0; i < l; ++i) out(i) = c * y(i) + sn * v(i);
    return out;
  };
  std::ostringstream os;
  os << "exp(" << t << " " << V.name << ")";
  SmoothMap m{os.str(), phi.domain, phi.codomain, {}, {}, {}};
  m.eval = [f = phi.eval, g = V.eval, body](const Vec& x) -> Vec { return body(f(x), g(x)); };
  if (phi.eval_jet && V.eval_jet)
    m.eval_jet = [f = phi.eval_jet, g = V.eval_jet, body](const JetVec& x) -> JetVec { return body(f(x), g(x)); };
  return m;
}

struct HarmonicVariationCheck {
  VariationReport report;
  std::vector<double> t_samples;
  std::vector<double> flow_tension;  // harmonicity residual of phi_t per t
  bool criteria_verdict = false;     // V in H(phi)
  bool flow_verdict = false;         // all phi_t harmonic
  bool agree = false;
};

inline HarmonicVariationCheck harmonic_variation_check(const SectionAlongMap& V, const Grid& grid,
                                                       const std::vector<double>& t_samples,
                                                       const RigidityTolerances& tol = {}) {
  detail::require_sphere_codomain(V.base);
  HarmonicVariationCheck out;
  out.report = variation_report(V, grid, tol);
  out.t_samples = t_samples;
  double worst = 0.0;
  for (double t : t_samples) {
    const double tau = harmonicity_report(variation_flow(V, t), grid).residual;
    out.flow_tension.push_back(tau);
    worst = std::max(worst, tau);
  }
  out.criteria_verdict = out.report.in_H;
  out.flow_verdict = worst < tol.flow_tension;
  out.agree = out.criteria_verdict == out.flow_verdict;
  return out;
}

struct SkewFit {
  SkewGenerator generator;
  double fit_residual = 0.0;  // RMS of |V(x) - X phi(x)| over the grid
  double condition_number = 0.0;
};

/// Least squares X in so(n+1) minimizing sum_grid |V(x) - X phi(x)|^2, uniform weights.
inline SkewFit fit_skew_generator(const SectionAlongMap& V, const Grid& grid, const RigidityTolerances& tol = {}) {
  const SmoothMap& phi = V.base;
  detail::require_sphere_codomain(phi);
  const int l = phi.codomain.ambient_dim();
  const int K = l * (l - 1) / 2;
  const int P = static_cast<int>(grid.size());
  Mat A(P * l, K);
  Vec b(P * l);
  std::vector<Mat> basis;
  for (int k = 0; k < K; ++k) basis.push_back(SkewGenerator::basis(l, k));
  for (int i = 0; i < P; ++i) {
    const Vec& x = grid[i].point.ambient;
    const Vec y = phi.eval(x);
    for (int k = 0; k < K; ++k) A.block(i * l, k, l, 1) = basis[k] * y;
    b.segment(i * l, l) = V.eval(x);
  }
  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  if (!(cond <= tol.condition))
    throw Error(ErrorCode::IllConditionedFit, "grid images of " + phi.name + " do not determine so(n+1)");
  const Vec coef = svd.solve(b);
  SkewFit fit{SkewGenerator::from_coefficients(l, coef), 0.0, cond};
  fit.fit_residual = std::sqrt((A * coef - b).squaredNorm() / std::max(1, P));
  return fit;
}

enum class RigidityOutcome { Checked, NotApplicable };

struct LocalRigidityResult {
  RigidityOutcome outcome = RigidityOutcome::Checked;
  std::string note;
  double flow_mismatch = 0.0;     // max |exp(t V_x) - g_t(phi(x))|
  double geodesic_residual = 0.0; // max |grad_X X| over a codomain grid
};

/// |grad_X X| = |P(X^2 y)| maximized over a codomain quadrature grid.
inline double geodesic_field_residual(const SkewGenerator& X, const Manifold& sphere, int resolution = 16) {
  const Mat X2 = X.matrix() * X.matrix();
  double worst = 0.0;
  for (const auto& g : quadrature_grid(sphere, resolution))
    worst = std::max(worst, sphere.project_tangent(g.point.ambient, X2 * g.point.ambient).norm());
  return worst;
}

inline LocalRigidityResult local_rigidity_check(const SectionAlongMap& V, const SkewGenerator& X, const Grid& grid,
                                                const std::vector<double>& t_samples,
                                                const RigidityTolerances& tol = {}) {
  const SmoothMap& phi = V.base;
  detail::require_sphere_codomain(phi);
  LocalRigidityResult res;
  const int n = phi.codomain.dim();
  if (n % 2 == 0) {
    res.outcome = RigidityOutcome::NotApplicable;
    res.note = "codomain dimension " + std::to_string(n) + " is even; local rigidity adds nothing here";
    return res;
  }
  if (X.size() != phi.codomain.ambient_dim()) throw Error(ErrorCode::DomainMismatch, "generator size does not match codomain");
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& g : grid) {
    const double nv = V.eval(g.point.ambient).norm();
    lo = std::min(lo, nv);
    hi = std::max(hi, nv);
  }
  if (hi > 0.0 && (hi - lo) / hi >= tol.norm_variation)
    throw Error(ErrorCode::NotConstantNorm, V.name + ": |V| varies by " + std::to_string(hi - lo));
  for (double t : t_samples) {
    const SmoothMap flow = variation_flow(V, t);
    const Mat g = X.flow(t);
    for (const auto& gp : grid) {
      const Vec& x = gp.point.ambient;
      res.flow_mismatch = std::max(res.flow_mismatch, (flow.eval(x) - g * phi.eval(x)).norm());
    }
  }
  res.geodesic_residual = geodesic_field_residual(X, phi.codomain);
  return res;
}

/// The field x -> X phi(x) along phi.
inline SectionAlongMap generator_section(const SkewGenerator& X, const SmoothMap& phi, const std::string& name) {
  return compose_field(linear_field(name, phi.codomain, X.matrix()), phi);
}

/// V + eps * U, where U = x_0 * W(phi(x)) is RMS-normalized over the grid; U
/// changes sign along fibers that are invariant under x -> -x.
inline SectionAlongMap perturb_section(const SectionAlongMap& V, const VectorField& W, double eps, const Grid& grid) {
  const SmoothMap& phi = V.base;
  auto f = phi.eval;
  auto w = W.eval;
  double ss = 0.0;
  for (const auto& g : grid) ss += (g.point.ambient(0) * w(f(g.point.ambient))).squaredNorm();
  const double scale = eps / std::sqrt(ss / std::max<std::size_t>(1, grid.size()));
  SectionAlongMap out{V.name + "+perturbation", phi, {}, {}, std::nullopt};
  out.eval = [v = V.eval, f, w, scale](const Vec& x) { return Vec(v(x) + scale * x(0) * w(f(x))); };
  if (V.eval_jet && phi.eval_jet && W.eval_jet)
    out.eval_jet = [v = V.eval_jet, f = phi.eval_jet, w = W.eval_jet, scale](const JetVec& x) {
      return JetVec(v(x) + w(f(x)) * (x(0) * Jet(scale)));
    };
  return out;
}

}  // namespace hmjacobi
