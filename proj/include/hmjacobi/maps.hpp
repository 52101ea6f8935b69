// Smooth maps between model manifolds: differentials, the vertical and
// horizontal splitting, dilation, tension field and harmonic-morphism checks.
#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SVD>

#include "hmjacobi/geometry.hpp"
#include "hmjacobi/parallel.hpp"

namespace hmjacobi {

enum class DerivativeMode { Analytic, FiniteDifference };

struct SmoothMap {
  std::string name;
  Manifold domain;
  Manifold codomain;
  std::function<Vec(const Vec&)> eval;
  /// Exact curve jets; empty for maps known only pointwise.
  std::function<JetVec(const JetVec&)> eval_jet;
  /// Points of the fiber through x (x included), when the fibers are known.
  std::function<std::vector<Vec>(const Vec&, int)> fiber_sampler;
};

/// Builds a map from a generic callable usable with both double and Jet.
template <class F>
SmoothMap make_map(std::string name, Manifold domain, Manifold codomain, F f) {
  SmoothMap m{std::move(name), std::move(domain), std::move(codomain), {}, {}, {}};
  m.eval = [f](const Vec& x) -> Vec { return f(x); };
  m.eval_jet = [f](const JetVec& x) -> JetVec { return f(x); };
  return m;
}

inline SmoothMap without_jets(SmoothMap m) {
  m.eval_jet = nullptr;
  m.name += "[fd]";
  return m;
}

// ---- finite-difference jets ----------------------------------------------------

struct FdSteps {
  double first = 1e-5;
  double second = 1e-3;  // coarse step of the Richardson pair (h, h/2)
};

/// Jet of t -> g(exp(t v)) by central differences; g returns codomain points.
template <class G>
CurveJet fd_curve_jet(const Manifold& dom, const Manifold& cod, const Vec& x, const Vec& v, G&& g,
                      FdSteps steps = {}) {
  const Vec g0 = g(x);
  auto at = [&](double t) { return g(exponential_ambient(dom, x, v, t)); };
  auto delta = [&](const Vec& a, const Vec& b) { return cod.ambient_delta(a, b); };
  const double h1 = steps.first;
  const Vec d1 = delta(at(h1), at(-h1)) / (2.0 * h1);
  auto second = [&](double h) { return Vec((delta(at(h), g0) + delta(at(-h), g0)) / (h * h)); };
  const double h2 = steps.second;
  const Vec d2 = (4.0 * second(0.5 * h2) - second(h2)) / 3.0;
  return {g0, d1, d2};
}

/// 2-jet of phi along the domain geodesic through x with velocity v.
inline CurveJet map_curve_jet(const SmoothMap& phi, const Vec& x, const Vec& v,
                              DerivativeMode mode = DerivativeMode::Analytic) {
  if (mode == DerivativeMode::Analytic && phi.eval_jet)
    return from_jet(phi.eval_jet(to_jet(phi.domain.geodesic_jet(x, v))));
  return fd_curve_jet(phi.domain, phi.codomain, x, v, phi.eval);
}

// ---- differentials ---------------------------------------------------------------

inline Point map_point(const SmoothMap& phi, const Point& p) { return make_point(phi.codomain, phi.eval(p.ambient)); }

inline TangentVector differential_at(const SmoothMap& phi, const Point& p, const TangentVector& X,
                                     DerivativeMode mode = DerivativeMode::Analytic) {
  require_same_base(p, X);
  const CurveJet j = map_curve_jet(phi, p.ambient, X.ambient, mode);
  const Point q = make_point(phi.codomain, j.x);
  return tangent_from_ambient(phi.codomain, q, j.v);
}

/// Ambient columns dphi(e_i) for the orthonormal frame at p.
struct FramedDifferential {
  std::vector<TangentVector> frame;  // on the domain
  Mat columns;                       // ambient codomain vectors, one per frame vector
  Vec image;                         // phi(p)
};

inline FramedDifferential framed_differential(const SmoothMap& phi, const Point& p,
                                              DerivativeMode mode = DerivativeMode::Analytic) {
  FramedDifferential fd{orthonormal_frame(phi.domain, p), Mat(phi.codomain.ambient_dim(), phi.domain.dim()),
                        Vec()};
  for (int i = 0; i < phi.domain.dim(); ++i) {
    const CurveJet j = map_curve_jet(phi, p.ambient, fd.frame[i].ambient, mode);
    fd.columns.col(i) = j.v;
    if (i == 0) fd.image = j.x;
  }
  return fd;
}

/// dphi_p as an n x m matrix in orthonormal frames of domain and codomain.
inline Mat differential_matrix(const SmoothMap& phi, const Point& p, Mat* codomain_frame = nullptr,
                               std::vector<TangentVector>* domain_frame = nullptr) {
  FramedDifferential fd = framed_differential(phi, p);
  const Mat F = ambient_frame(phi.codomain, fd.image);
  if (codomain_frame) *codomain_frame = F;
  if (domain_frame) *domain_frame = fd.frame;
  return F.transpose() * fd.columns;
}

inline constexpr double kKernelThreshold = 1e-9;
inline constexpr double kCriticalThreshold = 1e-8;
inline constexpr double kConformalityTolerance = 1e-6;
inline constexpr double kHarmonicTolerance = 1e-5;

struct Splitting {
  std::vector<TangentVector> vertical;
  std::vector<TangentVector> horizontal;
};

inline Splitting vertical_horizontal_split(const SmoothMap& phi, const Point& p) {
  std::vector<TangentVector> frame;
  const Mat A = differential_matrix(phi, p, nullptr, &frame);
  const int m = phi.domain.dim();
  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullV);
  const Vec sigma = svd.singularValues();
  const Mat V = svd.matrixV();
  Mat E(phi.domain.ambient_dim(), m);
  for (int i = 0; i < m; ++i) E.col(i) = frame[i].ambient;
  Splitting out;
  for (int c = 0; c < m; ++c) {
    const double s = c < sigma.size() ? sigma(c) : 0.0;
    const Vec amb = E * V.col(c);
    auto tv = tangent_from_ambient(phi.domain, p, amb);
    (s > kKernelThreshold ? out.horizontal : out.vertical).push_back(std::move(tv));
  }
  return out;
}

struct ConformalityReport {
  double lambda = 0.0;
  double residual = 0.0;
  int rank = 0;
  bool is_critical = false;
  bool indeterminate = false;
};

/// Non-throwing core of dilation_at; residual is relative to lambda^2.
inline ConformalityReport conformality_at(const SmoothMap& phi, const Point& p) {
  const Mat A = differential_matrix(phi, p);
  const int n = phi.codomain.dim();
  const Vec sigma = Eigen::JacobiSVD<Mat>(A).singularValues();
  ConformalityReport r;
  const double smax = sigma.size() ? sigma(0) : 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) > kKernelThreshold) ++r.rank;
  if (smax < kCriticalThreshold) {
    r.is_critical = true;
    r.indeterminate = smax > 0.1 * kCriticalThreshold;
    return r;
  }
  if (sigma.size() < n || r.rank < n) {
    r.lambda = smax;
    r.residual = 1.0;
    return r;
  }
  double lam2 = 0.0;
  for (int i = 0; i < n; ++i) lam2 += sigma(i) * sigma(i);
  lam2 /= n;
  double res = 0.0;
  for (int i = 0; i < n; ++i) res = std::max(res, std::abs(sigma(i) * sigma(i) - lam2) / lam2);
  r.lambda = std::sqrt(lam2);
  r.residual = res;
  r.indeterminate = smax < 10.0 * kCriticalThreshold ||
                    (res > 0.1 * kConformalityTolerance && res <= kConformalityTolerance);
  return r;
}

inline ConformalityReport dilation_at(const SmoothMap& phi, const Point& p) {
  ConformalityReport r = conformality_at(phi, p);
  if (!r.is_critical && r.residual > kConformalityTolerance)
    throw Error(ErrorCode::NotHorizontallyConformal,
                phi.name + ": horizontal conformality residual " + std::to_string(r.residual));
  return r;
}

// ---- tension field ------------------------------------------------------------------

/// tau = sum_i grad^phi_{e_i} dphi(e_i) - dphi(grad_{e_i} e_i), evaluated with
/// the frame extended along geodesics, so the second term vanishes at p.
inline Vec tension_ambient(const SmoothMap& phi, const Point& p, DerivativeMode mode = DerivativeMode::Analytic) {
  const auto frame = orthonormal_frame(phi.domain, p);
  Vec acc = Vec::Zero(phi.codomain.ambient_dim());
  Vec y;
  for (const auto& e : frame) {
    const CurveJet j = map_curve_jet(phi, p.ambient, e.ambient, mode);
    acc += j.a;
    y = j.x;
  }
  return phi.codomain.project_tangent(y, acc);
}

inline TangentVector tension_field_at(const SmoothMap& phi, const Point& p) {
  const Vec t = tension_ambient(phi, p);
  return tangent_from_ambient(phi.codomain, map_point(phi, p), t);
}

struct HarmonicityReport {
  double residual = 0.0;
  bool harmonic = false;
};

inline HarmonicityReport harmonicity_report(const SmoothMap& phi, const Grid& grid,
                                            double tolerance = kHarmonicTolerance) {
  const auto norms =
      parallel_map<double>(grid.size(), [&](std::size_t i) { return tension_ambient(phi, grid[i].point).norm(); });
  HarmonicityReport r;
  for (double n : norms) r.residual = std::max(r.residual, n);
  r.harmonic = r.residual < tolerance;
  return r;
}

// ---- morphism classification ----------------------------------------------------------

struct MorphismReport {
  double harmonic_residual = 0.0;
  double conformality_residual = 0.0;  // worst over non-critical grid points
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  int indeterminate_points = 0;
  std::vector<Vec> critical_points;
  bool is_harmonic = false;
  bool is_morphism = false;
};

namespace detail {

inline double lambda_squared(const SmoothMap& phi, const Vec& y) {
  const double l = conformality_at(phi, make_point(phi.domain, y)).lambda;
  return l * l;
}

/// Drives lambda^2 to a zero from a seed point (lambda^2 is smooth and
/// vanishes quadratically at isolated critical points).
inline Vec descend_to_critical(const SmoothMap& phi, Vec y, double scale2) {
  const Manifold& M = phi.domain;
  double f = lambda_squared(phi, y);
  for (int it = 0; it < 60 && f > 1e-24 * scale2; ++it) {
    const Point p = make_point(M, y);
    const auto frame = orthonormal_frame(M, p);
    const double h = std::min(1e-3, 0.1 * std::sqrt(f / scale2));
    Vec grad = Vec::Zero(M.ambient_dim());
    for (const auto& e : frame) {
      const double fp = lambda_squared(phi, exponential_ambient(M, y, e.ambient, h));
      const double fm = lambda_squared(phi, exponential_ambient(M, y, e.ambient, -h));
      grad += (fp - fm) / (2.0 * h) * e.ambient;
    }
    const double g2 = grad.squaredNorm();
    if (!(g2 > 0)) break;
    Vec step = -(2.0 * f / g2) * grad;
    if (step.norm() > 0.5) step *= 0.5 / step.norm();
    bool improved = false;
    for (int bt = 0; bt < 40; ++bt) {
      const Vec cand = exponential_ambient(M, y, step, 1.0);
      const double fc = lambda_squared(phi, cand);
      if (fc < f) {
        y = cand;
        f = fc;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  return y;
}

}  // namespace detail

inline MorphismReport morphism_report(const SmoothMap& phi, const Grid& grid,
                                      double harmonic_tolerance = kHarmonicTolerance) {
  MorphismReport r;
  r.harmonic_residual = harmonicity_report(phi, grid, harmonic_tolerance).residual;
  r.is_harmonic = r.harmonic_residual < harmonic_tolerance;
  const auto conf =
      parallel_map<ConformalityReport>(grid.size(), [&](std::size_t i) { return conformality_at(phi, grid[i].point); });
  r.lambda_min = std::numeric_limits<double>::infinity();
  for (const auto& c : conf) {
    if (!c.is_critical) r.conformality_residual = std::max(r.conformality_residual, c.residual);
    r.lambda_min = std::min(r.lambda_min, c.lambda);
    r.lambda_max = std::max(r.lambda_max, c.lambda);
    if (c.indeterminate) ++r.indeterminate_points;
  }
  const double scale2 = std::max(1e-300, r.lambda_max * r.lambda_max);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (conf[i].lambda * conf[i].lambda > 0.05 * scale2) continue;
    const Vec y = conf[i].is_critical ? grid[i].point.ambient
                                      : detail::descend_to_critical(phi, grid[i].point.ambient, scale2);
    const auto c = conformality_at(phi, make_point(phi.domain, y));
    if (!c.is_critical && c.lambda > 1e-6 * std::sqrt(scale2)) continue;
    bool seen = false;
    for (const auto& q : r.critical_points)
      if (phi.domain.ambient_delta(q, y).norm() < 1e-5) seen = true;
    if (!seen) r.critical_points.push_back(y);
  }
  r.is_morphism = r.is_harmonic && r.conformality_residual <= kConformalityTolerance;
  return r;
}

// ---- composition ------------------------------------------------------------------------

/// psi o phi.
inline SmoothMap compose(const SmoothMap& phi, const SmoothMap& psi) {
  if (!(phi.codomain == psi.domain))
    throw Error(ErrorCode::DomainMismatch,
                "cannot compose " + phi.name + " -> " + phi.codomain.name() + " with " + psi.name + " on " +
                    psi.domain.name());
  SmoothMap m{"(" + psi.name + " o " + phi.name + ")", phi.domain, psi.codomain, {}, {}, {}};
  m.eval = [f = phi.eval, g = psi.eval](const Vec& x) { return g(f(x)); };
  if (phi.eval_jet && psi.eval_jet)
    m.eval_jet = [f = phi.eval_jet, g = psi.eval_jet](const JetVec& x) { return g(f(x)); };
  return m;
}

}  // namespace hmjacobi
