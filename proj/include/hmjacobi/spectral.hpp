// Galerkin representation of the Jacobi operator along maps with circle
// domain: Fourier modes times a closed parallel frame of phi^{-1}TN.
#pragma once

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "hmjacobi/jacobi.hpp"

namespace hmjacobi {

/// Closed orthonormal frame along s -> phi(x(s)), s the arclength of the domain circle.
struct CircleFrame {
  int samples = 0;
  double length = 0.0;
  double radius = 1.0;
  std::vector<Vec> points;   // domain points x(s_i)
  std::vector<Vec> images;   // phi(x(s_i))
  std::vector<Vec> speed;    // dphi(d/ds)
  std::vector<Mat> frames;   // columns E_j(s_i)
  Mat holonomy;              // E(0)^T E~(L) before correction
  Mat omega;                 // grad_s E = E omega after correction
  double closure_error = 0.0;
};

namespace detail {

inline Vec circle_point(double r, double s) {
  Vec x(2);
  x << r * std::cos(s / r), r * std::sin(s / r);
  return x;
}

inline Vec circle_tangent(double r, double s) {
  Vec v(2);
  v << -std::sin(s / r), std::cos(s / r);
  return v;
}

/// Skew logarithm of a rotation matrix.
inline Mat rotation_log(const Mat& H) {
  const int r = static_cast<int>(H.rows());
  if (r == 1) return Mat::Zero(1, 1);
  if (r == 2) {
    const double a = std::atan2(H(1, 0), H(0, 0));
    Mat L(2, 2);
    L << 0, -a, a, 0;
    return L;
  }
  if (r == 3) {
    const double c = std::clamp(0.5 * (H.trace() - 1.0), -1.0, 1.0);
    const double a = std::acos(c);
    Eigen::Vector3d w;
    if (a < 1e-12) return Mat::Zero(3, 3);
    if (kPi - a > 1e-6) {
      w << H(2, 1) - H(1, 2), H(0, 2) - H(2, 0), H(1, 0) - H(0, 1);
      w *= a / (2.0 * std::sin(a));
    } else {
      const Mat B = 0.5 * (H + Mat::Identity(3, 3));
      Eigen::Index col;
      B.diagonal().maxCoeff(&col);
      w = B.col(col).normalized() * a;
    }
    Mat L(3, 3);
    L << 0, -w(2), w(1), w(2), 0, -w(0), -w(1), w(0), 0;
    return L;
  }
  const Mat L = H.log();
  return 0.5 * (L - L.transpose());
}

}  // namespace detail

/// Parallel transport along the image curve by RK4 (E' = P'(y; y') E),
/// then a constant rotation E(s) = E~(s) exp(-(s/L) log H) closes the frame.
inline CircleFrame build_circle_frame(const SmoothMap& phi, int samples) {
  const Manifold& M = phi.domain;
  const Manifold& N = phi.codomain;
  if (M.kind() != ManifoldKind::Sphere || M.dim() != 1)
    throw Error(ErrorCode::UnsupportedDomain, "spectral assembly needs a circle domain, got " + M.name());
  CircleFrame cf;
  cf.samples = samples;
  cf.radius = M.radius();
  cf.length = kTwoPi * cf.radius;
  const double r = cf.radius, L = cf.length;
  auto curve = [&](double s) { return map_curve_jet(phi, detail::circle_point(r, s), detail::circle_tangent(r, s)); };
  auto rhs = [&](double s, const Mat& E) {
    const CurveJet c = curve(s);
    Mat out(E.rows(), E.cols());
    for (Eigen::Index j = 0; j < E.cols(); ++j) out.col(j) = N.projector_derivative_apply(c.x, c.v, E.col(j));
    return out;
  };
  const double h = L / samples;
  double vmax = 0.0;
  for (int i = 0; i < samples; ++i) vmax = std::max(vmax, curve(i * h).v.norm());
  // RK4 steps of at most 0.005 in turning angle; nodes are re-orthonormalized.
  const int substeps = std::max(16, static_cast<int>(std::ceil(vmax * h / (0.005 * std::max(1.0, r)))));
  auto polar = [&](const Vec& y, const Mat& A) {
    Mat B(A.rows(), A.cols());
    for (Eigen::Index j = 0; j < A.cols(); ++j) B.col(j) = N.project_tangent(y, A.col(j));
    Eigen::JacobiSVD<Mat> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return Mat(svd.matrixU() * svd.matrixV().transpose());
  };
  Mat E = ambient_frame(N, curve(0.0).x);
  const Mat E0 = E;
  std::vector<Mat> raw;
  raw.reserve(samples);
  for (int i = 0; i < samples; ++i) {
    const double s0 = i * h;
    if (i > 0) E = polar(curve(s0).x, E);
    raw.push_back(E);
    cf.points.push_back(detail::circle_point(r, s0));
    const CurveJet c = curve(s0);
    cf.images.push_back(c.x);
    cf.speed.push_back(c.v);
    const double dt = h / substeps;
    for (int q = 0; q < substeps; ++q) {
      const double s = s0 + q * dt;
      const Mat k1 = rhs(s, E);
      const Mat k2 = rhs(s + 0.5 * dt, E + 0.5 * dt * k1);
      const Mat k3 = rhs(s + 0.5 * dt, E + 0.5 * dt * k2);
      const Mat k4 = rhs(s + dt, E + dt * k3);
      E += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  E = polar(curve(0.0).x, E);
  cf.holonomy = E0.transpose() * E;
  const double orth = (cf.holonomy.transpose() * cf.holonomy - Mat::Identity(E.cols(), E.cols())).norm();
  if (!std::isfinite(orth) || orth > 1e-6)
    throw Error(ErrorCode::FrameConstructionFailure, "parallel transport lost orthonormality along " + phi.name);
  const Mat logH = detail::rotation_log(cf.holonomy);
  cf.closure_error = (logH.exp() - cf.holonomy).norm();
  if (cf.closure_error > 1e-8)
    throw Error(ErrorCode::FrameConstructionFailure, "holonomy of " + phi.name + " has no real logarithm");
  cf.omega = -logH / L;
  for (int i = 0; i < samples; ++i) cf.frames.push_back(raw[i] * (-(i * h / L) * logH).exp());
  return cf;
}

// ---- Fourier basis ----------------------------------------------------------------------

/// L^2-orthonormal Fourier modes on [0, L): slot 0 constant, slots 2q-1 / 2q cos / sin of frequency q.
struct FourierMode {
  double value;
  double derivative;
};

inline FourierMode fourier_mode(int slot, double s, double L) {
  if (slot == 0) return {1.0 / std::sqrt(L), 0.0};
  const int q = (slot + 1) / 2;
  const double w = kTwoPi * q / L, a = std::sqrt(2.0 / L);
  if (slot % 2 == 1) return {a * std::cos(w * s), -a * w * std::sin(w * s)};
  return {a * std::sin(w * s), a * w * std::cos(w * s)};
}

inline int mode_frequency(int slot) { return (slot + 1) / 2; }

struct DiscreteJacobiOperator {
  std::string map_id;
  SmoothMap map;
  int M_max = 0;
  int rank = 0;
  CircleFrame frame;
  Mat A;
  double symmetry_error = 0.0;
  double harmonic_residual = 0.0;
  std::string frame_construction;

  int dimension() const { return static_cast<int>(A.rows()); }
  /// Basis index a = slot * rank + j.
  int slot_of(int a) const { return a / rank; }
  int direction_of(int a) const { return a % rank; }
};

inline int default_samples(int M_max) { return std::max(64, 8 * M_max); }

inline DiscreteJacobiOperator assemble_circle_domain(const SmoothMap& phi, int M_max, int samples = 0) {
  if (M_max < 0) throw Error(ErrorCode::InvalidArgument, "M_max must be >= 0");
  if (samples <= 0) samples = default_samples(M_max);
  if (samples < 8 * M_max) throw Error(ErrorCode::InvalidArgument, "need at least 8*M_max quadrature points");
  DiscreteJacobiOperator op{.map_id = phi.name, .map = phi};
  op.M_max = M_max;
  op.frame = build_circle_frame(phi, samples);
  const CircleFrame& cf = op.frame;
  const Manifold& N = phi.codomain;
  const int r = N.dim();
  op.rank = r;
  const int slots = 2 * M_max + 1;
  const int D = slots * r;
  const double w = cf.length / samples;
  std::ostringstream os;
  os << "rk4 parallel transport, " << samples << " nodes, holonomy angle " << std::sqrt(0.5) * detail::rotation_log(cf.holonomy).norm();
  op.frame_construction = os.str();

  const auto contributions = parallel_map<Mat>(samples, [&](std::size_t i) {
    const double s = i * cf.length / samples;
    const Mat& E = cf.frames[i];
    const Vec& T = cf.speed[i];
    Mat C(r, r);
    for (int k = 0; k < r; ++k) {
      const Vec RT = N.curvature_ambient(cf.images[i], T, E.col(k), T);
      for (int j = 0; j < r; ++j) C(j, k) = RT.dot(E.col(j));
    }
    C = 0.5 * (C + C.transpose());
    Mat F = Mat::Zero(r, D), U = Mat::Zero(r, D);
    for (int slot = 0; slot < slots; ++slot) {
      const FourierMode f = fourier_mode(slot, s, cf.length);
      for (int j = 0; j < r; ++j) {
        const int a = slot * r + j;
        F(j, a) = f.value;
        U.col(a) = f.value * cf.omega.col(j);
        U(j, a) += f.derivative;
      }
    }
    return Mat(w * (U.transpose() * U - F.transpose() * C * F));
  });
  Mat A = Mat::Zero(D, D);
  for (const Mat& c : contributions) A += c;
  op.symmetry_error = (A - A.transpose()).cwiseAbs().maxCoeff();
  op.A = 0.5 * (A + A.transpose());

  double tau = 0.0;
  for (int i = 0; i < samples; ++i) tau = std::max(tau, tension_ambient(phi, make_point(phi.domain, cf.points[i])).norm());
  op.harmonic_residual = tau;
  return op;
}

/// Smallest M_max that resolves the negative modes, with a stability margin.
inline int recommended_mmax(const SmoothMap& phi) {
  const double r = phi.domain.radius();
  double speed = 0.0;
  for (const auto& g : quadrature_grid(phi.domain, 64))
    speed = std::max(speed, map_curve_jet(phi, g.point.ambient, orthonormal_frame(phi.domain, g.point)[0].ambient).v.norm());
  return 2 * static_cast<int>(std::ceil(speed * r - 1e-9)) + 4;
}

struct SpectralReport {
  std::string map;
  int M_max = 0;
  std::vector<double> eigenvalues;
  Mat eigenvectors;
  int index = 0;
  int nullity = 0;
  double zero_tolerance = 0.0;
};

inline double default_zero_tolerance(double largest_abs) { return 1e-7 * (1.0 + largest_abs); }

/// zero_tolerance <= 0 selects the default 1e-7 (1 + |largest eigenvalue|).
inline SpectralReport index_nullity(const DiscreteJacobiOperator& op, double zero_tolerance = -1.0) {
  Eigen::SelfAdjointEigenSolver<Mat> es(op.A);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::ConvergenceFailure, "eigensolver failed for " + op.map_id);
  SpectralReport rep;
  rep.map = op.map_id;
  rep.M_max = op.M_max;
  const Vec& ev = es.eigenvalues();
  rep.eigenvalues.assign(ev.data(), ev.data() + ev.size());
  rep.eigenvectors = es.eigenvectors();
  const double big = ev.size() ? ev.cwiseAbs().maxCoeff() : 0.0;
  rep.zero_tolerance = zero_tolerance > 0 ? zero_tolerance : default_zero_tolerance(big);
  for (double e : rep.eigenvalues) {
    if (e < -rep.zero_tolerance) ++rep.index;
    else if (e <= rep.zero_tolerance) ++rep.nullity;
  }
  return rep;
}

inline SpectralReport spectrum(const SmoothMap& phi, int M_max, double zero_tolerance = -1.0) {
  return index_nullity(assemble_circle_domain(phi, M_max), zero_tolerance);
}

// ---- sections from coefficient vectors -------------------------------------------------------

/// Ambient samples of sum_a c_a B_a at the frame nodes.
inline std::vector<Vec> coefficient_samples(const DiscreteJacobiOperator& op, const Vec& c) {
  const CircleFrame& cf = op.frame;
  std::vector<Vec> out;
  for (int i = 0; i < cf.samples; ++i) {
    const double s = i * cf.length / cf.samples;
    Vec g = Vec::Zero(op.rank);
    for (int a = 0; a < op.dimension(); ++a) g(op.direction_of(a)) += c(a) * fourier_mode(op.slot_of(a), s, cf.length).value;
    out.push_back(cf.frames[i] * g);
  }
  return out;
}

/// Section through the trigonometric interpolant of the node samples.
inline SectionAlongMap coefficient_section(const DiscreteJacobiOperator& op, const Vec& c, std::string name) {
  const CircleFrame& cf = op.frame;
  const auto samples = coefficient_samples(op, c);
  const int n = cf.samples, l = static_cast<int>(samples[0].size());
  const int qmax = (n - 1) / 2;
  Mat ca = Mat::Zero(l, qmax + 1), sa = Mat::Zero(l, qmax + 1);
  for (int i = 0; i < n; ++i) {
    const double th = kTwoPi * i / n;
    for (int q = 0; q <= qmax; ++q) {
      const double f = (q == 0 ? 1.0 : 2.0) / n;
      ca.col(q) += f * std::cos(q * th) * samples[i];
      sa.col(q) += f * std::sin(q * th) * samples[i];
    }
  }
  return make_section(std::move(name), op.map, [ca, sa, qmax, l](const auto& x) {
    using S = detail::scalar_of<decltype(x)>;
    using std::atan2;
    using std::cos;
    using std::sin;
    const S th = atan2(x(1), x(0));
    VecT<S> out(l);
    for (int k = 0; k < l; ++k) out(k) = S(ca(k, 0));
    for (int q = 1; q <= qmax; ++q) {
      const S cq = cos(S(double(q)) * th), sq = sin(S(double(q)) * th);
      for (int k = 0; k < l; ++k) out(k) += S(ca(k, q)) * cq + S(sa(k, q)) * sq;
    }
    return out;
  });
}

inline SectionAlongMap eigenfield_section(const DiscreteJacobiOperator& op, const SpectralReport& rep, int mode) {
  return coefficient_section(op, rep.eigenvectors.col(mode), op.map_id + "#eig" + std::to_string(mode));
}

/// Basis coordinates of a section by quadrature against the frame nodes.
inline Vec project_onto_basis(const DiscreteJacobiOperator& op, const SectionAlongMap& V) {
  const CircleFrame& cf = op.frame;
  Vec c = Vec::Zero(op.dimension());
  const double w = cf.length / cf.samples;
  for (int i = 0; i < cf.samples; ++i) {
    const double s = i * cf.length / cf.samples;
    const Vec g = cf.frames[i].transpose() * V.eval(cf.points[i]);
    for (int a = 0; a < op.dimension(); ++a)
      c(a) += w * fourier_mode(op.slot_of(a), s, cf.length).value * g(op.direction_of(a));
  }
  return c;
}

/// Negative eigenvalues paired with the strong-form Hessian of their eigenfields.
struct RayleighCertificate {
  int mode;
  double eigenvalue;
  double hessian;
};

inline std::vector<RayleighCertificate> rayleigh_certificates(const DiscreteJacobiOperator& op, const SpectralReport& rep) {
  std::vector<RayleighCertificate> out;
  const Grid grid = quadrature_grid(op.map.domain, op.frame.samples);
  for (int i = 0; i < static_cast<int>(rep.eigenvalues.size()); ++i) {
    if (rep.eigenvalues[i] >= -rep.zero_tolerance) continue;
    const SectionAlongMap V = eigenfield_section(op, rep, i);
    out.push_back({i, rep.eigenvalues[i], hessian_form(V, V, grid)});
  }
  return out;
}

// ---- composition corollaries -------------------------------------------------------------------

struct CorollaryResult {
  std::string phi;
  std::string psi;
  int M_psi = 0;
  int M_composite = 0;
  int index_psi = 0;
  int index_composite = 0;
  int nullity_psi = 0;
  int nullity_composite = 0;
  bool pass = false;
};

/// Index(psi o phi) >= Index(psi) and nul(psi o phi) >= nul(psi). Each side
/// uses at least its own recommended M_max.
inline CorollaryResult corollary_check(const SmoothMap& phi, const SmoothMap& psi, int M_max) {
  const SmoothMap comp = compose(phi, psi);
  CorollaryResult res;
  res.phi = phi.name;
  res.psi = psi.name;
  res.M_psi = std::max(M_max, recommended_mmax(psi));
  res.M_composite = std::max(M_max, recommended_mmax(comp));
  const SpectralReport a = spectrum(psi, res.M_psi);
  const SpectralReport b = spectrum(comp, res.M_composite);
  res.index_psi = a.index;
  res.nullity_psi = a.nullity;
  res.index_composite = b.index;
  res.nullity_composite = b.nullity;
  res.pass = b.index >= a.index && b.nullity >= a.nullity;
  return res;
}

struct TransportedForm {
  double form = 0.0;      // int <J^{psi o phi} W, W>
  double predicted = 0.0; // int lambda^2 alpha |W|^2
};

/// W = V o phi for an eigenfield V of J^psi with eigenvalue alpha.
inline TransportedForm transported_field_form(const SmoothMap& phi, const SectionAlongMap& V, double alpha,
                                              const Grid& grid) {
  const SectionAlongMap W = pull_back_section(V, phi);
  TransportedForm out;
  out.form = hessian_form(W, W, grid);
  for (const auto& g : grid) {
    const double lam = conformality_at(phi, g.point).lambda;
    out.predicted += g.weight * lam * lam * alpha * W.eval(g.point.ambient).squaredNorm();
  }
  return out;
}

// ---- Rayleigh probing on higher-dimensional domains ------------------------------------------------

struct RayleighProbe {
  int dictionary_size = 0;
  int effective_rank = 0;
  std::vector<double> values;  // generalized eigenvalues of (H, G) on the dictionary
  int index_lower_bound = 0;
};

/// Index lower bound from the dictionary {P(e_a)} u {P(E_ab y)} of restricted
/// ambient linear and quadratic fields along a map into a sphere.
inline RayleighProbe rayleigh_probe(const SmoothMap& phi, const Grid& grid, double tolerance = 1e-3) {
  const Manifold& N = phi.codomain;
  if (N.kind() != ManifoldKind::Sphere) throw Error(ErrorCode::UnsupportedDomain, "rayleigh probe needs a sphere codomain");
  const int l = N.ambient_dim();
  const double r2 = N.radius() * N.radius();
  std::vector<SectionAlongMap> dict;
  auto add = [&](const Mat& A, const Vec& b, const std::string& name) {
    dict.push_back(make_section(name, phi, [A, b, f = phi.eval_jet, g = phi.eval, l, r2](const auto& x) {
      using S = detail::scalar_of<decltype(x)>;
      VecT<S> y;
      if constexpr (std::is_same_v<S, Jet>) y = f(x);
      else y = g(x);
      VecT<S> v(l);
      for (int i = 0; i < l; ++i) {
        S acc(b(i));
        for (int j = 0; j < l; ++j)
          if (A(i, j) != 0.0) acc += S(A(i, j)) * y(j);
        v(i) = acc;
      }
      S dot(0.0);
      for (int i = 0; i < l; ++i) dot += v(i) * y(i);
      for (int i = 0; i < l; ++i) v(i) -= dot * y(i) / S(r2);
      return v;
    }));
  };
  for (int a = 0; a < l; ++a) add(Mat::Zero(l, l), Vec::Unit(l, a), "linear" + std::to_string(a));
  for (int a = 0; a < l; ++a)
    for (int b = 0; b < l; ++b) {
      Mat A = Mat::Zero(l, l);
      A(a, b) = 1.0;
      add(A, Vec::Zero(l), "quadratic" + std::to_string(a) + std::to_string(b));
    }
  const int n = static_cast<int>(dict.size());
  Mat H(n, n), G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      H(i, j) = H(j, i) = 0.5 * (hessian_form(dict[i], dict[j], grid) + hessian_form(dict[j], dict[i], grid));
      G(i, j) = G(j, i) = l2_inner(dict[i], dict[j], grid);
    }
  Eigen::SelfAdjointEigenSolver<Mat> gs(G);
  const double gmax = gs.eigenvalues().maxCoeff();
  std::vector<int> keep;
  for (int i = 0; i < n; ++i)
    if (gs.eigenvalues()(i) > 1e-9 * gmax) keep.push_back(i);
  Mat B(n, keep.size());
  for (std::size_t c = 0; c < keep.size(); ++c)
    B.col(c) = gs.eigenvectors().col(keep[c]) / std::sqrt(gs.eigenvalues()(keep[c]));
  Eigen::SelfAdjointEigenSolver<Mat> hs(B.transpose() * H * B);
  RayleighProbe out;
  out.dictionary_size = n;
  out.effective_rank = static_cast<int>(keep.size());
  const double scale = 1.0 + hs.eigenvalues().cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < hs.eigenvalues().size(); ++i) {
    out.values.push_back(hs.eigenvalues()(i));
    if (hs.eigenvalues()(i) < -tolerance * scale) ++out.index_lower_bound;
  }
  return out;
}

}  // namespace hmjacobi
