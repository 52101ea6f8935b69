// Model Riemannian manifolds embedded in Euclidean space.
//
// Everything is expressed extrinsically: the Levi-Civita connection of an
// embedded submanifold is the tangential projection of the ambient
// derivative, and its curvature follows from the second fundamental form.
// Charts exist for metric/Christoffel bookkeeping and for cross-checks; the
// ambient coordinates of a Point are authoritative.
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hmjacobi/errors.hpp"
#include "hmjacobi/jet.hpp"

namespace hmjacobi {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
template <class S>
using VecT = Eigen::Matrix<S, Eigen::Dynamic, 1>;
using JetVec = VecT<Jet>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Chart boxes keep polar angles in [kPoleMargin, pi - kPoleMargin].
inline constexpr double kPoleMargin = 1e-3;

enum class ManifoldKind { Euclidean, Sphere, FlatTorus, Product };

struct Point {
  Vec ambient;
  int chart = 0;
  Vec coords;
};

struct TangentVector {
  Point base;
  Vec components;  // chart frame
  Vec ambient;
};

/// Position, velocity and acceleration of an ambient curve at t = 0.
struct CurveJet {
  Vec x, v, a;
};

inline JetVec to_jet(const CurveJet& c) {
  JetVec out(c.x.size());
  for (Eigen::Index i = 0; i < c.x.size(); ++i) out(i) = Jet(c.x(i), c.v(i), c.a(i));
  return out;
}

inline CurveJet from_jet(const JetVec& j) {
  CurveJet c{Vec(j.size()), Vec(j.size()), Vec(j.size())};
  for (Eigen::Index i = 0; i < j.size(); ++i) {
    c.x(i) = j(i).v;
    c.v(i) = j(i).d;
    c.a(i) = j(i).dd;
  }
  return c;
}

class Manifold {
 public:
  static Manifold euclidean(int dim) {
    if (dim < 1) throw Error(ErrorCode::InvalidArgument, "euclidean dimension must be >= 1");
    Manifold m;
    m.kind_ = ManifoldKind::Euclidean;
    m.dim_ = m.ambient_dim_ = dim;
    m.curvature_ = 0.0;
    return m;
  }

  static Manifold sphere(int dim, double radius = 1.0) {
    if (dim < 1 || dim > 3) throw Error(ErrorCode::InvalidArgument, "spheres of dimension 1..3 are supported");
    if (!(radius > 0)) throw Error(ErrorCode::InvalidArgument, "sphere radius must be positive");
    Manifold m;
    m.kind_ = ManifoldKind::Sphere;
    m.dim_ = dim;
    m.ambient_dim_ = dim + 1;
    m.radius_ = radius;
    m.curvature_ = 1.0 / (radius * radius);
    return m;
  }

  static Manifold flat_torus(std::vector<double> periods) {
    if (periods.empty()) throw Error(ErrorCode::InvalidArgument, "torus needs at least one period");
    for (double p : periods)
      if (!(p > 0)) throw Error(ErrorCode::InvalidArgument, "torus periods must be positive");
    Manifold m;
    m.kind_ = ManifoldKind::FlatTorus;
    m.dim_ = m.ambient_dim_ = static_cast<int>(periods.size());
    m.periods_ = std::move(periods);
    m.curvature_ = 0.0;
    return m;
  }

  static Manifold product(Manifold a, Manifold b) {
    Manifold m;
    m.kind_ = ManifoldKind::Product;
    m.dim_ = a.dim_ + b.dim_;
    m.ambient_dim_ = a.ambient_dim_ + b.ambient_dim_;
    m.factors_ = {std::move(a), std::move(b)};
    return m;
  }

  ManifoldKind kind() const { return kind_; }
  int dim() const { return dim_; }
  int ambient_dim() const { return ambient_dim_; }
  double radius() const { return radius_; }
  const std::vector<double>& periods() const { return periods_; }
  const std::vector<Manifold>& factors() const { return factors_; }
  /// Set for spheres and flat kinds; products carry none.
  std::optional<double> space_form_curvature() const { return curvature_; }

  bool operator==(const Manifold& o) const {
    return kind_ == o.kind_ && dim_ == o.dim_ && ambient_dim_ == o.ambient_dim_ &&
           radius_ == o.radius_ && periods_ == o.periods_ && factors_ == o.factors_;
  }

  std::string name() const {
    std::ostringstream os;
    switch (kind_) {
      case ManifoldKind::Euclidean: os << "R" << dim_; break;
      case ManifoldKind::Sphere:
        os << "S" << dim_;
        if (radius_ != 1.0) os << "(r=" << radius_ << ")";
        break;
      case ManifoldKind::FlatTorus: {
        os << "T" << dim_ << "(";
        for (std::size_t i = 0; i < periods_.size(); ++i) os << (i ? "," : "") << periods_[i];
        os << ")";
        break;
      }
      case ManifoldKind::Product: os << factors_[0].name() << "x" << factors_[1].name(); break;
    }
    return os.str();
  }

  // ---- ambient geometry -------------------------------------------------

  /// Orthogonal projector onto the tangent space at ambient point y.
  Mat tangent_projector(const Vec& y) const {
    const int k = ambient_dim_;
    switch (kind_) {
      case ManifoldKind::Euclidean:
      case ManifoldKind::FlatTorus: return Mat::Identity(k, k);
      case ManifoldKind::Sphere: return Mat::Identity(k, k) - y * y.transpose() / y.squaredNorm();
      case ManifoldKind::Product: {
        Mat p = Mat::Zero(k, k);
        int off = 0;
        for (const auto& f : factors_) {
          const int kf = f.ambient_dim_;
          p.block(off, off, kf, kf) = f.tangent_projector(y.segment(off, kf));
          off += kf;
        }
        return p;
      }
    }
    return {};
  }

  Vec project_tangent(const Vec& y, const Vec& w) const {
    switch (kind_) {
      case ManifoldKind::Euclidean:
      case ManifoldKind::FlatTorus: return w;
      case ManifoldKind::Sphere: return w - (y.dot(w) / y.squaredNorm()) * y;
      case ManifoldKind::Product: {
        Vec out(w.size());
        int off = 0;
        for (const auto& f : factors_) {
          const int kf = f.ambient_dim_;
          out.segment(off, kf) = f.project_tangent(y.segment(off, kf), w.segment(off, kf));
          off += kf;
        }
        return out;
      }
    }
    return w;
  }

  /// d/dt P(y(t)) applied to w, for a curve with y(0)=y, y'(0)=ydot.
  Vec projector_derivative_apply(const Vec& y, const Vec& ydot, const Vec& w) const {
    switch (kind_) {
      case ManifoldKind::Euclidean:
      case ManifoldKind::FlatTorus: return Vec::Zero(w.size());
      case ManifoldKind::Sphere: {
        const double r2 = radius_ * radius_;
        return -(ydot * y.dot(w) + y * ydot.dot(w)) / r2;
      }
      case ManifoldKind::Product: {
        Vec out(w.size());
        int off = 0;
        for (const auto& f : factors_) {
          const int kf = f.ambient_dim_;
          out.segment(off, kf) =
              f.projector_derivative_apply(y.segment(off, kf), ydot.segment(off, kf), w.segment(off, kf));
          off += kf;
        }
        return out;
      }
    }
    return w;
  }

  Mat projector_derivative(const Vec& y, const Vec& ydot) const {
    const int k = ambient_dim_;
    Mat out(k, k);
    for (int j = 0; j < k; ++j) out.col(j) = projector_derivative_apply(y, ydot, Vec::Unit(k, j));
    return out;
  }

  /// Second fundamental form II(X, Y), a normal vector.
  Vec second_fundamental_form(const Vec& y, const Vec& X, const Vec& Y) const {
    switch (kind_) {
      case ManifoldKind::Euclidean:
      case ManifoldKind::FlatTorus: return Vec::Zero(ambient_dim_);
      case ManifoldKind::Sphere: return -(X.dot(Y) / (radius_ * radius_)) * y;
      case ManifoldKind::Product: {
        Vec out(ambient_dim_);
        int off = 0;
        for (const auto& f : factors_) {
          const int kf = f.ambient_dim_;
          out.segment(off, kf) =
              f.second_fundamental_form(y.segment(off, kf), X.segment(off, kf), Y.segment(off, kf));
          off += kf;
        }
        return out;
      }
    }
    return {};
  }

  /// Shape operator A_xi X, defined by <A_xi X, W> = <II(X, W), xi>.
  Vec shape_operator(const Vec& y, const Vec& xi, const Vec& X) const {
    switch (kind_) {
      case ManifoldKind::Euclidean:
      case ManifoldKind::FlatTorus: return Vec::Zero(ambient_dim_);
      case ManifoldKind::Sphere: return -(xi.dot(y) / (radius_ * radius_)) * project_tangent(y, X);
      case ManifoldKind::Product: {
        Vec out(ambient_dim_);
        int off = 0;
        for (const auto& f : factors_) {
          const int kf = f.ambient_dim_;
          out.segment(off, kf) = f.shape_operator(y.segment(off, kf), xi.segment(off, kf), X.segment(off, kf));
          off += kf;
        }
        return out;
      }
    }
    return {};
  }

  /// Curvature R(X,Y)Z with R(X,Y)Z = c(<X,Z>Y - <Y,Z>X) on space forms.
  /// This sign makes every Killing field on the unit sphere a Jacobi field
  /// of the identity map; general kinds go through the Gauss equation.
  Vec curvature_ambient(const Vec& y, const Vec& X, const Vec& Y, const Vec& Z) const {
    if (curvature_) return *curvature_ * (X.dot(Z) * Y - Y.dot(Z) * X);
    return curvature_gauss(y, X, Y, Z);
  }

  Vec curvature_gauss(const Vec& y, const Vec& X, const Vec& Y, const Vec& Z) const {
    return shape_operator(y, second_fundamental_form(y, X, Z), Y) -
           shape_operator(y, second_fundamental_form(y, Y, Z), X);
  }

  /// 2-jet of the geodesic through y with velocity v.
  CurveJet geodesic_jet(const Vec& y, const Vec& v) const {
    return {y, v, second_fundamental_form(y, v, v)};
  }

  bool contains(const Vec& y, double rel_tol = 1e-12) const {
    if (y.size() != ambient_dim_) return false;
    switch (kind_) {
      case ManifoldKind::Euclidean: return true;
      case ManifoldKind::Sphere: return std::abs(y.norm() - radius_) <= rel_tol * radius_;
      case ManifoldKind::FlatTorus: {
        for (int i = 0; i < dim_; ++i)
          if (y(i) < -rel_tol * periods_[i] || y(i) > periods_[i] * (1 + rel_tol)) return false;
        return true;
      }
      case ManifoldKind::Product: {
        int off = 0;
        for (const auto& f : factors_) {
          if (!f.contains(y.segment(off, f.ambient_dim_), rel_tol)) return false;
          off += f.ambient_dim_;
        }
        return true;
      }
    }
    return false;
  }

  /// Nearest-point projection onto the manifold (modular reduction for tori).
  Vec project_ambient(const Vec& y) const {
    if (y.size() != ambient_dim_)
      throw Error(ErrorCode::InvalidArgument, "ambient dimension mismatch for " + name());
    switch (kind_) {
      case ManifoldKind::Euclidean: return y;
      case ManifoldKind::Sphere: {
        const double n = y.norm();
        if (!(n > 1e-12 * radius_)) throw Error(ErrorCode::NotProjectable, "point at the center of " + name());
        return (radius_ / n) * y;
      }
      case ManifoldKind::FlatTorus: {
        Vec out(y.size());
        for (int i = 0; i < dim_; ++i) {
          const double L = periods_[i];
          double r = std::fmod(y(i), L);
          if (r < 0) r += L;
          if (r >= L) r -= L;
          out(i) = r;
        }
        return out;
      }
      case ManifoldKind::Product: {
        Vec out(y.size());
        int off = 0;
        for (const auto& f : factors_) {
          out.segment(off, f.ambient_dim_) = f.project_ambient(y.segment(off, f.ambient_dim_));
          off += f.ambient_dim_;
        }
        return out;
      }
    }
    return y;
  }

  /// a - b, with torus coordinates unwrapped to the short representative.
  Vec ambient_delta(const Vec& a, const Vec& b) const {
    switch (kind_) {
      case ManifoldKind::FlatTorus: {
        Vec d = a - b;
        for (int i = 0; i < dim_; ++i) {
          const double L = periods_[i];
          d(i) -= L * std::round(d(i) / L);
        }
        return d;
      }
      case ManifoldKind::Product: {
        Vec d(a.size());
        int off = 0;
        for (const auto& f : factors_) {
          d.segment(off, f.ambient_dim_) =
              f.ambient_delta(a.segment(off, f.ambient_dim_), b.segment(off, f.ambient_dim_));
          off += f.ambient_dim_;
        }
        return d;
      }
      default: return a - b;
    }
  }

  // ---- charts -----------------------------------------------------------

  int chart_count() const {
    switch (kind_) {
      case ManifoldKind::Sphere: return dim_ == 1 ? 1 : 2;
      case ManifoldKind::Product: return factors_[0].chart_count() * factors_[1].chart_count();
      default: return 1;
    }
  }

  template <class S>
  VecT<S> chart_embed(int chart, const VecT<S>& u) const {
    using std::cos;
    using std::sin;
    switch (kind_) {
      case ManifoldKind::Euclidean:
      case ManifoldKind::FlatTorus: return u;
      case ManifoldKind::Sphere: {
        VecT<S> base(dim_ + 1);
        if (dim_ == 1) {
          base << cos(u(0)), sin(u(0));
        } else if (dim_ == 2) {
          base << sin(u(0)) * cos(u(1)), sin(u(0)) * sin(u(1)), cos(u(0));
        } else {
          base << sin(u(0)) * sin(u(1)) * cos(u(2)), sin(u(0)) * sin(u(1)) * sin(u(2)),
              sin(u(0)) * cos(u(1)), cos(u(0));
        }
        VecT<S> x(dim_ + 1);
        const int shift = chart_shift(chart);
        for (int i = 0; i <= dim_; ++i) x((i + shift) % (dim_ + 1)) = base(i) * radius_;
        return x;
      }
      case ManifoldKind::Product: {
        const auto [c0, c1] = split_chart(chart);
        const auto& a = factors_[0];
        const auto& b = factors_[1];
        VecT<S> x(ambient_dim_);
        x.head(a.ambient_dim_) = a.chart_embed<S>(c0, VecT<S>(u.head(a.dim_)));
        x.tail(b.ambient_dim_) = b.chart_embed<S>(c1, VecT<S>(u.tail(b.dim_)));
        return x;
      }
    }
    return u;
  }

  Vec chart_coords(int chart, const Vec& y) const {
    switch (kind_) {
      case ManifoldKind::Euclidean:
      case ManifoldKind::FlatTorus: return y;
      case ManifoldKind::Sphere: {
        const Vec b = sphere_base(chart, y);
        Vec u(dim_);
        if (dim_ == 1) {
          u << std::atan2(b(1), b(0));
        } else if (dim_ == 2) {
          u << std::atan2(std::hypot(b(0), b(1)), b(2)), std::atan2(b(1), b(0));
        } else {
          u << std::atan2(std::sqrt(b(0) * b(0) + b(1) * b(1) + b(2) * b(2)), b(3)),
              std::atan2(std::hypot(b(0), b(1)), b(2)), std::atan2(b(1), b(0));
        }
        return u;
      }
      case ManifoldKind::Product: {
        const auto [c0, c1] = split_chart(chart);
        const auto& a = factors_[0];
        const auto& b = factors_[1];
        Vec u(dim_);
        u.head(a.dim_) = a.chart_coords(c0, y.head(a.ambient_dim_));
        u.tail(b.dim_) = b.chart_coords(c1, y.tail(b.ambient_dim_));
        return u;
      }
    }
    return y;
  }

  /// Distance-like margin from the chart's degenerate set (larger is better).
  double chart_margin(int chart, const Vec& y) const {
    switch (kind_) {
      case ManifoldKind::Sphere: {
        if (dim_ == 1) return 1.0;
        const Vec b = sphere_base(chart, y);
        return std::hypot(b(0), b(1));
      }
      case ManifoldKind::Product: {
        const auto [c0, c1] = split_chart(chart);
        return std::min(factors_[0].chart_margin(c0, y.head(factors_[0].ambient_dim_)),
                        factors_[1].chart_margin(c1, y.tail(factors_[1].ambient_dim_)));
      }
      default: return 1.0;
    }
  }

  int best_chart(const Vec& y) const {
    int best = 0;
    double best_margin = -1.0;
    for (int c = 0; c < chart_count(); ++c) {
      const double m = chart_margin(c, y);
      if (m > best_margin + 1e-15) {
        best = c;
        best_margin = m;
      }
    }
    return best;
  }

  /// True when u lies strictly inside the chart's non-degenerate box.
  bool chart_interior(int chart, const Vec& u) const {
    switch (kind_) {
      case ManifoldKind::Sphere: {
        for (int i = 0; i + 1 < dim_; ++i)
          if (u(i) < kPoleMargin || u(i) > kPi - kPoleMargin) return false;
        return true;
      }
      case ManifoldKind::Product: {
        const auto [c0, c1] = split_chart(chart);
        return factors_[0].chart_interior(c0, u.head(factors_[0].dim_)) &&
               factors_[1].chart_interior(c1, u.tail(factors_[1].dim_));
      }
      default: return true;
    }
  }

  /// Chart coordinate vectors d x / d u_i as columns.
  Mat chart_jacobian(int chart, const Vec& u) const {
    Mat J(ambient_dim_, dim_);
    for (int i = 0; i < dim_; ++i) {
      JetVec uj(dim_);
      for (int l = 0; l < dim_; ++l) uj(l) = Jet(u(l), l == i ? 1.0 : 0.0, 0.0);
      const JetVec x = chart_embed<Jet>(chart, uj);
      for (int r = 0; r < ambient_dim_; ++r) J(r, i) = x(r).d;
    }
    return J;
  }

  /// Second partials d^2 x / du_i du_j, by polarization of exact jets.
  std::vector<std::vector<Vec>> chart_hessian(int chart, const Vec& u) const {
    auto second_along = [&](const Vec& dir) {
      JetVec uj(dim_);
      for (int l = 0; l < dim_; ++l) uj(l) = Jet(u(l), dir(l), 0.0);
      const JetVec x = chart_embed<Jet>(chart, uj);
      Vec out(ambient_dim_);
      for (int r = 0; r < ambient_dim_; ++r) out(r) = x(r).dd;
      return out;
    };
    std::vector<Vec> diag(dim_);
    for (int i = 0; i < dim_; ++i) diag[i] = second_along(Vec::Unit(dim_, i));
    std::vector<std::vector<Vec>> H(dim_, std::vector<Vec>(dim_));
    for (int i = 0; i < dim_; ++i) {
      H[i][i] = diag[i];
      for (int j = i + 1; j < dim_; ++j) {
        const Vec both = second_along(Vec::Unit(dim_, i) + Vec::Unit(dim_, j));
        H[i][j] = H[j][i] = 0.5 * (both - diag[i] - diag[j]);
      }
    }
    return H;
  }

  /// Natural length scale of the chart coordinates (angles vs lengths).
  double chart_scale() const {
    switch (kind_) {
      case ManifoldKind::Sphere: return 1.0;
      case ManifoldKind::FlatTorus: return *std::max_element(periods_.begin(), periods_.end()) / kTwoPi;
      default: return 1.0;
    }
  }

 private:
  Manifold() = default;

  int chart_shift(int chart) const { return chart == 0 ? 0 : dim_ - 1; }

  Vec sphere_base(int chart, const Vec& y) const {
    Vec b(dim_ + 1);
    const int shift = chart_shift(chart);
    for (int i = 0; i <= dim_; ++i) b(i) = y((i + shift) % (dim_ + 1)) / radius_;
    return b;
  }

  std::pair<int, int> split_chart(int chart) const {
    const int n1 = factors_[1].chart_count();
    return {chart / n1, chart % n1};
  }

  ManifoldKind kind_ = ManifoldKind::Euclidean;
  int dim_ = 0;
  int ambient_dim_ = 0;
  double radius_ = 1.0;
  std::vector<double> periods_;
  std::vector<Manifold> factors_;
  std::optional<double> curvature_;
};

// ---- points and tangent vectors -------------------------------------------

inline Point make_point(const Manifold& M, const Vec& ambient) {
  const int chart = M.best_chart(ambient);
  return {ambient, chart, M.chart_coords(chart, ambient)};
}

inline Point point_from_chart(const Manifold& M, int chart, const Vec& coords) {
  return {M.chart_embed<double>(chart, coords), chart, coords};
}

inline Point project_to_manifold(const Manifold& M, const Vec& y) {
  return make_point(M, M.project_ambient(y));
}

inline void require_chart_interior(const Manifold& M, const Point& p) {
  if (!M.chart_interior(p.chart, p.coords))
    throw Error(ErrorCode::ChartSingularity, "point lies on a degenerate locus of chart " +
                                                 std::to_string(p.chart) + " of " + M.name());
}

inline TangentVector tangent_from_ambient(const Manifold& M, const Point& p, const Vec& a) {
  const Mat J = M.chart_jacobian(p.chart, p.coords);
  const Vec t = M.project_tangent(p.ambient, a);
  const Vec c = (J.transpose() * J).ldlt().solve(J.transpose() * t);
  return {p, c, t};
}

inline TangentVector tangent_from_components(const Manifold& M, const Point& p, const Vec& c) {
  const Mat J = M.chart_jacobian(p.chart, p.coords);
  return {p, c, J * c};
}

// ---- metric, connection, curvature ----------------------------------------

/// Christoffel symbols, gamma[k](i, j) = Gamma^k_{ij}.
using Christoffel = std::vector<Mat>;

inline Mat metric_at(const Manifold& M, const Point& p) {
  require_chart_interior(M, p);
  const Mat J = M.chart_jacobian(p.chart, p.coords);
  return J.transpose() * J;
}

inline Christoffel christoffel_at(const Manifold& M, const Point& p) {
  require_chart_interior(M, p);
  const int m = M.dim();
  const Mat J = M.chart_jacobian(p.chart, p.coords);
  const Mat ginv = (J.transpose() * J).inverse();
  const auto H = M.chart_hessian(p.chart, p.coords);
  Christoffel gamma(m, Mat::Zero(m, m));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const Vec proj = J.transpose() * H[i][j];  // <x_ij, x_l>
      const Vec g = ginv * proj;
      for (int k = 0; k < m; ++k) gamma[k](i, j) = g(k);
    }
  return gamma;
}

/// Independent route: central differences of metric_at in chart coordinates.
inline Christoffel christoffel_fd(const Manifold& M, const Point& p, double h_rel = 1e-5) {
  require_chart_interior(M, p);
  const int m = M.dim();
  const double h = h_rel * M.chart_scale();
  auto g_at = [&](const Vec& u) {
    const Mat J = M.chart_jacobian(p.chart, u);
    return Mat(J.transpose() * J);
  };
  std::vector<Mat> dg(m);  // dg[l](i,j) = d_l g_ij
  for (int l = 0; l < m; ++l) {
    Vec up = p.coords, um = p.coords;
    up(l) += h;
    um(l) -= h;
    dg[l] = (g_at(up) - g_at(um)) / (2.0 * h);
  }
  const Mat ginv = g_at(p.coords).inverse();
  Christoffel gamma(m, Mat::Zero(m, m));
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double s = 0;
        for (int l = 0; l < m; ++l) s += ginv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
        gamma[k](i, j) = 0.5 * s;
      }
  return gamma;
}

inline void require_same_base(const Point& p, const TangentVector& v) {
  if ((v.base.ambient - p.ambient).norm() > 1e-12 * (1.0 + p.ambient.norm()))
    throw Error(ErrorCode::MixedBasePoints, "tangent vectors must share the base point");
}

inline TangentVector curvature_at(const Manifold& M, const Point& p, const TangentVector& X,
                                  const TangentVector& Y, const TangentVector& Z) {
  require_same_base(p, X);
  require_same_base(p, Y);
  require_same_base(p, Z);
  return tangent_from_ambient(M, p, M.curvature_ambient(p.ambient, X.ambient, Y.ambient, Z.ambient));
}

/// Chart route for the curvature: differences of the analytic Christoffel
/// symbols, same sign convention as curvature_at.
inline TangentVector curvature_from_christoffel(const Manifold& M, const Point& p, const TangentVector& X,
                                                const TangentVector& Y, const TangentVector& Z,
                                                double h = 1e-5) {
  require_same_base(p, X);
  require_same_base(p, Y);
  require_same_base(p, Z);
  const int m = M.dim();
  const Christoffel G = christoffel_at(M, p);
  std::vector<Christoffel> dG(m);  // dG[q][k](i,j) = d_q Gamma^k_ij
  for (int q = 0; q < m; ++q) {
    Vec up = p.coords, um = p.coords;
    up(q) += h;
    um(q) -= h;
    const Christoffel Gp = christoffel_at(M, point_from_chart(M, p.chart, up));
    const Christoffel Gm = christoffel_at(M, point_from_chart(M, p.chart, um));
    dG[q].resize(m);
    for (int k = 0; k < m; ++k) dG[q][k] = (Gp[k] - Gm[k]) / (2.0 * h);
  }
  // Standard R(d_i, d_j) d_k = Rstd^l_{ijk} d_l; the fixed convention is its negative.
  Vec out = Vec::Zero(m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k) {
        const double coeff = X.components(i) * Y.components(j) * Z.components(k);
        if (coeff == 0.0) continue;
        for (int l = 0; l < m; ++l) {
          double r = dG[i][l](j, k) - dG[j][l](i, k);
          for (int s = 0; s < m; ++s) r += G[l](i, s) * G[s](j, k) - G[l](j, s) * G[s](i, k);
          out(l) -= coeff * r;
        }
      }
  return tangent_from_components(M, p, out);
}

// ---- frames ----------------------------------------------------------------

/// Gram-Schmidt of the chart coordinate vectors, in coordinate order.
inline std::vector<TangentVector> orthonormal_frame(const Manifold& M, const Point& p) {
  require_chart_interior(M, p);
  const Mat J = M.chart_jacobian(p.chart, p.coords);
  const int m = M.dim();
  std::vector<TangentVector> frame;
  frame.reserve(m);
  Mat E(J.rows(), m);
  for (int i = 0; i < m; ++i) {
    Vec v = J.col(i);
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j < i; ++j) v -= E.col(j).dot(v) * E.col(j);
    const double n = v.norm();
    if (!(n > 1e-14)) throw Error(ErrorCode::ChartSingularity, "degenerate chart frame");
    E.col(i) = v / n;
  }
  const Mat G = J.transpose() * J;
  const Mat C = G.ldlt().solve(J.transpose() * E);
  for (int i = 0; i < m; ++i) frame.push_back({p, C.col(i), E.col(i)});
  return frame;
}

/// Ambient orthonormal tangent basis as matrix columns; no chart bookkeeping.
inline Mat ambient_frame(const Manifold& M, const Vec& y) {
  const int c = M.best_chart(y);
  const Mat J = M.chart_jacobian(c, M.chart_coords(c, y));
  Eigen::HouseholderQR<Mat> qr(J);
  Mat Q = qr.householderQ() * Mat::Identity(J.rows(), J.cols());
  // keep the orientation of the coordinate vectors
  const Mat R = qr.matrixQR().topRows(J.cols()).triangularView<Eigen::Upper>();
  for (int i = 0; i < J.cols(); ++i)
    if (R(i, i) < 0) Q.col(i) = -Q.col(i);
  return Q;
}

// ---- geodesics ---------------------------------------------------------------

struct GeodesicState {
  Vec x, v;
};

/// RK4 integration of x'' = II(x', x') with step-doubling control.
inline GeodesicState integrate_geodesic(const Manifold& M, const Vec& y, const Vec& v, double t,
                                        double tol = 1e-12) {
  auto run = [&](int steps) {
    const double h = t / steps;
    Vec x = y, u = v;
    auto acc = [&](const Vec& xx, const Vec& uu) { return M.second_fundamental_form(xx, uu, uu); };
    for (int s = 0; s < steps; ++s) {
      const Vec k1x = u, k1v = acc(x, u);
      const Vec k2x = u + 0.5 * h * k1v, k2v = acc(x + 0.5 * h * k1x, u + 0.5 * h * k1v);
      const Vec k3x = u + 0.5 * h * k2v, k3v = acc(x + 0.5 * h * k2x, u + 0.5 * h * k2v);
      const Vec k4x = u + h * k3v, k4v = acc(x + h * k3x, u + h * k3v);
      x += h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
      u += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
    }
    return GeodesicState{x, u};
  };
  if (t == 0.0) return {y, v};
  int steps = std::max(8, static_cast<int>(std::ceil(std::abs(t) * v.norm() / 0.02)));
  GeodesicState coarse = run(steps);
  for (int iter = 0; iter < 12; ++iter) {
    GeodesicState fine = run(2 * steps);
    const double err = (fine.x - coarse.x).norm() + (fine.v - coarse.v).norm();
    coarse = std::move(fine);
    steps *= 2;
    if (err < tol * (1.0 + v.norm() * std::abs(t))) break;
  }
  return coarse;
}

inline Vec exponential_ambient(const Manifold& M, const Vec& y, const Vec& v, double t) {
  switch (M.kind()) {
    case ManifoldKind::Euclidean: return y + t * v;
    case ManifoldKind::FlatTorus: return M.project_ambient(y + t * v);
    case ManifoldKind::Sphere: {
      const double r = M.radius();
      const double s = t * t * v.squaredNorm() / (r * r);
      return cos_sqrt(s) * y + (t * sinc_sqrt(s)) * v;
    }
    case ManifoldKind::Product: return M.project_ambient(integrate_geodesic(M, y, v, t).x);
  }
  return y;
}

inline Point exponential_map(const Manifold& M, const Point& p, const TangentVector& v, double t) {
  require_same_base(p, v);
  return make_point(M, exponential_ambient(M, p.ambient, v.ambient, t));
}

// ---- quadrature ---------------------------------------------------------------

struct GridPoint {
  Point point;
  double weight;
};
using Grid = std::vector<GridPoint>;

inline Grid quadrature_grid(const Manifold& M, int resolution) {
  if (resolution < 4) throw Error(ErrorCode::InvalidArgument, "quadrature resolution must be >= 4");
  Grid grid;
  switch (M.kind()) {
    case ManifoldKind::Euclidean:
      throw Error(ErrorCode::UnsupportedDomain, "no quadrature rule on noncompact " + M.name());
    case ManifoldKind::Sphere: {
      const double r = M.radius();
      const int n = M.dim();
      const double dphi = kTwoPi / resolution, dpol = kPi / resolution;
      if (n == 1) {
        for (int q = 0; q < resolution; ++q) {
          Vec u(1);
          u << q * dphi;
          grid.push_back({make_point(M, M.chart_embed<double>(0, u)), r * dphi});
        }
      } else if (n == 2) {
        for (int j = 0; j < resolution; ++j) {
          const double th = (j + 0.5) * dpol;
          for (int q = 0; q < resolution; ++q) {
            Vec u(2);
            u << th, q * dphi;
            grid.push_back({make_point(M, M.chart_embed<double>(0, u)), r * r * std::sin(th) * dpol * dphi});
          }
        }
      } else {
        for (int i = 0; i < resolution; ++i) {
          const double a = (i + 0.5) * dpol;
          for (int j = 0; j < resolution; ++j) {
            const double b = (j + 0.5) * dpol;
            for (int q = 0; q < resolution; ++q) {
              Vec u(3);
              u << a, b, q * dphi;
              const double w = r * r * r * std::sin(a) * std::sin(a) * std::sin(b) * dpol * dpol * dphi;
              grid.push_back({make_point(M, M.chart_embed<double>(0, u)), w});
            }
          }
        }
      }
      return grid;
    }
    case ManifoldKind::FlatTorus: {
      const int m = M.dim();
      double w = 1.0;
      for (double L : M.periods()) w *= L / resolution;
      std::vector<int> idx(m, 0);
      while (true) {
        Vec u(m);
        for (int i = 0; i < m; ++i) u(i) = idx[i] * M.periods()[i] / resolution;
        grid.push_back({make_point(M, u), w});
        int d = m - 1;
        while (d >= 0 && ++idx[d] == resolution) idx[d--] = 0;
        if (d < 0) break;
      }
      return grid;
    }
    case ManifoldKind::Product: {
      const Grid a = quadrature_grid(M.factors()[0], resolution);
      const Grid b = quadrature_grid(M.factors()[1], resolution);
      for (const auto& ga : a)
        for (const auto& gb : b) {
          Vec y(M.ambient_dim());
          y << ga.point.ambient, gb.point.ambient;
          grid.push_back({make_point(M, y), ga.weight * gb.weight});
        }
      return grid;
    }
  }
  return grid;
}

// ---- sampling helpers --------------------------------------------------------

template <class Rng>
Vec random_ambient_point(const Manifold& M, Rng& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  switch (M.kind()) {
    case ManifoldKind::Euclidean: {
      Vec y(M.ambient_dim());
      for (auto& c : y) c = normal(rng);
      return y;
    }
    case ManifoldKind::Sphere: {
      Vec y(M.ambient_dim());
      do {
        for (auto& c : y) c = normal(rng);
      } while (y.norm() < 1e-3);
      return M.radius() * y.normalized();
    }
    case ManifoldKind::FlatTorus: {
      Vec y(M.ambient_dim());
      for (int i = 0; i < M.dim(); ++i) y(i) = unif(rng) * M.periods()[i];
      return y;
    }
    case ManifoldKind::Product: {
      Vec y(M.ambient_dim());
      y << random_ambient_point(M.factors()[0], rng), random_ambient_point(M.factors()[1], rng);
      return y;
    }
  }
  return {};
}

template <class Rng>
Point random_point(const Manifold& M, Rng& rng) {
  return make_point(M, random_ambient_point(M, rng));
}

template <class Rng>
TangentVector random_tangent(const Manifold& M, const Point& p, Rng& rng) {
  std::normal_distribution<double> normal;
  Vec a(M.ambient_dim());
  for (auto& c : a) c = normal(rng);
  return tangent_from_ambient(M, p, a);
}

}  // namespace hmjacobi
