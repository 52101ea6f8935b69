// Second-order Taylor jets along a curve.
//
// A Jet carries (f, f', f'') of a scalar function composed with a curve
// t -> c(t) at t = 0. Evaluating a closed-form map on the jet of a geodesic
// yields the exact first and second derivatives of the map along that
// geodesic, which is all the Jacobi operator needs.
#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Core>

namespace hmjacobi {

struct Jet {
  double v = 0.0;   // value
  double d = 0.0;   // first derivative
  double dd = 0.0;  // second derivative

  constexpr Jet() = default;
  constexpr Jet(double value) : v(value) {}  // NOLINT(google-explicit-constructor)
  constexpr Jet(double value, double d1, double d2) : v(value), d(d1), dd(d2) {}

  Jet& operator+=(const Jet& o) { v += o.v; d += o.d; dd += o.dd; return *this; }
  Jet& operator-=(const Jet& o) { v -= o.v; d -= o.d; dd -= o.dd; return *this; }
  Jet& operator*=(const Jet& o) { *this = *this * o; return *this; }
  Jet& operator/=(const Jet& o) { *this = *this / o; return *this; }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator-(const Jet& a) { return {-a.v, -a.d, -a.dd}; }
  friend Jet operator+(const Jet& a) { return a; }
  friend Jet operator*(const Jet& a, const Jet& b) {
    return {a.v * b.v, a.d * b.v + a.v * b.d, a.dd * b.v + 2.0 * a.d * b.d + a.v * b.dd};
  }
  friend Jet operator/(const Jet& a, const Jet& b) {
    const double q = a.v / b.v;
    const double qd = (a.d - q * b.d) / b.v;
    const double qdd = (a.dd - 2.0 * qd * b.d - q * b.dd) / b.v;
    return {q, qd, qdd};
  }

  friend bool operator<(const Jet& a, const Jet& b) { return a.v < b.v; }
  friend bool operator>(const Jet& a, const Jet& b) { return a.v > b.v; }
  friend bool operator<=(const Jet& a, const Jet& b) { return a.v <= b.v; }
  friend bool operator>=(const Jet& a, const Jet& b) { return a.v >= b.v; }
  friend bool operator==(const Jet& a, const Jet& b) { return a.v == b.v; }
  friend bool operator!=(const Jet& a, const Jet& b) { return a.v != b.v; }
};

// Chain rule for a unary function with known f, f', f'' at the jet value.
inline Jet chain(const Jet& x, double f, double df, double ddf) {
  return {f, df * x.d, ddf * x.d * x.d + df * x.dd};
}

inline Jet sin(const Jet& x) {
  const double s = std::sin(x.v), c = std::cos(x.v);
  return chain(x, s, c, -s);
}
inline Jet cos(const Jet& x) {
  const double s = std::sin(x.v), c = std::cos(x.v);
  return chain(x, c, -s, -c);
}
inline Jet sqrt(const Jet& x) {
  const double r = std::sqrt(x.v);
  return chain(x, r, 0.5 / r, -0.25 / (r * x.v));
}
inline Jet exp(const Jet& x) {
  const double e = std::exp(x.v);
  return chain(x, e, e, e);
}
inline Jet abs(const Jet& x) { return x.v < 0.0 ? -x : x; }

inline Jet atan2(const Jet& y, const Jet& x) {
  const double r2 = x.v * x.v + y.v * y.v;
  const double num = x.v * y.d - y.v * x.d;
  const double d1 = num / r2;
  const double dnum = x.v * y.dd - y.v * x.dd;  // x'y' - y'x' cancels
  const double dr2 = 2.0 * (x.v * x.d + y.v * y.d);
  return {std::atan2(y.v, x.v), d1, (dnum * r2 - num * dr2) / (r2 * r2)};
}

inline double value_of(double x) { return x; }
inline double value_of(const Jet& x) { return x.v; }

// cos(sqrt(s)) and sin(sqrt(s))/sqrt(s), smooth at s = 0. Used by the sphere
// exponential map so that exp_y(tv) stays differentiable through v = 0.
struct CosSinc {
  double c, dc, ddc;  // C(s), C'(s), C''(s)
  double s, ds, dds;  // S(s), S'(s), S''(s)
};

inline CosSinc cos_sinc_series(double s) {
  CosSinc out{};
  if (s < 0.05) {
    // C(s) = sum (-s)^j/(2j)!, S(s) = sum (-s)^j/(2j+1)!
    double c = 0, dc = 0, ddc = 0, sn = 0, dsn = 0, ddsn = 0;
    double fact_even = 1.0, fact_odd = 1.0;  // (2j)!, (2j+1)!
    for (int j = 0; j < 14; ++j) {
      if (j > 0) {
        fact_even *= (2.0 * j - 1.0) * (2.0 * j);
        fact_odd *= (2.0 * j) * (2.0 * j + 1.0);
      }
      const double sign = (j % 2 == 0) ? 1.0 : -1.0;
      const double pj = std::pow(s, j);
      c += sign * pj / fact_even;
      sn += sign * pj / fact_odd;
      if (j >= 1) {
        const double pj1 = std::pow(s, j - 1);
        dc += sign * j * pj1 / fact_even;
        dsn += sign * j * pj1 / fact_odd;
      }
      if (j >= 2) {
        const double pj2 = std::pow(s, j - 2);
        ddc += sign * j * (j - 1) * pj2 / fact_even;
        ddsn += sign * j * (j - 1) * pj2 / fact_odd;
      }
    }
    out = {c, dc, ddc, sn, dsn, ddsn};
    return out;
  }
  const double r = std::sqrt(s);
  const double c = std::cos(r), sn = std::sin(r) / r;
  const double dc = -0.5 * sn;
  const double dsn = (c - sn) / (2.0 * s);
  const double ddc = -0.5 * dsn;
  const double ddsn = (dc - dsn) / (2.0 * s) - (c - sn) / (2.0 * s * s);
  return {c, dc, ddc, sn, dsn, ddsn};
}

inline double cos_sqrt(double s) { return cos_sinc_series(s).c; }
inline double sinc_sqrt(double s) { return cos_sinc_series(s).s; }
inline Jet cos_sqrt(const Jet& s) {
  const auto k = cos_sinc_series(s.v);
  return chain(s, k.c, k.dc, k.ddc);
}
inline Jet sinc_sqrt(const Jet& s) {
  const auto k = cos_sinc_series(s.v);
  return chain(s, k.s, k.ds, k.dds);
}

}  // namespace hmjacobi

namespace Eigen {

template <>
struct NumTraits<hmjacobi::Jet> : NumTraits<double> {
  using Real = hmjacobi::Jet;
  using NonInteger = hmjacobi::Jet;
  using Nested = hmjacobi::Jet;
  using Literal = hmjacobi::Jet;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 3,
    AddCost = 3,
    MulCost = 9
  };
  static inline hmjacobi::Jet epsilon() { return std::numeric_limits<double>::epsilon(); }
  static inline hmjacobi::Jet dummy_precision() { return 1e-12; }
  static inline hmjacobi::Jet highest() { return std::numeric_limits<double>::max(); }
  static inline hmjacobi::Jet lowest() { return std::numeric_limits<double>::lowest(); }
  static inline int digits10() { return 15; }
};

template <typename BinaryOp>
struct ScalarBinaryOpTraits<hmjacobi::Jet, double, BinaryOp> {
  using ReturnType = hmjacobi::Jet;
};
template <typename BinaryOp>
struct ScalarBinaryOpTraits<double, hmjacobi::Jet, BinaryOp> {
  using ReturnType = hmjacobi::Jet;
};

}  // namespace Eigen
