// Catalog of closed-form maps and fields, addressed by stable string ids
// such as "circle:k=3", "great-circle:k=2", "hopf", "zpow:k=2",
// "identity:s2", "latitude:theta=0.785398", "torus-proj:1".
#pragma once

#include <cmath>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

#include "hmjacobi/jacobi.hpp"

namespace hmjacobi {

struct CatalogId {
  std::string family;
  std::string positional;  // "s2" in identity:s2, "1" in torus-proj:1
  std::map<std::string, std::string> params;
  std::string text;
};

inline CatalogId parse_catalog_id(const std::string& id) {
  CatalogId out;
  out.text = id;
  const auto colon = id.find(':');
  out.family = id.substr(0, colon);
  if (out.family.empty()) throw Error(ErrorCode::UnknownCatalogId, "empty catalog id");
  if (colon == std::string::npos) return out;
  std::string rest = id.substr(colon + 1);
  std::size_t start = 0;
  while (start <= rest.size()) {
    const auto comma = rest.find(',', start);
    const std::string item = rest.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      if (!out.positional.empty() || item.empty()) throw Error(ErrorCode::UnknownCatalogId, "malformed id " + id);
      out.positional = item;
    } else {
      out.params[item.substr(0, eq)] = item.substr(eq + 1);
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

namespace detail {

inline double param_double(const CatalogId& id, const std::string& key, std::optional<double> fallback = {}) {
  const auto it = id.params.find(key);
  if (it == id.params.end()) {
    if (fallback) return *fallback;
    throw Error(ErrorCode::UnknownCatalogId, id.text + ": missing parameter " + key);
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::UnknownCatalogId, id.text + ": bad value for " + key);
  }
}

inline int param_int(const CatalogId& id, const std::string& key, std::optional<int> fallback = {}) {
  const double v = param_double(id, key, fallback ? std::optional<double>(*fallback) : std::nullopt);
  if (v != std::floor(v)) throw Error(ErrorCode::UnknownCatalogId, id.text + ": " + key + " must be an integer");
  return static_cast<int>(v);
}

inline void allow_params(const CatalogId& id, std::initializer_list<const char*> keys) {
  for (const auto& [k, v] : id.params) {
    bool ok = false;
    for (const char* a : keys) ok = ok || k == a;
    if (!ok) throw Error(ErrorCode::UnknownCatalogId, id.text + ": unknown parameter " + k);
  }
}

template <class V>
using scalar_of = typename std::decay_t<V>::Scalar;

/// (a + ib)^k for k >= 0.
template <class S>
std::pair<S, S> complex_power(const S& a, const S& b, int k) {
  S re(1.0), im(0.0);
  for (int i = 0; i < k; ++i) {
    const S nre = re * a - im * b;
    const S nim = re * b + im * a;
    re = nre;
    im = nim;
  }
  return {re, im};
}

inline int sphere_dim_from(const std::string& tag, const std::string& id) {
  if (tag.size() == 2 && tag[0] == 's' && tag[1] >= '1' && tag[1] <= '3') return tag[1] - '0';
  throw Error(ErrorCode::UnknownCatalogId, id + ": expected s1, s2 or s3");
}

}  // namespace detail

// ---- maps ------------------------------------------------------------------------------

inline SmoothMap circle_cover(int k) {
  if (k < 1) throw Error(ErrorCode::UnknownCatalogId, "circle:k needs k >= 1");
  auto m = make_map("circle:k=" + std::to_string(k), Manifold::sphere(1), Manifold::sphere(1), [k](const auto& x) {
    using S = detail::scalar_of<decltype(x)>;
    const auto [re, im] = detail::complex_power<S>(x(0), x(1), k);
    VecT<S> y(2);
    y << re, im;
    return y;
  });
  m.fiber_sampler = [k](const Vec& x, int) {
    std::vector<Vec> pts;
    for (int j = 0; j < k; ++j) {
      const double a = kTwoPi * j / k;
      Vec r(2);
      r << std::cos(a) * x(0) - std::sin(a) * x(1), std::sin(a) * x(0) + std::cos(a) * x(1);
      pts.push_back(r);
    }
    return pts;
  };
  return m;
}

/// gamma_k: S^1 -> S^n (n = 2, 3), theta -> (cos k theta, sin k theta, 0, ...).
inline SmoothMap great_circle(int k, int n = 2) {
  if (k < 1) throw Error(ErrorCode::UnknownCatalogId, "great-circle:k needs k >= 1");
  if (n < 2 || n > 3) throw Error(ErrorCode::UnknownCatalogId, "great-circle:n must be 2 or 3");
  std::string name = "great-circle:k=" + std::to_string(k);
  if (n != 2) name += ",n=" + std::to_string(n);
  return make_map(name, Manifold::sphere(1), Manifold::sphere(n), [k, n](const auto& x) {
    using S = detail::scalar_of<decltype(x)>;
    const auto [re, im] = detail::complex_power<S>(x(0), x(1), k);
    VecT<S> y(n + 1);
    y(0) = re;
    y(1) = im;
    for (int i = 2; i <= n; ++i) y(i) = S(0.0);
    return y;
  });
}

/// Latitude circle at polar angle theta, parametrized isometrically from S^1(sin theta).
inline SmoothMap latitude_circle(double theta) {
  if (!(theta > 0 && theta < kPi)) throw Error(ErrorCode::UnknownCatalogId, "latitude:theta must lie in (0, pi)");
  std::ostringstream os;
  os << "latitude:theta=" << theta;
  const double c = std::cos(theta);
  return make_map(os.str(), Manifold::sphere(1, std::sin(theta)), Manifold::sphere(2), [c](const auto& x) {
    using S = detail::scalar_of<decltype(x)>;
    VecT<S> y(3);
    y << x(0), x(1), S(c);
    return y;
  });
}

/// Hopf fibration S^3 -> S^2, (z1, z2) -> (2 z1 conj(z2), |z1|^2 - |z2|^2).
inline SmoothMap hopf_map() {
  auto m = make_map("hopf", Manifold::sphere(3), Manifold::sphere(2), [](const auto& x) {
    using S = detail::scalar_of<decltype(x)>;
    VecT<S> y(3);
    y << S(2.0) * (x(0) * x(2) + x(1) * x(3)), S(2.0) * (x(1) * x(2) - x(0) * x(3)),
        x(0) * x(0) + x(1) * x(1) - x(2) * x(2) - x(3) * x(3);
    return y;
  });
  m.fiber_sampler = [](const Vec& x, int count) {
    std::vector<Vec> pts;
    for (int j = 0; j < count; ++j) {
      const double a = kTwoPi * j / count, c = std::cos(a), s = std::sin(a);
      Vec r(4);
      r << c * x(0) - s * x(1), s * x(0) + c * x(1), c * x(2) - s * x(3), s * x(2) + c * x(3);
      pts.push_back(r);
    }
    return pts;
  };
  return m;
}

/// z -> z^k on the Riemann sphere, in ambient coordinates of the unit S^2.
inline SmoothMap zpow_map(int k) {
  if (k < 1) throw Error(ErrorCode::UnknownCatalogId, "zpow:k needs k >= 1");
  return make_map("zpow:k=" + std::to_string(k), Manifold::sphere(2), Manifold::sphere(2), [k](const auto& x) {
    using S = detail::scalar_of<decltype(x)>;
    const auto [re, im] = detail::complex_power<S>(x(0), x(1), k);
    S up(1.0), down(1.0);
    for (int i = 0; i < k; ++i) {
      up = up * (S(1.0) + x(2));
      down = down * (S(1.0) - x(2));
    }
    const S den = up + down;
    VecT<S> y(3);
    y << S(2.0) * re / den, S(2.0) * im / den, (up - down) / den;
    return y;
  });
}

inline SmoothMap identity_map(const Manifold& M, const std::string& name) {
  auto m = make_map(name, M, M, [](const auto& x) { return x; });
  m.fiber_sampler = [](const Vec& x, int) { return std::vector<Vec>{x}; };
  return m;
}

inline SmoothMap constant_map(const Manifold& M, const std::string& name) {
  Vec target = Vec::Zero(M.ambient_dim());
  target(M.ambient_dim() - 1) = M.radius();
  return make_map(name, M, M, [target](const auto& x) {
    using S = detail::scalar_of<decltype(x)>;
    VecT<S> y(target.size());
    for (Eigen::Index i = 0; i < target.size(); ++i) y(i) = S(target(i));
    return y;
  });
}

/// Flat torus T^2(2pi, 2pi) -> S^1, (u1, u2) -> u_i.
inline SmoothMap torus_projection(int i) {
  if (i != 1 && i != 2) throw Error(ErrorCode::UnknownCatalogId, "torus-proj index must be 1 or 2");
  const int c = i - 1;
  auto m = make_map("torus-proj:" + std::to_string(i), Manifold::flat_torus({kTwoPi, kTwoPi}), Manifold::sphere(1),
                    [c](const auto& x) {
                      using S = detail::scalar_of<decltype(x)>;
                      using std::cos;
                      using std::sin;
                      VecT<S> y(2);
                      y << cos(x(c)), sin(x(c));
                      return y;
                    });
  m.fiber_sampler = [c](const Vec& x, int count) {
    std::vector<Vec> pts;
    for (int j = 0; j < count; ++j) {
      Vec r = x;
      r(1 - c) = std::fmod(x(1 - c) + kTwoPi * j / count, kTwoPi);
      pts.push_back(r);
    }
    return pts;
  };
  return m;
}

inline SmoothMap catalog_map(const std::string& text) {
  const CatalogId id = parse_catalog_id(text);
  using detail::allow_params;
  if (id.family == "circle") {
    allow_params(id, {"k"});
    return circle_cover(detail::param_int(id, "k"));
  }
  if (id.family == "great-circle") {
    allow_params(id, {"k", "n"});
    return great_circle(detail::param_int(id, "k"), detail::param_int(id, "n", 2));
  }
  if (id.family == "latitude") {
    allow_params(id, {"theta"});
    return latitude_circle(detail::param_double(id, "theta"));
  }
  if (id.family == "hopf" && id.params.empty() && id.positional.empty()) return hopf_map();
  if (id.family == "zpow") {
    allow_params(id, {"k"});
    return zpow_map(detail::param_int(id, "k"));
  }
  if (id.family == "identity" && id.params.empty()) {
    const int n = detail::sphere_dim_from(id.positional, text);
    return identity_map(Manifold::sphere(n), "identity:s" + std::to_string(n));
  }
  if (id.family == "constant" && id.params.empty()) {
    const int n = detail::sphere_dim_from(id.positional, text);
    return constant_map(Manifold::sphere(n), "constant:s" + std::to_string(n));
  }
  if (id.family == "torus-proj" && id.params.empty()) {
    if (id.positional != "1" && id.positional != "2")
      throw Error(ErrorCode::UnknownCatalogId, text + ": expected torus-proj:1 or torus-proj:2");
    return torus_projection(id.positional[0] - '0');
  }
  throw Error(ErrorCode::UnknownCatalogId, "unknown map id " + text);
}

struct CatalogEntry {
  std::string id;
  std::string domain;
  std::string codomain;
  bool harmonic;
  bool morphism;
};

inline std::vector<CatalogEntry> catalog_entries() {
  return {
      {"circle:k=K", "S1", "S1", true, true},
      {"great-circle:k=K", "S1", "S2 (or S3 with n=3)", true, false},
      {"latitude:theta=T", "S1(sin T)", "S2", false, false},
      {"hopf", "S3", "S2", true, true},
      {"zpow:k=K", "S2", "S2", true, true},
      {"identity:sN", "SN", "SN", true, true},
      {"constant:sN", "SN", "SN", true, true},
      {"torus-proj:i", "T2(2pi,2pi)", "S1", true, true},
  };
}

// ---- fields and sections ----------------------------------------------------------------

/// Skew generator E_ab = e_a e_b^T - e_b e_a^T of so(n+1).
inline Mat so_basis(int dim, int a, int b) {
  Mat E = Mat::Zero(dim, dim);
  E(a, b) = 1.0;
  E(b, a) = -1.0;
  return E;
}

/// Linear field y -> A y on a sphere (Killing when A is skew).
inline VectorField linear_field(const std::string& name, const Manifold& sphere, const Mat& A) {
  return make_field(name, sphere, [A](const auto& y) {
    using S = detail::scalar_of<decltype(y)>;
    VecT<S> out(A.rows());
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      S acc(0.0);
      for (Eigen::Index j = 0; j < A.cols(); ++j)
        if (A(i, j) != 0.0) acc += S(A(i, j)) * y(j);
      out(i) = acc;
    }
    return out;
  });
}

/// Gradient of the height function <b, y>/r on a sphere: b - <b, y> y / r^2.
inline VectorField conformal_field(const std::string& name, const Manifold& sphere, int axis) {
  const double r2 = sphere.radius() * sphere.radius();
  const int k = sphere.ambient_dim();
  return make_field(name, sphere, [axis, r2, k](const auto& y) {
    using S = detail::scalar_of<decltype(y)>;
    VecT<S> out(k);
    for (int i = 0; i < k; ++i) out(i) = S(i == axis ? 1.0 : 0.0) - y(axis) * y(i) / S(r2);
    return out;
  });
}

inline VectorField zero_field(const Manifold& M) {
  const int k = M.ambient_dim();
  return make_field("zero", M, [k](const auto& y) {
    using S = detail::scalar_of<decltype(y)>;
    VecT<S> out(k);
    for (int i = 0; i < k; ++i) out(i) = S(0.0);
    return out;
  });
}

/// Complex structure (x1,x2,x3,x4) -> (-x2,x1,-x4,x3), as a matrix.
inline Mat complex_structure(int dim) {
  Mat J = Mat::Zero(dim, dim);
  for (int i = 0; i + 1 < dim; i += 2) {
    J(i + 1, i) = 1.0;
    J(i, i + 1) = -1.0;
  }
  return J;
}

/// Matrix A of a linear catalog field y -> A y (killing, rotation, complex) on the sphere N.
inline std::optional<Mat> catalog_skew_matrix(const std::string& text, const Manifold& N) {
  const CatalogId id = parse_catalog_id(text);
  const int k = N.ambient_dim();
  const bool linear = id.family == "killing" || id.family == "rotation" || id.family == "complex";
  if (!linear) return std::nullopt;
  if (N.kind() != ManifoldKind::Sphere) throw Error(ErrorCode::UnknownCatalogId, text + " needs a sphere codomain, got " + N.name());
  if (id.family == "killing") {
    if (!id.positional.empty()) {
      if (k != 3) throw Error(ErrorCode::UnknownCatalogId, text + ": axis form needs S2");
      // a x y for the coordinate axis a
      const std::string& ax = id.positional;
      int a = ax == "x" ? 0 : ax == "y" ? 1 : ax == "z" ? 2 : -1;
      if (a < 0) throw Error(ErrorCode::UnknownCatalogId, text + ": axis must be x, y or z");
      const int b = (a + 1) % 3, c = (a + 2) % 3;
      return so_basis(3, c, b);
    }
    detail::allow_params(id, {"a", "b", "c"});
    const int a = detail::param_int(id, "a"), b = detail::param_int(id, "b");
    if (a < 0 || b < 0 || a >= k || b >= k || a == b)
      throw Error(ErrorCode::UnknownCatalogId, text + ": generator indices out of range");
    return Mat(detail::param_double(id, "c", 1.0) * so_basis(k, a, b));
  }
  if (id.family == "rotation") {
    detail::allow_params(id, {"c"});
    return Mat(detail::param_double(id, "c", 1.0) * so_basis(k, 1, 0));
  }
  if (k % 2 != 0) throw Error(ErrorCode::UnknownCatalogId, text + ": needs an odd-dimensional sphere");
  detail::allow_params(id, {"c"});
  return Mat(detail::param_double(id, "c", 1.0) * complex_structure(k));
}

/// Resolves a codomain vector field id on the sphere N.
inline std::optional<VectorField> catalog_field(const std::string& text, const Manifold& N) {
  if (auto A = catalog_skew_matrix(text, N)) return linear_field(text, N, *A);
  const CatalogId id = parse_catalog_id(text);
  const int k = N.ambient_dim();
  const bool sphere = N.kind() == ManifoldKind::Sphere;
  auto need_sphere = [&] {
    if (!sphere) throw Error(ErrorCode::UnknownCatalogId, text + " needs a sphere codomain, got " + N.name());
  };
  if (id.family == "zero") return zero_field(N);
  if (id.family == "conformal") {
    need_sphere();
    detail::allow_params(id, {"axis"});
    const int axis = detail::param_int(id, "axis", k - 1);
    if (axis < 0 || axis >= k) throw Error(ErrorCode::UnknownCatalogId, text + ": axis out of range");
    return conformal_field(text, N, axis);
  }
  return std::nullopt;
}

/// Resolves a section id along phi. Codomain fields compose with phi; the
/// families normal/normal-sin/tangent are Fourier sections along circle-domain maps.
inline SectionAlongMap catalog_section(const std::string& text, const SmoothMap& phi) {
  if (auto X = catalog_field(text, phi.codomain)) return compose_field(*X, phi);
  const CatalogId id = parse_catalog_id(text);
  if (id.family == "normal" || id.family == "normal-sin" || id.family == "tangent") {
    if (phi.domain.kind() != ManifoldKind::Sphere || phi.domain.dim() != 1)
      throw Error(ErrorCode::UnknownCatalogId, text + " needs a circle-domain map");
    detail::allow_params(id, {"m", "axis"});
    const int m = detail::param_int(id, "m", 0);
    if (m < 0) throw Error(ErrorCode::UnknownCatalogId, text + ": m must be >= 0");
    const double rm = std::pow(phi.domain.radius(), m);
    const int k = phi.codomain.ambient_dim();
    const bool use_sin = id.family == "normal-sin";
    if (id.family == "tangent") {
      detail::allow_params(id, {"m"});
      auto f = phi.eval;
      auto fj = phi.eval_jet;
      SectionAlongMap V{text, phi, {}, {}, std::nullopt};
      V.eval = [f, m, rm, k](const Vec& x) {
        const auto [re, im] = detail::complex_power<double>(x(0), x(1), m);
        const Vec y = f(x);
        Vec t = Vec::Zero(k);
        t(0) = -y(1);
        t(1) = y(0);
        return Vec(re / rm * t);
      };
      if (fj)
        V.eval_jet = [fj, m, rm, k](const JetVec& x) {
          const auto [re, im] = detail::complex_power<Jet>(x(0), x(1), m);
          const JetVec y = fj(x);
          JetVec t(k);
          for (int i = 0; i < k; ++i) t(i) = Jet(0.0);
          t(0) = -y(1);
          t(1) = y(0);
          return JetVec(t * (re / Jet(rm)));
        };
      return V;
    }
    const int axis = detail::param_int(id, "axis", 2);
    if (axis < 2 || axis >= k) throw Error(ErrorCode::UnknownCatalogId, text + ": normal axis out of range");
    return make_section(text, phi, [m, rm, k, axis, use_sin](const auto& x) {
      using S = detail::scalar_of<decltype(x)>;
      const auto [re, im] = detail::complex_power<S>(x(0), x(1), m);
      VecT<S> out(k);
      for (int i = 0; i < k; ++i) out(i) = S(0.0);
      out(axis) = (use_sin ? im : re) / S(rm);
      return out;
    });
  }
  throw Error(ErrorCode::UnknownCatalogId, "unknown field id " + text);
}

}  // namespace hmjacobi
