#include "subkam/lagrangian.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

namespace subkam {

Polynomial::Polynomial(int dim, std::vector<Term> terms) : dim_(dim), terms_(std::move(terms)) {
  for (const auto& t : terms_) {
    if (static_cast<int>(t.exps.size()) != dim_) {
      throw Error(ErrorKind::kInvalidArgument, "polynomial term exponent list must have one entry per coordinate");
    }
    for (int e : t.exps) {
      if (e < 0) throw Error(ErrorKind::kInvalidArgument, "polynomial exponents must be nonnegative");
    }
  }
}

Polynomial Polynomial::constant(int dim, double value) {
  return Polynomial(dim, {Term{value, std::vector<int>(dim, 0)}});
}

double Polynomial::value(const Vec& x) const {
  double s = 0.0;
  for (const auto& t : terms_) {
    double v = t.coeff;
    for (int i = 0; i < dim_; ++i) {
      for (int k = 0; k < t.exps[i]; ++k) v *= x(i);
    }
    s += v;
  }
  return s;
}

Vec Polynomial::gradient(const Vec& x) const {
  Vec g = Vec::Zero(dim_);
  for (const auto& t : terms_) {
    for (int j = 0; j < dim_; ++j) {
      if (t.exps[j] == 0) continue;
      double v = t.coeff * t.exps[j];
      for (int i = 0; i < dim_; ++i) {
        const int e = (i == j) ? t.exps[i] - 1 : t.exps[i];
        for (int k = 0; k < e; ++k) v *= x(i);
      }
      g(j) += v;
    }
  }
  return g;
}

Potential::Potential(Polynomial numerator) : num_(std::move(numerator)) {}

Potential::Potential(Polynomial numerator, Polynomial denominator)
    : num_(std::move(numerator)), den_(std::move(denominator)), has_den_(true) {
  if (num_.dim() != den_.dim()) {
    throw Error(ErrorKind::kInvalidArgument, "rational potential: numerator and denominator dimensions differ");
  }
}

double Potential::value(const Vec& x) const {
  const double p = num_.value(x);
  if (!has_den_) return p;
  return p / den_.value(x);
}

Vec Potential::gradient(const Vec& x) const {
  if (!has_den_) return num_.gradient(x);
  const double p = num_.value(x);
  const double q = den_.value(x);
  return (num_.gradient(x) * q - den_.gradient(x) * p) / (q * q);
}

Potential Potential::shifted(double s) const {
  // P/Q + s = (P + s Q) / Q
  auto terms = num_.terms();
  if (has_den_) {
    for (auto t : den_.terms()) {
      t.coeff *= s;
      terms.push_back(std::move(t));
    }
    return Potential(Polynomial(dim(), std::move(terms)), den_);
  }
  terms.push_back(Polynomial::Term{s, std::vector<int>(dim(), 0)});
  return Potential(Polynomial(dim(), std::move(terms)));
}

Potential rational_well(int dim, int active) {
  if (active < 1 || active > dim) throw Error(ErrorKind::kInvalidArgument, "rational_well: bad active count");
  std::vector<Polynomial::Term> sq;
  for (int i = 0; i < active; ++i) {
    std::vector<int> e(dim, 0);
    e[i] = 2;
    sq.push_back({1.0, e});
  }
  auto den = sq;
  den.push_back({1.0, std::vector<int>(dim, 0)});
  return Potential(Polynomial(dim, sq), Polynomial(dim, den));
}

Potential double_well(int dim) {
  // (|x|^2 - 1)^2 = sum_i x_i^4 + 2 sum_{i<j} x_i^2 x_j^2 - 2 |x|^2 + 1
  std::vector<Polynomial::Term> t;
  for (int i = 0; i < dim; ++i) {
    std::vector<int> e(dim, 0);
    e[i] = 4;
    t.push_back({1.0, e});
    e[i] = 2;
    t.push_back({-2.0, e});
    for (int j = i + 1; j < dim; ++j) {
      std::vector<int> f(dim, 0);
      f[i] = 2;
      f[j] = 2;
      t.push_back({2.0, f});
    }
  }
  t.push_back({1.0, std::vector<int>(dim, 0)});
  return Potential(Polynomial(dim, std::move(t)));
}

Potential zero_potential(int dim) { return Potential(Polynomial(dim, {})); }

Lagrangian::Lagrangian(Params p) : p_(std::move(p)) {
  if (p_.m < 1 || p_.m > kMaxDim) throw Error(ErrorKind::kInvalidArgument, "lagrangian: bad control dimension");
  if (!(p_.convexity_modulus > 0.0)) throw Error(ErrorKind::kInvalidArgument, "lagrangian: ell_1 must be positive");
  if (p_.attractor.x_star.size() == 0) p_.attractor.x_star = Vec::Zero(d());
  if (p_.attractor.x_star.size() != d()) {
    throw Error(ErrorKind::kInvalidArgument, "lagrangian: x_star dimension does not match the potential");
  }
}

double Lagrangian::kinetic_value(const Vec& u) const {
  const double r2 = u.squaredNorm();
  switch (p_.kinetic.kind) {
    case Kinetic::Kind::kQuadratic: return 0.5 * r2;
    case Kinetic::Kind::kQuartic: return 0.5 * r2 + 0.25 * p_.kinetic.beta * r2 * r2;
    case Kinetic::Kind::kCubic: {
      double s = 0.0;
      for (int i = 0; i < u.size(); ++i) s += u(i) * u(i) * u(i) + u(i) * u(i);
      return s;
    }
  }
  return 0.0;
}

Vec Lagrangian::grad_x(const Vec& x, const Vec&) const { return p_.potential.gradient(x); }

Vec Lagrangian::grad_u(const Vec&, const Vec& u) const {
  switch (p_.kinetic.kind) {
    case Kinetic::Kind::kQuadratic: return u;
    case Kinetic::Kind::kQuartic: return u * (1.0 + p_.kinetic.beta * u.squaredNorm());
    case Kinetic::Kind::kCubic: {
      Vec g(u.size());
      for (int i = 0; i < u.size(); ++i) g(i) = 3.0 * u(i) * u(i) + 2.0 * u(i);
      return g;
    }
  }
  return u;
}

Mat Lagrangian::hess_u(const Vec&, const Vec& u) const {
  const int m = static_cast<int>(u.size());
  switch (p_.kinetic.kind) {
    case Kinetic::Kind::kQuadratic: return Mat::Identity(m, m);
    case Kinetic::Kind::kQuartic: {
      const double b = p_.kinetic.beta;
      return Mat::Identity(m, m) * (1.0 + b * u.squaredNorm()) + 2.0 * b * u * u.transpose();
    }
    case Kinetic::Kind::kCubic: {
      Mat h = Mat::Zero(m, m);
      for (int i = 0; i < m; ++i) h(i, i) = 6.0 * u(i) + 2.0;
      return h;
    }
  }
  return Mat::Identity(m, m);
}

Lagrangian Lagrangian::shifted(double s) const {
  Params q = p_;
  q.potential = p_.potential.shifted(s);
  return Lagrangian(std::move(q));
}

Lagrangian Lagrangian::with_attractor(AttractorData a) const {
  Params q = p_;
  q.attractor = std::move(a);
  return Lagrangian(std::move(q));
}

Lagrangian quadratic_lagrangian(std::string name, Potential v, int m, AttractorData attractor, double growth_C1) {
  return Lagrangian({std::move(name), Kinetic{}, std::move(v), m, 1.0, growth_C1, std::move(attractor)});
}

Lagrangian quartic_lagrangian(std::string name, Potential v, int m, double beta, AttractorData attractor,
                              double growth_C1) {
  if (!(beta >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "quartic lagrangian: beta must be >= 0");
  return Lagrangian({std::move(name), Kinetic{Kinetic::Kind::kQuartic, beta}, std::move(v), m, 1.0, growth_C1,
                     std::move(attractor)});
}

Lagrangian energy_lagrangian(int d, int m) {
  return quadratic_lagrangian("energy", zero_potential(d), m, AttractorData{1.0, Vec::Zero(d), 0.0});
}

namespace {

// phi(u) = <q,u> - L(x,u), concave under (L2).
double ascent_objective(const Lagrangian& L, const Vec& x, const Vec& q, const Vec& u) {
  return q.dot(u) - L.value(x, u);
}

// Steepest ascent where each step maximizes along the gradient by bisection on
// the directional derivative.
bool bisection_ascent(const Lagrangian& L, const Vec& x, const Vec& q, Vec& u, int& iters) {
  for (int it = 0; it < 500; ++it, ++iters) {
    const Vec g = q - L.grad_u(x, u);
    if (g.norm() <= kLegendreTol) return true;
    auto slope = [&](double a) { return g.dot(q - L.grad_u(x, u + a * g)); };
    double lo = 0.0;
    double hi = 1.0;
    int grow = 0;
    while (slope(hi) > 0.0) {
      lo = hi;
      hi *= 2.0;
      if (++grow > 200) return false;  // unbounded ascent: not concave
    }
    for (int b = 0; b < 100 && hi - lo > 1e-16 * (1.0 + hi); ++b) {
      const double mid = 0.5 * (lo + hi);
      (slope(mid) > 0.0 ? lo : hi) = mid;
    }
    u += 0.5 * (lo + hi) * g;
  }
  return (q - L.grad_u(x, u)).norm() <= kLegendreTol;
}

}  // namespace

LegendreResult legendre(const Lagrangian& L, const Vec& x, const ReducedMomentum& q) {
  const int m = L.m();
  if (q.q.size() != m || !q.q.allFinite()) {
    throw Error(ErrorKind::kEvaluation, "legendre: momentum must be finite with dimension m");
  }
  LegendreResult res;
  Vec u = Vec::Zero(m);
  bool newton_ok = false;
  for (int it = 0; it < 100; ++it) {
    const Vec g = q.q - L.grad_u(x, u);
    if (g.norm() <= kLegendreTol) {
      newton_ok = true;
      break;
    }
    ++res.iterations;
    const Eigen::LLT<Mat> llt(L.hess_u(x, u));
    if (llt.info() != Eigen::Success) break;
    const Vec step = llt.solve(g);
    const double f0 = ascent_objective(L, x, q.q, u);
    const double slope = g.dot(step);
    double a = 1.0;
    bool accepted = false;
    for (int b = 0; b < 60; ++b, a *= 0.5) {
      if (ascent_objective(L, x, q.q, u + a * step) >= f0 + 1e-4 * a * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    u += a * step;
  }
  if (!newton_ok) {
    res.used_fallback = true;
    u = Vec::Zero(m);
    if (!bisection_ascent(L, x, q.q, u, res.iterations)) {
      throw Error(ErrorKind::kConvexityViolation, "legendre: inner maximization did not converge",
                  (q.q - L.grad_u(x, u)).norm());
    }
  }
  res.argmax = u;
  res.value = ascent_objective(L, x, q.q, u);
  if (!std::isfinite(res.value)) throw Error(ErrorKind::kEvaluation, "legendre: non-finite value");
  return res;
}

LegendreResult hamiltonian_full(const Lagrangian& L, const ControlSystem& sys, const Vec& x, const Vec& p) {
  const Mat f = sys.fields_at(x);
  return legendre(L, x, ReducedMomentum{f.transpose() * p});
}

double hamiltonian(const Lagrangian& L, const ControlSystem& sys, const Vec& x, const Vec& p) {
  return hamiltonian_full(L, sys, x, p).value;
}

namespace {

// a precedes b: smaller norm first, then lexicographic, both with tolerance.
bool tie_break_less(const Vec& a, const Vec& b) {
  constexpr double tol = 1e-6;
  const double na = a.norm();
  const double nb = b.norm();
  if (na < nb - tol) return true;
  if (nb < na - tol) return false;
  for (int i = 0; i < a.size(); ++i) {
    if (a(i) < b(i) - tol) return true;
    if (b(i) < a(i) - tol) return false;
  }
  return false;
}

Vec polish_minimum(const Lagrangian& L, Vec x) {
  const Vec u0 = Vec::Zero(L.m());
  auto f = [&](const Vec& y) { return L.value(y, u0); };
  double fx = f(x);
  double step = 1.0;
  for (int it = 0; it < 20000; ++it) {
    const Vec g = L.grad_x(x, u0);
    const double gn2 = g.squaredNorm();
    if (std::sqrt(gn2) <= 1e-10) break;
    double a = std::min(1.0, 2.0 * step);
    bool moved = false;
    for (int b = 0; b < 80; ++b, a *= 0.5) {
      const Vec y = x - a * g;
      const double fy = f(y);
      if (fy <= fx - 1e-4 * a * gn2) {
        x = y;
        fx = fy;
        step = a;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return x;
}

}  // namespace

OracleResult oracle_critical(const Lagrangian& L, double search_radius, int grid_n) {
  if (grid_n < 2) throw Error(ErrorKind::kInvalidArgument, "oracle_critical: grid_n must be >= 2");
  if (search_radius < L.attractor().K_L_radius) {
    throw Error(ErrorKind::kInvalidArgument, "oracle_critical: search radius smaller than K_L");
  }
  const int d = L.d();
  const Vec u0 = Vec::Zero(L.m());
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(grid_n);
  const double h = 2.0 * search_radius / (grid_n - 1);

  auto node = [&](std::size_t idx) {
    Vec x(d);
    for (int i = d - 1; i >= 0; --i) {
      x(i) = -search_radius + h * static_cast<double>(idx % grid_n);
      idx /= grid_n;
    }
    return x;
  };
  std::vector<double> vals(total, std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < total; ++k) {
    const Vec x = node(k);
    if (x.norm() <= search_radius + 1e-12) vals[k] = L.value(x, u0);
  }
  // Grid local minima over axis neighbours.
  std::vector<std::size_t> candidates;
  std::size_t stride = 1;
  std::vector<std::size_t> strides(d);
  for (int i = d - 1; i >= 0; --i) {
    strides[i] = stride;
    stride *= grid_n;
  }
  for (std::size_t k = 0; k < total; ++k) {
    if (!std::isfinite(vals[k])) continue;
    bool is_min = true;
    for (int i = 0; i < d && is_min; ++i) {
      const std::size_t coord = (k / strides[i]) % grid_n;
      if (coord > 0 && vals[k - strides[i]] < vals[k]) is_min = false;
      if (coord + 1 < static_cast<std::size_t>(grid_n) && vals[k + strides[i]] < vals[k]) is_min = false;
    }
    if (is_min) candidates.push_back(k);
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
  if (candidates.size() > 64) candidates.resize(64);

  OracleResult best{std::numeric_limits<double>::infinity(), Vec()};
  std::vector<OracleResult> polished;
  for (auto k : candidates) {
    Vec x = polish_minimum(L, node(k));
    polished.push_back({L.value(x, u0), x});
    best.c = std::min(best.c, polished.back().c);
  }
  for (const auto& r : polished) {
    if (r.c > best.c + 1e-9) continue;
    if (best.x_star.size() == 0 || tie_break_less(r.x_star, best.x_star)) best.x_star = r.x_star;
  }
  best.c = L.value(best.x_star, u0);
  return best;
}

LagrangianDiagnostics check_l1_l2_l3(const Lagrangian& L, const ControlSystem& sys, int n_samples, std::uint64_t seed,
                                     const SampleBoxes& boxes) {
  if (n_samples < 1) throw Error(ErrorKind::kInvalidArgument, "check_l1_l2_l3: n_samples must be >= 1");
  const int d = L.d();
  const int m = L.m();
  const auto& att = L.attractor();
  const Vec u0 = Vec::Zero(m);
  const double c_star = L.value(att.x_star, u0);
  const double outer = std::max(boxes.x_radius, 4.0 * att.K_L_radius);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto sample = [&](int n, double r) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = r * unit(rng);
    return v;
  };

  LagrangianDiagnostics rep;
  rep.n_samples = n_samples;
  rep.min_hessian_eigenvalue = std::numeric_limits<double>::infinity();
  rep.inf_outside_attractor = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_samples; ++s) {
    const Vec x = sample(d, boxes.x_radius);
    const Vec u = sample(m, boxes.u_radius);
    const double l = L.value(x, u);
    rep.reversibility_violation =
        std::max(rep.reversibility_violation, std::fabs(l - L.value(x, -u)) / (1.0 + std::fabs(l)));
    const Eigen::SelfAdjointEigenSolver<Mat> eig(L.hess_u(x, u));
    rep.min_hessian_eigenvalue = std::min(rep.min_hessian_eigenvalue, eig.eigenvalues().minCoeff());
    const double lower = u.squaredNorm() / (2.0 * L.ell1()) + c_star;
    rep.lower_bound_violation = std::max(rep.lower_bound_violation, lower - l);
    rep.growth_ratio = std::max(rep.growth_ratio, L.grad_x(x, u).norm() / (1.0 + u.squaredNorm()));

    // Points outside K_L: rescale a random direction into the annulus.
    Vec y = sample(d, 1.0);
    if (y.norm() < 1e-12) y = Vec::Unit(d, 0);
    const double r = att.K_L_radius + (outer - att.K_L_radius) * (0.5 + 0.5 * unit(rng)) + 1e-9;
    y *= r / y.norm();
    rep.inf_outside_attractor = std::min(rep.inf_outside_attractor, L.value(y, u0));

    // Hamiltonian Lipschitz fit on pairs inside the x box.
    if (eig.eigenvalues().minCoeff() <= 0.0) continue;
    const Vec x2 = sample(d, boxes.x_radius);
    const Vec p = sample(d, boxes.p_radius);
    const double dx = (x - x2).norm();
    if (dx > 1e-9 && L.kinetic().kind != Kinetic::Kind::kCubic) {
      const double dh = std::fabs(hamiltonian(L, sys, x, p) - hamiltonian(L, sys, x2, p));
      rep.hamiltonian_lipschitz = std::max(rep.hamiltonian_lipschitz, dh / ((1.0 + p.squaredNorm()) * dx));
    }
  }
  rep.l1_flag = rep.reversibility_violation > 1e-12;
  rep.l2_flag = rep.min_hessian_eigenvalue < 1.0 / L.ell1() - 1e-9;
  rep.lower_bound_flag = rep.lower_bound_violation > 1e-9;
  rep.growth_flag = rep.growth_ratio > L.growth_C1();
  rep.l3_flag = rep.inf_outside_attractor < att.gap + c_star - 1e-6;
  rep.x_star_outside_attractor = att.x_star.norm() > att.K_L_radius;
  return rep;
}

}  // namespace subkam
