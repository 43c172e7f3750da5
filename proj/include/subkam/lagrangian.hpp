#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "subkam/core.hpp"
#include "subkam/systems.hpp"

namespace subkam {

/// Sparse multivariate polynomial: sum_k coeff_k * prod_i x_i^{exps_k[i]}.
class Polynomial {
 public:
  struct Term {
    double coeff = 0.0;
    std::vector<int> exps;
  };

  Polynomial() = default;
  Polynomial(int dim, std::vector<Term> terms);

  static Polynomial constant(int dim, double value);

  int dim() const { return dim_; }
  const std::vector<Term>& terms() const { return terms_; }
  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;

 private:
  int dim_ = 0;
  std::vector<Term> terms_;
};

/// V(x) = P(x) / Q(x); Q defaults to 1. Q must stay positive where evaluated.
class Potential {
 public:
  Potential() = default;
  explicit Potential(Polynomial numerator);
  Potential(Polynomial numerator, Polynomial denominator);

  int dim() const { return num_.dim(); }
  bool is_rational() const { return has_den_; }
  const Polynomial& numerator() const { return num_; }
  const Polynomial& denominator() const { return den_; }

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  Potential shifted(double s) const;

 private:
  Polynomial num_;
  Polynomial den_;
  bool has_den_ = false;
};

/// |P x|^2 / (1 + |P x|^2) where P keeps the first `active` coordinates.
Potential rational_well(int dim, int active);
/// (|x|^2 - 1)^2.
Potential double_well(int dim);
Potential zero_potential(int dim);

/// Control part of a separable Lagrangian L(x,u) = K(u) + V(x).
struct Kinetic {
  enum class Kind {
    kQuadratic,  ///< |u|^2 / 2
    kQuartic,    ///< |u|^2 / 2 + beta |u|^4 / 4
    kCubic,      ///< sum_i u_i^3 + u_i^2 (non-reversible, not convex; diagnostics only)
  };
  Kind kind = Kind::kQuadratic;
  double beta = 0.0;
};

/// Compact attractor data: K_L is the closed ball of radius K_L_radius.
struct AttractorData {
  double K_L_radius = 1.0;
  Vec x_star;
  double gap = 0.0;  ///< delta_L
};

struct ReducedMomentum {
  Vec q;  ///< F*(x) p
};

/// Tonelli-in-u Lagrangian with analytic derivatives. Immutable.
class Lagrangian {
 public:
  struct Params {
    std::string name;
    Kinetic kinetic;
    Potential potential;
    int m = 1;
    double convexity_modulus = 1.0;  ///< ell_1: D^2_u L >= 1 / ell_1
    double growth_C1 = 1.0;          ///< |D_x L| <= C_1 (1 + |u|^2)
    AttractorData attractor;
  };

  explicit Lagrangian(Params p);

  const std::string& name() const { return p_.name; }
  int d() const { return p_.potential.dim(); }
  int m() const { return p_.m; }
  double ell1() const { return p_.convexity_modulus; }
  double growth_C1() const { return p_.growth_C1; }
  const AttractorData& attractor() const { return p_.attractor; }
  const Kinetic& kinetic() const { return p_.kinetic; }
  const Potential& potential() const { return p_.potential; }
  const Params& params() const { return p_; }

  double value(const Vec& x, const Vec& u) const { return kinetic_value(u) + p_.potential.value(x); }
  Vec grad_x(const Vec& x, const Vec& u) const;
  Vec grad_u(const Vec& x, const Vec& u) const;
  Mat hess_u(const Vec& x, const Vec& u) const;

  /// Copy with L + s (attractor unchanged).
  Lagrangian shifted(double s) const;
  Lagrangian with_attractor(AttractorData a) const;

 private:
  double kinetic_value(const Vec& u) const;

  Params p_;
};

/// |u|^2/2 + V(x).
Lagrangian quadratic_lagrangian(std::string name, Potential v, int m, AttractorData attractor, double growth_C1 = 1.0);
/// |u|^2/2 + beta |u|^4/4 + V(x).
Lagrangian quartic_lagrangian(std::string name, Potential v, int m, double beta, AttractorData attractor,
                              double growth_C1 = 1.0);
/// Pure energy |u|^2/2 on R^d.
Lagrangian energy_lagrangian(int d, int m);

struct LegendreResult {
  double value = 0.0;
  Vec argmax;
  int iterations = 0;
  bool used_fallback = false;
};

inline constexpr double kLegendreTol = 1e-10;

/// sup_u { <q,u> - L(x,u) } and its maximizer. Damped Newton ascent from u = 0
/// with a bisection line-search fallback.
LegendreResult legendre(const Lagrangian& L, const Vec& x, const ReducedMomentum& q);

/// H(x,p) = L*(x, F*(x) p).
double hamiltonian(const Lagrangian& L, const ControlSystem& sys, const Vec& x, const Vec& p);
LegendreResult hamiltonian_full(const Lagrangian& L, const ControlSystem& sys, const Vec& x, const Vec& p);

struct OracleResult {
  double c = 0.0;
  Vec x_star;
};

/// c = min_x L(x,0): grid scan over the ball of radius search_radius, then
/// Armijo gradient descent from every grid local minimum. Ties (within 1e-9)
/// go to the smallest |x|, then lexicographic order.
OracleResult oracle_critical(const Lagrangian& L, double search_radius, int grid_n);

struct LagrangianDiagnostics {
  int n_samples = 0;
  double reversibility_violation = 0.0;  ///< max |L(x,u) - L(x,-u)| / (1 + |L|)
  double min_hessian_eigenvalue = 0.0;
  double lower_bound_violation = 0.0;    ///< max (|u|^2/(2 ell1) + L(x*,0) - L(x,u)), clipped at 0
  double growth_ratio = 0.0;             ///< max |D_x L| / (1 + |u|^2)
  double inf_outside_attractor = 0.0;    ///< sampled inf of L(.,0) outside K_L
  double hamiltonian_lipschitz = 0.0;    ///< fitted C_R in |H(x,p)-H(y,p)| <= C_R (1+|p|^2)|x-y|
  bool l1_flag = false;
  bool l2_flag = false;
  bool lower_bound_flag = false;
  bool growth_flag = false;
  bool l3_flag = false;
  bool x_star_outside_attractor = false;

  bool all_ok() const {
    return !l1_flag && !l2_flag && !lower_bound_flag && !growth_flag && !l3_flag && !x_star_outside_attractor;
  }
};

struct SampleBoxes {
  double x_radius = 2.0;
  double u_radius = 2.0;
  double p_radius = 2.0;
};

LagrangianDiagnostics check_l1_l2_l3(const Lagrangian& L, const ControlSystem& sys, int n_samples, std::uint64_t seed,
                                     const SampleBoxes& boxes = {});

}  // namespace subkam
