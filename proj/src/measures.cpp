#include "subkam/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "subkam/parallel.hpp"

namespace subkam {

namespace {

double node_coord(int i, int n, double half) {
  if (n == 1) return 0.0;
  return -half + 2.0 * half * static_cast<double>(i) / static_cast<double>(n - 1);
}

// Odometer over a d-dimensional index box of side n.
bool next_index(std::vector<int>& idx, int n) {
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (++idx[k] < n) return true;
    idx[k] = 0;
  }
  return false;
}

double ipow(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

}  // namespace

MeasureGrid::MeasureGrid(int d, int m, double R, int n_x, double U, int n_u)
    : d_(d), m_(m), R_(R), U_(U), n_x_(n_x), n_u_(n_u) {
  if (d < 1 || d > kMaxDim || m < 1 || m > kMaxDim) throw Error(ErrorKind::kInvalidArgument, "measure grid dimension");
  if (!(R > 0.0) || !(U >= 0.0) || n_x < 2 || n_u < 1)
    throw Error(ErrorKind::kInvalidArgument, "measure grid needs R > 0, U >= 0, n_x >= 2, n_u >= 1");
  hx_ = 2.0 * R / (n_x - 1);
  hu_ = n_u > 1 ? 2.0 * U / (n_u - 1) : 0.0;

  std::size_t box = 1;
  for (int k = 0; k < d; ++k) box *= static_cast<std::size_t>(n_x);
  lookup_.assign(box, -1);
  std::vector<int> idx(d, 0);
  std::size_t flat = 0;
  const double tol = 1e-12 * R;
  do {
    Vec x(d);
    for (int k = 0; k < d; ++k) x[k] = node_coord(idx[k], n_x, R);
    if (x.norm() <= R + tol) {
      lookup_[flat] = static_cast<long>(states_.size());
      states_.push_back(x);
    }
    ++flat;
  } while (next_index(idx, n_x));

  std::vector<int> cidx(m, 0);
  do {
    Vec u(m);
    for (int k = 0; k < m; ++k) u[k] = node_coord(cidx[k], n_u, U);
    controls_.push_back(u);
  } while (next_index(cidx, n_u));
}

std::size_t MeasureGrid::nearest_state(const Vec& x) const {
  if (x.size() != d_) throw Error(ErrorKind::kInvalidArgument, "state dimension mismatch");
  const double r = x.norm();
  if (!(r <= R_ * (1.0 + 1e-12))) throw Error(ErrorKind::kSupportViolation, "trajectory leaves B_R; increase R", r);
  // Round per axis; if that node falls outside the mask, pull it toward the origin.
  std::vector<int> idx(d_);
  for (int k = 0; k < d_; ++k) {
    const double t = (x[k] + R_) / hx_;
    idx[k] = std::clamp(static_cast<int>(std::lround(t)), 0, n_x_ - 1);
  }
  const int centre = (n_x_ - 1) / 2;
  for (int guard = 0; guard <= n_x_; ++guard) {
    std::size_t flat = 0, stride = 1;
    for (int k = 0; k < d_; ++k) {
      flat += static_cast<std::size_t>(idx[k]) * stride;
      stride *= static_cast<std::size_t>(n_x_);
    }
    if (lookup_[flat] >= 0) return static_cast<std::size_t>(lookup_[flat]);
    for (int k = 0; k < d_; ++k) {
      if (idx[k] < centre) ++idx[k];
      else if (idx[k] > centre) --idx[k];
    }
  }
  throw Error(ErrorKind::kSupportViolation, "no grid node near point", r);
}

std::size_t MeasureGrid::nearest_control(const Vec& u) const {
  if (u.size() != m_) throw Error(ErrorKind::kInvalidArgument, "control dimension mismatch");
  if (n_u_ == 1) return 0;
  std::size_t flat = 0, stride = 1;
  for (int k = 0; k < m_; ++k) {
    const double t = (u[k] + U_) / hu_;
    const int i = std::clamp(static_cast<int>(std::lround(t)), 0, n_u_ - 1);
    flat += static_cast<std::size_t>(i) * stride;
    stride *= static_cast<std::size_t>(n_u_);
  }
  return flat;
}

bool MeasureGrid::is_boundary_state(std::size_t s) const { return states_[s].norm() > R_ - hx_; }

DiscreteMeasure::DiscreteMeasure(std::shared_ptr<const MeasureGrid> grid, std::vector<double> weights)
    : grid_(std::move(grid)), weights_(std::move(weights)) {
  if (!grid_ || weights_.size() != grid_->size()) throw Error(ErrorKind::kInvalidArgument, "measure size mismatch");
  for (double& w : weights_) {
    if (w < 0.0) {
      if (w < -1e-12) throw Error(ErrorKind::kInvalidArgument, "negative weight", w);
      w = 0.0;
    }
  }
}

double DiscreteMeasure::total_mass() const { return std::accumulate(weights_.begin(), weights_.end(), 0.0); }

double DiscreteMeasure::integrate(const Lagrangian& L) const {
  const auto& xs = state_nodes();
  const auto& us = control_nodes();
  double acc = 0.0;
  for (std::size_t s = 0; s < xs.size(); ++s)
    for (std::size_t c = 0; c < us.size(); ++c) {
      const double w = weights_[s * us.size() + c];
      if (w != 0.0) acc += w * L.value(xs[s], us[c]);
    }
  return acc;
}

double DiscreteMeasure::boundary_mass() const {
  const std::size_t nc = control_nodes().size();
  double acc = 0.0;
  for (std::size_t s = 0; s < state_nodes().size(); ++s) {
    if (!grid_->is_boundary_state(s)) continue;
    for (std::size_t c = 0; c < nc; ++c) acc += weights_[s * nc + c];
  }
  return acc;
}

TestFunctionBasis TestFunctionBasis::monomials(int d, int degree) {
  if (d < 1 || degree < 1) throw Error(ErrorKind::kInvalidArgument, "monomial basis needs d >= 1, degree >= 1");
  TestFunctionBasis b;
  b.kind_ = Kind::kMonomials;
  b.d_ = d;
  for (int total = 1; total <= degree; ++total) {
    std::vector<int> idx(d, 0);
    do {
      if (std::accumulate(idx.begin(), idx.end(), 0) == total) b.exps_.push_back(idx);
    } while (next_index(idx, total + 1));
  }
  return b;
}

TestFunctionBasis TestFunctionBasis::hat_functions(int d, double R, int resolution) {
  if (d < 1 || resolution < 2 || !(R > 0.0)) throw Error(ErrorKind::kInvalidArgument, "hat basis parameters");
  TestFunctionBasis b;
  b.kind_ = Kind::kHatFunctions;
  b.d_ = d;
  b.R_ = R;
  b.res_ = resolution;
  std::vector<int> idx(d, 0);
  do b.hat_nodes_.push_back(idx);
  while (next_index(idx, resolution));
  return b;
}

TestFunctionBasis TestFunctionBasis::constant(int d) {
  TestFunctionBasis b;
  b.kind_ = Kind::kConstant;
  b.d_ = d;
  return b;
}

std::size_t TestFunctionBasis::size() const {
  switch (kind_) {
    case Kind::kMonomials: return exps_.size();
    case Kind::kHatFunctions: return hat_nodes_.size();
    case Kind::kConstant: return 1;
  }
  return 0;
}

TestFunctionBasis TestFunctionBasis::prefix(std::size_t count) const {
  TestFunctionBasis b = *this;
  if (kind_ == Kind::kMonomials) b.exps_.resize(std::min(count, exps_.size()));
  else if (kind_ == Kind::kHatFunctions) b.hat_nodes_.resize(std::min(count, hat_nodes_.size()));
  return b;
}

double TestFunctionBasis::value(std::size_t k, const Vec& x) const {
  switch (kind_) {
    case Kind::kConstant: return 1.0;
    case Kind::kMonomials: {
      double v = 1.0;
      for (int i = 0; i < d_; ++i) v *= ipow(x[i], exps_[k][i]);
      return v;
    }
    case Kind::kHatFunctions: {
      const double h = 2.0 * R_ / (res_ - 1);
      double v = 1.0;
      for (int i = 0; i < d_; ++i) v *= std::max(0.0, 1.0 - std::abs(x[i] - node_coord(hat_nodes_[k][i], res_, R_)) / h);
      return v;
    }
  }
  return 0.0;
}

Vec TestFunctionBasis::gradient(std::size_t k, const Vec& x) const {
  Vec g = Vec::Zero(d_);
  switch (kind_) {
    case Kind::kConstant: break;
    case Kind::kMonomials:
      for (int i = 0; i < d_; ++i) {
        const int e = exps_[k][i];
        if (e == 0) continue;
        double v = e * ipow(x[i], e - 1);
        for (int j = 0; j < d_; ++j)
          if (j != i) v *= ipow(x[j], exps_[k][j]);
        g[i] = v;
      }
      break;
    case Kind::kHatFunctions: {
      // One-sided derivative at kinks (right derivative, zero at the peak).
      const double h = 2.0 * R_ / (res_ - 1);
      std::vector<double> f(d_), df(d_);
      for (int i = 0; i < d_; ++i) {
        const double r = x[i] - node_coord(hat_nodes_[k][i], res_, R_);
        f[i] = std::max(0.0, 1.0 - std::abs(r) / h);
        df[i] = f[i] > 0.0 && r != 0.0 ? (r > 0.0 ? -1.0 / h : 1.0 / h) : 0.0;
      }
      for (int i = 0; i < d_; ++i) {
        double v = df[i];
        for (int j = 0; j < d_; ++j)
          if (j != i) v *= f[j];
        g[i] = v;
      }
      break;
    }
  }
  return g;
}

DiscreteMeasure occupation_measure(const TrajectoryControlPair& pair, std::shared_ptr<const MeasureGrid> grid) {
  const auto& tg = pair.grid;
  if (!(tg.duration() > 0.0) || tg.n_steps < 1) throw Error(ErrorKind::kInvalidArgument, "occupation measure needs T > 0");
  std::vector<double> w(grid->size(), 0.0);
  const std::size_t nc = grid->control_nodes().size();
  const double share = 1.0 / tg.n_steps;
  for (int k = 0; k < tg.n_steps; ++k) {
    const std::size_t s = grid->nearest_state(pair.states[k]);
    const std::size_t c = grid->nearest_control(pair.controls[k]);
    w[s * nc + c] += share;
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return DiscreteMeasure(std::move(grid), std::move(w));
}

double closedness_residual(const DiscreteMeasure& mu, const ControlSystem& sys, const TestFunctionBasis& basis) {
  if (basis.size() == 0) throw Error(ErrorKind::kInvalidArgument, "empty basis");
  const auto& xs = mu.state_nodes();
  const auto& us = mu.control_nodes();
  const std::size_t nb = basis.size();
  std::vector<double> sums(nb, 0.0), sup(nb, 0.0);
  for (std::size_t s = 0; s < xs.size(); ++s) {
    const Mat F = sys.fields_at(xs[s]);
    for (std::size_t k = 0; k < nb; ++k) {
      const Vec g = basis.gradient(k, xs[s]);
      sup[k] = std::max(sup[k], g.norm());
      const Vec q = F.transpose() * g;
      for (std::size_t c = 0; c < us.size(); ++c) {
        const double w = mu.weights()[s * us.size() + c];
        if (w != 0.0) sums[k] += w * q.dot(us[c]);
      }
    }
  }
  double worst = 0.0, norm = 0.0;
  for (std::size_t k = 0; k < nb; ++k) {
    worst = std::max(worst, std::abs(sums[k]));
    norm = std::max(norm, sup[k]);
  }
  return norm > 0.0 ? worst / norm : worst;
}

LpCriticalResult lp_critical(const Lagrangian& L, const ControlSystem& sys, const LpCriticalConfig& config,
                             const TestFunctionBasis& basis) {
  if (L.d() != sys.d() || L.m() != sys.m()) throw Error(ErrorKind::kInvalidArgument, "Lagrangian/system dimension mismatch");
  if (basis.d() != sys.d()) throw Error(ErrorKind::kInvalidArgument, "basis dimension mismatch");
  const double U = config.U > 0.0 ? config.U : 4.0 * (1.0 + config.R) * L.ell1();
  auto grid = std::make_shared<const MeasureGrid>(sys.d(), sys.m(), config.R, config.n_x, U, config.n_u);
  const auto& xs = grid->state_nodes();
  const auto& us = grid->control_nodes();
  const std::size_t nc = us.size();
  const std::size_t nb = basis.size();

  LpProblem lp;
  lp.rows = static_cast<int>(1 + nb);
  lp.cols = static_cast<int>(grid->size());
  lp.A.assign(static_cast<std::size_t>(lp.rows) * lp.cols, 0.0);
  lp.b.assign(lp.rows, 0.0);
  lp.c.assign(lp.cols, 0.0);
  lp.b[0] = 1.0;
  const std::size_t cols = static_cast<std::size_t>(lp.cols);
  for (std::size_t j = 0; j < cols; ++j) lp.A[j] = 1.0;

  parallel_for(xs.size(), [&](std::size_t s) {
    const Mat F = sys.fields_at(xs[s]);
    for (std::size_t c = 0; c < nc; ++c) lp.c[s * nc + c] = L.value(xs[s], us[c]);
    for (std::size_t k = 0; k < nb; ++k) {
      const Vec q = F.transpose() * basis.gradient(k, xs[s]);
      double* row = lp.A.data() + (1 + k) * cols;
      for (std::size_t c = 0; c < nc; ++c) row[s * nc + c] = q.dot(us[c]);
    }
  });
  // Row equilibration keeps the pivot tolerance meaningful across degrees.
  for (std::size_t k = 1; k < static_cast<std::size_t>(lp.rows); ++k) {
    double* row = lp.A.data() + k * cols;
    double mx = 0.0;
    for (std::size_t j = 0; j < cols; ++j) mx = std::max(mx, std::abs(row[j]));
    if (mx > 0.0)
      for (std::size_t j = 0; j < cols; ++j) row[j] /= mx;
  }

  const LpSolution sol = solve_lp(lp, config.simplex);
  if (sol.status != LpStatus::kOptimal)
    throw Error(ErrorKind::kLpInternal, std::string("closed-measure LP: ") + to_string(sol.status));

  LpCriticalResult r;
  r.mu_star = std::make_shared<const DiscreteMeasure>(grid, sol.x);
  r.c_lp = sol.objective;
  r.iterations = sol.iterations;
  r.n_variables = cols;
  r.basis_size = nb;
  r.redundant_rows = sol.redundant_rows;
  r.residual = closedness_residual(*r.mu_star, sys, basis);
  r.boundary_mass = r.mu_star->boundary_mass();
  r.boundary_flag = r.boundary_mass >= 1e-6;
  return r;
}

namespace {

std::vector<Vec> ball_samples(int d, double R, int n) {
  std::vector<Vec> out;
  std::vector<int> idx(d, 0);
  do {
    Vec x(d);
    for (int k = 0; k < d; ++k) x[k] = node_coord(idx[k], n, R);
    if (x.norm() <= R * (1.0 + 1e-12)) out.push_back(x);
  } while (next_index(idx, n));
  return out;
}

}  // namespace

double dual_objective(const Lagrangian& L, const ControlSystem& sys, const std::vector<double>& psi_params,
                      const TestFunctionBasis& basis, const std::vector<Vec>& samples) {
  const std::size_t nb = basis.size();
  const std::size_t n = samples.size();
  std::vector<double> h(n);
  parallel_for(n, [&](std::size_t i) {
    Vec p = Vec::Zero(sys.d());
    for (std::size_t k = 0; k < nb; ++k)
      if (psi_params[k] != 0.0) p += psi_params[k] * basis.gradient(k, samples[i]);
    h[i] = hamiltonian(L, sys, samples[i], p);
  });
  return -*std::max_element(h.begin(), h.end());
}

DualBoundResult dual_bound(const Lagrangian& L, const ControlSystem& sys, std::vector<double> psi_params,
                           const DualBoundConfig& config) {
  const TestFunctionBasis basis = TestFunctionBasis::monomials(sys.d(), config.degree);
  if (psi_params.empty()) psi_params.assign(basis.size(), 0.0);
  if (psi_params.size() != basis.size())
    throw Error(ErrorKind::kInvalidArgument, "psi_params length must match the monomial basis", psi_params.size());
  const auto samples = ball_samples(sys.d(), config.R, config.sample_n);

  DualBoundResult r;
  double best = dual_objective(L, sys, psi_params, basis, samples);
  r.bound_at_initial = best;
  r.evaluations = 1;
  double step = config.initial_step;
  for (int sweep = 0; sweep < config.max_sweeps && step >= config.min_step; ++sweep) {
    bool improved = false;
    for (std::size_t k = 0; k < psi_params.size(); ++k) {
      for (double dir : {1.0, -1.0}) {
        const double saved = psi_params[k];
        psi_params[k] = saved + dir * step;
        const double v = dual_objective(L, sys, psi_params, basis, samples);
        ++r.evaluations;
        if (v > best + 1e-14) {
          best = v;
          improved = true;
          break;
        }
        psi_params[k] = saved;
      }
    }
    if (!improved) step *= 0.5;
  }
  r.bound = best;
  r.psi_params = std::move(psi_params);
  return r;
}

}  // namespace subkam
