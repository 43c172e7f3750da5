#include "subkam/weakkam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "subkam/parallel.hpp"

namespace subkam {

const char* to_string(EstimateMethod m) noexcept {
  switch (m) {
    case EstimateMethod::kTimeAverage: return "time_average";
    case EstimateMethod::kAbel: return "abel";
    case EstimateMethod::kClosedMeasureLp: return "closed_measure_lp";
    case EstimateMethod::kOracle: return "oracle";
  }
  return "unknown";
}

double extrapolate_linear(const std::vector<double>& s, const std::vector<double>& e) {
  const std::size_t n = s.size();
  if (n == 0 || e.size() != n) throw Error(ErrorKind::kInvalidArgument, "extrapolation needs matching nonempty data");
  if (n == 1) return e[0];
  double ms = 0.0, me = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ms += s[i];
    me += e[i];
  }
  ms /= n;
  me /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (s[i] - ms) * (s[i] - ms);
    sxy += (s[i] - ms) * (e[i] - me);
  }
  if (sxx == 0.0) return me;
  return me - (sxy / sxx) * ms;
}

namespace {

bool monotone(const std::vector<LadderEntry>& ladder) {
  int sign = 0;
  for (std::size_t i = 1; i < ladder.size(); ++i) {
    const double d = ladder[i].estimate - ladder[i - 1].estimate;
    const int s = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
    if (s == 0) continue;
    if (sign != 0 && s != sign) return false;
    sign = s;
  }
  return true;
}

// Extrapolate over the last three entries in the variable s(parameter).
template <class F>
void finish_estimate(CriticalEstimate& est, F&& s_of) {
  const auto& lad = est.ladder;
  const std::size_t n = lad.size();
  est.error_proxy = n >= 2 ? std::abs(lad[n - 1].estimate - lad[n - 2].estimate) : 0.0;
  if (!monotone(lad)) {
    est.flagged = true;
    est.value = lad.back().estimate;
    return;
  }
  std::vector<double> s, e;
  for (std::size_t i = n >= 3 ? n - 3 : 0; i < n; ++i) {
    s.push_back(s_of(lad[i].parameter));
    e.push_back(lad[i].estimate);
  }
  est.value = extrapolate_linear(s, e);
}

}  // namespace

static void require_probe_in_box(const GridGeometry& g, const Vec& x) {
  if (x.size() != g.d()) throw Error(ErrorKind::kInvalidArgument, "probe dimension does not match the grid");
  for (int k = 0; k < g.d(); ++k)
    if (std::abs(x[k] - g.center[k]) > g.half_widths[k])
      throw Error(ErrorKind::kOutOfBox, "probe point lies outside the HJ grid box", x[k]);
}

CriticalEstimate critical_time_average(const Lagrangian& L, const ControlSystem& sys, const Vec& x,
                                       const std::vector<double>& T_ladder, const HjConfig& cfg) {
  if (T_ladder.size() < 2) throw Error(ErrorKind::kInvalidArgument, "time-average ladder needs >= 2 horizons");
  for (std::size_t i = 0; i < T_ladder.size(); ++i)
    if (!(T_ladder[i] > 0.0) || (i > 0 && !(T_ladder[i] > T_ladder[i - 1])))
      throw Error(ErrorKind::kInvalidArgument, "time-average ladder must be positive and increasing");
  require_probe_in_box(cfg.grid, x);
  const auto snaps = finite_horizon_ladder(L, sys, cfg.grid, T_ladder, cfg.scheme);
  CriticalEstimate est;
  est.method = EstimateMethod::kTimeAverage;
  for (const auto& snap : snaps) {
    LadderEntry e{snap.T, snap.V.interpolate(x) / snap.T, std::nullopt};
    if (cfg.cross_check) e.cross_check = value_free(L, sys, x, snap.T, cfg.optimizer).value / snap.T;
    est.ladder.push_back(e);
  }
  finish_estimate(est, [](double T) { return 1.0 / T; });
  return est;
}

CriticalEstimate critical_abel(const Lagrangian& L, const ControlSystem& sys, const Vec& x,
                               const std::vector<double>& lambda_ladder, const HjConfig& cfg) {
  if (lambda_ladder.size() < 2) throw Error(ErrorKind::kInvalidArgument, "Abel ladder needs >= 2 rates");
  for (std::size_t i = 0; i < lambda_ladder.size(); ++i)
    if (!(lambda_ladder[i] > 0.0) || (i > 0 && !(lambda_ladder[i] < lambda_ladder[i - 1])))
      throw Error(ErrorKind::kInvalidArgument, "Abel ladder must be positive and decreasing");
  require_probe_in_box(cfg.grid, x);
  CriticalEstimate est;
  est.method = EstimateMethod::kAbel;
  for (double lambda : lambda_ladder) {
    const auto r = discounted(L, sys, cfg.grid, lambda, cfg.scheme);
    est.ladder.push_back({lambda, lambda * r.value.interpolate(x), std::nullopt});
  }
  finish_estimate(est, [](double lambda) { return lambda; });
  return est;
}

CriticalEstimate critical_lp(const Lagrangian& L, const ControlSystem& sys, const LpEstimateConfig& cfg,
                             LpCriticalResult* last) {
  if (cfg.ladder.empty()) throw Error(ErrorKind::kInvalidArgument, "LP refinement ladder is empty");
  CriticalEstimate est;
  est.method = EstimateMethod::kClosedMeasureLp;
  LpCriticalResult r;
  for (const auto& step : cfg.ladder) {
    LpCriticalConfig lc;
    lc.R = cfg.R;
    lc.U = cfg.U;
    lc.n_x = step.n_x;
    lc.n_u = step.n_u;
    r = lp_critical(L, sys, lc, TestFunctionBasis::monomials(sys.d(), step.degree));
    est.ladder.push_back({static_cast<double>(step.n_x), r.c_lp, std::nullopt});
  }
  const std::size_t n = est.ladder.size();
  est.value = est.ladder.back().estimate;
  est.error_proxy = n >= 2 ? std::abs(est.ladder[n - 1].estimate - est.ladder[n - 2].estimate) : 0.0;
  est.lp_residual = r.residual;
  est.lp_boundary_flag = r.boundary_flag;
  if (cfg.with_dual_bound) {
    DualBoundConfig dc = cfg.dual;
    dc.R = cfg.R;
    est.dual_bound = dual_bound(L, sys, {}, dc).bound;
  }
  if (last) *last = r;
  return est;
}

CriticalEstimate critical_oracle(const Lagrangian& L, double search_radius, int grid_n) {
  CriticalEstimate est;
  est.method = EstimateMethod::kOracle;
  est.value = oracle_critical(L, search_radius, grid_n).c;
  est.ladder.push_back({0.0, est.value, std::nullopt});
  return est;
}

void BarrierSettings::validate() const {
  if (!(t_min > 0.0) || !(t_max > t_min)) throw Error(ErrorKind::kInvalidArgument, "barrier window needs 0 < t_min < t_max");
  if (n_horizons < 2) throw Error(ErrorKind::kInvalidArgument, "barrier window needs >= 2 horizons");
  if (tail_restarts < 0) throw Error(ErrorKind::kInvalidArgument, "tail_restarts must be >= 0");
  optimizer.validate();
}

std::vector<double> BarrierSettings::horizons() const {
  std::vector<double> t(n_horizons);
  const double ratio = t_max / t_min;
  for (int i = 0; i < n_horizons; ++i) t[i] = t_min * std::pow(ratio, static_cast<double>(i) / (n_horizons - 1));
  return t;
}

namespace {

struct Piece {
  double duration;
  Vec u;
};

// Piecewise-constant schedule sampled at the midpoints of a uniform grid.
std::vector<Vec> resample(const std::vector<Piece>& pieces, int n_steps, double horizon, int m) {
  std::vector<Vec> out;
  out.reserve(n_steps);
  const double dt = horizon / n_steps;
  std::size_t p = 0;
  double start = 0.0;
  for (int k = 0; k < n_steps; ++k) {
    const double tau = (k + 0.5) * dt;
    while (p + 1 < pieces.size() && tau >= start + pieces[p].duration) start += pieces[p++].duration;
    out.push_back(pieces.empty() ? Vec::Zero(m) : pieces[p].u);
  }
  return out;
}

std::vector<Piece> pieces_of(const TrajectoryControlPair& pair) {
  std::vector<Piece> out;
  for (const auto& u : pair.controls) out.push_back({pair.grid.dt(), u});
  return out;
}

// Previous minimizer with a rest segment of length extra inserted at its
// closest approach to x*.
std::vector<Piece> with_rest(const TrajectoryControlPair& pair, const Vec& x_star, double extra, int m) {
  std::size_t best = 0;
  double dist = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < pair.states.size(); ++k) {
    const double r = (pair.states[k] - x_star).norm();
    if (r < dist) {
      dist = r;
      best = k;
    }
  }
  std::vector<Piece> out;
  for (std::size_t k = 0; k < best; ++k) out.push_back({pair.grid.dt(), pair.controls[k]});
  out.push_back({extra, Vec::Zero(m)});
  for (std::size_t k = best; k < pair.controls.size(); ++k) out.push_back({pair.grid.dt(), pair.controls[k]});
  return out;
}

double slope(const std::vector<double>& t, const std::vector<double>& v) {
  const std::size_t n = t.size();
  if (n < 2) return 0.0;
  double mt = 0.0, mv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mt += t[i];
    mv += v[i];
  }
  mt /= n;
  mv /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (t[i] - mt) * (t[i] - mt);
    sxy += (t[i] - mt) * (v[i] - mv);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

}  // namespace

BarrierValue peierls_barrier(const Lagrangian& L, const ControlSystem& sys, const Vec& x, const Vec& y, double c,
                             const BarrierSettings& s) {
  s.validate();
  const int m = sys.m();
  const Vec& x_star = L.attractor().x_star;
  BarrierValue out;
  out.x = x;
  out.y = y;

  std::optional<ActionResult> prev;
  double prev_t = 0.0;
  for (double t : s.horizons()) {
    OptimizerSettings os = s.optimizer;
    const int n = os.steps_for(t);
    std::vector<Vec> warm;
    if (prev) {
      os.n_restarts = s.tail_restarts;
      warm = resample(with_rest(prev->pair, x_star, t - prev_t, m), n, t, m);
    } else if (x_star.size() == x.size()) {
      // Glue x -> x* -> y, each half on t/2.
      try {
        const auto a = minimize_action_fixed(L, sys, x, x_star, 0.5 * t, os);
        const auto b = minimize_action_fixed(L, sys, x_star, y, 0.5 * t, os);
        auto pieces = pieces_of(a.pair);
        const auto tail = pieces_of(b.pair);
        pieces.insert(pieces.end(), tail.begin(), tail.end());
        warm = resample(pieces, n, t, m);
      } catch (const Error&) {
        warm.clear();
      }
    }
    try {
      auto r = minimize_action_fixed(L, sys, x, y, t, os, warm.empty() ? nullptr : &warm);
      if (!r.converged) throw Error(ErrorKind::kInfeasibleEndpoint, "endpoint not reached", r.endpoint_gap);
      out.horizons.push_back(t);
      out.values.push_back(r.value - c * t);
      prev = std::move(r);
      prev_t = t;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kInfeasibleEndpoint) throw;
      ++out.dropped;
    }
  }
  if (out.values.empty()) throw Error(ErrorKind::kInfeasibleEndpoint, "every barrier horizon was infeasible");

  const std::size_t n = out.values.size();
  const std::size_t half = n / 2;
  out.h = *std::min_element(out.values.begin() + static_cast<long>(half), out.values.end());
  const std::size_t q = std::max<std::size_t>(2, n / 4);
  if (n >= 2) {
    const std::vector<double> tt(out.horizons.end() - static_cast<long>(std::min(q, n)), out.horizons.end());
    const std::vector<double> vv(out.values.end() - static_cast<long>(std::min(q, n)), out.values.end());
    out.tail_slope = slope(tt, vv);
  }
  return out;
}

std::vector<Vec> probe_lattice(int d, double R, double spacing) {
  if (!(R > 0.0) || !(spacing > 0.0)) throw Error(ErrorKind::kInvalidArgument, "probe lattice needs R, spacing > 0");
  const int per_side = static_cast<int>(std::round(R / spacing));
  const int n = 2 * per_side + 1;
  const double h = per_side > 0 ? R / per_side : 0.0;
  std::vector<Vec> out;
  std::vector<int> idx(d, 0);
  while (true) {
    Vec x(d);
    for (int k = 0; k < d; ++k) x[k] = -R + idx[k] * h;
    if (x.norm() <= R * (1.0 + 1e-12)) out.push_back(x);
    int k = 0;
    while (k < d && ++idx[k] == n) idx[k++] = 0;
    if (k == d) break;
  }
  return out;
}

AubryReport aubry_detect(const Lagrangian& L, const ControlSystem& sys, double c, std::vector<Vec> probes,
                         const BarrierSettings& s, double eps_A) {
  const Vec& x_star = L.attractor().x_star;
  if (x_star.size() != sys.d()) throw Error(ErrorKind::kInvalidArgument, "x* missing from the Lagrangian attractor data");
  AubryReport rep;
  auto it = std::find_if(probes.begin(), probes.end(), [&](const Vec& p) { return (p - x_star).norm() <= 1e-12; });
  if (it == probes.end()) {
    probes.insert(probes.begin(), x_star);
    rep.x_star_index = 0;
  } else {
    rep.x_star_index = static_cast<std::size_t>(it - probes.begin());
  }
  rep.points = probes;
  rep.h_diag.assign(probes.size(), 0.0);
  parallel_for(probes.size(), [&](std::size_t i) {
    rep.h_diag[i] = peierls_barrier(L, sys, probes[i], probes[i], c, s).h;
  });
  rep.eps_A = eps_A > 0.0 ? eps_A : 3.0 * std::abs(rep.h_diag[rep.x_star_index]) + 1e-2;
  for (std::size_t i = 0; i < probes.size(); ++i)
    if (rep.h_diag[i] <= rep.eps_A || i == rep.x_star_index) rep.members.push_back(i);
  return rep;
}

namespace {

Vec central_difference(const GridFunction& psi, const Mat& F, const Vec& x, double h) {
  Vec q(F.cols());
  for (int i = 0; i < F.cols(); ++i) {
    const Vec dir = h * F.col(i);
    q[i] = (psi.interpolate(x + dir) - psi.interpolate(x - dir)) / (2.0 * h);
  }
  return q;
}

}  // namespace

HorizontalGradient horizontal_gradient(const GridFunction& psi, const ControlSystem& sys, const Vec& x, double h_fd) {
  if (psi.d() != sys.d() || x.size() != sys.d()) throw Error(ErrorKind::kInvalidArgument, "horizontal gradient dimension mismatch");
  if (h_fd <= 0.0) h_fd = 0.5 * psi.geometry().min_cell();
  if (!psi.contains(x, 2.0)) throw Error(ErrorKind::kOutOfBox, "horizontal gradient needs x two cells inside the box");
  const Mat F = sys.fields_at(x);
  for (int i = 0; i < F.cols(); ++i)
    if (!psi.contains(x + h_fd * F.col(i)) || !psi.contains(x - h_fd * F.col(i)))
      throw Error(ErrorKind::kOutOfBox, "horizontal gradient probe leaves the box");
  HorizontalGradient out;
  out.q = central_difference(psi, F, x, h_fd);
  const Vec fine = central_difference(psi, F, x, 0.5 * h_fd);
  const double scale = std::max({out.q.norm(), fine.norm(), 1e-6});
  out.two_scale = (out.q - fine).norm() / scale;
  out.differentiable = out.two_scale <= 0.2;
  return out;
}

namespace {

struct FeedbackPath {
  std::vector<Vec> states;    // states[0] = start
  std::vector<Vec> controls;  // controls[k] evaluated at states[k]
  bool truncated = false;
};

constexpr int kMaxCflRefinements = 4;

// direction = +1 integrates forward in time; -1 walks the same feedback
// field backward from the start point.
FeedbackPath follow_feedback(const GridFunction& chi, const Lagrangian& L, const ControlSystem& sys, const Vec& x,
                             double horizon, double dt, double direction) {
  FeedbackPath p;
  p.states.push_back(x);
  const int n = static_cast<int>(std::lround(horizon / dt));
  for (int k = 0; k < n; ++k) {
    const Vec& cur = p.states.back();
    const Vec q = horizontal_gradient(chi, sys, cur).q;
    const Vec u = legendre(L, cur, ReducedMomentum{q}).argmax;
    const Vec next = rk4_step(sys, cur, direction * u, dt);
    if (!chi.contains(next, 2.0)) {
      p.truncated = true;
      break;
    }
    p.controls.push_back(u);
    p.states.push_back(next);
  }
  return p;
}

}  // namespace

CalibrationReport calibrated_curve(const GridFunction& chi, const Lagrangian& L, const ControlSystem& sys,
                                   const Vec& x, double c, double horizon, double dt) {
  if (!(horizon > 0.0) || !(dt > 0.0)) throw Error(ErrorKind::kInvalidArgument, "calibrated curve needs horizon, dt > 0");
  if (!chi.contains(x, 2.0)) throw Error(ErrorKind::kOutOfBox, "calibrated curve start is not inside the grid box");
  // Refine the step until no step crosses more than one cell; a faster step
  // reads the gradient of chi too coarsely along the way.
  FeedbackPath fwd, bwd;
  for (int refine = 0;; ++refine) {
    fwd = follow_feedback(chi, L, sys, x, horizon, dt, 1.0);
    bwd = follow_feedback(chi, L, sys, x, horizon, dt, -1.0);
    double cells = 0.0;
    for (const FeedbackPath* p : {&fwd, &bwd})
      for (std::size_t k = 0; k + 1 < p->states.size(); ++k)
        for (int i = 0; i < chi.d(); ++i)
          cells = std::max(cells, std::abs(p->states[k + 1][i] - p->states[k][i]) / chi.geometry().cell(i));
    if (cells <= 1.0 || refine == kMaxCflRefinements) break;
    dt /= std::min(8.0, std::ceil(cells));
  }

  CalibrationReport rep;
  rep.dt = dt;
  rep.truncated = fwd.truncated || bwd.truncated;
  auto& pair = rep.pair;
  const int nb = static_cast<int>(bwd.controls.size());
  const int nf = static_cast<int>(fwd.controls.size());
  pair.grid = TimeGrid{-nb * dt, nf * dt, nb + nf};
  // Backward leg reversed into forward time; its controls are the feedback
  // evaluated at the later endpoint of each step.
  for (int k = nb; k >= 1; --k) pair.states.push_back(bwd.states[k]);
  for (int k = nb - 1; k >= 0; --k) pair.controls.push_back(bwd.controls[k]);
  for (const auto& s : fwd.states) pair.states.push_back(s);
  for (const auto& u : fwd.controls) pair.controls.push_back(u);
  if (nb + nf == 0) {
    pair.grid = TimeGrid{0.0, 0.0, 0};
    return rep;
  }

  const std::size_t N = pair.controls.size();
  std::vector<double> D(N + 1);
  double running = 0.0;
  D[0] = chi.interpolate(pair.states[0]);
  for (std::size_t k = 0; k < N; ++k) {
    running += dt * (L.value(pair.states[k], pair.controls[k]) - c);
    D[k + 1] = chi.interpolate(pair.states[k + 1]) - running;
  }
  const auto [mn, mx] = std::minmax_element(D.begin(), D.end());
  rep.defect = *mx - *mn;
  const std::size_t window = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(1.0 / dt + 1e-9)));
  for (std::size_t a = 0; a <= N; ++a)
    for (std::size_t b = a + 1; b <= std::min(N, a + window); ++b)
      rep.defect_per_unit_time = std::max(rep.defect_per_unit_time, std::abs(D[b] - D[a]));

  // The control is constant on each step, so the identity is checked at both ends.
  for (std::size_t k = 0; k < N; ++k) {
    for (std::size_t e : {k, k + 1}) {
      const Vec& s = pair.states[e];
      const Vec q = horizontal_gradient(chi, sys, s).q;
      const Vec g = L.grad_u(s, pair.controls[k]);
      rep.gradient_identity_residual = std::max(rep.gradient_identity_residual, (q - g).norm());
      if (e == k) {
        rep.horizontal_gradients.push_back(q);
        rep.lagrangian_gradients.push_back(g);
      }
    }
  }
  return rep;
}

TrajectoryControlPair argmin_backtrack(const GridFunction& chi, const Lagrangian& L, const ControlSystem& sys,
                                       const Vec& x, double horizon, const SchemeSettings& s) {
  if (!(horizon > 0.0)) throw Error(ErrorKind::kInvalidArgument, "argmin backtrack needs horizon > 0");
  if (!chi.contains(x, 2.0)) throw Error(ErrorKind::kOutOfBox, "argmin backtrack start is not inside the grid box");
  const LaxOleinik op(L, sys, chi.geometry(), s);
  std::vector<Vec> states{x};
  std::vector<Vec> controls;
  const int n = static_cast<int>(std::lround(horizon / s.dt));
  for (int k = 0; k < n; ++k) {
    const Vec& cur = states.back();
    const Vec u = op.minimizing_control(chi, chi.nearest_node(cur));
    Vec back = cur - s.dt * sys.eval_fields(cur) * u;
    if (!chi.contains(back, 2.0)) break;
    controls.push_back(u);
    states.push_back(std::move(back));
  }
  TrajectoryControlPair out;
  const int steps = static_cast<int>(controls.size());
  out.grid = TimeGrid{-steps * s.dt, 0.0, steps};
  out.states.assign(states.rbegin(), states.rend());
  out.controls.assign(controls.rbegin(), controls.rend());
  return out;
}

double curve_distance(const TrajectoryControlPair& a, const TrajectoryControlPair& b) {
  const double lo = std::max(a.grid.t0, b.grid.t0), hi = std::min(a.grid.t1, b.grid.t1);
  auto at = [](const TrajectoryControlPair& p, double t) -> Vec {
    if (p.grid.n_steps == 0) return p.states.front();
    const double s = std::clamp((t - p.grid.t0) / p.grid.dt(), 0.0, static_cast<double>(p.grid.n_steps));
    const int k = std::min(static_cast<int>(s), p.grid.n_steps - 1);
    const double w = s - k;
    return (1.0 - w) * p.states[k] + w * p.states[k + 1];
  };
  double worst = 0.0;
  for (int k = 0; k <= a.grid.n_steps; ++k) {
    const double t = a.grid.n_steps == 0 ? a.grid.t0 : a.grid.time(k);
    if (t < lo - 1e-12 || t > hi + 1e-12) continue;
    worst = std::max(worst, (a.states[k] - at(b, t)).norm());
  }
  return worst;
}

SuperdifferentialReport superdifferential_equation_check(const GridFunction& chi, const Lagrangian& L,
                                                         const ControlSystem& sys, double c,
                                                         const std::vector<Vec>& points) {
  SuperdifferentialReport rep;
  for (const auto& x : points) {
    const Vec q = horizontal_gradient(chi, sys, x).q;
    const double r = std::abs(c + legendre(L, x, ReducedMomentum{q}).value);
    rep.residuals.push_back(r);
    rep.max_residual = std::max(rep.max_residual, r);
  }
  return rep;
}

}  // namespace subkam
