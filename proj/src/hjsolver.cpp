#include "subkam/hjsolver.hpp"

#include <algorithm>
#include <cmath>

#include "subkam/parallel.hpp"
#include "subkam/simd/kernels.hpp"

namespace subkam {

std::size_t GridGeometry::size() const {
  std::size_t n = 1;
  for (int r : resolution) n *= static_cast<std::size_t>(r);
  return n;
}

double GridGeometry::min_cell() const {
  double h = cell(0);
  for (int i = 1; i < d(); ++i) h = std::min(h, cell(i));
  return h;
}

void GridGeometry::validate() const {
  if (d() < 1 || d() > kMaxDim) throw Error(ErrorKind::kInvalidArgument, "grid dimension out of range");
  if (center.size() != d() || half_widths.size() != d())
    throw Error(ErrorKind::kInvalidArgument, "grid center/half-width dimension mismatch");
  for (int i = 0; i < d(); ++i) {
    if (resolution[i] < 3) throw Error(ErrorKind::kInvalidArgument, "grid resolution must be >= 3 per axis", resolution[i]);
    if (!(half_widths[i] > 0.0) || !std::isfinite(half_widths[i]))
      throw Error(ErrorKind::kInvalidArgument, "grid half-width must be positive", half_widths[i]);
  }
}

GridGeometry cube_geometry(int d, double half_width, int resolution) {
  GridGeometry g{Vec::Zero(d), Vec::Constant(d, half_width), std::vector<int>(d, resolution)};
  g.validate();
  return g;
}

GridFunction::GridFunction(GridGeometry g, double fill) : g_(std::move(g)) {
  g_.validate();
  values_.assign(g_.size(), fill);
  strides_.resize(g_.d());
  std::size_t s = 1;
  for (int i = 0; i < g_.d(); ++i) {
    strides_[i] = s;
    s *= static_cast<std::size_t>(g_.resolution[i]);
  }
}

std::vector<int> GridFunction::multi_index(std::size_t flat) const {
  std::vector<int> idx(d());
  for (int i = 0; i < d(); ++i) {
    idx[i] = static_cast<int>(flat % static_cast<std::size_t>(g_.resolution[i]));
    flat /= static_cast<std::size_t>(g_.resolution[i]);
  }
  return idx;
}

std::size_t GridFunction::flat_index(const std::vector<int>& idx) const {
  std::size_t f = 0;
  for (int i = 0; i < d(); ++i) f += static_cast<std::size_t>(idx[i]) * strides_[i];
  return f;
}

Vec GridFunction::node(std::size_t flat) const {
  Vec x(d());
  for (int i = 0; i < d(); ++i) {
    const int k = static_cast<int>(flat % static_cast<std::size_t>(g_.resolution[i]));
    flat /= static_cast<std::size_t>(g_.resolution[i]);
    x[i] = g_.center[i] - g_.half_widths[i] + k * g_.cell(i);
  }
  return x;
}

std::size_t GridFunction::nearest_node(const Vec& x) const {
  std::vector<int> idx(static_cast<std::size_t>(d()));
  for (int k = 0; k < d(); ++k) {
    const double t = (x[k] - (g_.center[k] - g_.half_widths[k])) / g_.cell(k);
    idx[k] = std::clamp(static_cast<int>(std::lround(t)), 0, g_.resolution[k] - 1);
  }
  return flat_index(idx);
}

double GridFunction::interpolate(const Vec& x) const {
  const int dd = d();
  std::size_t base = 0;
  double frac[kMaxDim];
  for (int i = 0; i < dd; ++i) {
    const int n = g_.resolution[i];
    double t = (x[i] - (g_.center[i] - g_.half_widths[i])) / g_.cell(i);
    t = std::clamp(t, 0.0, static_cast<double>(n - 1));
    const int k = std::min(static_cast<int>(t), n - 2);
    frac[i] = t - k;
    base += static_cast<std::size_t>(k) * strides_[i];
  }
  double acc = 0.0;
  for (unsigned corner = 0; corner < (1u << dd); ++corner) {
    double w = 1.0;
    std::size_t off = base;
    for (int i = 0; i < dd; ++i) {
      if (corner & (1u << i)) {
        w *= frac[i];
        off += strides_[i];
      } else {
        w *= 1.0 - frac[i];
      }
    }
    if (w != 0.0) acc += w * values_[off];
  }
  return acc;
}

Vec GridFunction::node_gradient(std::size_t flat) const {
  const auto idx = multi_index(flat);
  Vec g(d());
  for (int i = 0; i < d(); ++i) {
    const int n = g_.resolution[i];
    const int lo = std::max(idx[i] - 1, 0), hi = std::min(idx[i] + 1, n - 1);
    const double a = values_[flat - static_cast<std::size_t>(idx[i] - lo) * strides_[i]];
    const double b = values_[flat + static_cast<std::size_t>(hi - idx[i]) * strides_[i]];
    g[i] = (b - a) / ((hi - lo) * g_.cell(i));
  }
  return g;
}

bool GridFunction::contains(const Vec& x, double margin_cells) const {
  for (int i = 0; i < d(); ++i) {
    const double lim = g_.half_widths[i] - margin_cells * g_.cell(i);
    if (std::abs(x[i] - g_.center[i]) > lim + 1e-12 * g_.half_widths[i]) return false;
  }
  return true;
}

bool GridFunction::is_interior(std::size_t flat, int margin) const {
  const auto idx = multi_index(flat);
  for (int i = 0; i < d(); ++i)
    if (idx[i] < margin || idx[i] > g_.resolution[i] - 1 - margin) return false;
  return true;
}

double GridFunction::sup_abs() const {
  double s = 0.0;
  for (double v : values_) s = std::max(s, std::abs(v));
  return s;
}

double GridFunction::sup_diff(const GridFunction& other) const {
  if (other.size() != size()) throw Error(ErrorKind::kInvalidArgument, "grid size mismatch");
  return simd::max_abs_diff(values_, other.values_);
}

void GridFunction::add_constant(double a) {
  for (double& v : values_) v += a;
}

void SchemeSettings::validate() const {
  if (!(dt > 0.0)) throw Error(ErrorKind::kInvalidArgument, "dt must be positive", dt);
  if (!(U >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "control bound U must be >= 0", U);
  if (control_samples < 1) throw Error(ErrorKind::kInvalidArgument, "control_samples must be >= 1");
  if (!(tol_fixed_point > 0.0)) throw Error(ErrorKind::kInvalidArgument, "tol_fixed_point must be positive");
  if (max_iters < 1) throw Error(ErrorKind::kInvalidArgument, "max_iters must be >= 1");
}

double cfl_ratio(const GridGeometry& g, const ControlSystem& sys, const SchemeSettings& s) {
  const GridFunction probe(g);
  double fmax = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const Mat F = sys.fields_at(probe.node(i));
    fmax = std::max(fmax, F.operatorNorm());
  }
  return s.dt * s.U * fmax / (4.0 * g.min_cell());
}

namespace {

std::vector<Vec> control_lattice(int m, double U, int n) {
  std::vector<Vec> out;
  std::vector<int> idx(m, 0);
  while (true) {
    Vec u(m);
    for (int k = 0; k < m; ++k) u[k] = n == 1 ? 0.0 : -U + 2.0 * U * idx[k] / (n - 1);
    out.push_back(u);
    int k = 0;
    while (k < m && ++idx[k] == n) idx[k++] = 0;
    if (k == m) break;
  }
  return out;
}

}  // namespace

LaxOleinik::LaxOleinik(const Lagrangian& L, const ControlSystem& sys, GridGeometry g, SchemeSettings s)
    : L_(L), sys_(sys), g_(std::move(g)), s_(s) {
  g_.validate();
  s_.validate();
  if (L.d() != sys.d() || L.m() != sys.m() || g_.d() != sys.d())
    throw Error(ErrorKind::kInvalidArgument, "Lagrangian/system/grid dimension mismatch");
  controls_ = control_lattice(sys.m(), s_.U, s_.control_samples);
  const GridFunction shape(g_);
  strides_.resize(g_.d());
  std::size_t st = 1;
  for (int i = 0; i < g_.d(); ++i) {
    strides_[i] = st;
    st *= static_cast<std::size_t>(g_.resolution[i]);
  }
  corner_offsets_.assign(1u << g_.d(), 0);
  for (unsigned k = 0; k < corner_offsets_.size(); ++k)
    for (int i = 0; i < g_.d(); ++i)
      if (k & (1u << i)) corner_offsets_[k] += strides_[i];
  const std::size_t N = shape.size(), M = controls_.size();
  nodes_.resize(N);
  fields_.resize(N);
  stencils_.resize(N * M);
  costs_.resize(N * M);
  parallel_for(N, [&](std::size_t n) {
    nodes_[n] = shape.node(n);
    fields_[n] = sys_.fields_at(nodes_[n]);
    for (std::size_t j = 0; j < M; ++j) {
      const Vec y = nodes_[n] - s_.dt * (fields_[n] * controls_[j]);
      stencils_[n * M + j] = stencil_for(y);
      costs_[n * M + j] = s_.dt * L_.value(nodes_[n], controls_[j]);
    }
  });
}

LaxOleinik::Stencil LaxOleinik::stencil_for(const Vec& y) const {
  Stencil st{};
  st.base = 0;
  for (int i = 0; i < g_.d(); ++i) {
    const int n = g_.resolution[i];
    double t = (y[i] - (g_.center[i] - g_.half_widths[i])) / g_.cell(i);
    t = std::clamp(t, 0.0, static_cast<double>(n - 1));
    const int k = std::min(static_cast<int>(t), n - 2);
    st.frac[i] = t - k;
    st.base += static_cast<std::size_t>(k) * strides_[i];
  }
  return st;
}

namespace {

// Separable lerp: gather the 2^D corners, then collapse one axis at a time.
template <int D>
double lerp_corners(const double* v, std::size_t base, const std::size_t* offs, const double* frac) {
  constexpr unsigned nc = 1u << D;
  double c[nc];
  for (unsigned k = 0; k < nc; ++k) c[k] = v[base + offs[k]];
  unsigned width = nc;
  for (int i = 0; i < D; ++i) {
    const double f = frac[i], g = 1.0 - f;
    width >>= 1;
    for (unsigned k = 0; k < width; ++k) c[k] = g * c[2 * k] + f * c[2 * k + 1];
  }
  return c[0];
}

}  // namespace

double LaxOleinik::interp(const std::vector<double>& v, const Stencil& st) const {
  const double* p = v.data();
  const std::size_t* o = corner_offsets_.data();
  switch (g_.d()) {
    case 1: return lerp_corners<1>(p, st.base, o, st.frac);
    case 2: return lerp_corners<2>(p, st.base, o, st.frac);
    case 3: return lerp_corners<3>(p, st.base, o, st.frac);
    case 4: return lerp_corners<4>(p, st.base, o, st.frac);
    case 5: return lerp_corners<5>(p, st.base, o, st.frac);
    default: return lerp_corners<6>(p, st.base, o, st.frac);
  }
}

void LaxOleinik::node_candidates(const GridFunction& v, std::size_t n, double discount, std::vector<double>& buf,
                                 Vec& cand) const {
  const std::size_t M = controls_.size();
  const auto& vals = v.values();
  for (std::size_t j = 0; j < M; ++j) buf[j] = costs_[n * M + j] + discount * interp(vals, stencils_[n * M + j]);
  if (s_.legendre_candidate) {
    const Vec q = fields_[n].transpose() * v.node_gradient(n);
    // Quadratic kinetic energy has D_u L = u, so the maximiser is q itself.
    cand = L_.kinetic().kind == Kinetic::Kind::kQuadratic ? q : legendre(L_, nodes_[n], ReducedMomentum{q}).argmax;
    const Vec y = nodes_[n] - s_.dt * (fields_[n] * cand);
    buf[M] = s_.dt * L_.value(nodes_[n], cand) + discount * interp(vals, stencil_for(y));
  }
}

void LaxOleinik::apply(const GridFunction& v, double c, double discount, GridFunction& out) const {
  if (v.size() != nodes_.size() || out.size() != nodes_.size())
    throw Error(ErrorKind::kInvalidArgument, "grid function does not match the operator grid");
  const std::size_t M = controls_.size();
  const std::size_t width = M + (s_.legendre_candidate ? 1 : 0);
  const double shift = c * s_.dt;
  parallel_for_chunks(nodes_.size(), [&](std::size_t begin, std::size_t end) {
    std::vector<double> buf(width);
    Vec cand;
    for (std::size_t n = begin; n < end; ++n) {
      node_candidates(v, n, discount, buf, cand);
      out[n] = simd::argmin(buf).value - shift;
    }
  });
}

GridFunction LaxOleinik::apply(const GridFunction& v, double c, double discount) const {
  GridFunction out(g_);
  apply(v, c, discount, out);
  return out;
}

Vec LaxOleinik::minimizing_control(const GridFunction& v, std::size_t node, double discount) const {
  const std::size_t M = controls_.size();
  std::vector<double> buf(M + (s_.legendre_candidate ? 1 : 0));
  Vec cand;
  node_candidates(v, node, discount, buf, cand);
  const auto best = simd::argmin(buf);
  return best.index < M ? controls_[best.index] : cand;
}

GridFunction lax_oleinik_step(const GridFunction& v, const Lagrangian& L, const ControlSystem& sys, double c,
                              const SchemeSettings& s) {
  return LaxOleinik(L, sys, v.geometry(), s).apply(v, c);
}

std::vector<HorizonSnapshot> finite_horizon_ladder(const Lagrangian& L, const ControlSystem& sys, const GridGeometry& g,
                                                   const std::vector<double>& T_ladder, const SchemeSettings& s) {
  for (std::size_t i = 0; i < T_ladder.size(); ++i) {
    if (!(T_ladder[i] >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "horizon must be >= 0", T_ladder[i]);
    if (i > 0 && !(T_ladder[i] > T_ladder[i - 1]))
      throw Error(ErrorKind::kInvalidArgument, "horizon ladder must be increasing");
  }
  const LaxOleinik op(L, sys, g, s);
  GridFunction v(g, 0.0), next(g, 0.0);
  std::vector<HorizonSnapshot> out;
  int done = 0;
  for (double T : T_ladder) {
    const int steps = static_cast<int>(std::lround(T / s.dt));
    for (; done < steps; ++done) {
      op.apply(v, 0.0, 1.0, next);
      std::swap(v, next);
    }
    out.push_back({steps * s.dt, steps, v});
  }
  return out;
}

GridFunction finite_horizon(const Lagrangian& L, const ControlSystem& sys, const GridGeometry& g, double T,
                            const SchemeSettings& s) {
  return finite_horizon_ladder(L, sys, g, {T}, s).front().V;
}

FixedPointResult discounted(const Lagrangian& L, const ControlSystem& sys, const GridGeometry& g, double lambda,
                            const SchemeSettings& s) {
  if (!(lambda > 0.0)) throw Error(ErrorKind::kInvalidArgument, "discount rate must be positive", lambda);
  const LaxOleinik op(L, sys, g, s);
  const double beta = std::exp(-lambda * s.dt);
  GridFunction v(g, 0.0), next(g, 0.0);
  FixedPointResult r{v};
  for (long it = 1; it <= s.max_iters; ++it) {
    op.apply(v, 0.0, beta, next);
    r.residual = next.sup_diff(v);
    std::swap(v, next);
    r.iterations = it;
    if (r.residual <= s.tol_fixed_point) {
      r.converged = true;
      r.value = v;
      return r;
    }
  }
  throw Error(ErrorKind::kNonConverged, "discounted value iteration hit max_iters", r.residual);
}

FixedPointResult critical_solution(const Lagrangian& L, const ControlSystem& sys, const GridGeometry& g, double c,
                                   const SchemeSettings& s, const GridFunction* init) {
  const Vec& x_star = L.attractor().x_star;
  GridFunction v = init ? *init : GridFunction(g, 0.0);
  if (init && init->size() != GridFunction(g).size())
    throw Error(ErrorKind::kInvalidArgument, "initial grid function does not match the grid");
  if (x_star.size() != g.d() || !v.contains(x_star)) throw Error(ErrorKind::kOutOfBox, "x* is outside the grid box");
  const LaxOleinik op(L, sys, g, s);
  v.add_constant(-v.interpolate(x_star));
  GridFunction next(g, 0.0);
  FixedPointResult r{v};
  for (long it = 1; it <= s.max_iters; ++it) {
    op.apply(v, c, 1.0, next);
    r.residual = next.sup_diff(v);
    const double offset = next.interpolate(x_star);
    r.drift_per_sweep = offset;
    next.add_constant(-offset);
    std::swap(v, next);
    r.iterations = it;
    if (r.residual <= s.tol_fixed_point) {
      r.converged = true;
      break;
    }
  }
  r.value = v;
  return r;
}

}  // namespace subkam
