#include "subkam/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <random>

#include <Eigen/Core>
#include <json.hpp>

#include "subkam/instances.hpp"
#include "subkam/io.hpp"
#include "subkam/parallel.hpp"
#include "subkam/simd/kernels.hpp"

namespace subkam {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

json vec_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec to_vec(const std::vector<double>& v) {
  Vec x(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) x[static_cast<int>(i)] = v[i];
  return x;
}

json estimate_json(const CriticalEstimate& e) {
  json j{{"method", to_string(e.method)}, {"value", e.value}, {"error_proxy", e.error_proxy}, {"flagged", e.flagged}};
  json lad = json::array();
  for (const auto& l : e.ladder) {
    json row{{"parameter", l.parameter}, {"estimate", l.estimate}};
    if (l.cross_check) row["cross_check"] = *l.cross_check;
    lad.push_back(row);
  }
  j["ladder"] = lad;
  if (e.dual_bound) j["dual_bound"] = *e.dual_bound;
  if (e.lp_residual) j["closedness_residual"] = *e.lp_residual;
  if (e.method == EstimateMethod::kClosedMeasureLp) j["boundary_flag"] = e.lp_boundary_flag;
  return j;
}

class Pipeline {
 public:
  Pipeline(const RunConfig& c, json& results, json& timings)
      : c_(c), inst_(make_instance(c)), out_(c.out_dir), results_(results), timings_(timings) {
    const int d = inst_.sys.d();
    if (static_cast<int>(c.probe_point.size()) != d)
      throw Error(ErrorKind::kConfig, "critical.x must have " + std::to_string(d) + " entries for this instance");
  }

  bool flagged() const { return flagged_; }
  const Instance& instance() const { return inst_; }

  void check_assumptions() {
    timed("check-assumptions", [&] {
      const auto fd = check_f1_f2(inst_.sys, c_.sample_boxes.x_radius, c_.field_samples, c_.seed);
      const auto ld = check_l1_l2_l3(inst_.L, inst_.sys, c_.assumption_samples, c_.seed, c_.sample_boxes);
      results_["assumptions"] = {
          {"fields",
           {{"samples", fd.n_samples},
            {"max_growth_ratio", fd.max_growth_ratio},
            {"min_singular_value", fd.min_singular_value},
            {"rank_deficient_samples", fd.rank_deficient_samples},
            {"growth_violation", fd.growth_violation},
            {"rank_violation", fd.rank_violation}}},
          {"lagrangian",
           {{"samples", ld.n_samples},
            {"reversibility_violation", ld.reversibility_violation},
            {"min_hessian_eigenvalue", ld.min_hessian_eigenvalue},
            {"lower_bound_violation", ld.lower_bound_violation},
            {"growth_ratio", ld.growth_ratio},
            {"inf_outside_attractor", ld.inf_outside_attractor},
            {"hamiltonian_lipschitz", ld.hamiltonian_lipschitz},
            {"l1_flag", ld.l1_flag},
            {"l2_flag", ld.l2_flag},
            {"lower_bound_flag", ld.lower_bound_flag},
            {"growth_flag", ld.growth_flag},
            {"l3_flag", ld.l3_flag},
            {"x_star_outside_attractor", ld.x_star_outside_attractor},
            {"all_ok", ld.all_ok()}}},
          {"experimental", inst_.experimental}};
    });
  }

  void critical() {
    const Vec x = to_vec(c_.probe_point);
    HjConfig hj{c_.hj_geometry(), c_.scheme, c_.cross_check, c_.optimizer};
    json& out = results_["critical"];
    if (inst_.has_oracle) {
      timed("oracle", [&] {
        const auto o = oracle_critical(inst_.L, c_.oracle_radius, c_.oracle_grid);
        out["oracle"] = {{"value", o.c}, {"x_star", vec_json(o.x_star)}};
      });
    }
    std::vector<double> values;
    timed("time_average", [&] {
      const auto e = critical_time_average(inst_.L, inst_.sys, x, c_.t_ladder, hj);
      out["time_average"] = estimate_json(e);
      CsvWriter w(out_ / "time_average.csv", {"T", "V_T_over_T", "direct_over_T"});
      for (const auto& l : e.ladder) w.row({l.parameter, l.estimate, l.cross_check.value_or(std::nan(""))});
      w.close();
      flagged_ |= e.flagged;
      values.push_back(e.value);
    });
    timed("abel", [&] {
      const auto e = critical_abel(inst_.L, inst_.sys, x, c_.lambda_ladder, hj);
      out["abel"] = estimate_json(e);
      CsvWriter w(out_ / "abel.csv", {"lambda", "lambda_v_lambda"});
      for (const auto& l : e.ladder) w.row({l.parameter, l.estimate});
      w.close();
      flagged_ |= e.flagged;
      values.push_back(e.value);
    });
    timed("closed_measure_lp", [&] {
      LpEstimateConfig lc;
      lc.R = c_.lp_R;
      lc.U = c_.lp_U;
      lc.ladder.clear();
      for (std::size_t i = 0; i < c_.lp_n_x.size(); ++i) lc.ladder.push_back({c_.lp_n_x[i], c_.lp_n_u[i], c_.lp_degree});
      lc.dual.sample_n = c_.dual_samples;
      lc.dual.max_sweeps = c_.dual_sweeps;
      LpCriticalResult last;
      const auto e = critical_lp(inst_.L, inst_.sys, lc, &last);
      out["closed_measure_lp"] = estimate_json(e);
      out["closed_measure_lp"]["simplex_iterations"] = last.iterations;
      out["closed_measure_lp"]["variables"] = last.n_variables;
      out["closed_measure_lp"]["basis_size"] = last.basis_size;
      out["closed_measure_lp"]["boundary_mass"] = last.boundary_mass;
      CsvWriter w(out_ / "lp.csv", {"n_x", "c_lp"});
      for (const auto& l : e.ladder) w.row({l.parameter, l.estimate});
      w.close();
      write_measure_csv(out_ / "mu_star.csv", *last.mu_star);
      flagged_ |= e.flagged || e.lp_boundary_flag;
      values.push_back(e.value);
    });
    std::sort(values.begin(), values.end());
    estimated_c_ = values[values.size() / 2];
    out["median_estimate"] = *estimated_c_;
  }

  double critical_value() {
    if (c_value_) return *c_value_;
    if (inst_.has_oracle) {
      c_value_ = oracle_critical(inst_.L, c_.oracle_radius, c_.oracle_grid).c;
      results_["c_used"] = {{"value", *c_value_}, {"source", "oracle"}};
    } else {
      if (!estimated_c_) critical();
      c_value_ = *estimated_c_;
      results_["c_used"] = {{"value", *c_value_}, {"source", "median_estimate"}};
    }
    return *c_value_;
  }

  void barrier() {
    const double c = critical_value();
    const int d = inst_.sys.d();
    std::mt19937_64 rng(c_.seed);
    std::uniform_real_distribution<double> unif(-c_.triple_radius, c_.triple_radius);
    std::vector<std::array<Vec, 3>> triples;
    while (static_cast<int>(triples.size()) < c_.n_triples) {
      std::array<Vec, 3> t;
      for (auto& p : t) {
        do {
          p = Vec(d);
          for (int k = 0; k < d; ++k) p[k] = unif(rng);
        } while (p.norm() > c_.triple_radius);
      }
      triples.push_back(t);
    }
    std::vector<double> h(3 * triples.size());
    timed("barrier", [&] {
      parallel_for(h.size(), [&](std::size_t i) {
        const auto& t = triples[i / 3];
        static constexpr int from[3] = {0, 1, 0}, to[3] = {1, 2, 2};
        h[i] = peierls_barrier(inst_.L, inst_.sys, t[from[i % 3]], t[to[i % 3]], c, c_.barrier).h;
      });
    });
    auto header = axis_names("x", d);
    for (auto& s : axis_names("y", d)) header.push_back(s);
    for (auto& s : axis_names("z", d)) header.push_back(s);
    for (const char* s : {"h_xy", "h_yz", "h_xz", "triangle_violation"}) header.emplace_back(s);
    CsvWriter w(out_ / "barrier.csv", header);
    double min_h = std::numeric_limits<double>::infinity(), max_violation = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < triples.size(); ++i) {
      std::vector<double> row;
      for (const auto& p : triples[i])
        for (int k = 0; k < d; ++k) row.push_back(p[k]);
      const double hxy = h[3 * i], hyz = h[3 * i + 1], hxz = h[3 * i + 2];
      const double viol = hxz - hxy - hyz;
      row.insert(row.end(), {hxy, hyz, hxz, viol});
      w.row(row);
      min_h = std::min({min_h, hxy, hyz, hxz});
      max_violation = std::max(max_violation, viol);
    }
    w.close();
    results_["barrier"] = {{"triples", triples.size()},
                           {"min_h", triples.empty() ? 0.0 : min_h},
                           {"max_triangle_violation", triples.empty() ? 0.0 : max_violation},
                           {"horizons", c_.barrier.horizons()}};
  }

  const AubryReport& aubry() {
    if (aubry_) return *aubry_;
    const double c = critical_value();
    timed("aubry", [&] {
      aubry_ = aubry_detect(inst_.L, inst_.sys, c, probe_lattice(inst_.sys.d(), c_.probe_radius, c_.probe_spacing),
                            c_.barrier, c_.eps_A);
    });
    const int d = inst_.sys.d();
    auto header = axis_names("x", d);
    header.emplace_back("h_xx");
    header.emplace_back("member");
    CsvWriter w(out_ / "aubry.csv", header);
    json members = json::array();
    for (std::size_t i = 0; i < aubry_->points.size(); ++i) {
      const bool member = std::find(aubry_->members.begin(), aubry_->members.end(), i) != aubry_->members.end();
      std::vector<double> row;
      for (int k = 0; k < d; ++k) row.push_back(aubry_->points[i][k]);
      row.push_back(aubry_->h_diag[i]);
      row.push_back(member ? 1.0 : 0.0);
      w.row(row);
      if (member) members.push_back(vec_json(aubry_->points[i]));
    }
    w.close();
    results_["aubry"] = {{"probes", aubry_->points.size()},
                         {"eps_A", aubry_->eps_A},
                         {"h_x_star", aubry_->h_diag[aubry_->x_star_index]},
                         {"members", members}};
    return *aubry_;
  }

  const GridFunction& solve() {
    if (chi_) return *chi_;
    const double c = critical_value() + c_.solve_c_offset;
    FixedPointResult r{GridFunction(c_.hj_geometry())};
    timed("solve", [&] { r = critical_solution(inst_.L, inst_.sys, c_.hj_geometry(), c, c_.scheme); });
    const auto& g = r.value.geometry();
    results_["solve"] = {{"c", c},
                         {"converged", r.converged},
                         {"iterations", r.iterations},
                         {"residual", r.residual},
                         {"drift_per_sweep", r.drift_per_sweep},
                         {"drift_per_unit_time", r.drift_per_sweep / c_.scheme.dt},
                         {"grid", {{"center", vec_json(g.center)}, {"half_widths", vec_json(g.half_widths)},
                                   {"resolution", g.resolution}}},
                         {"cfl_ratio", cfl_ratio(g, inst_.sys, c_.scheme)},
                         {"initial_condition", "zero"}};
    flagged_ |= !r.converged;
    write_grid_csv(out_ / "chi.csv", r.value, "chi");
    chi_ = std::move(r.value);
    return *chi_;
  }

  void calibrate() {
    const auto& chi = solve();
    const auto& rep = aubry();
    const double c = critical_value();
    const int d = inst_.sys.d(), m = inst_.sys.m();
    json curves = json::array();
    double worst_defect = 0.0, worst_identity = 0.0, worst_super = 0.0, worst_disagreement = 0.0;
    timed("calibrate", [&] {
      int index = 0;
      for (auto i : rep.members) {
        const Vec& x = rep.points[i];
        if (!chi.contains(x, 2.0)) continue;
        const auto cal = calibrated_curve(chi, inst_.L, inst_.sys, x, c, c_.calibrate_horizon, c_.calibrate_dt);
        const auto sup = superdifferential_equation_check(chi, inst_.L, inst_.sys, c,
                                                          {cal.pair.states.begin(), cal.pair.states.end() - 1});
        auto header = std::vector<std::string>{"t"};
        for (auto& s : axis_names("x", d)) header.push_back(s);
        for (auto& s : axis_names("u", m)) header.push_back(s);
        for (auto& s : axis_names("DF_chi", m)) header.push_back(s);
        for (auto& s : axis_names("Du_L", m)) header.push_back(s);
        CsvWriter w(out_ / ("calibrated_" + std::to_string(index) + ".csv"), header);
        for (std::size_t k = 0; k < cal.pair.controls.size(); ++k) {
          std::vector<double> row{cal.pair.grid.time(static_cast<int>(k))};
          for (int j = 0; j < d; ++j) row.push_back(cal.pair.states[k][j]);
          for (int j = 0; j < m; ++j) row.push_back(cal.pair.controls[k][j]);
          for (int j = 0; j < m; ++j) row.push_back(cal.horizontal_gradients[k][j]);
          for (int j = 0; j < m; ++j) row.push_back(cal.lagrangian_gradients[k][j]);
          w.row(row);
        }
        w.close();
        const auto hg = horizontal_gradient(chi, inst_.sys, x);
        // Uniqueness is not assumed: the argmin-table curve is reported beside
        // the feedback curve, not reconciled with it.
        const auto table = argmin_backtrack(chi, inst_.L, inst_.sys, x, c_.calibrate_horizon, c_.scheme);
        const double disagreement = curve_distance(cal.pair, table);
        worst_disagreement = std::max(worst_disagreement, disagreement);
        curves.push_back({{"start", vec_json(x)},
                          {"file", "calibrated_" + std::to_string(index) + ".csv"},
                          {"defect", cal.defect},
                          {"defect_per_unit_time", cal.defect_per_unit_time},
                          {"gradient_identity_residual", cal.gradient_identity_residual},
                          {"superdifferential_residual", sup.max_residual},
                          {"two_scale_indicator", hg.two_scale},
                          {"backtrack_disagreement", disagreement},
                          {"feedback_dt", cal.dt},
                          {"truncated", cal.truncated}});
        worst_defect = std::max(worst_defect, cal.defect_per_unit_time);
        worst_identity = std::max(worst_identity, cal.gradient_identity_residual);
        worst_super = std::max(worst_super, sup.max_residual);
        flagged_ |= cal.truncated;
        ++index;
      }
    });
    results_["calibrate"] = {{"curves", curves},
                             {"max_defect_per_unit_time", worst_defect},
                             {"max_gradient_identity_residual", worst_identity},
                             {"max_superdifferential_residual", worst_super},
                             {"max_backtrack_disagreement", worst_disagreement}};
  }

 private:
  template <class F>
  void timed(const char* name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    timings_[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  const RunConfig& c_;
  Instance inst_;
  fs::path out_;
  json& results_;
  json& timings_;
  bool flagged_ = false;
  std::optional<double> c_value_;
  std::optional<double> estimated_c_;
  std::optional<AubryReport> aubry_;
  std::optional<GridFunction> chi_;
};

json settings_json(const RunConfig& c) {
  json s = json::object();
  std::string section;
  std::istringstream in(echo_config(c));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find(" = ");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
    s[section.empty() ? "run" : section][key] = value;
  }
  return s;
}

}  // namespace

int run(const RunConfig& c) {
  const fs::path out(c.out_dir);
  json manifest{{"tool", "subkam"},
                {"instance", c.instance},
                {"task", c.task},
                {"seed", c.seed},
                {"versions",
                 {{"subkam", SUBKAM_VERSION},
                  {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                std::to_string(EIGEN_MINOR_VERSION)},
                  {"compiler", __VERSION__}}},
                {"threads", worker_count()},
                {"simd", simd::active().name},
                {"settings", settings_json(c)}};
  json results = json::object(), timings = json::object();
  int status = kExitOk;
  const auto t0 = std::chrono::steady_clock::now();
  bool dir_ok = false;
  try {
    ensure_output_dir(out);
    dir_ok = true;
    write_text(out / "config.effective", echo_config(c));
    Pipeline p(c, results, timings);
    const std::string& t = c.task;
    if (t == "check-assumptions" || t == "full-pipeline") p.check_assumptions();
    if (t == "critical" || t == "full-pipeline") p.critical();
    if (t == "solve" || t == "full-pipeline") p.solve();
    if (t == "barrier" || t == "full-pipeline") p.barrier();
    if (t == "aubry" || t == "full-pipeline") p.aubry();
    if (t == "calibrate" || t == "full-pipeline") p.calibrate();
    status = p.flagged() ? kExitFlagged : kExitOk;
  } catch (const Error& e) {
    status = kExitError;
    manifest["error"] = {{"kind", to_string(e.kind())}, {"message", e.what()}};
    if (!std::isnan(e.detail())) manifest["error"]["detail"] = e.detail();
    std::cerr << "subkam: " << to_string(e.kind()) << ": " << e.what() << "\n";
  } catch (const std::exception& e) {
    status = kExitError;
    manifest["error"] = {{"kind", "internal"}, {"message", e.what()}};
    std::cerr << "subkam: " << e.what() << "\n";
  }
  timings["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest["results"] = results;
  manifest["wall_times_s"] = timings;
  manifest["status"] = status == kExitOk ? "ok" : (status == kExitFlagged ? "flagged" : "error");
  manifest["exit_code"] = status;
  if (dir_ok) {
    try {
      write_text(out / "manifest.json", manifest.dump(2) + "\n");
    } catch (const Error& e) {
      std::cerr << "subkam: " << e.what() << "\n";
      status = kExitError;
    }
  }
  return status;
}

}  // namespace subkam
