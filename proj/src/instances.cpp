#include "subkam/instances.hpp"

namespace subkam {

namespace {

Polynomial table_polynomial(int d, const std::vector<std::vector<double>>& rows, const char* what) {
  std::vector<Polynomial::Term> terms;
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != d + 1)
      throw Error(ErrorKind::kConfig, std::string(what) + " rows need 1 + d entries (coeff, exponents)");
    Polynomial::Term t;
    t.coeff = r[0];
    for (int i = 0; i < d; ++i) {
      if (r[i + 1] < 0.0 || r[i + 1] != static_cast<int>(r[i + 1]))
        throw Error(ErrorKind::kConfig, std::string(what) + " exponents must be nonnegative integers");
      t.exps.push_back(static_cast<int>(r[i + 1]));
    }
    terms.push_back(std::move(t));
  }
  return Polynomial(d, std::move(terms));
}

ControlSystem custom_system(const CustomInstance& ci) {
  if (ci.system == "euclidean") {
    if (ci.m != ci.d) throw Error(ErrorKind::kConfig, "euclidean system needs m = d");
    return euclidean(ci.d);
  }
  if (ci.system == "heisenberg") {
    if (ci.d != 3 || ci.m != 2) throw Error(ErrorKind::kConfig, "heisenberg system needs d = 3, m = 2");
    return heisenberg();
  }
  if (ci.system == "grushin") {
    if (ci.d != 2 || ci.m != 2) throw Error(ErrorKind::kConfig, "grushin system needs d = 2, m = 2");
    return grushin();
  }
  if (ci.system == "affine") {
    if (static_cast<int>(ci.fields.size()) != ci.m) throw Error(ErrorKind::kConfig, "affine system needs m field rows");
    std::vector<AffineField> fs;
    for (const auto& row : ci.fields) {
      if (static_cast<int>(row.size()) != ci.d * ci.d + ci.d)
        throw Error(ErrorKind::kConfig, "affine field rows need d*d + d entries (A row-major, then b)");
      AffineField f{Mat(ci.d, ci.d), Vec(ci.d)};
      for (int i = 0; i < ci.d; ++i) {
        for (int j = 0; j < ci.d; ++j) f.A(i, j) = row[i * ci.d + j];
        f.b[i] = row[ci.d * ci.d + i];
      }
      fs.push_back(std::move(f));
    }
    return affine_system("custom-affine", std::move(fs), ci.field_growth, false, false);
  }
  throw Error(ErrorKind::kConfig, "unknown instance.system '" + ci.system + "'");
}

Instance custom_instance(const RunConfig& c) {
  const auto& ci = c.custom;
  ControlSystem sys = custom_system(ci);
  Potential v = ci.denominator.empty()
                    ? Potential(table_polynomial(ci.d, ci.numerator, "numerator"))
                    : Potential(table_polynomial(ci.d, ci.numerator, "numerator"),
                                table_polynomial(ci.d, ci.denominator, "denominator"));
  Vec x_star(ci.d);
  for (int i = 0; i < ci.d; ++i) x_star[i] = ci.x_star[i];
  const AttractorData att{ci.attractor_radius, x_star, ci.gap};
  Lagrangian L = [&] {
    if (ci.kinetic == "quadratic") return quadratic_lagrangian("custom", std::move(v), ci.m, att, ci.growth_C1);
    if (ci.kinetic == "quartic") return quartic_lagrangian("custom", std::move(v), ci.m, ci.beta, att, ci.growth_C1);
    throw Error(ErrorKind::kConfig, "instance.kinetic must be quadratic or quartic");
  }();
  return Instance{"custom", std::move(sys), std::move(L), false, false};
}

}  // namespace

Instance make_instance(const RunConfig& c) {
  Instance inst = [&]() -> Instance {
    if (c.instance == "euclidean-1d")
      return {c.instance, euclidean(1),
              quadratic_lagrangian(c.instance, rational_well(1, 1), 1, {1.0, Vec::Zero(1), 0.5}), true, false};
    if (c.instance == "heisenberg")
      return {c.instance, heisenberg(),
              quadratic_lagrangian(c.instance, rational_well(3, 2), 2, {1.0, Vec::Zero(3), 0.5}), true, false};
    if (c.instance == "double-well") {
      Vec xs(1);
      xs << -1.0;
      return {c.instance, euclidean(1), quadratic_lagrangian(c.instance, double_well(1), 1, {1.5, xs, 1.5}, 10.0),
              true, false};
    }
    if (c.instance == "grushin")
      return {c.instance, grushin(),
              quadratic_lagrangian(c.instance, rational_well(2, 2), 2, {1.0, Vec::Zero(2), 0.5}), true, true};
    if (c.instance == "custom") return custom_instance(c);
    throw Error(ErrorKind::kConfig, "unknown instance '" + c.instance + "'");
  }();
  if (c.shift != 0.0) inst.L = inst.L.shifted(c.shift);
  return inst;
}

}  // namespace subkam
