#include <door/estimators.hpp>

namespace door {

std::string method_name(Method m) {
  switch (m) {
    case Method::crude: return "crude";
    case Method::iptw: return "iptw";
    case Method::iptw_hajek: return "iptw-hajek";
    case Method::gformula: return "gformula";
    case Method::dr: return "dr";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "crude") return Method::crude;
  if (name == "iptw") return Method::iptw;
  if (name == "iptw-hajek" || name == "hajek") return Method::iptw_hajek;
  if (name == "gformula" || name == "g-formula") return Method::gformula;
  if (name == "dr" || name == "aiptw") return Method::dr;
  throw ValidationError("unknown method '" + name +
                        "' (expected crude, iptw, iptw-hajek, gformula, dr)");
}

CellProbEstimate crude_cells(const DoorDataset& ds) {
  const int K = ds.levels();
  CellProbEstimate out;
  out.method = Method::crude;
  out.p1 = Vector::Zero(K);
  out.p0 = Vector::Zero(K);
  for (Index i = 0; i < ds.n(); ++i)
    (ds.treatment()[i] ? out.p1 : out.p0)[ds.outcome()[i] - 1] += 1.0;
  out.p1 /= static_cast<double>(ds.arm_size(1));
  out.p0 /= static_cast<double>(ds.arm_size(0));
  return out;
}

CellProbEstimate iptw_cells(const DoorDataset& ds, const PropensityFit& ps, bool hajek) {
  const Index n = ds.n();
  if (ps.pi.size() != n) throw ValidationError("iptw_cells: propensity fit size mismatch");
  const int K = ds.levels();
  CellProbEstimate out;
  out.method = hajek ? Method::iptw_hajek : Method::iptw;
  out.p1 = Vector::Zero(K);
  out.p0 = Vector::Zero(K);
  out.weights.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double pi = ps.pi[i];
    if (pi <= 0.0 || pi >= 1.0)
      throw FitError("iptw_cells: positivity violation, propensity " + std::to_string(pi) +
                     " for subject " + std::to_string(i + 1));
    const double w = ds.treatment()[i] ? 1.0 / pi : 1.0 / (1.0 - pi);
    out.weights[i] = w;
    (ds.treatment()[i] ? out.p1 : out.p0)[ds.outcome()[i] - 1] += w;
  }
  out.p1 /= static_cast<double>(n);
  out.p0 /= static_cast<double>(n);
  if (hajek) {
    out.p1 /= out.p1.sum();
    out.p0 /= out.p0.sum();
  }
  return out;
}

CellProbEstimate gformula_cells(const DoorDataset& ds, const OutcomeFit& of) {
  if (!of.converged) throw FitError("gformula_cells: outcome fit did not converge");
  if (of.cells[0].rows() != ds.n())
    throw ValidationError("gformula_cells: outcome fit size mismatch");
  CellProbEstimate out;
  out.method = Method::gformula;
  out.p1 = of.cells[1].colwise().mean();
  out.p0 = of.cells[0].colwise().mean();
  return out;
}

CellProbEstimate dr_cells(const DoorDataset& ds, const PropensityFit& ps, const OutcomeFit& of) {
  const Index n = ds.n();
  const int K = ds.levels();
  if (ps.pi.size() != n || of.cells[0].rows() != n)
    throw ValidationError("dr_cells: fit size mismatch");
  CellProbEstimate out;
  out.method = Method::dr;
  out.p1 = Vector::Zero(K);
  out.p0 = Vector::Zero(K);
  out.weights.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double pi = ps.pi[i];
    if (pi <= 0.0 || pi >= 1.0)
      throw FitError("dr_cells: positivity violation, propensity " + std::to_string(pi) +
                     " for subject " + std::to_string(i + 1));
    const int z = ds.treatment()[i];
    const int y = ds.outcome()[i] - 1;
    const double w1 = 1.0 / pi;
    const double w0 = 1.0 / (1.0 - pi);
    out.weights[i] = z ? w1 : w0;
    for (int k = 0; k < K; ++k) {
      const double ind = k == y ? 1.0 : 0.0;
      // weighted outcome minus the weighted model residual, per arm
      out.p1[k] += z * w1 * ind - (z * w1 - 1.0) * of.cells[1](i, k);
      out.p0[k] += (1 - z) * w0 * ind - ((1 - z) * w0 - 1.0) * of.cells[0](i, k);
    }
  }
  out.p1 /= static_cast<double>(n);
  out.p0 /= static_cast<double>(n);
  return out;
}

}  // namespace door
