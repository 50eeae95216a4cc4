#include "cotlsa/eig_ode.hpp"

#include <cmath>

#include "cotlsa/errors.hpp"

namespace cotlsa {

EigRhs eig_ode_rhs(double lambda_v, double lambda_w, double eta, std::size_t k) {
  const double kp1 = static_cast<double>(k) + 1.0;
  const double c = (1.0 - eta) / (2.0 - eta);
  const double one_minus_w = 1.0 - lambda_w;
  const double damping = kp1 * one_minus_w * one_minus_w + (2.0 / eta) * lambda_w * one_minus_w +
                         lambda_w * lambda_w / (eta * (2.0 - eta));
  const double v2 = lambda_v * lambda_v;
  EigRhs r;
  r.d_lambda_v = -damping * lambda_v + c * lambda_w - 1.0;
  r.d_lambda_w = (kp1 - 1.0 / eta) * v2 * one_minus_w + (c / eta) * v2 * lambda_w + c * lambda_v;
  return r;
}

EigTrajectory integrate_eig_ode(const std::vector<double>& lambda_v0, const std::vector<double>& lambda_w0,
                                double eta, std::size_t k, double h, double t_max, double tol,
                                std::size_t record_every) {
  if (!(h > 0.0)) throw Error("integrate_eig_ode: step must be positive");
  if (lambda_v0.size() != lambda_w0.size()) throw DimensionMismatch("integrate_eig_ode: coordinate counts differ");
  const std::size_t m = lambda_v0.size();
  const auto steps = static_cast<std::size_t>(std::ceil(t_max / h - 1e-9));
  if (record_every == 0) record_every = 1;

  EigTrajectory tr;
  tr.lambda_v.assign(m, {});
  tr.lambda_w.assign(m, {});
  tr.hit_time.assign(m, -1.0);
  std::vector<double> v = lambda_v0;
  std::vector<double> w = lambda_w0;

  auto record = [&](double t) {
    tr.times.push_back(t);
    for (std::size_t j = 0; j < m; ++j) {
      tr.lambda_v[j].push_back(v[j]);
      tr.lambda_w[j].push_back(w[j]);
    }
  };
  auto check_hits = [&](double t) {
    for (std::size_t j = 0; j < m; ++j)
      if (tr.hit_time[j] < 0.0 && std::abs(v[j] + eta) <= tol && std::abs(w[j] - 1.0) <= tol)
        tr.hit_time[j] = t;
  };

  record(0.0);
  check_hits(0.0);
  for (std::size_t s = 1; s <= steps; ++s) {
    for (std::size_t j = 0; j < m; ++j) {
      const EigRhs r = eig_ode_rhs(v[j], w[j], eta, k);
      v[j] += h * r.d_lambda_v;
      w[j] += h * r.d_lambda_w;
      if (!std::isfinite(v[j]) || !std::isfinite(w[j]))
        throw Diverged("eigenvalue ODE left the finite range", static_cast<long>(s) - 1);
    }
    const double t = static_cast<double>(s) * h;
    check_hits(t);
    if (s % record_every == 0 || s == steps) record(t);
  }
  tr.final_v = v;
  tr.final_w = w;
  return tr;
}

}  // namespace cotlsa
