#pragma once

#include <cstddef>
#include <vector>

namespace cotlsa {

struct EigRhs {
  double d_lambda_v = 0.0;
  double d_lambda_w = 0.0;
};

// Idealized per-coordinate eigenvalue dynamics of (Ṽ, W̃) with the
// interaction terms dropped:
//   dλV/dt = −[(k+1)(1−λW)² + (2/η)λW(1−λW) + λW²/(η(2−η))]·λV + ((1−η)/(2−η))·λW − 1
//   dλW/dt = (k+1−1/η)·λV²·(1−λW) + ((1−η)/(η(2−η)))·λV²·λW + ((1−η)/(2−η))·λV
// (−η, 1) is a fixed point.
EigRhs eig_ode_rhs(double lambda_v, double lambda_w, double eta, std::size_t k);

struct EigTrajectory {
  std::vector<double> times;                    // sampled every record_every steps
  std::vector<std::vector<double>> lambda_v;    // [coordinate][sample]
  std::vector<std::vector<double>> lambda_w;
  std::vector<double> hit_time;                 // first time within tol of (−η, 1); −1 if never
  std::vector<double> final_v;
  std::vector<double> final_w;
};

// Explicit Euler with step h up to t_max. Throws Diverged on non-finite state.
EigTrajectory integrate_eig_ode(const std::vector<double>& lambda_v0, const std::vector<double>& lambda_w0,
                                double eta, std::size_t k, double h, double t_max, double tol = 1e-3,
                                std::size_t record_every = 100);

}  // namespace cotlsa
