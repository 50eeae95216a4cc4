#include "cotlsa/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "cotlsa/csv.hpp"
#include "cotlsa/diagnostics.hpp"
#include "cotlsa/errors.hpp"
#include "cotlsa/inference.hpp"

namespace cotlsa {

void validate(const TrainConfig& cfg) {
  if (cfg.d == 0 || cfg.n == 0) throw ConfigError("d and n must be positive");
  if (!(cfg.eta > 0.0)) throw ConfigError("eta must be positive");
  if (cfg.optimizer == OptimizerKind::gradient_flow && !(cfg.h > 0.0)) throw ConfigError("h must be positive");
  if (cfg.optimizer == OptimizerKind::adam && !(cfg.lr > 0.0)) throw ConfigError("lr must be positive");
  if (cfg.batch < 2) throw ConfigError("batch must be at least 2");
  if (cfg.antithetic && cfg.batch % 2 != 0) throw ConfigError("antithetic batch must be even");
  if (cfg.log_every == 0) throw ConfigError("log_every must be positive");
  if (cfg.mode == TrainMode::experiment && cfg.init_scale < 0.0) throw ConfigError("init_scale must be >= 0");
}

RngStream init_stream(std::uint64_t seed) { return RngStream(derive_seed(seed, 0)); }
RngStream batch_stream(std::uint64_t seed, std::size_t step) { return RngStream(derive_seed(seed, 1)).split(step); }
RngStream eval_stream(std::uint64_t seed, std::size_t index) { return RngStream(derive_seed(seed, 2)).split(index); }

Assumption1Init init_assumption1(RngStream& rng, std::size_t d, double sigma, InitBasis basis) {
  if (!(sigma > 0.0 && sigma <= 0.5)) throw BadSigma("sigma must lie in (0, 1/2]");
  Matrix u = basis == InitBasis::random_orthogonal ? random_orthogonal(rng, d) : Matrix::identity(d);
  Vector lv(d), lw(d);
  for (auto& x : lv) x = -2.0 * sigma + sigma * rng.uniform();
  for (auto& x : lw) x = sigma + (0.5 - sigma) * rng.uniform();
  auto compose = [&](const Vector& lambda) {
    Matrix m(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < d; ++p) acc += u(i, p) * lambda[p] * u(j, p);
        m(i, j) = acc;
      }
    return m;
  };
  Assumption1Init out;
  out.rp.v31 = basis == InitBasis::standard ? Matrix::diagonal(lv) : symmetrize(compose(lv));
  out.rp.w13 = basis == InitBasis::standard ? Matrix::diagonal(lw) : symmetrize(compose(lw));
  out.rp.w24 = -1.0;
  out.basis = std::move(u);
  return out;
}

void check_sigma(double sigma, double eta, std::size_t k) {
  const double floor = 3.0 * (1.0 - eta) / ((2.0 - eta) * (static_cast<double>(k) + 1.0));
  if (sigma <= floor) {
    std::ostringstream msg;
    msg << "sigma=" << sigma << " does not exceed 3(1-eta)/((2-eta)(k+1))=" << floor;
    warn(msg.str());
  }
}

LsaParams init_random(RngStream& rng, std::size_t d, double scale) {
  LsaParams p = LsaParams::zeros(d);
  for (double& x : p.v.data()) x = scale * rng.normal();
  for (double& x : p.w.data()) x = scale * rng.normal();
  return p;
}

SpectralTrace spectral_trace(const ReducedParams& rp, const Matrix& basis) {
  const std::size_t d = rp.d();
  SpectralTrace tr;
  tr.lambda_v.resize(d);
  tr.lambda_w.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const Vector u = basis.col(j);
    tr.lambda_v[j] = dot(u, matvec(rp.v31, u));
    tr.lambda_w[j] = dot(u, matvec(rp.w13, u));
  }
  auto residual = [&](const Matrix& m, const Vector& lambda) {
    Matrix r = m;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t c = 0; c < d; ++c) {
        double acc = 0.0;
        for (std::size_t p = 0; p < d; ++p) acc += basis(i, p) * lambda[p] * basis(c, p);
        r(i, c) -= acc;
      }
    return frobenius_norm(r);
  };
  tr.off_basis_v = residual(rp.v31, tr.lambda_v);
  tr.off_basis_w = residual(rp.w13, tr.lambda_w);
  return tr;
}

std::vector<std::string> trajectory_csv_columns() {
  return {"step",          "cot_loss",      "cot_loss_stderr", "eval_loss",     "eval_loss_stderr",
          "off_pattern_mass", "product_error", "scale_error",  "grad_norm_v",   "grad_norm_w",
          "zero_block_ratio", "lambda_v_min", "lambda_v_max",  "lambda_w_min",  "lambda_w_max",
          "off_basis_v",   "off_basis_w",   "wall_ms"};
}

std::vector<std::string> trajectory_csv_fields(const TrajectoryRecord& r, bool with_timing) {
  auto minmax = [](const std::vector<double>& v) -> std::pair<std::string, std::string> {
    if (v.empty()) return {"", ""};
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return {format_number(*lo), format_number(*hi)};
  };
  const auto [vmin, vmax] = minmax(r.spectrum.lambda_v);
  const auto [wmin, wmax] = minmax(r.spectrum.lambda_w);
  const bool has_eval = r.eval_loss >= 0.0;
  return {format_number(r.step),
          format_number(r.cot_loss),
          format_number(r.cot_loss_stderr),
          has_eval ? format_number(r.eval_loss) : "",
          has_eval ? format_number(r.eval_loss_stderr) : "",
          format_number(r.pattern.off_pattern_mass),
          format_number(r.pattern.product_error),
          format_number(r.pattern.scale_error),
          format_number(r.grad_norm_v),
          format_number(r.grad_norm_w),
          format_number(r.zero_block_ratio),
          vmin,
          vmax,
          wmin,
          wmax,
          r.spectrum.lambda_v.empty() ? "" : format_number(r.spectrum.off_basis_v),
          r.spectrum.lambda_w.empty() ? "" : format_number(r.spectrum.off_basis_w),
          format_number(with_timing ? r.wall_ms : 0.0)};
}

TrainInit make_init(const TrainConfig& cfg) {
  RngStream rng = init_stream(cfg.seed);
  TrainInit init;
  if (cfg.mode == TrainMode::theory) {
    check_sigma(cfg.sigma, cfg.eta, cfg.k);
    const Assumption1Init a = init_assumption1(rng, cfg.d, cfg.sigma, cfg.basis);
    init.params = embed_reduced(a.rp);
    init.basis = a.basis;
  } else {
    init.params = init_random(rng, cfg.d, cfg.init_scale);
    init.basis = Matrix::identity(cfg.d);
  }
  return init;
}

Adam::Adam(std::size_t size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw DimensionMismatch("Adam: size");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
  }
}

namespace {

double zero_block_ratio(const Matrix& gv, const Matrix& gw, std::size_t d) {
  const std::size_t de = 2 * d + 2;
  double off = 0.0;
  double on = 0.0;
  for (std::size_t i = 0; i < de; ++i)
    for (std::size_t j = 0; j < de; ++j) {
      const double av = std::abs(gv(i, j));
      const double aw = std::abs(gw(i, j));
      if (on_block_pattern(d, true, i, j)) on = std::max(on, av);
      else off = std::max(off, av);
      if (on_block_pattern(d, false, i, j)) {
        if (!(i == d && j == 2 * d + 1)) on = std::max(on, aw);
      } else {
        off = std::max(off, aw);
      }
    }
  if (off == 0.0) return 0.0;
  return on > 0.0 ? off / on : INFINITY;
}

// Flat views over the trainable entries.
std::vector<double> gather(const LsaParams& p, TrainMode mode) {
  if (mode == TrainMode::experiment) {
    std::vector<double> out(p.v.data().begin(), p.v.data().end());
    out.insert(out.end(), p.w.data().begin(), p.w.data().end());
    return out;
  }
  const ReducedParams rp = extract_reduced(p);
  std::vector<double> out(rp.v31.data().begin(), rp.v31.data().end());
  out.insert(out.end(), rp.w13.data().begin(), rp.w13.data().end());
  return out;
}

void scatter(LsaParams& p, TrainMode mode, std::span<const double> flat) {
  if (mode == TrainMode::experiment) {
    const std::size_t m = p.v.size();
    std::copy(flat.begin(), flat.begin() + static_cast<long>(m), p.v.data().begin());
    std::copy(flat.begin() + static_cast<long>(m), flat.end(), p.w.data().begin());
    return;
  }
  const std::size_t d = p.d;
  Matrix v31(d, d), w13(d, d);
  std::copy(flat.begin(), flat.begin() + static_cast<long>(d * d), v31.data().begin());
  std::copy(flat.begin() + static_cast<long>(d * d), flat.end(), w13.data().begin());
  set_block(p.v, block_range(d, 3, 1), v31);
  set_block(p.w, block_range(d, 1, 3), w13);
}

std::vector<double> gather_grad(const Matrix& gv, const Matrix& gw, std::size_t d, TrainMode mode) {
  LsaParams g{d, gv, gw};
  return gather(g, mode);
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const TrainInit& init, const TrainHooks& hooks) {
  validate(cfg);
  if (init.params.d != cfg.d) throw ConfigError("initial parameters do not match d");
  const auto t0 = std::chrono::steady_clock::now();
  const McConfig mc{cfg.d, cfg.n, cfg.k, cfg.eta, cfg.batch, cfg.antithetic};
  const std::size_t k_eval = cfg.eval_k_prime > 0 ? cfg.eval_k_prime : cfg.k;

  TrainResult result;
  result.params = init.params;
  LsaParams& params = result.params;
  std::vector<double> flat = gather(params, cfg.mode);
  Adam adam(flat.size(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
  std::size_t eval_index = 0;

  for (std::size_t t = 0;; ++t) {
    const GradEstimate est = grad_mc(params, mc, batch_stream(cfg.seed, t), cfg.exec);
    const double ratio = cfg.mode == TrainMode::theory ? zero_block_ratio(est.g_v.mean, est.g_w.mean, cfg.d) : 0.0;
    result.max_zero_block_ratio = std::max(result.max_zero_block_ratio, ratio);

    const bool last = t == cfg.iterations;
    if (last || t % cfg.log_every == 0) {
      TrajectoryRecord rec;
      rec.step = t;
      rec.cot_loss = est.loss.mean;
      rec.cot_loss_stderr = est.loss.std_error;
      rec.pattern = pattern_residual(params, cfg.eta);
      rec.grad_norm_v = frobenius_norm(est.g_v.mean);
      rec.grad_norm_w = frobenius_norm(est.g_w.mean);
      rec.zero_block_ratio = ratio;
      if (cfg.mode == TrainMode::theory) rec.spectrum = spectral_trace(extract_reduced(params), init.basis);
      const bool do_eval =
          cfg.eval_tasks >= 2 && (last || (cfg.eval_every > 0 && t % cfg.eval_every == 0));
      if (do_eval) {
        const McEstimate ev = eval_loss_mc(params, cfg.n, k_eval, cfg.eval_tasks, eval_stream(cfg.seed, eval_index++),
                                           cfg.exec);
        rec.eval_loss = ev.mean;
        rec.eval_loss_stderr = ev.std_error;
      }
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      if (hooks.on_log) hooks.on_log(rec, params);
      result.records.push_back(std::move(rec));
    }
    if (last) break;

    const std::vector<double> grad = gather_grad(est.g_v.mean, est.g_w.mean, cfg.d, cfg.mode);
    std::vector<double> next = flat;
    if (cfg.optimizer == OptimizerKind::adam) {
      adam.step(next, grad);
    } else {
      for (std::size_t i = 0; i < next.size(); ++i) next[i] -= cfg.h * grad[i];
    }
    if (!std::all_of(next.begin(), next.end(), [](double x) { return std::isfinite(x); })) {
      if (hooks.on_diverged) hooks.on_diverged(params, t);
      throw Diverged("training produced non-finite parameters at step " + std::to_string(t + 1),
                     static_cast<long>(t));
    }
    flat = std::move(next);
    scatter(params, cfg.mode, flat);
  }
  return result;
}

}  // namespace cotlsa
