#include "cotlsa/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "cotlsa/errors.hpp"

namespace cotlsa {

namespace {

void check_batch(const McConfig& cfg) {
  if (cfg.batch < 2) throw Error("Monte-Carlo batch must be at least 2");
  if (cfg.antithetic && cfg.batch % 2 != 0) throw Error("antithetic batch must be even");
}

// Walks the k+1 teacher-forced steps in Gram form. step(i, z, out, target, gram)
// is called once per step before the next ground-truth token is appended.
template <class Step>
void walk_steps(const TaskInstance& task, const LsaParams& params, std::size_t k, double eta, Step&& step) {
  if (task.d() != params.d) throw DimensionMismatch("task dimension differs from model dimension");
  const GdIterates gd = gd_iterates(task, eta, k);
  Matrix gram = data_gram(task);
  Vector z = weight_token(gd.iters[0]);
  add_outer(gram, z);
  for (std::size_t i = 0; i <= k; ++i) {
    const Vector out = forward_from_gram(params, gram, z, task.n());
    const Vector target = target_token(gd, i, task.w_star);
    step(i, z, out, target, gram);
    if (i < k) {
      z = weight_token(gd.iters[i + 1]);
      add_outer(gram, z);
    }
  }
}

double half_sq_diff(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = a[i] - b[i];
    acc += e * e;
  }
  return 0.5 * acc;
}

struct FullAcc {
  ScalarMoments loss;
  MatrixMoments g_v;
  MatrixMoments g_w;

  FullAcc& operator+=(const FullAcc& o) {
    loss += o.loss;
    g_v += o.g_v;
    g_w += o.g_w;
    return *this;
  }
};

struct ReducedAcc {
  ScalarMoments loss;
  MatrixMoments g_v31;
  MatrixMoments g_w13;
  ScalarMoments g_w24;

  ReducedAcc& operator+=(const ReducedAcc& o) {
    loss += o.loss;
    g_v31 += o.g_v31;
    g_w13 += o.g_w13;
    g_w24 += o.g_w24;
    return *this;
  }
};

std::size_t sample_count(const McConfig& cfg) { return cfg.antithetic ? cfg.batch / 2 : cfg.batch; }

// Calls visit(task) for the one or two tasks that make up MC sample i.
template <class Visit>
void visit_sample(const McConfig& cfg, const RngStream& rng, std::size_t i, Visit&& visit) {
  RngStream local = rng.split(i);
  const TaskInstance task = sample_task(local, cfg.d, cfg.n);
  visit(task);
  if (cfg.antithetic) visit(antithetic_partner(task));
}

}  // namespace

LossReport cot_loss_sample(const TaskInstance& task, const LsaParams& params, std::size_t k, double eta) {
  LossReport rep;
  rep.per_step.reserve(k + 1);
  walk_steps(task, params, k, eta, [&](std::size_t, const Vector&, const Vector& out, const Vector& target, const Matrix&) {
    rep.per_step.push_back(half_sq_diff(out, target));
  });
  for (double l : rep.per_step) rep.total += l;
  return rep;
}

GradPair grad_full_sample(const TaskInstance& task, const LsaParams& params, std::size_t k, double eta,
                          LossReport* loss) {
  const std::size_t de = params.d_e();
  const double inv_n = 1.0 / static_cast<double>(task.n());
  GradPair g{Matrix(de, de), Matrix(de, de)};
  if (loss) *loss = LossReport{};
  walk_steps(task, params, k, eta, [&](std::size_t, const Vector& z, const Vector& out, const Vector& target,
                                       const Matrix& gram) {
    Vector r = vsub(out, target);
    if (loss) {
      const double l = 0.5 * dot(r, r);
      loss->per_step.push_back(l);
      loss->total += l;
    }
    // ∂/∂V: r (G W z)ᵀ / n.  ∂/∂W: G Vᵀ r zᵀ / n.
    Vector a = matvec(gram, matvec(params.w, z));
    Vector b = matvec(gram, matvec_transposed(params.v, r));
    for (std::size_t p = 0; p < de; ++p) {
      const double rp = r[p] * inv_n;
      const double bp = b[p] * inv_n;
      auto gv = g.g_v.row(p);
      auto gw = g.g_w.row(p);
      for (std::size_t q = 0; q < de; ++q) {
        gv[q] += rp * a[q];
        gw[q] += bp * z[q];
      }
    }
  });
  return g;
}

LossReport reduced_loss_sample(const TaskInstance& task, const ReducedParams& rp, std::size_t k, double eta) {
  const GdIterates gd = gd_iterates(task, eta, k);
  LossReport rep;
  for (std::size_t i = 0; i <= k; ++i) {
    const Vector f = reduced_forward(gd.iters[i], task, rp);
    const Vector& next = i < k ? gd.iters[i + 1] : task.w_star;
    rep.per_step.push_back(half_sq_diff(f, next));
    rep.total += rep.per_step.back();
  }
  return rep;
}

ReducedGrad grad_reduced_sample(const TaskInstance& task, const ReducedParams& rp, std::size_t k, double eta,
                                bool train_w24, LossReport* loss) {
  const std::size_t d = task.d();
  const GdIterates gd = gd_iterates(task, eta, k);
  ReducedGrad g{Matrix(d, d), Matrix(d, d), 0.0};
  if (loss) *loss = LossReport{};
  const Vector s_wstar = matvec(task.s, task.w_star);
  for (std::size_t i = 0; i <= k; ++i) {
    const Vector& w = gd.iters[i];
    Vector q = matvec(rp.w13, w);
    for (std::size_t j = 0; j < d; ++j) q[j] += rp.w24 * task.w_star[j];
    const Vector sq = matvec(task.s, q);
    const Vector step = matvec(rp.v31, sq);
    const Vector& next = i < k ? gd.iters[i + 1] : task.w_star;
    Vector r(d);
    for (std::size_t j = 0; j < d; ++j) r[j] = w[j] + step[j] - next[j];
    if (loss) {
      const double l = 0.5 * dot(r, r);
      loss->per_step.push_back(l);
      loss->total += l;
    }
    // ∂/∂Ṽ: r (S q)ᵀ.  ∂/∂W̃: S Ṽᵀ r wᵀ.  ∂/∂w24: rᵀ Ṽ S w*.
    const Vector u = matvec(task.s, matvec_transposed(rp.v31, r));
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t c = 0; c < d; ++c) {
        g.g_v31(p, c) += r[p] * sq[c];
        g.g_w13(p, c) += u[p] * w[c];
      }
    if (train_w24) g.g_w24 += dot(r, matvec(rp.v31, s_wstar));
  }
  return g;
}

McEstimate cot_loss_mc(const LsaParams& params, const McConfig& cfg, const RngStream& rng, Execution exec) {
  check_batch(cfg);
  const auto m = chunked_reduce(
      sample_count(cfg), ScalarMoments{},
      [&](std::size_t i, ScalarMoments& acc) {
        double sum = 0.0;
        int count = 0;
        visit_sample(cfg, rng, i, [&](const TaskInstance& t) {
          sum += cot_loss_sample(t, params, cfg.k, cfg.eta).total;
          ++count;
        });
        acc.add(sum / count);
      },
      exec);
  return m.estimate();
}

GradEstimate grad_mc(const LsaParams& params, const McConfig& cfg, const RngStream& rng, Execution exec) {
  check_batch(cfg);
  const std::size_t de = params.d_e();
  FullAcc zero{ScalarMoments{}, MatrixMoments(de, de), MatrixMoments(de, de)};
  const auto acc = chunked_reduce(
      sample_count(cfg), zero,
      [&](std::size_t i, FullAcc& a) {
        GradPair sum{Matrix(de, de), Matrix(de, de)};
        double loss_sum = 0.0;
        double count = 0.0;
        visit_sample(cfg, rng, i, [&](const TaskInstance& t) {
          LossReport rep;
          const GradPair g = grad_full_sample(t, params, cfg.k, cfg.eta, &rep);
          sum.g_v += g.g_v;
          sum.g_w += g.g_w;
          loss_sum += rep.total;
          count += 1.0;
        });
        if (count > 1.0) {
          sum.g_v *= 1.0 / count;
          sum.g_w *= 1.0 / count;
        }
        a.loss.add(loss_sum / count);
        a.g_v.add(sum.g_v);
        a.g_w.add(sum.g_w);
      },
      exec);
  return GradEstimate{acc.loss.estimate(), acc.g_v.estimate(), acc.g_w.estimate()};
}

ReducedGradEstimate grad_reduced_mc(const ReducedParams& rp, const McConfig& cfg, bool train_w24,
                                    const RngStream& rng, Execution exec) {
  check_batch(cfg);
  const std::size_t d = rp.d();
  ReducedAcc zero{ScalarMoments{}, MatrixMoments(d, d), MatrixMoments(d, d), ScalarMoments{}};
  const auto acc = chunked_reduce(
      sample_count(cfg), zero,
      [&](std::size_t i, ReducedAcc& a) {
        ReducedGrad sum{Matrix(d, d), Matrix(d, d), 0.0};
        double loss_sum = 0.0;
        double count = 0.0;
        visit_sample(cfg, rng, i, [&](const TaskInstance& t) {
          LossReport rep;
          const ReducedGrad g = grad_reduced_sample(t, rp, cfg.k, cfg.eta, train_w24, &rep);
          sum.g_v31 += g.g_v31;
          sum.g_w13 += g.g_w13;
          sum.g_w24 += g.g_w24;
          loss_sum += rep.total;
          count += 1.0;
        });
        if (count > 1.0) {
          sum.g_v31 *= 1.0 / count;
          sum.g_w13 *= 1.0 / count;
          sum.g_w24 /= count;
        }
        a.loss.add(loss_sum / count);
        a.g_v31.add(sum.g_v31);
        a.g_w13.add(sum.g_w13);
        a.g_w24.add(sum.g_w24);
      },
      exec);
  return ReducedGradEstimate{acc.loss.estimate(), acc.g_v31.estimate(), acc.g_w13.estimate(),
                             acc.g_w24.estimate()};
}

double fd_step(double theta) { return 1e-6 * std::max(1.0, std::abs(theta)); }

Matrix fd_gradient(const std::function<double(const Matrix&)>& f, const Matrix& at) {
  Matrix g(at.rows(), at.cols());
  Matrix probe = at;
  auto p = probe.data();
  auto out = g.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    const double h = fd_step(orig);
    p[i] = orig + h;
    const double up = f(probe);
    p[i] = orig - h;
    const double down = f(probe);
    p[i] = orig;
    out[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double fd_derivative(const std::function<double(double)>& f, double at) {
  const double h = fd_step(at);
  return (f(at + h) - f(at - h)) / (2.0 * h);
}

}  // namespace cotlsa
