#include "cotlsa/reference.hpp"

#include "cotlsa/errors.hpp"

namespace cotlsa::reference {

Vector forward_last_token(const PromptSequence& z, const LsaParams& params) {
  const Matrix& zm = z.tokens;
  const Vector last = z.last_token();
  const Matrix vz = matmul(params.v, zm);
  const Vector ztwz = matvec_transposed(zm, matvec(params.w, last));
  Vector out = matvec(vz, ztwz);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = last[i] + out[i] / static_cast<double>(z.n);
  return out;
}

GradPair grad_full_sample(const TaskInstance& task, const LsaParams& params, std::size_t k, double eta,
                          LossReport* loss) {
  const std::size_t de = params.d_e();
  const double n = static_cast<double>(task.n());
  const GdIterates gd = gd_iterates(task, eta, k);
  GradPair g{Matrix(de, de), Matrix(de, de)};
  if (loss) *loss = LossReport{};
  for (std::size_t i = 0; i <= k; ++i) {
    const PromptSequence z = build_prompt(task, gd, i);
    const Vector last = z.last_token();
    const Vector f = reference::forward_last_token(z, params);
    const Vector r = vsub(f, target_token(gd, i, task.w_star));
    if (loss) {
      loss->per_step.push_back(0.5 * dot(r, r));
      loss->total += loss->per_step.back();
    }
    const Matrix zzt = matmul(z.tokens, transpose(z.tokens));
    // (f − t) zᵀ Wᵀ Z Zᵀ / n
    const Matrix gv = matmul(matmul(outer(r, last), transpose(params.w)), zzt);
    // Z Zᵀ Vᵀ (f − t) zᵀ / n
    const Matrix gw = matmul(matmul(zzt, transpose(params.v)), outer(r, last));
    g.g_v += scale(gv, 1.0 / n);
    g.g_w += scale(gw, 1.0 / n);
  }
  return g;
}

GradEstimate grad_mc(const LsaParams& params, const McConfig& cfg, const RngStream& rng) {
  if (cfg.batch < 2) throw Error("Monte-Carlo batch must be at least 2");
  const std::size_t de = params.d_e();
  const std::size_t samples = cfg.antithetic ? cfg.batch / 2 : cfg.batch;
  ScalarMoments loss;
  MatrixMoments gv(de, de);
  MatrixMoments gw(de, de);
  for (std::size_t i = 0; i < samples; ++i) {
    RngStream local = rng.split(i);
    const TaskInstance task = sample_task(local, cfg.d, cfg.n);
    LossReport rep;
    GradPair g = reference::grad_full_sample(task, params, cfg.k, cfg.eta, &rep);
    double total = rep.total;
    if (cfg.antithetic) {
      const GradPair h = reference::grad_full_sample(antithetic_partner(task), params, cfg.k, cfg.eta, &rep);
      g.g_v += h.g_v;
      g.g_w += h.g_w;
      g.g_v *= 0.5;
      g.g_w *= 0.5;
      total = 0.5 * (total + rep.total);
    }
    loss.add(total);
    gv.add(g.g_v);
    gw.add(g.g_w);
  }
  return GradEstimate{loss.estimate(), gv.estimate(), gw.estimate()};
}

}  // namespace cotlsa::reference
