#include "cotlsa/task_data.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cotlsa/diagnostics.hpp"
#include "cotlsa/errors.hpp"

namespace cotlsa {

TaskInstance make_task(Matrix x, Vector w_star) {
  if (x.rows() != w_star.size()) throw DimensionMismatch("make_task: x rows must equal len(w_star)");
  const std::size_t d = x.rows();
  const std::size_t n = x.cols();
  TaskInstance t;
  t.y = matvec_transposed(x, w_star);
  t.s = Matrix(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < n; ++c) acc += x(i, c) * x(j, c);
      acc /= static_cast<double>(n);
      t.s(i, j) = acc;
      t.s(j, i) = acc;
    }
  }
  t.x = std::move(x);
  t.w_star = std::move(w_star);
  return t;
}

TaskInstance sample_task(RngStream& rng, std::size_t d, std::size_t n) {
  if (d == 0 || n == 0) throw DimensionMismatch("sample_task: d and n must be >= 1");
  Matrix x(d, n);
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t i = 0; i < d; ++i) x(i, c) = rng.normal();
  Vector w(d);
  for (auto& v : w) v = rng.normal();
  return make_task(std::move(x), std::move(w));
}

TaskInstance sample_task_cov(RngStream& rng, std::size_t d, std::size_t n, const Matrix& cov) {
  if (cov.rows() != d || cov.cols() != d) throw DimensionMismatch("sample_task_cov: cov must be d×d");
  Matrix x = gaussian_with_cov(rng, cov, n);
  Vector w(d);
  for (auto& v : w) v = rng.normal();
  return make_task(std::move(x), std::move(w));
}

TaskInstance antithetic_partner(const TaskInstance& task) {
  TaskInstance t = task;
  for (auto& v : t.w_star) v = -v;
  for (auto& v : t.y) v = -v;
  return t;
}

Matrix sample_wishart_s(RngStream& rng, std::size_t d, std::size_t n) {
  if (n < d) return sample_task(rng, d, n).s;
  Matrix l(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    l(i, i) = std::sqrt(rng.chi_square(static_cast<double>(n - i)));
    for (std::size_t j = 0; j < i; ++j) l(i, j) = rng.normal();
  }
  Matrix s(d, d);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p <= j; ++p) acc += l(i, p) * l(j, p);
      s(i, j) = acc * inv_n;
      s(j, i) = acc * inv_n;
    }
  }
  return s;
}

Matrix sample_ood_covariance(RngStream& rng, std::size_t d, double eta, double delta) {
  if (delta < 0.1) warn("OOD window delta=" + std::to_string(delta) + " is below 0.1");
  if (!(delta > 0.0 && delta < 1.0)) throw Error("sample_ood_covariance: delta must lie in (0, 1)");
  const Matrix u = random_orthogonal(rng, d);
  const double lo = delta / eta;
  const double hi = (2.0 - delta) / eta;
  Vector lambda(d);
  for (auto& v : lambda) v = lo + (hi - lo) * rng.uniform();
  Matrix cov(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < d; ++p) acc += u(i, p) * lambda[p] * u(j, p);
      cov(i, j) = acc;
    }
  return symmetrize(cov);
}

void check_eta(double eta) {
  if (!(eta > 0.1 && eta < 0.9)) {
    warn("eta=" + std::to_string(eta) + " lies outside the analysed interval (0.1, 0.9)");
  }
}

GdIterates gd_iterates(const TaskInstance& task, double eta, std::size_t k) {
  if (!(eta > 0.0)) throw Error("gd_iterates: eta must be positive");
  const std::size_t d = task.d();
  const std::size_t n = task.n();
  GdIterates out;
  out.eta = eta;
  out.iters.reserve(k + 2);
  out.iters.emplace_back(d, 0.0);
  Vector residual(n);
  for (std::size_t step = 1; step <= k + 1; ++step) {
    const Vector& prev = out.iters.back();
    for (std::size_t c = 0; c < n; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += task.x(i, c) * prev[i];
      residual[c] = acc - task.y[c];
    }
    Vector next = prev;
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t c = 0; c < n; ++c) acc += task.x(i, c) * residual[c];
      next[i] -= eta * acc / static_cast<double>(n);
    }
    out.iters.push_back(std::move(next));
  }
  return out;
}

Vector gd_closed_form(const TaskInstance& task, double eta, std::size_t i) {
  const std::size_t d = task.d();
  Matrix contraction = Matrix::identity(d);
  contraction -= scale(task.s, eta);
  const Matrix power = matpow(contraction, static_cast<unsigned>(i));
  const Vector decayed = matvec(power, task.w_star);
  return vsub(task.w_star, decayed);
}

Vector weight_token(std::span<const double> w) {
  const std::size_t d = w.size();
  Vector z(2 * d + 2, 0.0);
  for (std::size_t i = 0; i < d; ++i) z[d + 1 + i] = w[i];
  z[2 * d + 1] = 1.0;
  return z;
}

Vector weight_slice(std::span<const double> token, std::size_t d) {
  if (token.size() != 2 * d + 2) throw DimensionMismatch("weight_slice: token length is not 2d+2");
  return Vector(token.begin() + static_cast<long>(d + 1), token.begin() + static_cast<long>(2 * d + 1));
}

PromptSequence build_prompt(const TaskInstance& task, const GdIterates& iterates, std::size_t i) {
  if (i > iterates.k()) throw StepOutOfRange("build_prompt: step index exceeds k");
  const std::size_t d = task.d();
  const std::size_t n = task.n();
  PromptSequence p;
  p.d = d;
  p.n = n;
  p.step_index = i;
  p.tokens = Matrix(2 * d + 2, n + i + 1);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t r = 0; r < d; ++r) p.tokens(r, c) = task.x(r, c);
    p.tokens(d, c) = task.y[c];
  }
  for (std::size_t m = 0; m <= i; ++m) {
    const auto& w = iterates.iters[m];
    for (std::size_t r = 0; r < d; ++r) p.tokens(d + 1 + r, n + m) = w[r];
    p.tokens(2 * d + 1, n + m) = 1.0;
  }
  return p;
}

Vector target_token(const GdIterates& iterates, std::size_t i, std::span<const double> final_w) {
  const std::size_t k = iterates.k();
  if (i > k) throw StepOutOfRange("target_token: step index exceeds k");
  return i < k ? weight_token(iterates.iters[i + 1]) : weight_token(final_w);
}

std::string task_to_json_line(const TaskInstance& task, std::uint64_t seed) {
  nlohmann::json j;
  j["d"] = task.d();
  j["n"] = task.n();
  j["seed"] = seed;
  j["w_star"] = task.w_star;
  std::vector<double> x;
  x.reserve(task.d() * task.n());
  for (std::size_t c = 0; c < task.n(); ++c)
    for (std::size_t r = 0; r < task.d(); ++r) x.push_back(task.x(r, c));
  j["x"] = x;
  j["y"] = task.y;
  return j.dump();
}

TaskInstance task_from_json_line(std::string_view line, std::uint64_t* seed) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("task dump: ") + e.what());
  }
  const auto d = j.at("d").get<std::size_t>();
  const auto n = j.at("n").get<std::size_t>();
  const auto xs = j.at("x").get<std::vector<double>>();
  if (xs.size() != d * n) throw DimensionMismatch("task dump: x has wrong length");
  Matrix x(d, n);
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t r = 0; r < d; ++r) x(r, c) = xs[c * d + r];
  auto task = make_task(std::move(x), j.at("w_star").get<Vector>());
  if (seed) *seed = j.value("seed", std::uint64_t{0});
  return task;
}

void write_task_dump(std::ostream& out, std::span<const TaskInstance> tasks,
                     std::span<const std::uint64_t> seeds) {
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    out << task_to_json_line(tasks[i], i < seeds.size() ? seeds[i] : 0) << '\n';
  }
}

std::vector<TaskInstance> read_task_dump(std::istream& in, std::vector<std::uint64_t>* seeds) {
  std::vector<TaskInstance> tasks;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::uint64_t seed = 0;
    tasks.push_back(task_from_json_line(line, &seed));
    if (seeds) seeds->push_back(seed);
  }
  return tasks;
}

}  // namespace cotlsa
