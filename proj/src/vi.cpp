#include "bpmf/vi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "bpmf/errors.hpp"

namespace bpmf {

namespace {

void check_shapes(const VariationalParams& params, const RatingDataset& data) {
  if (params.n_users() != data.n_users() || params.n_items() != data.n_items() ||
      !params.mu_u.same_shape(params.log_s_u) || !params.mu_v.same_shape(params.log_s_v) ||
      params.mu_u.cols() != params.mu_v.cols()) {
    throw StructuralError("variational parameters do not match a " +
                          std::to_string(data.n_users()) + "x" + std::to_string(data.n_items()) +
                          " rating matrix");
  }
}

void check_noise(const VariationalParams& params, const ReparamNoise& noise) {
  if (noise.eps_u.size() != noise.eps_v.size()) throw StructuralError("unpaired noise draws");
  for (std::size_t s = 0; s < noise.samples(); ++s) {
    if (!noise.eps_u[s].same_shape(params.mu_u) || !noise.eps_v[s].same_shape(params.mu_v)) {
      throw StructuralError("noise shape does not match the variational parameters");
    }
  }
}

// out = mu + exp(log_s) * eps
void reparameterize(Matrix& out, const Matrix& mu, const Matrix& log_s, const Matrix& eps) {
  const auto m = mu.values();
  const auto ls = log_s.values();
  const auto e = eps.values();
  auto o = out.values();
  for (std::size_t n = 0; n < o.size(); ++n) o[n] = m[n] + std::exp(ls[n]) * e[n];
}

double kl_sum(const Matrix& mu, const Matrix& log_s) noexcept {
  double kl = 0.0;
  const auto m = mu.values();
  const auto ls = log_s.values();
  for (std::size_t n = 0; n < m.size(); ++n) kl += kl_gaussian_vs_standard(m[n], ls[n]);
  return kl;
}

// d(-KL)/d mu = -mu, d(-KL)/d log_s = 1 - s^2
void add_neg_kl_gradient(Matrix& g_mu, Matrix& g_log_s, const Matrix& mu, const Matrix& log_s) {
  const auto m = mu.values();
  const auto ls = log_s.values();
  auto gm = g_mu.values();
  auto gs = g_log_s.values();
  for (std::size_t n = 0; n < m.size(); ++n) {
    gm[n] -= m[n];
    gs[n] += 1.0 - std::exp(2.0 * ls[n]);
  }
}

}  // namespace

VariationalParams VariationalParams::zeros(std::size_t n_users, std::size_t n_items,
                                           std::size_t k) {
  return {Matrix(n_users, k), Matrix(n_users, k), Matrix(n_items, k), Matrix(n_items, k)};
}

bool VariationalParams::all_finite() const noexcept {
  for (const Matrix* m : {&mu_u, &log_s_u, &mu_v, &log_s_v})
    for (double x : m->values())
      if (!std::isfinite(x)) return false;
  return true;
}

void ViConfig::validate() const {
  if (k < 1) throw UsageError("vi: k must be >= 1");
  if (!(learning_rate > 0.0)) throw UsageError("vi: learning_rate must be > 0");
  if (mc_samples < 1) throw UsageError("vi: mc_samples must be >= 1");
  if (!(init_mu_scale >= 0.0)) throw UsageError("vi: init_mu_scale must be >= 0");
  if (!std::isfinite(init_log_s)) throw UsageError("vi: init_log_s must be finite");
}

double kl_gaussian_vs_standard(double mu, double log_s) noexcept {
  return 0.5 * (std::exp(2.0 * log_s) + mu * mu - 1.0 - 2.0 * log_s);
}

double total_kl(const VariationalParams& params) noexcept {
  return kl_sum(params.mu_u, params.log_s_u) + kl_sum(params.mu_v, params.log_s_v);
}

ReparamNoise draw_noise(std::size_t n_users, std::size_t n_items, std::size_t k,
                        std::size_t samples, Rng& rng) {
  ReparamNoise noise;
  noise.eps_u.reserve(samples);
  noise.eps_v.reserve(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    noise.eps_u.emplace_back(n_users, k);
    noise.eps_v.emplace_back(n_items, k);
    fill_normal(noise.eps_u.back().values(), 1.0, rng);
    fill_normal(noise.eps_v.back().values(), 1.0, rng);
  }
  return noise;
}

double elbo_estimate(const VariationalParams& params, const RatingDataset& data,
                     const ModelHyperparams& hp, const ReparamNoise& noise) {
  check_shapes(params, data);
  check_noise(params, noise);
  const double neg_kl = -total_kl(params);
  if (data.empty() || noise.samples() == 0) return neg_kl;

  Matrix u(params.n_users(), params.k());
  Matrix v(params.n_items(), params.k());
  double loglik = 0.0;
  for (std::size_t s = 0; s < noise.samples(); ++s) {
    reparameterize(u, params.mu_u, params.log_s_u, noise.eps_u[s]);
    reparameterize(v, params.mu_v, params.log_s_v, noise.eps_v[s]);
    for (const Rating& t : data.triples()) {
      loglik += log_likelihood_entry(u.row(t.user), v.row(t.item), t.value, hp.sigma2);
    }
  }
  return loglik / static_cast<double>(noise.samples()) + neg_kl;
}

double elbo_estimate(const VariationalParams& params, const RatingDataset& data,
                     const ModelHyperparams& hp, std::size_t mc_samples, Rng& rng) {
  return elbo_estimate(params, data, hp,
                       draw_noise(params.n_users(), params.n_items(), params.k(), mc_samples, rng));
}

ViGradient elbo_gradient(const VariationalParams& params, const RatingDataset& data,
                         const ModelHyperparams& hp, const ReparamNoise& noise) {
  check_shapes(params, data);
  check_noise(params, noise);
  const std::size_t k = params.k();
  ViGradient grad = VariationalParams::zeros(params.n_users(), params.n_items(), k);

  if (!data.empty() && noise.samples() > 0) {
    const double weight = 1.0 / static_cast<double>(noise.samples());
    Matrix u(params.n_users(), k);
    Matrix v(params.n_items(), k);
    Matrix gu(params.n_users(), k);
    Matrix gv(params.n_items(), k);
    for (std::size_t s = 0; s < noise.samples(); ++s) {
      reparameterize(u, params.mu_u, params.log_s_u, noise.eps_u[s]);
      reparameterize(v, params.mu_v, params.log_s_v, noise.eps_v[s]);
      std::fill(gu.values().begin(), gu.values().end(), 0.0);
      std::fill(gv.values().begin(), gv.values().end(), 0.0);

      // dl/dx for x = u_i . v_j, then chain into both rows.
      for (const Rating& t : data.triples()) {
        const auto ui = u.row(t.user);
        const auto vj = v.row(t.item);
        const double p = sigmoid(dot(ui, vj));
        const double dx = (t.value - p) * p * (1.0 - p) / hp.sigma2;
        auto gui = gu.row(t.user);
        auto gvj = gv.row(t.item);
        for (std::size_t c = 0; c < k; ++c) {
          gui[c] += dx * vj[c];
          gvj[c] += dx * ui[c];
        }
      }

      // d/d mu = dl/du, d/d log_s = dl/du * s * eps
      const auto accumulate = [weight](Matrix& g_mu, Matrix& g_log_s, const Matrix& g,
                                       const Matrix& log_s, const Matrix& eps) {
        const auto gl = g.values();
        const auto ls = log_s.values();
        const auto e = eps.values();
        auto gm = g_mu.values();
        auto gs = g_log_s.values();
        for (std::size_t n = 0; n < gl.size(); ++n) {
          gm[n] += weight * gl[n];
          gs[n] += weight * gl[n] * std::exp(ls[n]) * e[n];
        }
      };
      accumulate(grad.mu_u, grad.log_s_u, gu, params.log_s_u, noise.eps_u[s]);
      accumulate(grad.mu_v, grad.log_s_v, gv, params.log_s_v, noise.eps_v[s]);
    }
  }

  add_neg_kl_gradient(grad.mu_u, grad.log_s_u, params.mu_u, params.log_s_u);
  add_neg_kl_gradient(grad.mu_v, grad.log_s_v, params.mu_v, params.log_s_v);
  return grad;
}

ViGradient elbo_gradient(const VariationalParams& params, const RatingDataset& data,
                         const ModelHyperparams& hp, std::size_t mc_samples, Rng& rng) {
  return elbo_gradient(params, data, hp,
                       draw_noise(params.n_users(), params.n_items(), params.k(), mc_samples, rng));
}

ViResult vi_train(const RatingDataset& data, const ModelHyperparams& hp, const ViConfig& cfg) {
  cfg.validate();
  hp.validate();
  if (cfg.k != hp.k) throw StructuralError("vi: config k differs from model k");

  Rng rng(cfg.seed);
  ViResult result{VariationalParams::zeros(data.n_users(), data.n_items(), cfg.k), {}};
  VariationalParams& params = result.params;
  fill_normal(params.mu_u.values(), cfg.init_mu_scale, rng);
  fill_normal(params.mu_v.values(), cfg.init_mu_scale, rng);
  for (Matrix* m : {&params.log_s_u, &params.log_s_v}) {
    std::fill(m->values().begin(), m->values().end(), cfg.init_log_s);
  }

  // The trace is evaluated on one fixed noise draw so that successive entries
  // differ only through the parameters; gradients use fresh noise each epoch.
  const ReparamNoise trace_noise =
      draw_noise(data.n_users(), data.n_items(), cfg.k, cfg.mc_samples, rng);

  result.elbo_trace.reserve(cfg.epochs);
  const auto step = [&](Matrix& p, const Matrix& g) {
    auto pv = p.values();
    const auto gv = g.values();
    for (std::size_t n = 0; n < pv.size(); ++n) pv[n] += cfg.learning_rate * gv[n];
  };
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const ViGradient grad = elbo_gradient(params, data, hp, cfg.mc_samples, rng);
    step(params.mu_u, grad.mu_u);
    step(params.log_s_u, grad.log_s_u);
    step(params.mu_v, grad.mu_v);
    step(params.log_s_v, grad.log_s_v);
    if (!params.all_finite()) throw DivergenceError(epoch, "variational parameters non-finite");

    const double elbo = elbo_estimate(params, data, hp, trace_noise);
    if (!std::isfinite(elbo)) throw DivergenceError(epoch, "ELBO estimate non-finite");
    result.elbo_trace.push_back(elbo);
  }
  return result;
}

double vi_predict(const VariationalParams& params, std::size_t user, std::size_t item,
                  const RatingScale& scale, std::size_t mc_samples, Rng& rng) {
  if (user >= params.n_users() || item >= params.n_items()) {
    throw UsageError("vi_predict: index out of range");
  }
  const auto mu_u = params.mu_u.row(user);
  const auto mu_v = params.mu_v.row(item);
  if (mc_samples == 0) return predict_point(mu_u, mu_v, scale);

  const auto ls_u = params.log_s_u.row(user);
  const auto ls_v = params.log_s_v.row(item);
  const std::size_t k = params.k();
  std::vector<double> u(k);
  std::vector<double> v(k);
  std::normal_distribution<double> normal(0.0, 1.0);
  double sum = 0.0;
  for (std::size_t s = 0; s < mc_samples; ++s) {
    for (std::size_t c = 0; c < k; ++c) u[c] = mu_u[c] + std::exp(ls_u[c]) * normal(rng);
    for (std::size_t c = 0; c < k; ++c) v[c] = mu_v[c] + std::exp(ls_v[c]) * normal(rng);
    sum += sigmoid(dot(u, v));
  }
  return denormalize_rating(sum / static_cast<double>(mc_samples), scale);
}

void write_elbo_csv(std::ostream& out, std::span<const double> elbo_trace) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << "epoch,elbo\n";
  for (std::size_t e = 0; e < elbo_trace.size(); ++e) out << e << ',' << elbo_trace[e] << '\n';
  out.precision(old_precision);
}

}  // namespace bpmf
