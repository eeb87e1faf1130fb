#include "medchain/stats.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>
#include <numeric>

namespace medchain::stats {

double rnorm(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

double rnorm(Rng& rng, double mean, double sd) { return mean + sd * rnorm(rng); }

double runif(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

double rgamma(Rng& rng, double shape, double rate) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

double rinvgamma(Rng& rng, double shape, double scale) { return scale / rgamma(rng, shape, 1.0); }

double rbeta(Rng& rng, double a, double b) {
  const double x = rgamma(rng, a, 1.0);
  const double y = rgamma(rng, b, 1.0);
  return x / (x + y);
}

long rpoisson(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  return std::poisson_distribution<long>(mean)(rng);
}

bool rbernoulli(Rng& rng, double p) { return runif(rng) < p; }

double rskewnormal(Rng& rng, double location, double scale, double shape) {
  const double delta = shape / std::sqrt(1.0 + shape * shape);
  const double u0 = std::fabs(rnorm(rng));
  const double u1 = rnorm(rng);
  return location + scale * (delta * u0 + std::sqrt(1.0 - delta * delta) * u1);
}

double skewnormal_mean_shift(double scale, double shape) {
  const double delta = shape / std::sqrt(1.0 + shape * shape);
  return scale * delta * std::sqrt(2.0 / std::numbers::pi);
}

arma::vec rmvnorm_chol(Rng& rng, const arma::vec& mean, const arma::mat& lower) {
  arma::vec z(mean.n_elem);
  for (auto& v : z) v = rnorm(rng);
  return mean + lower * z;
}

std::size_t sample_log_weights(Rng& rng, std::vector<double>& log_weights) {
  const double top = *std::max_element(log_weights.begin(), log_weights.end());
  double total = 0.0;
  for (auto& w : log_weights) {
    w = std::exp(w - top);
    total += w;
  }
  double u = runif(rng) * total;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    u -= log_weights[k];
    if (u <= 0.0) return k;
  }
  return log_weights.size() - 1;
}

std::size_t sample_weights(Rng& rng, std::span<const double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = runif(rng) * total;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    u -= weights[k];
    if (u <= 0.0) return k;
  }
  return weights.size() - 1;
}

double log_poisson_pmf(double y, double mean) {
  if (mean <= 0.0) return y == 0.0 ? 0.0 : -INFINITY;
  return y * std::log(mean) - mean - std::lgamma(y + 1.0);
}

double log_normal_pdf(double y, double mean, double variance) {
  const double r = y - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + r * r / variance);
}

double log_student_t_pdf(double y, double dof, double location, double scale2) {
  const double r = (y - location);
  return std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
         0.5 * std::log(dof * std::numbers::pi * scale2) -
         0.5 * (dof + 1.0) * std::log1p(r * r / (dof * scale2));
}

double poisson_cdf(double k, double mean) {
  if (k < 0.0) return 0.0;
  if (mean <= 0.0) return 1.0;
  return boost::math::gamma_q(std::floor(k) + 1.0, mean);
}

double poisson_sf(double k, double mean) {
  if (k < 0.0) return 1.0;
  if (mean <= 0.0) return 0.0;
  return boost::math::gamma_p(std::floor(k) + 1.0, mean);
}

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double sd(std::span<const double> x) { return std::sqrt(variance(x)); }

double quantile(std::vector<double> x, double p) {
  if (x.empty()) return 0.0;
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

double median(std::vector<double> x) { return quantile(std::move(x), 0.5); }

double batch_means_se(std::span<const double> chain) {
  const std::size_t n = chain.size();
  if (n < 4) return std::sqrt(variance(chain) / std::max<std::size_t>(n, 1));
  const auto batches = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const std::size_t size = n / batches;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) means[b] = mean(chain.subspan(b * size, size));
  // Var(batch mean) * size estimates the long-run variance.
  const double sigma2 = variance(means) * static_cast<double>(size);
  const double iid = variance(chain);
  return std::sqrt(std::max(sigma2, iid) / static_cast<double>(n));
}

double effective_sample_size(std::span<const double> weights) {
  double s = 0.0, s2 = 0.0;
  for (double w : weights) {
    s += w;
    s2 += w * w;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

void row_moments(const arma::mat& x, arma::vec& mean_out, arma::mat& cov_out) {
  mean_out = arma::mean(x, 0).t();
  if (x.n_rows < 2) {
    cov_out.zeros(x.n_cols, x.n_cols);
    return;
  }
  const arma::mat centered = x.each_row() - mean_out.t();
  cov_out = centered.t() * centered / static_cast<double>(x.n_rows - 1);
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace medchain::stats
