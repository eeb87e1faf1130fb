#ifndef MEDCHAIN_STATS_HPP
#define MEDCHAIN_STATS_HPP

#include <armadillo>
#include <span>
#include <vector>

#include "medchain/common.hpp"

namespace medchain::stats {

double rnorm(Rng& rng);
double rnorm(Rng& rng, double mean, double sd);
double runif(Rng& rng);
/// Gamma with shape/rate parameterization.
double rgamma(Rng& rng, double shape, double rate);
/// Inverse gamma with shape/scale parameterization (mean scale/(shape-1)).
double rinvgamma(Rng& rng, double shape, double scale);
double rbeta(Rng& rng, double a, double b);
long rpoisson(Rng& rng, double mean);
bool rbernoulli(Rng& rng, double p);

/// Skew normal SN(location, scale, shape) via
/// location + scale * (delta*|U0| + sqrt(1-delta^2)*U1), delta = shape/sqrt(1+shape^2).
double rskewnormal(Rng& rng, double location, double scale, double shape);
/// Mean of SN(0, scale, shape).
double skewnormal_mean_shift(double scale, double shape);

/// Draw from N(mean, L L^T) given the lower Cholesky factor L.
arma::vec rmvnorm_chol(Rng& rng, const arma::vec& mean, const arma::mat& lower);

/// Index drawn proportionally to exp(log_weights). log_weights is modified.
std::size_t sample_log_weights(Rng& rng, std::vector<double>& log_weights);
/// Index drawn proportionally to nonnegative weights.
std::size_t sample_weights(Rng& rng, std::span<const double> weights);

double log_poisson_pmf(double y, double mean);
double log_normal_pdf(double y, double mean, double variance);
/// Log density of a Student-t with `dof` degrees of freedom, location and squared scale.
double log_student_t_pdf(double y, double dof, double location, double scale2);

/// P(Y <= k) for Y ~ Poisson(mean); 0 for k < 0.
double poisson_cdf(double k, double mean);
/// P(Y > k); 1 for k < 0.
double poisson_sf(double k, double mean);

double mean(std::span<const double> x);
/// Unbiased sample variance (n-1); 0 for n < 2.
double variance(std::span<const double> x);
double sd(std::span<const double> x);
/// Linear-interpolation quantile (type 7).
double quantile(std::vector<double> x, double p);
double median(std::vector<double> x);

/// Monte Carlo standard error of the mean of a (possibly autocorrelated)
/// chain via non-overlapping batch means with floor(sqrt(n)) batches.
double batch_means_se(std::span<const double> chain);

/// Kish effective sample size of nonnegative weights.
double effective_sample_size(std::span<const double> weights);

/// Row-wise sample mean and (n-1)-normalised covariance of the rows of x.
void row_moments(const arma::mat& x, arma::vec& mean, arma::mat& cov);

/// Two-sample Kolmogorov-Smirnov distance.
double ks_distance(std::vector<double> a, std::vector<double> b);

}  // namespace medchain::stats

#endif
