#ifndef MEDCHAIN_GLM_HPP
#define MEDCHAIN_GLM_HPP

#include <armadillo>
#include <string>
#include <vector>

namespace medchain::glm {

struct LinearFit {
  arma::vec coef;
  arma::mat cov;  // sigma2 * (X'X + P)^-1
  double sigma2 = 1.0;
  double df_resid = 0.0;
  std::vector<std::string> warnings;
};

/// Least squares with an optional diagonal ridge penalty. A singular X'X
/// falls back to a small ridge and records a warning.
LinearFit fit_linear(const arma::mat& X, const arma::vec& y, const arma::vec& penalty = {});

struct PoissonFit {
  arma::vec coef;
  arma::mat cov;  // (X'WX + P)^-1 at convergence
  double deviance = 0.0;
  int iterations = 0;
  std::vector<std::string> warnings;
};

/// Penalized iteratively reweighted least squares for a log-link Poisson
/// model with log(offset). Throws NumericalError if not converged within
/// `max_iter` iterations.
PoissonFit fit_poisson(const arma::mat& X, const arma::vec& y, const arma::vec& offset,
                       const arma::vec& penalty = {}, int max_iter = 100);

double poisson_deviance(const arma::vec& y, const arma::vec& mu);

/// Clamped cubic B-spline basis on [lo, hi] with the given interior knots.
/// Points outside the range are evaluated at the nearest boundary.
struct BSplineBasis {
  std::vector<double> knots;  // full knot vector
  int degree = 3;

  std::size_t size() const { return knots.size() - static_cast<std::size_t>(degree) - 1; }
  arma::rowvec eval(double x) const;
  arma::mat eval(const arma::vec& x) const;
};

/// Cubic basis with interior knots at the quintiles of x.
BSplineBasis quintile_basis(const arma::vec& x);

}  // namespace medchain::glm

#endif
