#include "medchain/glm.hpp"

#include <algorithm>
#include <cmath>

#include "medchain/common.hpp"
#include "medchain/stats.hpp"

namespace medchain::glm {

namespace {

// Inverse of a symmetric positive (semi)definite matrix; adds a small ridge
// when the Cholesky factorization fails.
arma::mat spd_inverse(arma::mat A, std::vector<std::string>& warnings) {
  A = arma::symmatu(A);
  arma::mat R;
  if (arma::chol(R, A)) {
    const arma::vec d = arma::square(R.diag());
    if (d.min() > 1e-13 * d.max()) {
      const arma::mat Ri = arma::inv(arma::trimatu(R));
      return Ri * Ri.t();
    }
  }
  const double ridge = 1e-6 * std::max(arma::mean(A.diag()), 1e-8);
  warnings.push_back("singular design: ridge fallback with penalty " + std::to_string(ridge));
  A.diag() += ridge;
  if (!arma::chol(R, A)) throw NumericalError("glm: design matrix is singular even after ridge regularization");
  const arma::mat Ri = arma::inv(arma::trimatu(R));
  return Ri * Ri.t();
}

}  // namespace

LinearFit fit_linear(const arma::mat& X, const arma::vec& y, const arma::vec& penalty) {
  if (X.n_rows != y.n_elem || X.n_rows == 0) throw ValidationError("fit_linear: dimension mismatch or empty data");
  LinearFit f;
  arma::mat A = X.t() * X;
  if (!penalty.is_empty()) A.diag() += penalty;
  const arma::mat Ainv = spd_inverse(A, f.warnings);
  f.coef = Ainv * (X.t() * y);
  const arma::vec r = y - X * f.coef;
  // Effective degrees of freedom of the (possibly penalized) smoother.
  const double edf = arma::trace(Ainv * (X.t() * X));
  f.df_resid = std::max(1.0, static_cast<double>(X.n_rows) - edf);
  f.sigma2 = std::max(arma::dot(r, r) / f.df_resid, 1e-12);
  f.cov = f.sigma2 * Ainv;
  return f;
}

double poisson_deviance(const arma::vec& y, const arma::vec& mu) {
  double d = 0.0;
  for (std::size_t i = 0; i < y.n_elem; ++i) {
    const double term = y[i] > 0.0 ? y[i] * std::log(y[i] / mu[i]) : 0.0;
    d += 2.0 * (term - (y[i] - mu[i]));
  }
  return d;
}

PoissonFit fit_poisson(const arma::mat& X, const arma::vec& y, const arma::vec& offset, const arma::vec& penalty,
                       int max_iter) {
  if (X.n_rows != y.n_elem || offset.n_elem != y.n_elem || X.n_rows == 0)
    throw ValidationError("fit_poisson: dimension mismatch or empty data");
  PoissonFit f;
  const arma::vec log_off = arma::log(offset);
  arma::vec mu = y + 0.5;
  arma::vec eta = arma::log(mu);
  double dev = poisson_deviance(y, mu);
  arma::mat Ainv;
  for (int it = 1; it <= max_iter; ++it) {
    const arma::vec z = eta - log_off + (y - mu) / mu;
    arma::mat A = X.t() * (X.each_col() % mu);
    if (!penalty.is_empty()) A.diag() += penalty;
    std::vector<std::string> w;
    Ainv = spd_inverse(A, w);
    f.coef = Ainv * (X.t() * (mu % z));
    eta = X * f.coef + log_off;
    eta = arma::clamp(eta, -700.0, 700.0);
    mu = arma::exp(eta);
    const double next = poisson_deviance(y, mu);
    if (!std::isfinite(next)) throw NumericalError("fit_poisson: deviance is not finite");
    f.iterations = it;
    const bool done = std::fabs(next - dev) / (std::fabs(next) + 0.1) < 1e-10;
    dev = next;
    if (!w.empty() && f.warnings.empty()) f.warnings = w;
    if (done) {
      arma::mat Af = X.t() * (X.each_col() % mu);
      if (!penalty.is_empty()) Af.diag() += penalty;
      std::vector<std::string> w2;
      f.cov = spd_inverse(Af, w2);
      f.deviance = dev;
      return f;
    }
  }
  throw NumericalError("fit_poisson: IRWLS did not converge in " + std::to_string(max_iter) + " iterations");
}

arma::rowvec BSplineBasis::eval(double x) const {
  const std::size_t nb = size();
  const double lo = knots[static_cast<std::size_t>(degree)];
  const double hi = knots[knots.size() - 1 - static_cast<std::size_t>(degree)];
  x = std::clamp(x, lo, hi);
  // Cox-de Boor recursion over all basis functions.
  std::vector<double> b(knots.size() - 1, 0.0);
  std::size_t span = static_cast<std::size_t>(degree);
  while (span + 1 < knots.size() - static_cast<std::size_t>(degree) - 1 && x >= knots[span + 1]) ++span;
  b[span] = 1.0;
  for (int d = 1; d <= degree; ++d) {
    for (std::size_t i = 0; i + static_cast<std::size_t>(d) < knots.size() - 1; ++i) {
      double v = 0.0;
      const double l = knots[i + d] - knots[i];
      const double r = knots[i + d + 1] - knots[i + 1];
      if (l > 0.0) v += (x - knots[i]) / l * b[i];
      if (r > 0.0) v += (knots[i + d + 1] - x) / r * b[i + 1];
      b[i] = v;
    }
  }
  arma::rowvec out(nb);
  for (std::size_t i = 0; i < nb; ++i) out[i] = b[i];
  return out;
}

arma::mat BSplineBasis::eval(const arma::vec& x) const {
  arma::mat out(x.n_elem, size());
  for (std::size_t i = 0; i < x.n_elem; ++i) out.row(i) = eval(x[i]);
  return out;
}

BSplineBasis quintile_basis(const arma::vec& x) {
  if (x.n_elem < 2) throw ValidationError("quintile_basis: need at least two points");
  std::vector<double> v(x.begin(), x.end());
  const double lo = *std::min_element(v.begin(), v.end());
  double hi = *std::max_element(v.begin(), v.end());
  if (hi <= lo) hi = lo + 1.0;
  BSplineBasis b;
  for (int k = 0; k <= b.degree; ++k) b.knots.push_back(lo);
  double last = lo;
  for (double p : {0.2, 0.4, 0.6, 0.8}) {
    const double q = stats::quantile(v, p);
    if (q > last && q < hi) {
      b.knots.push_back(q);
      last = q;
    }
  }
  for (int k = 0; k <= b.degree; ++k) b.knots.push_back(hi);
  return b;
}

}  // namespace medchain::glm
