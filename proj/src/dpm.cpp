#include "medchain/dpm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "medchain/json_util.hpp"
#include "medchain/stats.hpp"

namespace medchain {

McmcConfig McmcConfig::named(const std::string& profile) {
  if (profile == "paper") return paper();
  if (profile == "desk") return desk();
  throw ValidationError("unknown MCMC profile '" + profile + "' (expected paper or desk)");
}

void McmcConfig::validate() const {
  if (iterations <= burn_in) throw ValidationError("mcmc: iterations must exceed burn-in");
  if (burn_in < 0 || thin < 1) throw ValidationError("mcmc: burn-in must be >= 0 and thin >= 1");
  if (retained() < 1) throw ValidationError("mcmc: configuration retains no draws");
}

DpPrior DpPrior::centered(const arma::vec& center, double variance) {
  DpPrior p;
  p.base_mean = center;
  p.base_cov = variance * arma::eye(center.n_elem, center.n_elem);
  return p;
}

void DpPrior::validate(std::size_t p) const {
  if (!(mass_shape > 0 && mass_rate > 0 && tau_shape > 0 && tau_rate > 0 && a > 0 && b > 0))
    throw ValidationError("dp prior: hyperparameters must be positive");
  if (base_mean.n_elem != p || base_cov.n_rows != p || base_cov.n_cols != p)
    throw ValidationError("dp prior: base-measure dimensions do not match the design (" + std::to_string(p) +
                          " columns)");
  if (fixed_mass && !(*fixed_mass > 0)) throw ValidationError("dp prior: fixed mass must be positive");
  if (fixed_tau && (fixed_tau->n_elem != p || arma::any(*fixed_tau <= 0)))
    throw ValidationError("dp prior: fixed tau must be positive with one entry per column");
}

const char* kernel_name(Kernel k) { return k == Kernel::Normal ? "normal" : "poisson"; }

Kernel parse_kernel(const std::string& s) {
  if (s == "normal") return Kernel::Normal;
  if (s == "poisson") return Kernel::Poisson;
  throw ValidationError("unknown kernel '" + s + "' (expected normal or poisson)");
}

std::vector<std::size_t> DpmDraw::counts() const {
  std::vector<std::size_t> c(clusters(), 0);
  for (int l : labels) ++c[static_cast<std::size_t>(l)];
  return c;
}

arma::mat DpmFit::base_mean_draws() const {
  arma::mat out(draws.size(), p);
  for (std::size_t r = 0; r < draws.size(); ++r) out.row(r) = draws[r].base_mean.t();
  return out;
}

namespace {

struct Cluster {
  arma::vec beta;
  double sigma2 = 1.0;
  std::size_t count = 0;
};

// Shared Gibbs state and hyperparameter updates for both kernels.
class SamplerBase {
 public:
  SamplerBase(const arma::mat& X, const DpPrior& prior, std::uint64_t seed)
      : X_(X), prior_(prior), rng_(make_rng(seed, {0xd9})), n_(X.n_rows), p_(X.n_cols) {
    labels_.assign(n_, 0);
    A_ = prior.base_mean;
    tau_ = prior.fixed_tau ? *prior.fixed_tau : arma::vec(p_, arma::fill::value(prior.tau_shape / prior.tau_rate));
    mass_ = prior.fixed_mass ? *prior.fixed_mass : prior.mass_shape / prior.mass_rate;
    S0inv_ = arma::inv_sympd(arma::symmatu(prior.base_cov));
  }

 protected:
  // Removes observation i from its cluster; deletes the cluster if emptied.
  // Returns the parameters of a removed singleton, if any.
  std::optional<Cluster> detach(std::size_t i) {
    const auto k = static_cast<std::size_t>(labels_[i]);
    if (--clusters_[k].count > 0) return std::nullopt;
    Cluster gone = std::move(clusters_[k]);
    const std::size_t last = clusters_.size() - 1;
    if (k != last) {
      clusters_[k] = std::move(clusters_[last]);
      for (auto& l : labels_)
        if (static_cast<std::size_t>(l) == last) l = static_cast<int>(k);
    }
    clusters_.pop_back();
    labels_[i] = -1;
    return gone;
  }

  void attach(std::size_t i, std::size_t k) {
    labels_[i] = static_cast<int>(k);
    ++clusters_[k].count;
  }

  std::vector<std::vector<std::size_t>> members() const {
    std::vector<std::vector<std::size_t>> m(clusters_.size());
    for (std::size_t i = 0; i < n_; ++i) m[static_cast<std::size_t>(labels_[i])].push_back(i);
    return m;
  }

  // Escobar-West augmentation under a Gamma(mass_shape, mass_rate) prior.
  void update_mass() {
    if (prior_.fixed_mass) return;
    const double K = static_cast<double>(clusters_.size());
    const double nn = static_cast<double>(n_);
    const double eta = stats::rbeta(rng_, mass_ + 1.0, nn);
    const double rate = prior_.mass_rate - std::log(eta);
    const double odds = (prior_.mass_shape + K - 1.0) / (nn * rate);
    const double pi = odds / (1.0 + odds);
    const double shape = stats::runif(rng_) < pi ? prior_.mass_shape + K : prior_.mass_shape + K - 1.0;
    mass_ = stats::rgamma(rng_, shape, rate);
    if (!(mass_ > 1e-300)) mass_ = 1e-300;
  }

  // A | clusters with cluster precision weights w_k (1/s2_k or 1).
  void update_base_mean(const std::vector<double>& w) {
    if (prior_.fixed_base) return;
    arma::mat P = S0inv_;
    arma::vec rhs = S0inv_ * prior_.base_mean;
    for (std::size_t k = 0; k < clusters_.size(); ++k) {
      P.diag() += tau_ * w[k];
      rhs += tau_ % clusters_[k].beta * w[k];
    }
    arma::mat R;
    if (!arma::chol(R, arma::symmatu(P))) throw NumericalError("dpm: base-mean precision not positive definite");
    const arma::vec mean = arma::solve(arma::trimatu(R), arma::solve(arma::trimatl(R.t()), rhs));
    arma::vec z(p_);
    for (auto& v : z) v = stats::rnorm(rng_);
    A_ = mean + arma::solve(arma::trimatu(R), z);
  }

  void update_tau(const std::vector<double>& w) {
    if (prior_.fixed_tau) return;
    const double K = static_cast<double>(clusters_.size());
    for (std::size_t h = 0; h < p_; ++h) {
      double ss = 0.0;
      for (std::size_t k = 0; k < clusters_.size(); ++k) {
        const double d = clusters_[k].beta[h] - A_[h];
        ss += d * d * w[k];
      }
      tau_[h] = stats::rgamma(rng_, prior_.tau_shape + 0.5 * K, prior_.tau_rate + 0.5 * ss);
    }
  }

  DpmDraw snapshot(bool with_sigma) const {
    DpmDraw d;
    d.labels = labels_;
    d.beta.set_size(clusters_.size(), p_);
    if (with_sigma) d.sigma2.set_size(clusters_.size());
    for (std::size_t k = 0; k < clusters_.size(); ++k) {
      d.beta.row(k) = clusters_[k].beta.t();
      if (with_sigma) d.sigma2[k] = clusters_[k].sigma2;
    }
    d.mass = mass_;
    d.base_mean = A_;
    d.tau = tau_;
    return d;
  }

  const arma::mat& X_;
  const DpPrior& prior_;
  Rng rng_;
  std::size_t n_, p_;
  std::vector<int> labels_;
  std::vector<Cluster> clusters_;
  arma::vec A_, tau_;
  double mass_ = 1.0;
  arma::mat S0inv_;
};

class NormalSampler : SamplerBase {
 public:
  NormalSampler(const arma::vec& y, const arma::mat& X, const DpPrior& prior, std::uint64_t seed)
      : SamplerBase(X, prior, seed), y_(y) {
    // Singleton start: from one big cluster the tight initial base scale
    // makes distant groups very slow to split off.
    for (std::size_t i = 0; i < n_; ++i) {
      const arma::rowvec x = X_.row(i);
      Cluster c = posterior_draw(x.t() * x, x.t() * y_[i], y_[i] * y_[i], 1.0);
      c.count = 1;
      clusters_.push_back(std::move(c));
      labels_[i] = static_cast<int>(i);
    }
  }

  DpmFit run(const McmcConfig& mcmc) {
    DpmFit fit;
    fit.kernel = Kernel::Normal;
    fit.n = n_;
    fit.p = p_;
    fit.mcmc = mcmc;
    fit.prior = prior_;
    for (int it = 1; it <= mcmc.iterations; ++it) {
      update_labels();
      update_clusters();
      std::vector<double> w(clusters_.size());
      for (std::size_t k = 0; k < clusters_.size(); ++k) w[k] = 1.0 / clusters_[k].sigma2;
      update_tau(w);
      update_base_mean(w);
      update_mass();
      if (it > mcmc.burn_in && (it - mcmc.burn_in) % mcmc.thin == 0) fit.draws.push_back(snapshot(true));
    }
    return fit;
  }

 private:
  // NIG posterior draw from sufficient statistics.
  Cluster posterior_draw(const arma::mat& XtX, const arma::vec& Xty, double yty, double count) {
    arma::mat Q = XtX;
    Q.diag() += tau_;
    arma::mat R;
    if (!arma::chol(R, arma::symmatu(Q))) throw NumericalError("dpm: cluster precision not positive definite");
    const arma::vec rhs = tau_ % A_ + Xty;
    const arma::vec m = arma::solve(arma::trimatu(R), arma::solve(arma::trimatl(R.t()), rhs));
    const double an = prior_.a + 0.5 * count;
    const double quad = yty + arma::dot(A_, tau_ % A_) - arma::dot(m, rhs);
    const double bn = prior_.b + 0.5 * std::max(quad, 0.0);
    Cluster c;
    c.sigma2 = stats::rinvgamma(rng_, an, bn);
    arma::vec z(p_);
    for (auto& v : z) v = stats::rnorm(rng_);
    c.beta = m + std::sqrt(c.sigma2) * arma::solve(arma::trimatu(R), z);
    return c;
  }

  void update_labels() {
    std::vector<double> logw;
    const double dof = 2.0 * prior_.a;
    for (std::size_t i = 0; i < n_; ++i) {
      detach(i);
      const arma::rowvec x = X_.row(i);
      const double yi = y_[i];
      logw.resize(clusters_.size() + 1);
      for (std::size_t k = 0; k < clusters_.size(); ++k) {
        const double mu = arma::dot(x, clusters_[k].beta);
        logw[k] = std::log(static_cast<double>(clusters_[k].count)) + stats::log_normal_pdf(yi, mu, clusters_[k].sigma2);
      }
      const double loc = arma::dot(x, A_);
      const double scale2 = prior_.b / prior_.a * (1.0 + arma::dot(x, x.t() / tau_));
      logw.back() = std::log(mass_) + stats::log_student_t_pdf(yi, dof, loc, scale2);
      const std::size_t k = stats::sample_log_weights(rng_, logw);
      if (k == clusters_.size()) {
        Cluster c = posterior_draw(x.t() * x, x.t() * yi, yi * yi, 1.0);
        c.count = 0;
        clusters_.push_back(std::move(c));
      }
      attach(i, k);
    }
  }

  void update_clusters() {
    const auto mem = members();
    for (std::size_t k = 0; k < clusters_.size(); ++k) {
      const arma::uvec idx = arma::conv_to<arma::uvec>::from(mem[k]);
      const arma::mat Xk = X_.rows(idx);
      const arma::vec yk = y_.elem(idx);
      Cluster c = posterior_draw(Xk.t() * Xk, Xk.t() * yk, arma::dot(yk, yk), static_cast<double>(idx.n_elem));
      c.count = clusters_[k].count;
      clusters_[k] = std::move(c);
    }
  }

  const arma::vec& y_;
};

class PoissonSampler : SamplerBase {
 public:
  static constexpr int kAux = 3;

  PoissonSampler(const arma::vec& y, const arma::vec& offset, const arma::mat& X, const DpPrior& prior,
                 std::uint64_t seed)
      : SamplerBase(X, prior, seed), y_(y), log_off_(arma::log(offset)) {
    Cluster c;
    c.beta = A_;
    c.count = n_;
    clusters_.push_back(c);
  }

  DpmFit run(const McmcConfig& mcmc) {
    DpmFit fit;
    fit.kernel = Kernel::Poisson;
    fit.n = n_;
    fit.p = p_;
    fit.mcmc = mcmc;
    fit.prior = prior_;
    double log_scale = std::log(2.38 / std::sqrt(static_cast<double>(p_)));
    std::size_t accepted = 0, proposed = 0;
    for (int it = 1; it <= mcmc.iterations; ++it) {
      update_labels();
      const auto [acc, tried] = update_clusters(std::exp(log_scale));
      if (it <= mcmc.burn_in) {
        const double rate = tried ? static_cast<double>(acc) / static_cast<double>(tried) : 0.3;
        log_scale += std::min(0.5, 1.0 / std::sqrt(static_cast<double>(it))) * (rate - 0.3);
      } else {
        accepted += acc;
        proposed += tried;
      }
      std::vector<double> w(clusters_.size(), 1.0);
      update_tau(w);
      update_base_mean(w);
      update_mass();
      if (it > mcmc.burn_in && (it - mcmc.burn_in) % mcmc.thin == 0) fit.draws.push_back(snapshot(false));
    }
    fit.proposal_scale = std::exp(log_scale);
    fit.acceptance_rate = proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
    if (fit.acceptance_rate < 0.1 || fit.acceptance_rate > 0.6)
      fit.warnings.push_back("post-burn-in Metropolis acceptance rate " + std::to_string(fit.acceptance_rate) +
                             " outside [0.1, 0.6]");
    return fit;
  }

 private:
  double loglik(std::size_t i, const arma::vec& beta) const {
    const double eta = arma::dot(X_.row(i), beta) + log_off_[i];
    return y_[i] * eta - std::exp(eta);
  }

  arma::vec base_draw() {
    arma::vec z(p_);
    for (std::size_t h = 0; h < p_; ++h) z[h] = A_[h] + stats::rnorm(rng_) / std::sqrt(tau_[h]);
    return z;
  }

  // Neal's auxiliary-parameter Gibbs update with kAux auxiliaries.
  void update_labels() {
    std::vector<double> logw;
    std::vector<arma::vec> aux(kAux);
    const double log_aux_mass = std::log(mass_ / kAux);
    for (std::size_t i = 0; i < n_; ++i) {
      auto gone = detach(i);
      int first = 0;
      if (gone) {
        aux[0] = std::move(gone->beta);
        first = 1;
      }
      for (int j = first; j < kAux; ++j) aux[j] = base_draw();
      logw.resize(clusters_.size() + kAux);
      for (std::size_t k = 0; k < clusters_.size(); ++k)
        logw[k] = std::log(static_cast<double>(clusters_[k].count)) + loglik(i, clusters_[k].beta);
      for (int j = 0; j < kAux; ++j) logw[clusters_.size() + j] = log_aux_mass + loglik(i, aux[j]);
      const std::size_t k = stats::sample_log_weights(rng_, logw);
      if (k >= clusters_.size()) {
        Cluster c;
        c.beta = aux[k - clusters_.size()];
        clusters_.push_back(std::move(c));
        attach(i, clusters_.size() - 1);
      } else {
        attach(i, k);
      }
    }
  }

  double log_target(const std::vector<std::size_t>& idx, const arma::vec& beta) const {
    double s = 0.0;
    for (std::size_t i : idx) s += loglik(i, beta);
    const arma::vec d = beta - A_;
    return s - 0.5 * arma::dot(d, tau_ % d);
  }

  std::pair<std::size_t, std::size_t> update_clusters(double scale) {
    const auto mem = members();
    std::size_t acc = 0;
    for (std::size_t k = 0; k < clusters_.size(); ++k) {
      const auto& idx = mem[k];
      arma::mat Q(p_, p_, arma::fill::zeros);
      for (std::size_t i : idx) {
        const arma::rowvec x = X_.row(i);
        Q += (y_[i] + 0.5) * (x.t() * x);
      }
      Q.diag() += tau_;
      arma::mat R;
      if (!arma::chol(R, arma::symmatu(Q))) throw NumericalError("dpm: proposal precision not positive definite");
      arma::vec z(p_);
      for (auto& v : z) v = stats::rnorm(rng_);
      const arma::vec prop = clusters_[k].beta + scale * arma::solve(arma::trimatu(R), z);
      const double diff = log_target(idx, prop) - log_target(idx, clusters_[k].beta);
      if (std::log(stats::runif(rng_)) < diff) {
        clusters_[k].beta = prop;
        ++acc;
      }
    }
    return {acc, clusters_.size()};
  }

  const arma::vec& y_;
  arma::vec log_off_;
};

void check_common(const arma::vec& y, const arma::mat& X, const DpPrior& prior, const McmcConfig& mcmc) {
  mcmc.validate();
  if (X.n_rows != y.n_elem) throw ValidationError("dpm: design rows do not match response length");
  if (y.n_elem < 2) throw ValidationError("dpm: need at least 2 observations");
  if (X.n_cols < 1) throw ValidationError("dpm: design has no columns");
  if (!y.is_finite() || !X.is_finite()) throw ValidationError("dpm: non-finite data");
  prior.validate(X.n_cols);
}

}  // namespace

DpmFit fit_normal_dpm(const arma::vec& y, const arma::mat& X, const DpPrior& prior, const McmcConfig& mcmc,
                      std::uint64_t seed) {
  check_common(y, X, prior, mcmc);
  return NormalSampler(y, X, prior, seed).run(mcmc);
}

DpmFit fit_poisson_dpm(const arma::vec& y, const arma::vec& offset, const arma::mat& X, const DpPrior& prior,
                       const McmcConfig& mcmc, std::uint64_t seed) {
  check_common(y, X, prior, mcmc);
  if (offset.n_elem != y.n_elem) throw ValidationError("dpm: offset length does not match response length");
  for (std::size_t i = 0; i < y.n_elem; ++i) {
    if (y[i] < 0 || y[i] != std::floor(y[i]))
      throw ValidationError("dpm: Poisson response must be a nonnegative integer (row " + std::to_string(i) + ")");
    if (!(offset[i] > 0)) throw ValidationError("dpm: offset must be positive (row " + std::to_string(i) + ")");
  }
  return PoissonSampler(y, offset, X, prior, seed).run(mcmc);
}

namespace {

void check_new(const DpmFit& fit, const arma::mat& Xnew, const arma::vec& offset) {
  if (fit.draws.empty()) throw ValidationError("dpm: fit has no retained draws");
  if (Xnew.n_cols != fit.p)
    throw ValidationError("dpm: new design has " + std::to_string(Xnew.n_cols) + " columns, fit has " +
                          std::to_string(fit.p));
  if (fit.kernel == Kernel::Poisson && offset.n_elem != Xnew.n_rows)
    throw ValidationError("dpm: Poisson predictive needs one offset per new row");
}

}  // namespace

arma::mat posterior_predictive(const DpmFit& fit, const arma::mat& Xnew, const arma::vec& offset, std::uint64_t seed) {
  check_new(fit, Xnew, offset);
  arma::mat out(fit.draws.size(), Xnew.n_rows);
  const double nn = static_cast<double>(fit.n);
  for (std::size_t r = 0; r < fit.draws.size(); ++r) {
    const auto& d = fit.draws[r];
    Rng rng = make_rng(seed, {r});
    const auto counts = d.counts();
    std::vector<double> w(d.clusters() + 1);
    for (std::size_t k = 0; k < d.clusters(); ++k) w[k] = static_cast<double>(counts[k]) / (nn + d.mass);
    w.back() = d.mass / (nn + d.mass);
    for (std::size_t i = 0; i < Xnew.n_rows; ++i) {
      const std::size_t k = stats::sample_weights(rng, w);
      arma::vec beta;
      double s2 = 0.0;
      if (k < d.clusters()) {
        beta = d.beta.row(k).t();
        if (fit.kernel == Kernel::Normal) s2 = d.sigma2[k];
      } else {
        s2 = fit.kernel == Kernel::Normal ? stats::rinvgamma(rng, fit.prior.a, fit.prior.b) : 1.0;
        beta.set_size(fit.p);
        for (std::size_t h = 0; h < fit.p; ++h) beta[h] = d.base_mean[h] + stats::rnorm(rng) * std::sqrt(s2 / d.tau[h]);
      }
      const double eta = arma::dot(Xnew.row(i), beta);
      if (fit.kernel == Kernel::Normal)
        out(r, i) = eta + std::sqrt(s2) * stats::rnorm(rng);
      else
        out(r, i) = static_cast<double>(stats::rpoisson(rng, offset[i] * std::exp(eta)));
    }
  }
  return out;
}

arma::mat predictive_mean(const DpmFit& fit, const arma::mat& Xnew, const arma::vec& offset) {
  check_new(fit, Xnew, offset);
  arma::mat out(fit.draws.size(), Xnew.n_rows);
  const double nn = static_cast<double>(fit.n);
  for (std::size_t r = 0; r < fit.draws.size(); ++r) {
    const auto& d = fit.draws[r];
    const auto counts = d.counts();
    for (std::size_t i = 0; i < Xnew.n_rows; ++i) {
      const arma::rowvec x = Xnew.row(i);
      const arma::vec eta = d.beta * x.t();
      const double eta_new = arma::dot(x, d.base_mean);
      double m = 0.0;
      if (fit.kernel == Kernel::Normal) {
        for (std::size_t k = 0; k < d.clusters(); ++k) m += static_cast<double>(counts[k]) * eta[k];
        m += d.mass * eta_new;
      } else {
        for (std::size_t k = 0; k < d.clusters(); ++k) m += static_cast<double>(counts[k]) * std::exp(eta[k]);
        m += d.mass * std::exp(eta_new + 0.5 * arma::dot(x, x.t() / d.tau));
        m *= offset[i];
      }
      out(r, i) = m / (nn + d.mass);
    }
  }
  return out;
}

nlohmann::json to_json(const DpmFit& fit) {
  using nlohmann::json;
  json draws = json::array();
  for (const auto& d : fit.draws) {
    json jd{{"labels", d.labels},
            {"beta", jsonio::from_mat(d.beta)},
            {"mass", d.mass},
            {"base_mean", jsonio::from_vec(d.base_mean)},
            {"tau", jsonio::from_vec(d.tau)}};
    if (fit.kernel == Kernel::Normal) jd["sigma2"] = jsonio::from_vec(d.sigma2);
    draws.push_back(std::move(jd));
  }
  json prior{{"mass", {fit.prior.mass_shape, fit.prior.mass_rate}},
             {"tau", {fit.prior.tau_shape, fit.prior.tau_rate}},
             {"a", fit.prior.a},
             {"b", fit.prior.b},
             {"base_mean", jsonio::from_vec(fit.prior.base_mean)},
             {"base_cov", jsonio::from_mat(fit.prior.base_cov)},
             {"fixed_base", fit.prior.fixed_base}};
  if (fit.prior.fixed_mass) prior["fixed_mass"] = *fit.prior.fixed_mass;
  if (fit.prior.fixed_tau) prior["fixed_tau"] = jsonio::from_vec(*fit.prior.fixed_tau);
  return json{{"format", "medchain-dpm-v1"},
              {"kernel", kernel_name(fit.kernel)},
              {"n", fit.n},
              {"p", fit.p},
              {"mcmc", {{"iterations", fit.mcmc.iterations}, {"burn_in", fit.mcmc.burn_in}, {"thin", fit.mcmc.thin}}},
              {"prior", prior},
              {"acceptance_rate", fit.acceptance_rate},
              {"proposal_scale", fit.proposal_scale},
              {"warnings", fit.warnings},
              {"draws", draws}};
}

DpmFit dpm_fit_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "medchain-dpm-v1")
      throw ValidationError("dpm fit: unsupported format tag '" + j.at("format").get<std::string>() + "'");
    DpmFit f;
    f.kernel = parse_kernel(j.at("kernel").get<std::string>());
    f.n = j.at("n").get<std::size_t>();
    f.p = j.at("p").get<std::size_t>();
    const auto& m = j.at("mcmc");
    f.mcmc = {m.at("iterations").get<int>(), m.at("burn_in").get<int>(), m.at("thin").get<int>()};
    const auto& pr = j.at("prior");
    f.prior.mass_shape = pr.at("mass")[0].get<double>();
    f.prior.mass_rate = pr.at("mass")[1].get<double>();
    f.prior.tau_shape = pr.at("tau")[0].get<double>();
    f.prior.tau_rate = pr.at("tau")[1].get<double>();
    f.prior.a = pr.at("a").get<double>();
    f.prior.b = pr.at("b").get<double>();
    f.prior.base_mean = jsonio::to_vec(pr.at("base_mean"));
    f.prior.base_cov = jsonio::to_mat(pr.at("base_cov"), f.p);
    f.prior.fixed_base = pr.at("fixed_base").get<bool>();
    if (pr.contains("fixed_mass")) f.prior.fixed_mass = pr.at("fixed_mass").get<double>();
    if (pr.contains("fixed_tau")) f.prior.fixed_tau = jsonio::to_vec(pr.at("fixed_tau"));
    f.acceptance_rate = j.at("acceptance_rate").get<double>();
    f.proposal_scale = j.at("proposal_scale").get<double>();
    f.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& jd : j.at("draws")) {
      DpmDraw d;
      d.labels = jd.at("labels").get<std::vector<int>>();
      d.beta = jsonio::to_mat(jd.at("beta"), f.p);
      d.mass = jd.at("mass").get<double>();
      d.base_mean = jsonio::to_vec(jd.at("base_mean"));
      d.tau = jsonio::to_vec(jd.at("tau"));
      if (f.kernel == Kernel::Normal) d.sigma2 = jsonio::to_vec(jd.at("sigma2"));
      if (d.labels.size() != f.n) throw ValidationError("dpm fit: label vector length does not match n");
      for (int l : d.labels)
        if (l < 0 || static_cast<arma::uword>(l) >= d.beta.n_rows)
          throw ValidationError("dpm fit: label references a missing cluster");
      f.draws.push_back(std::move(d));
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("dpm fit: malformed JSON: ") + e.what());
  }
}

}  // namespace medchain
