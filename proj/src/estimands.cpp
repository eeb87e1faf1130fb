#include "medchain/estimands.hpp"

#include <cmath>

#include "medchain/stats.hpp"

namespace medchain {

Summary summarize(const std::vector<double>& draws) {
  Summary s;
  if (draws.empty()) return s;
  s.mean = stats::mean(draws);
  s.median = stats::median(draws);
  s.lo95 = stats::quantile(draws, 0.025);
  s.hi95 = stats::quantile(draws, 0.975);
  s.sd = stats::sd(draws);
  return s;
}

void SensitivitySpec::validate() const {
  if (!(chi > 0.0) || !std::isfinite(chi)) throw ValidationError("sensitivity: chi must be positive");
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw ValidationError("sensitivity: kappa must be >= 0");
}

double tilted_poisson_mixture_mean(const std::vector<double>& weights, const std::vector<double>& means, double cut,
                                   double chi, int sgn_d) {
  const double w_lo = std::pow(chi, -sgn_d), w_hi = std::pow(chi, sgn_d);
  const double j_lo = std::ceil(cut) - 1.0;  // largest count below cut
  const double j_hi = std::floor(cut) + 1.0; // smallest count above cut
  const bool tie = std::floor(cut) == cut;
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double mu = means[k];
    const double p_lo = stats::poisson_cdf(j_lo, mu);
    const double ey_lo = mu * stats::poisson_cdf(j_lo - 1.0, mu);
    const double p_hi = stats::poisson_sf(j_hi - 1.0, mu);
    const double ey_hi = mu * stats::poisson_sf(j_hi - 2.0, mu);
    const double p_eq = tie ? std::exp(stats::log_poisson_pmf(cut, mu)) : 0.0;
    num += weights[k] * (w_lo * ey_lo + p_eq * cut + w_hi * ey_hi);
    den += weights[k] * (w_lo * p_lo + p_eq + w_hi * p_hi);
  }
  return num / den;
}

namespace {

struct PathSet {
  std::vector<double> a, b, c;
  // Tilt inputs (filled only when requested).
  std::vector<double> d, offset, y_a_rate, y_b;
  std::vector<std::vector<double>> b_means;
  std::vector<double> b_weights;
};

class ForwardSimulator {
 public:
  ForwardSimulator(const FittedRegime& regime, const Panel& panel, const std::vector<int>& outcome_history,
                   const std::vector<int>& mediator_history)
      : regime_(regime), z_(outcome_history), zr_(mediator_history) {
    if (z_.empty() || z_.size() != zr_.size())
      throw ValidationError("counterfactual: histories must be nonempty and of equal length");
    for (std::size_t s = 0; s + 1 < z_.size(); ++s)
      if (z_[s] != zr_[s]) throw ValidationError("counterfactual: histories may differ only at the final time");
    t_ = static_cast<int>(z_.size());
    if (t_ > panel.periods()) throw ValidationError("counterfactual: contrast is longer than the panel");
    if (panel.units() == 0) throw ValidationError("counterfactual: empty panel");
    // Resolve every cell up front so a missing fit fails before any work.
    for (int s = 1; s < t_; ++s) {
      const int h = z_[s - 1];
      med_.push_back(&regime.cell(Role::Mediator, s, h));
      out_.push_back(&regime.cell(Role::Outcome, s, h));
      conf_.push_back(&regime.cell(Role::Confounder, s, h));
    }
    med_z_ = &regime.cell(Role::Mediator, t_, z_.back());
    med_r_ = &regime.cell(Role::Mediator, t_, zr_.back());
    out_z_ = &regime.cell(Role::Outcome, t_, z_.back());
    out_r_ = &regime.cell(Role::Outcome, t_, zr_.back());
    poisson_ = out_z_->family == Family::Poisson;
    base_.reserve(panel.units());
    for (std::size_t u = 0; u < panel.units(); ++u) {
      auto tr = trajectory_of(panel, u);
      tr.m.resize(t_ + 1);
      tr.w.resize(t_ + 1);
      tr.y.resize(t_ + 1);
      tr.offset.resize(t_ + 1);
      base_.push_back(std::move(tr));
    }
  }

  bool poisson() const { return poisson_; }

  double to_scale(double mean_count, double offset) const { return poisson_ ? 200.0 * mean_count / offset : mean_count; }

  void run(std::size_t r, std::size_t n_mc, std::uint64_t seed, bool tilt_inputs, PathSet& ps) const {
    const Scaling& sc = regime_.scaling;
    Rng rng = make_rng(seed, {0xf0, r});
    Rng tilt_rng = make_rng(seed, {0xf1, r});
    ps.a.resize(n_mc);
    ps.b.resize(n_mc);
    ps.c.resize(n_mc);
    if (tilt_inputs) {
      ps.d.resize(n_mc);
      ps.offset.resize(n_mc);
      ps.y_a_rate.resize(n_mc);
      ps.y_b.resize(n_mc);
      ps.b_means.resize(n_mc);
      ps.b_weights = out_z_->draws[r].weights;
    }
    const std::size_t N = base_.size();
    std::vector<double> comp;
    for (std::size_t j = 0; j < n_mc; ++j) {
      const std::size_t u = std::min(N - 1, static_cast<std::size_t>(stats::runif(rng) * static_cast<double>(N)));
      Trajectory tr = base_[u];
      for (int s = 1; s < t_; ++s) {
        const std::size_t i = static_cast<std::size_t>(s - 1);
        tr.m[s] = med_[i]->sample(rng, r, med_[i]->features.row(tr, sc), 1.0, sc);
        tr.y[s] = out_[i]->sample(rng, r, out_[i]->features.row(tr, sc), tr.offset[s], sc);
        tr.w[s + 1] = conf_[i]->sample(rng, r, conf_[i]->features.row(tr, sc), 1.0, sc);
      }
      const double off = tr.offset[t_];
      const double m_z = med_z_->sample(rng, r, med_z_->features.row(tr, sc), 1.0, sc);
      const double m_r = med_r_->sample(rng, r, med_r_->features.row(tr, sc), 1.0, sc);
      tr.m[t_] = m_z;
      const arma::rowvec xa = out_z_->features.row(tr, sc);
      ps.a[j] = to_scale(out_z_->mean(r, xa, off, sc), off);
      tr.m[t_] = m_r;
      const arma::rowvec xb = out_z_->features.row(tr, sc);
      ps.b[j] = to_scale(out_z_->mean(r, xb, off, sc), off);
      const arma::rowvec xc = out_r_->features.row(tr, sc);
      ps.c[j] = to_scale(out_r_->mean(r, xc, off, sc), off);
      if (tilt_inputs) {
        ps.d[j] = m_r - m_z;
        ps.offset[j] = off;
        ps.y_a_rate[j] = out_z_->sample(tilt_rng, r, xa, off, sc) / off;
        ps.y_b[j] = out_z_->sample(tilt_rng, r, xb, off, sc);
        out_z_->component_means(r, xb, off, sc, comp);
        ps.b_means[j] = comp;
      }
    }
  }

 private:
  const FittedRegime& regime_;
  std::vector<int> z_, zr_;
  int t_ = 0;
  bool poisson_ = true;
  std::vector<const CellModel*> med_, out_, conf_;
  const CellModel *med_z_ = nullptr, *med_r_ = nullptr, *out_z_ = nullptr, *out_r_ = nullptr;
  std::vector<Trajectory> base_;
};

// Means are snapped to a fixed 2^-24 grid. Below 2^29 every difference and
// sum of grid values is exact, so NDE + NIE reproduces TE bit for bit and TE
// never picks up rounding from the tilted middle term.
double path_mean(const std::vector<double>& v) {
  constexpr double grid = 0x1p-24;
  double s = 0.0;
  for (double x : v) s += x;
  return std::nearbyint(s / static_cast<double>(v.size()) / grid) * grid;
}

void check_nmc(std::size_t n_mc) {
  if (n_mc < 1000) throw ValidationError("effects: n_mc must be >= 1000 (got " + std::to_string(n_mc) + ")");
}

int sgn(double x) { return (x > 0.0) - (x < 0.0); }

EffectEstimate assemble(const FittedRegime& regime, const Contrast& contrast, std::size_t n_mc,
                        std::vector<double> a, std::vector<double> b, std::vector<double> c,
                        const std::vector<double>& se_a, const std::vector<double>& se_b,
                        const std::vector<double>& se_c) {
  EffectEstimate e;
  e.model = regime.model;
  e.contrast = contrast;
  e.n_mc = n_mc;
  const std::size_t R = a.size();
  e.nde.resize(R);
  e.nie.resize(R);
  e.te.resize(R);
  for (std::size_t r = 0; r < R; ++r) {
    e.nde[r] = b[r] - c[r];
    e.nie[r] = a[r] - b[r];
    e.te[r] = a[r] - c[r];
  }
  e.mean_a = std::move(a);
  e.mean_b = std::move(b);
  e.mean_c = std::move(c);
  e.mc_se_a = stats::mean(se_a);
  e.mc_se_b = stats::mean(se_b);
  e.mc_se_c = stats::mean(se_c);
  e.warnings = regime.warnings;
  return e;
}

}  // namespace

std::vector<double> counterfactual_mean(const FittedRegime& regime, const Panel& panel,
                                        const std::vector<int>& outcome_history,
                                        const std::vector<int>& mediator_history, std::size_t n_mc,
                                        std::uint64_t seed, int threads) {
  check_nmc(n_mc);
  const ForwardSimulator sim(regime, panel, outcome_history, mediator_history);
  const bool same = outcome_history == mediator_history;
  std::vector<double> out(regime.n_draws);
  parallel_for(regime.n_draws, threads, [&](std::size_t r) {
    PathSet ps;
    sim.run(r, n_mc, seed, false, ps);
    out[r] = path_mean(same ? ps.a : ps.b);
  });
  return out;
}

EffectEstimate effects(const FittedRegime& regime, const Panel& panel, const Contrast& contrast, std::size_t n_mc,
                       std::uint64_t seed, int threads) {
  contrast.validate();
  check_nmc(n_mc);
  const ForwardSimulator sim(regime, panel, contrast.treated, contrast.reference);
  const std::size_t R = regime.n_draws;
  std::vector<double> a(R), b(R), c(R), se_a(R), se_b(R), se_c(R);
  const double rn = std::sqrt(static_cast<double>(n_mc));
  parallel_for(R, threads, [&](std::size_t r) {
    PathSet ps;
    sim.run(r, n_mc, seed, false, ps);
    a[r] = path_mean(ps.a);
    b[r] = path_mean(ps.b);
    c[r] = path_mean(ps.c);
    se_a[r] = stats::sd(ps.a) / rn;
    se_b[r] = stats::sd(ps.b) / rn;
    se_c[r] = stats::sd(ps.c) / rn;
  });
  return attach_ledger(assemble(regime, contrast, n_mc, a, b, c, se_a, se_b, se_c), AssumptionLedger::defaults(1.0));
}

EffectEstimate tilted_effects(const FittedRegime& regime, const Panel& panel, const Contrast& contrast,
                              const SensitivitySpec& spec, std::size_t n_mc, std::uint64_t seed, int threads,
                              TiltTrace* trace, std::size_t trace_draw) {
  spec.validate();
  contrast.validate();
  check_nmc(n_mc);
  const ForwardSimulator sim(regime, panel, contrast.treated, contrast.reference);
  if (!sim.poisson()) throw ValidationError("tilted_effects: the tilt is defined for a Poisson outcome only");
  const std::size_t R = regime.n_draws;
  if (trace && trace_draw >= R) throw ValidationError("tilted_effects: trace draw out of range");
  std::vector<double> a(R), b(R), c(R), se_a(R), se_b(R), se_c(R), ess(R);
  const double rn = std::sqrt(static_cast<double>(n_mc));
  parallel_for(R, threads, [&](std::size_t r) {
    PathSet ps;
    sim.run(r, n_mc, seed, true, ps);
    const double threshold = spec.kappa * stats::sd(ps.d);
    const double med = stats::median(ps.y_a_rate);
    std::vector<double> bt(n_mc), w(n_mc, 1.0);
    for (std::size_t j = 0; j < n_mc; ++j) {
      if (spec.chi == 1.0 || !(std::fabs(ps.d[j]) > threshold)) {
        bt[j] = ps.b[j];
        continue;
      }
      const int sd = sgn(ps.d[j]);
      const double cut = med * ps.offset[j];
      bt[j] = 200.0 * tilted_poisson_mixture_mean(ps.b_weights, ps.b_means[j], cut, spec.chi, sd) / ps.offset[j];
      w[j] = std::pow(spec.chi, sgn(ps.y_b[j] - cut) * sd);
    }
    a[r] = path_mean(ps.a);
    b[r] = path_mean(bt);
    c[r] = path_mean(ps.c);
    se_a[r] = stats::sd(ps.a) / rn;
    se_b[r] = stats::sd(bt) / rn;
    se_c[r] = stats::sd(ps.c) / rn;
    ess[r] = stats::effective_sample_size(w);
    if (trace && r == trace_draw) {
      trace->threshold = threshold;
      trace->median_rate = med;
      trace->d = ps.d;
      trace->offset = ps.offset;
      trace->component_weights.assign(n_mc, ps.b_weights);
      trace->component_means = ps.b_means;
      trace->b_untilted = ps.b;
      trace->b_tilted = bt;
      trace->weights = w;
    }
  });
  auto e = assemble(regime, contrast, n_mc, a, b, c, se_a, se_b, se_c);
  const double min_ess = *std::min_element(ess.begin(), ess.end());
  if (min_ess < 0.1 * static_cast<double>(n_mc))
    e.warnings.push_back("tilt: effective sample size of the weights fell to " + std::to_string(min_ess) +
                         " (< 10% of n_mc)");
  return attach_ledger(std::move(e), AssumptionLedger::defaults(spec.chi));
}

}  // namespace medchain
