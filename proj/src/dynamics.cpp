#include "medchain/dynamics.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "medchain/glm.hpp"
#include "medchain/json_util.hpp"
#include "medchain/stats.hpp"

namespace medchain {

arma::mat StateSummary::block(std::size_t b) const {
  std::size_t start = 0;
  for (std::size_t i = 0; i < b; ++i) start += blocks[i];
  return theta.cols(start, start + blocks[b] - 1);
}

nlohmann::json to_json(const StateSummary& s) {
  return {{"format", "medchain-state-v1"},
          {"t", s.t},
          {"arm", s.arm},
          {"blocks", s.blocks},
          {"theta", jsonio::from_mat(s.theta)},
          {"sigma", jsonio::from_mat(s.sigma)},
          {"warnings", s.warnings}};
}

StateSummary state_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "medchain-state-v1")
      throw ValidationError("state: unsupported format tag");
    StateSummary s;
    s.t = j.at("t").get<int>();
    s.arm = j.at("arm").get<int>();
    s.blocks = j.at("blocks").get<std::vector<std::size_t>>();
    std::size_t dim = 0;
    for (auto b : s.blocks) dim += b;
    s.theta = jsonio::to_mat(j.at("theta"), dim);
    s.sigma = j.at("sigma").empty() ? arma::mat() : jsonio::to_mat(j.at("sigma"), dim);
    s.warnings = j.at("warnings").get<std::vector<std::string>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("state: malformed JSON: ") + e.what());
  }
}

StateSummary evolve(const StateSummary& prev, const arma::mat& sigma, std::uint64_t seed) {
  if (prev.n() < 1) throw ValidationError("evolve: state has no samples");
  if (sigma.n_rows != prev.dim() || sigma.n_cols != prev.dim())
    throw ValidationError("evolve: covariance dimension " + std::to_string(sigma.n_rows) +
                          " does not match state dimension " + std::to_string(prev.dim()));
  StateSummary next = prev;
  next.t = prev.t + 1;
  next.sigma = sigma;
  next.warnings.clear();
  if (!arma::any(arma::vectorise(sigma) != 0.0)) return next;

  const arma::mat sym = arma::symmatu(0.5 * (sigma + sigma.t()));
  arma::vec eval;
  arma::mat evec;
  if (!arma::eig_sym(eval, evec, sym)) throw NumericalError("evolve: eigendecomposition failed");
  if (arma::any(eval < 0.0)) {
    next.warnings.push_back("evolve: covariance not positive semidefinite; eigenvalues clipped at 0");
    eval = arma::clamp(eval, 0.0, arma::datum::inf);
  }
  // sigma = F F^T with F = V diag(sqrt(lambda)).
  const arma::mat F = evec * arma::diagmat(arma::sqrt(eval));
  Rng rng = make_rng(seed, {0xe7});
  arma::vec z(prev.dim());
  for (std::size_t i = 0; i < prev.n(); ++i) {
    for (auto& v : z) v = stats::rnorm(rng);
    next.theta.row(i) += (F * z).t();
  }
  return next;
}

arma::mat posterior_block_cov(const StateSummary& s) {
  arma::mat out(s.dim(), s.dim(), arma::fill::zeros);
  std::size_t start = 0;
  for (std::size_t b = 0; b < s.blocks.size(); ++b) {
    const std::size_t w = s.blocks[b];
    arma::vec mean;
    arma::mat cov;
    stats::row_moments(s.theta.cols(start, start + w - 1), mean, cov);
    out.submat(start, start, start + w - 1, start + w - 1) = cov;
    start += w;
  }
  return out;
}

MvnParams fit_base_mvn(const StateSummary& s) {
  if (s.n() < s.dim() + 1)
    throw ValidationError("fit_base_mvn: need n_t >= dim + 1 (n_t = " + std::to_string(s.n()) +
                          ", dim = " + std::to_string(s.dim()) + ")");
  MvnParams p;
  stats::row_moments(s.theta, p.mean, p.cov);
  const double tr = arma::trace(p.cov);
  const double eps = tr > 0.0 ? 1e-8 * tr / static_cast<double>(s.dim()) : 1e-8;
  if (!(tr > 0.0)) p.warnings.push_back("fit_base_mvn: degenerate sample; returning a point mass");
  p.cov.diag() += eps;
  return p;
}

const NodeFit& DpmChain::node(int t, int arm) const {
  auto it = nodes.find({t, arm});
  if (it == nodes.end())
    throw ValidationError("chain: no fit for node (t " + std::to_string(t) + ", arm " + std::to_string(arm) + ")");
  return it->second;
}

std::uint64_t node_seed(std::uint64_t seed, int t, int arm, Role role) {
  return derive_seed(seed, {0x5e9, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(arm),
                            static_cast<std::uint64_t>(role)});
}

DpPrior static_prior(const NodeData& data, Family family, double variance, const DpPrior& hyper) {
  arma::vec center;
  if (family == Family::Normal) {
    center = glm::fit_linear(data.X, data.y).coef;
  } else {
    try {
      center = glm::fit_poisson(data.X, data.y, data.offset, arma::vec(data.X.n_cols, arma::fill::value(1e-6))).coef;
    } catch (const NumericalError&) {
      center.zeros(data.X.n_cols);
      center[0] = std::log((arma::accu(data.y) + 0.5) / arma::accu(data.offset));
    }
  }
  DpPrior p = hyper;
  p.base_mean = center;
  p.base_cov = variance * arma::eye(center.n_elem, center.n_elem);
  return p;
}

namespace {

std::vector<int> full_history(const SequentialOptions& opts, int T) {
  std::vector<int> h = opts.history.empty() ? std::vector<int>(static_cast<std::size_t>(T), 0) : opts.history;
  if (static_cast<int>(h.size()) != T) throw ValidationError("sequential_fit: base history must have length T");
  for (int z : h)
    if (z != 0 && z != 1) throw ValidationError("sequential_fit: base history entries must be 0 or 1");
  return h;
}

std::vector<int> node_prefix(const std::vector<int>& history, int t, int arm) {
  std::vector<int> p(history.begin(), history.begin() + (t - 1));
  p.push_back(arm);
  return p;
}

std::string prefix_string(const std::vector<int>& p) {
  std::string s;
  for (int z : p) s.push_back(static_cast<char>('0' + z));
  return s;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

DpmFit fit_role(const NodeData& d, Family family, const DpPrior& prior, const McmcConfig& mcmc, std::uint64_t seed) {
  return family == Family::Poisson ? fit_poisson_dpm(d.y, d.offset, d.X, prior, mcmc, seed)
                                   : fit_normal_dpm(d.y, d.X, prior, mcmc, seed);
}

}  // namespace

NodeFit fit_node(const Panel& panel, const Scaling& sc, const SequentialOptions& opts, int t, int arm,
                 const StateSummary* prev, std::uint64_t seed) {
  const int T = panel.periods();
  const auto history = full_history(opts, T);
  const auto prefix = node_prefix(history, t, arm);
  std::vector<Role> roles{Role::Mediator, Role::Outcome};
  if (t < T) roles.push_back(Role::Confounder);

  std::vector<NodeData> data;
  for (Role r : roles) data.push_back(node_data(panel, sc, opts.kind, r, prefix));
  if (data.front().units.size() < 2) {
    const auto n0 = panel.matching(node_prefix(history, t, 0)).size();
    const auto n1 = panel.matching(node_prefix(history, t, 1)).size();
    throw ValidationError("sequential_fit: regime " + prefix_string(prefix) + " at t " + std::to_string(t) +
                          " has too few units to fit (arm 0: " + std::to_string(n0) + ", arm 1: " +
                          std::to_string(n1) + ")");
  }

  std::vector<DpPrior> priors;
  NodeFit node;
  node.t = t;
  node.arm = arm;
  node.units = data.front().units.size();
  if (prev == nullptr) {
    for (std::size_t i = 0; i < roles.size(); ++i)
      priors.push_back(static_prior(data[i], role_family(roles[i], sc), opts.static_prior_variance, opts.hyper));
  } else {
    const arma::mat sigma = posterior_block_cov(*prev);
    const StateSummary evolved =
        evolve(*prev, sigma, derive_seed(seed, {0xe0, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(arm)}));
    const MvnParams mvn = fit_base_mvn(evolved);
    for (const auto& w : evolved.warnings) node.state.warnings.push_back(w);
    for (const auto& w : mvn.warnings) node.state.warnings.push_back(w);
    std::size_t start = 0;
    for (std::size_t i = 0; i < roles.size(); ++i) {
      const std::size_t w = prev->blocks.at(i);
      if (w != data[i].X.n_cols) throw ValidationError("sequential_fit: state block width does not match design");
      DpPrior p = opts.hyper;
      p.base_mean = mvn.mean.subvec(start, start + w - 1);
      p.base_cov = mvn.cov.submat(start, start, start + w - 1, start + w - 1);
      priors.push_back(std::move(p));
      start += w;
    }
    node.state.sigma = sigma;
  }

  std::vector<DpmFit> fits(roles.size());
  parallel_for(roles.size(), opts.threads, [&](std::size_t i) {
    fits[i] = fit_role(data[i], role_family(roles[i], sc), priors[i], opts.mcmc, node_seed(seed, t, arm, roles[i]));
  });
  node.mediator = std::move(fits[0]);
  node.outcome = std::move(fits[1]);
  if (roles.size() > 2) node.confounder = std::move(fits[2]);

  node.state.t = t;
  node.state.arm = arm;
  std::vector<arma::mat> parts{node.mediator.base_mean_draws(), node.outcome.base_mean_draws()};
  if (node.confounder) parts.push_back(node.confounder->base_mean_draws());
  node.state.theta = arma::join_rows(parts[0], parts[1]);
  if (parts.size() > 2) node.state.theta = arma::join_rows(node.state.theta, parts[2]);
  for (const auto& p : parts) node.state.blocks.push_back(p.n_cols);
  return node;
}

namespace {

nlohmann::json node_json(const NodeFit& n, const std::string& fingerprint) {
  nlohmann::json j{{"format", "medchain-node-v1"},
                   {"fingerprint", fingerprint},
                   {"t", n.t},
                   {"arm", n.arm},
                   {"units", n.units},
                   {"mediator", to_json(n.mediator)},
                   {"outcome", to_json(n.outcome)},
                   {"state", to_json(n.state)}};
  if (n.confounder) j["confounder"] = to_json(*n.confounder);
  return j;
}

std::optional<NodeFit> load_node(const std::string& path, const std::string& fingerprint) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    const auto j = jsonio::read_file(path);
    if (j.at("format") != "medchain-node-v1" || j.at("fingerprint") != fingerprint) return std::nullopt;
    NodeFit n;
    n.t = j.at("t").get<int>();
    n.arm = j.at("arm").get<int>();
    n.units = j.at("units").get<std::size_t>();
    n.mediator = dpm_fit_from_json(j.at("mediator"));
    n.outcome = dpm_fit_from_json(j.at("outcome"));
    if (j.contains("confounder")) n.confounder = dpm_fit_from_json(j.at("confounder"));
    n.state = state_from_json(j.at("state"));
    return n;
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable checkpoint: refit
  }
}

}  // namespace

DpmChain sequential_fit(const Panel& panel, const SequentialOptions& opts, std::uint64_t seed) {
  auto report = validate_panel(panel, PanelRules{!opts.gaussian_outcome});
  if (!report.ok()) throw PanelValidationError(std::move(report));
  DpmChain chain;
  chain.T = panel.periods();
  chain.dynamic = opts.dynamic;
  chain.kind = opts.kind;
  chain.history = full_history(opts, chain.T);
  chain.scaling = Scaling::from_panel(panel, opts.gaussian_outcome);
  opts.mcmc.validate();

  std::string fingerprint;
  if (!opts.checkpoint_dir.empty()) {
    std::filesystem::create_directories(opts.checkpoint_dir);
    std::ostringstream fp;
    fp << "seed=" << seed << ";mcmc=" << opts.mcmc.iterations << "/" << opts.mcmc.burn_in << "/" << opts.mcmc.thin
       << ";dynamic=" << opts.dynamic << ";kind=" << design_kind_name(opts.kind)
       << ";history=" << prefix_string(chain.history) << ";prior_var=" << opts.static_prior_variance << ";gaussian=" << opts.gaussian_outcome
       << ";panel=" << fnv1a(format_panel(panel));
    fingerprint = fp.str();
  }

  for (int t = 1; t <= chain.T; ++t) {
    for (int arm = 0; arm <= 1; ++arm) {
      std::string path;
      if (!opts.checkpoint_dir.empty()) {
        path = opts.checkpoint_dir + "/node_t" + std::to_string(t) + "_z" + std::to_string(arm) + ".json";
        if (auto loaded = load_node(path, fingerprint)) {
          chain.nodes.emplace(std::make_pair(t, arm), std::move(*loaded));
          continue;
        }
      }
      const StateSummary* prev = nullptr;
      if (opts.dynamic && t > 1) prev = &chain.node(t - 1, arm).state;
      NodeFit n = fit_node(panel, chain.scaling, opts, t, arm, prev, seed);
      for (const auto* f : {&n.mediator, &n.outcome}) for (const auto& w : f->warnings)
        chain.warnings.push_back("t " + std::to_string(t) + " arm " + std::to_string(arm) + ": " + w);
      for (const auto& w : n.state.warnings)
        chain.warnings.push_back("t " + std::to_string(t) + " arm " + std::to_string(arm) + ": " + w);
      if (!path.empty()) jsonio::write_file(path, node_json(n, fingerprint));
      chain.nodes.emplace(std::make_pair(t, arm), std::move(n));
    }
  }
  return chain;
}

FittedRegime to_regime(const DpmChain& chain, const std::string& model, std::uint64_t seed) {
  FittedRegime r;
  r.model = model;
  r.T = chain.T;
  r.history = chain.history;
  r.scaling = chain.scaling;
  r.warnings = chain.warnings;
  for (const auto& [key, node] : chain.nodes) {
    auto add = [&](Role role, const DpmFit& fit) {
      CellModel c;
      c.role = role;
      c.t = node.t;
      c.arm = node.arm;
      c.family = fit.kernel == Kernel::Poisson ? Family::Poisson : Family::Normal;
      c.features.kind = chain.kind;
      c.features.role = role;
      c.features.t = node.t;
      c.draws = mixture_draws(fit, node_seed(seed, node.t, node.arm, role));
      r.add(std::move(c));
    };
    add(Role::Mediator, node.mediator);
    add(Role::Outcome, node.outcome);
    if (node.confounder) add(Role::Confounder, *node.confounder);
  }
  return r;
}

}  // namespace medchain
