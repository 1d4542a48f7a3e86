#include "classnet/amen.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "classnet/csv.hpp"
#include "classnet/data_model.hpp"
#include "classnet/error.hpp"

namespace classnet::amen {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_add_exp(double a, double b) {
  double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// Terms of the NB2 log pmf that depend on eta = log mu:
// r (log r - log(r + mu)) + y (eta - log(r + mu)).
double kernel(double y, double eta, double log_r, double r) {
  double l = log_add_exp(log_r, eta);
  return r * (log_r - l) + y * (eta - l);
}

// d kernel / d eta = r (y - mu) / (r + mu), evaluated stably.
double kernel_grad(double y, double eta, double log_r, double r) {
  // mu / (r + mu) = sigmoid(eta - log r)
  double t = eta - log_r;
  double s = t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
  return y - (r + y) * s;
}

double normal_logpdf(double x, double mean, double sd) {
  double z = (x - mean) / sd;
  return -0.5 * (kLog2Pi + z * z) - std::log(sd);
}

// Conditional log target (up to constants) and gradient for one latent
// row with the rest of the state fixed.
double latent_conditional(const MatrixXd& y, const AmenState& s, const Priors& p, Role role,
                          Index k, const VectorXd& x, VectorXd* grad) {
  const Index n = s.n();
  const double r = std::exp(s.log_r);
  const double sd = role == Role::Sender ? p.sigma_z : p.sigma_w;
  double f = -0.5 * x.squaredNorm() / (sd * sd);
  if (grad) *grad = -x / (sd * sd);
  for (Index o = 0; o < n; ++o) {
    if (o == k) continue;
    double eta;
    double yy;
    if (role == Role::Sender) {
      eta = s.alpha(k) + s.beta(o) + x.dot(s.W.row(o));
      yy = y(k, o);
    } else {
      eta = s.alpha(o) + s.beta(k) + s.Z.row(o).dot(x);
      yy = y(o, k);
    }
    f += kernel(yy, eta, s.log_r, r);
    if (grad) {
      double g = kernel_grad(yy, eta, s.log_r, r);
      if (role == Role::Sender) *grad += g * s.W.row(o).transpose();
      else *grad += g * s.Z.row(o).transpose();
    }
  }
  return f;
}

double scalar_conditional(const MatrixXd& y, const AmenState& s, const Priors& p, ScalarBlock block,
                          Index k, double value) {
  const Index n = s.n();
  const double r = std::exp(s.log_r);
  if (block == ScalarBlock::Alpha) {
    double f = -0.5 * value * value / (p.sigma_alpha * p.sigma_alpha);
    for (Index j = 0; j < n; ++j) {
      if (j == k) continue;
      f += kernel(y(k, j), value + s.beta(j) + s.Z.row(k).dot(s.W.row(j)), s.log_r, r);
    }
    return f;
  }
  if (block == ScalarBlock::Beta) {
    double f = -0.5 * value * value / (p.sigma_beta * p.sigma_beta);
    for (Index i = 0; i < n; ++i) {
      if (i == k) continue;
      f += kernel(y(i, k), s.alpha(i) + value + s.Z.row(i).dot(s.W.row(k)), s.log_r, r);
    }
    return f;
  }
  AmenState t = s;
  t.log_r = value;
  return nb_loglik(y, t) + normal_logpdf(value, p.mu_r, p.sigma_r);
}

void check_state(const MatrixXd& y, const AmenState& s) {
  if (y.rows() != s.n() || y.cols() != s.n()) throw ArgumentError("count matrix and state disagree on N");
  if (s.beta.size() != s.n() || s.Z.rows() != s.n() || s.W.rows() != s.n() || s.W.cols() != s.Z.cols()) {
    throw ArgumentError("inconsistent state dimensions");
  }
}

std::size_t dyad_count(Index n) { return static_cast<std::size_t>(n * (n - 1)); }

}  // namespace

void AmenConfig::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ArgumentError(std::string(what) + " must be positive");
  };
  if (dim < 1) throw ArgumentError("latent dimension must be at least 1");
  positive(priors.sigma_alpha, "sigma_alpha");
  positive(priors.sigma_beta, "sigma_beta");
  positive(priors.sigma_z, "sigma_z");
  positive(priors.sigma_w, "sigma_w");
  positive(priors.sigma_r, "sigma_r");
  if (!std::isfinite(priors.mu_r)) throw ArgumentError("mu_r must be finite");
  positive(mala_step, "mala_step");
  positive(scale_alpha, "scale_alpha");
  positive(scale_beta, "scale_beta");
  positive(scale_log_r, "scale_log_r");
  if (iterations < 1) throw ArgumentError("iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations) throw ArgumentError("burn-in must lie in [0, iterations)");
  if (thin < 1) throw ArgumentError("thin must be positive");
  if (chains < 1) throw ArgumentError("chains must be positive");
}

bool AmenState::finite() const {
  return alpha.allFinite() && beta.allFinite() && Z.allFinite() && W.allFinite() && std::isfinite(log_r);
}

MatrixXd AmenState::log_mean() const {
  MatrixXd eta = Z * W.transpose();
  eta.colwise() += alpha;
  eta.rowwise() += beta.transpose();
  return eta;
}

AmenState initial_state(int n, int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 0.1);
  AmenState s;
  s.alpha = VectorXd::Zero(n);
  s.beta = VectorXd::Zero(n);
  s.Z.resize(n, dim);
  s.W.resize(n, dim);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < dim; ++k) s.Z(i, k) = normal(rng);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < dim; ++k) s.W(i, k) = normal(rng);
  s.log_r = 0.0;
  return s;
}

int parameter_count(int n, int dim) { return 2 * n + 2 * n * dim + 1; }

void validate_counts(const MatrixXd& y) {
  if (y.rows() != y.cols()) throw ArgumentError("count matrix is not square");
  for (Index i = 0; i < y.rows(); ++i)
    for (Index j = 0; j < y.cols(); ++j) {
      if (i == j) continue;
      double v = y(i, j);
      if (!std::isfinite(v) || v < 0.0 || v != std::floor(v)) {
        throw ArgumentError("count matrix entry (" + std::to_string(i) + "," + std::to_string(j) +
                            ") is not a non-negative integer");
      }
    }
}

double nb_logpmf(double y, double mu, double r) {
  return std::lgamma(y + r) - std::lgamma(r) - std::lgamma(y + 1.0) +
         kernel(y, std::log(mu), std::log(r), r);
}

double nb_loglik(const MatrixXd& y, const AmenState& state) {
  validate_counts(y);
  check_state(y, state);
  const Index n = state.n();
  const double r = std::exp(state.log_r);
  const double lg_r = std::lgamma(r);
  MatrixXd eta = state.log_mean();
  double total = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      double v = y(i, j);
      total += std::lgamma(v + r) - lg_r - std::lgamma(v + 1.0) + kernel(v, eta(i, j), state.log_r, r);
    }
  return total;
}

VectorXd pointwise_loglik(const MatrixXd& y, const AmenState& state) {
  check_state(y, state);
  const Index n = state.n();
  const double r = std::exp(state.log_r);
  const double lg_r = std::lgamma(r);
  MatrixXd eta = state.log_mean();
  VectorXd out(static_cast<Index>(dyad_count(n)));
  Index k = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      double v = y(i, j);
      out(k++) = std::lgamma(v + r) - lg_r - std::lgamma(v + 1.0) + kernel(v, eta(i, j), state.log_r, r);
    }
  return out;
}

double log_prior(const AmenState& s, const Priors& p) {
  double lp = 0.0;
  for (Index i = 0; i < s.alpha.size(); ++i) lp += normal_logpdf(s.alpha(i), 0.0, p.sigma_alpha);
  for (Index i = 0; i < s.beta.size(); ++i) lp += normal_logpdf(s.beta(i), 0.0, p.sigma_beta);
  for (Index i = 0; i < s.Z.size(); ++i) lp += normal_logpdf(s.Z.data()[i], 0.0, p.sigma_z);
  for (Index i = 0; i < s.W.size(); ++i) lp += normal_logpdf(s.W.data()[i], 0.0, p.sigma_w);
  lp += normal_logpdf(s.log_r, p.mu_r, p.sigma_r);
  return lp;
}

double log_posterior(const MatrixXd& y, const AmenState& state, const Priors& priors) {
  return nb_loglik(y, state) + log_prior(state, priors);
}

VectorXd grad_latent(const MatrixXd& y, const AmenState& state, const Priors& priors, Role role,
                     int index) {
  check_state(y, state);
  if (index < 0 || index >= state.n()) throw ArgumentError("grad_latent: index out of range");
  VectorXd x = role == Role::Sender ? VectorXd(state.Z.row(index)) : VectorXd(state.W.row(index));
  VectorXd g;
  latent_conditional(y, state, priors, role, index, x, &g);
  return g;
}

AmenState grad_log_posterior(const MatrixXd& y, const AmenState& s, const Priors& p) {
  check_state(y, s);
  const Index n = s.n();
  const double r = std::exp(s.log_r);
  MatrixXd eta = s.log_mean();
  MatrixXd g = MatrixXd::Zero(n, n);
  double grad_r = 0.0;
  const double dg_r = boost::math::digamma(r);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      double v = y(i, j);
      g(i, j) = kernel_grad(v, eta(i, j), s.log_r, r);
      double l = log_add_exp(s.log_r, eta(i, j));
      double ratio = std::exp(std::log(r + v) - l);  // (r + y) / (r + mu)
      grad_r += boost::math::digamma(v + r) - dg_r + s.log_r - l + 1.0 - ratio;
    }
  AmenState out;
  out.alpha = g.rowwise().sum() - s.alpha / (p.sigma_alpha * p.sigma_alpha);
  out.beta = g.colwise().sum().transpose() - s.beta / (p.sigma_beta * p.sigma_beta);
  out.Z = g * s.W - s.Z / (p.sigma_z * p.sigma_z);
  out.W = g.transpose() * s.Z - s.W / (p.sigma_w * p.sigma_w);
  out.log_r = r * grad_r - (s.log_r - p.mu_r) / (p.sigma_r * p.sigma_r);
  return out;
}

MalaResult mala_step(const MatrixXd& y, AmenState& state, const Priors& priors, Role role, int index,
                     double step, std::mt19937_64& rng) {
  if (!(step > 0.0)) throw ArgumentError("MALA step size must be positive");
  const Index d = state.dim();
  MatrixXd& rows = role == Role::Sender ? state.Z : state.W;
  VectorXd x = rows.row(index).transpose();
  VectorXd gx;
  double fx = latent_conditional(y, state, priors, role, index, x, &gx);

  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd xi(d);
  for (Index k = 0; k < d; ++k) xi(k) = normal(rng);
  const double half = 0.5 * step * step;
  VectorXd prop = x + half * gx + step * xi;

  MalaResult res;
  VectorXd gp;
  double fp = latent_conditional(y, state, priors, role, index, prop, &gp);
  double fwd = -(prop - x - half * gx).squaredNorm() / (2.0 * step * step);
  double bwd = -(x - prop - half * gp).squaredNorm() / (2.0 * step * step);
  res.correction = bwd - fwd;
  res.log_ratio = fp - fx + res.correction;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  if (!std::isfinite(fp) || !prop.allFinite() || !std::isfinite(res.log_ratio)) {
    res.nonfinite = true;
    return res;
  }
  if (std::log(u) < res.log_ratio) {
    rows.row(index) = prop.transpose();
    res.accepted = true;
  }
  return res;
}

bool mh_step(const MatrixXd& y, AmenState& state, const Priors& priors, ScalarBlock block, int index,
             double scale, std::mt19937_64& rng) {
  if (!(scale >= 0.0)) throw ArgumentError("MH scale must be non-negative");
  double& target = block == ScalarBlock::Alpha  ? state.alpha(index)
                   : block == ScalarBlock::Beta ? state.beta(index)
                                                : state.log_r;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double current = target;
  const double proposal = current + scale * normal(rng);
  const double u = unif(rng);
  if (proposal == current) return true;
  double fc = scalar_conditional(y, state, priors, block, index, current);
  double fp = scalar_conditional(y, state, priors, block, index, proposal);
  if (!std::isfinite(fp)) return false;
  if (std::log(u) < fp - fc) {
    target = proposal;
    return true;
  }
  return false;
}

std::size_t PosteriorSamples::map_index() const {
  if (logpost.empty()) throw StateError("no draws stored");
  return static_cast<std::size_t>(std::max_element(logpost.begin(), logpost.end()) - logpost.begin());
}

PosteriorSamples fit_chain(const MatrixXd& y, const AmenConfig& config, int chain_index) {
  config.validate();
  validate_counts(y);
  const Index n = y.rows();
  if (n < 2) throw ArgumentError("need at least two nodes");
  for (Index i = 0; i < n; ++i) {
    if (y(i, i) != 0.0) throw ArgumentError("count matrix diagonal must be zero");
  }

  PosteriorSamples out;
  out.chain = chain_index;
  out.seed = config.seed + static_cast<std::uint64_t>(chain_index);
  std::mt19937_64 rng(out.seed);
  AmenState s = initial_state(static_cast<int>(n), config.dim, rng);
  const Priors& p = config.priors;

  double eps_z = config.mala_step, eps_w = config.mala_step;
  double sc_a = config.scale_alpha, sc_b = config.scale_beta, sc_r = config.scale_log_r;
  double acc_a = 0, acc_b = 0, acc_z = 0, acc_w = 0, acc_r = 0;
  int kept_sweeps = 0;
  int nonfinite_run = 0;
  const double nd = static_cast<double>(n);

  for (int t = 0; t < config.iterations; ++t) {
    int a = 0, b = 0, z = 0, w = 0;
    for (Index i = 0; i < n; ++i) a += mh_step(y, s, p, ScalarBlock::Alpha, static_cast<int>(i), sc_a, rng);
    for (Index j = 0; j < n; ++j) b += mh_step(y, s, p, ScalarBlock::Beta, static_cast<int>(j), sc_b, rng);
    for (Index i = 0; i < n; ++i) {
      auto res = mala_step(y, s, p, Role::Sender, static_cast<int>(i), eps_z, rng);
      z += res.accepted;
      out.nonfinite_proposals += res.nonfinite;
    }
    for (Index j = 0; j < n; ++j) {
      auto res = mala_step(y, s, p, Role::Receiver, static_cast<int>(j), eps_w, rng);
      w += res.accepted;
      out.nonfinite_proposals += res.nonfinite;
    }
    bool r_acc = mh_step(y, s, p, ScalarBlock::LogR, 0, sc_r, rng);

    if (t < config.burn_in) {
      if (config.adapt) {
        double gamma = 1.0 / std::pow(static_cast<double>(t) + 10.0, 0.6);
        eps_z *= std::exp(gamma * (z / nd - config.target_mala_acceptance));
        eps_w *= std::exp(gamma * (w / nd - config.target_mala_acceptance));
        sc_a *= std::exp(gamma * (a / nd - config.target_mh_acceptance));
        sc_b *= std::exp(gamma * (b / nd - config.target_mh_acceptance));
        sc_r *= std::exp(gamma * ((r_acc ? 1.0 : 0.0) - config.target_mh_acceptance));
      }
    } else {
      acc_a += a / nd;
      acc_b += b / nd;
      acc_z += z / nd;
      acc_w += w / nd;
      acc_r += r_acc;
      ++kept_sweeps;
    }

    const bool store = t >= config.burn_in && (t - config.burn_in) % config.thin == 0;
    double ll = nb_loglik(y, s);
    double lp = ll + log_prior(s, p);
    if (!std::isfinite(lp)) {
      if (++nonfinite_run >= config.max_nonfinite_sweeps) {
        std::ostringstream msg;
        msg << "chain " << chain_index << " diverged at iteration " << t << ": log posterior " << lp
            << ", log r " << s.log_r << ", max |alpha| " << s.alpha.cwiseAbs().maxCoeff()
            << ", max |Z| " << s.Z.cwiseAbs().maxCoeff() << ", max |W| " << s.W.cwiseAbs().maxCoeff();
        throw DivergenceError(msg.str());
      }
    } else {
      nonfinite_run = 0;
    }
    if (store) {
      out.iterations.push_back(t);
      out.draws.push_back(s);
      out.loglik.push_back(ll);
      out.logpost.push_back(lp);
    }
  }

  const auto dyads = static_cast<Index>(dyad_count(n));
  out.pointwise.resize(static_cast<Index>(out.draws.size()), dyads);
  for (std::size_t k = 0; k < out.draws.size(); ++k) {
    out.pointwise.row(static_cast<Index>(k)) = pointwise_loglik(y, out.draws[k]).transpose();
  }
  if (kept_sweeps > 0) {
    out.acceptance = {acc_a / kept_sweeps, acc_b / kept_sweeps, acc_z / kept_sweeps,
                      acc_w / kept_sweeps, acc_r / kept_sweeps};
  }
  out.mala_step_z = eps_z;
  out.mala_step_w = eps_w;
  return out;
}

std::vector<PosteriorSamples> fit(const MatrixXd& y, const AmenConfig& config) {
  config.validate();
  std::vector<PosteriorSamples> chains(static_cast<std::size_t>(config.chains));
  std::vector<std::exception_ptr> errors(chains.size());
  auto run = [&](int c) {
    try {
      chains[static_cast<std::size_t>(c)] = fit_chain(y, config, c);
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (config.chains == 1 || hw == 1) {
    for (int c = 0; c < config.chains; ++c) run(c);
  } else {
    std::vector<std::thread> threads;
    for (int c = 0; c < config.chains; ++c) threads.emplace_back(run, c);
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return chains;
}

MatrixXd procrustes_rotation(const MatrixXd& x, const MatrixXd& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw ArgumentError("procrustes: configurations differ in shape");
  }
  Eigen::JacobiSVD<MatrixXd> svd(x.transpose() * y, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

MatrixXd align_state(AmenState& state, const MatrixXd& ref_z, const MatrixXd& ref_w) {
  if (ref_z.rows() != state.Z.rows() || ref_z.cols() != state.Z.cols() ||
      ref_w.rows() != state.W.rows() || ref_w.cols() != state.W.cols()) {
    throw ArgumentError("procrustes: reference dimension mismatch");
  }
  const Index n = state.Z.rows();
  const Index d = state.Z.cols();
  MatrixXd x(2 * n, d), target(2 * n, d);
  x << state.Z, state.W;
  target << ref_z, ref_w;
  MatrixXd rot = procrustes_rotation(x, target);
  state.Z = state.Z * rot;
  state.W = state.W * rot;
  return rot;
}

PosteriorSamples procrustes_align(const PosteriorSamples& samples, const AmenState& reference) {
  PosteriorSamples out = samples;
  for (auto& d : out.draws) align_state(d, reference.Z, reference.W);
  return out;
}

namespace {

AmenState mean_state(const std::vector<AmenState>& draws) {
  AmenState m = draws.front();
  m.alpha.setZero();
  m.beta.setZero();
  m.Z.setZero();
  m.W.setZero();
  m.log_r = 0.0;
  for (const auto& d : draws) {
    m.alpha += d.alpha;
    m.beta += d.beta;
    m.Z += d.Z;
    m.W += d.W;
    m.log_r += d.log_r;
  }
  const double k = static_cast<double>(draws.size());
  m.alpha /= k;
  m.beta /= k;
  m.Z /= k;
  m.W /= k;
  m.log_r /= k;
  return m;
}

}  // namespace

AmenState posterior_mean(const PosteriorSamples& samples) {
  if (samples.draws.empty()) throw StateError("posterior_mean: no draws");
  const AmenState& ref = samples.draws[samples.map_index()];
  return mean_state(procrustes_align(samples, ref).draws);
}

InformationCriteria information_criteria(const PosteriorSamples& samples, const MatrixXd& y) {
  if (samples.draws.empty()) throw StateError("information criteria need at least one draw");
  if (samples.pointwise.rows() != static_cast<Index>(samples.draws.size())) {
    throw StateError("pointwise log-likelihood archive is missing");
  }
  InformationCriteria ic;
  const Index n = samples.draws.front().n();
  const int dim = samples.draws.front().dim();
  AmenState mean = posterior_mean(samples);
  const double ll_bar = nb_loglik(y, mean);
  double mean_ll = 0.0;
  for (double v : samples.loglik) mean_ll += v;
  mean_ll /= static_cast<double>(samples.loglik.size());
  ic.p_d = 2.0 * (ll_bar - mean_ll);
  ic.dic = -2.0 * ll_bar + 2.0 * ic.p_d;

  const Index s = samples.pointwise.rows();
  for (Index k = 0; k < samples.pointwise.cols(); ++k) {
    auto col = samples.pointwise.col(k);
    double mx = col.maxCoeff();
    double lme = mx + std::log((col.array() - mx).exp().sum() / static_cast<double>(s));
    ic.lppd += lme;
    if (s > 1) {
      double mu = col.mean();
      ic.p_waic += (col.array() - mu).square().sum() / static_cast<double>(s - 1);
    }
  }
  ic.waic = -2.0 * (ic.lppd - ic.p_waic);

  double max_ll = *std::max_element(samples.loglik.begin(), samples.loglik.end());
  ic.bic = -2.0 * max_ll + parameter_count(static_cast<int>(n), dim) *
                               std::log(static_cast<double>(dyad_count(n)));
  return ic;
}

MatrixXd LatentSummary::mediators() const {
  MatrixXd m(z_mean.rows(), z_mean.cols() + w_mean.cols());
  m << z_mean, w_mean;
  return m;
}

namespace {

LatentSummary summarise(const std::vector<const PosteriorSamples*>& chains) {
  std::vector<AmenState> all;
  std::vector<AmenState> chain_means;
  for (const auto* c : chains) {
    all.insert(all.end(), c->draws.begin(), c->draws.end());
    chain_means.push_back(mean_state(c->draws));
  }
  AmenState pooled = mean_state(all);
  LatentSummary s;
  s.z_mean = pooled.Z;
  s.w_mean = pooled.W;
  s.alpha_mean = pooled.alpha;
  s.beta_mean = pooled.beta;
  double r_sum = 0.0;
  for (const auto& d : all) r_sum += std::exp(d.log_r);
  s.r_mean = r_sum / static_cast<double>(all.size());
  s.z_between_sd = MatrixXd::Zero(pooled.Z.rows(), pooled.Z.cols());
  s.w_between_sd = MatrixXd::Zero(pooled.W.rows(), pooled.W.cols());
  if (chain_means.size() > 1) {
    MatrixXd zbar = MatrixXd::Zero(pooled.Z.rows(), pooled.Z.cols());
    MatrixXd wbar = zbar;
    for (const auto& m : chain_means) {
      zbar += m.Z;
      wbar += m.W;
    }
    const double k = static_cast<double>(chain_means.size());
    zbar /= k;
    wbar /= k;
    for (const auto& m : chain_means) {
      s.z_between_sd += (m.Z - zbar).array().square().matrix();
      s.w_between_sd += (m.W - wbar).array().square().matrix();
    }
    s.z_between_sd = (s.z_between_sd / (k - 1.0)).array().sqrt().matrix();
    s.w_between_sd = (s.w_between_sd / (k - 1.0)).array().sqrt().matrix();
  }
  return s;
}

}  // namespace

MultiChainResult multi_chain_reference(const std::vector<PosteriorSamples>& chains, const MatrixXd& y) {
  if (chains.empty()) throw StateError("multi_chain_reference: no chains");
  MultiChainResult out;
  for (const auto& c : chains) out.dic.push_back(information_criteria(c, y).dic);
  for (std::size_t c = 1; c < chains.size(); ++c) {
    if (out.dic[c] < out.dic[static_cast<std::size_t>(out.reference_chain)]) {
      out.reference_chain = static_cast<int>(c);
    }
  }
  const double best = out.dic[static_cast<std::size_t>(out.reference_chain)];
  out.dic_tie = std::count(out.dic.begin(), out.dic.end(), best) > 1;
  const auto& ref_chain = chains[static_cast<std::size_t>(out.reference_chain)];
  out.reference = ref_chain.draws[ref_chain.map_index()];

  std::vector<const PosteriorSamples*> ptrs;
  for (const auto& c : chains) out.aligned.push_back(procrustes_align(c, out.reference));
  for (const auto& c : out.aligned) {
    ptrs.push_back(&c);
    out.per_chain.push_back(summarise({&c}));
  }
  out.pooled = summarise(ptrs);
  return out;
}

MatrixXd posterior_mean_rate(const std::vector<PosteriorSamples>& chains) {
  MatrixXd sum;
  std::size_t count = 0;
  for (const auto& c : chains) {
    for (const auto& d : c.draws) {
      MatrixXd mu = d.log_mean().array().exp().matrix();
      if (sum.size() == 0) sum = MatrixXd::Zero(mu.rows(), mu.cols());
      sum += mu;
      ++count;
    }
  }
  if (count == 0) throw StateError("posterior_mean_rate: no draws");
  sum /= static_cast<double>(count);
  sum.diagonal().setZero();
  return sum;
}

MatrixXd simulate(const AmenState& truth, std::mt19937_64& rng) {
  const Index n = truth.n();
  const double r = std::exp(truth.log_r);
  MatrixXd eta = truth.log_mean();
  MatrixXd y = MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      double mu = std::exp(eta(i, j));
      std::gamma_distribution<double> gamma(r, mu / r);
      double lambda = gamma(rng);
      std::poisson_distribution<long> pois(lambda);
      y(i, j) = lambda > 0.0 ? static_cast<double>(pois(rng)) : 0.0;
    }
  return y;
}

AmenState random_state(int n, int dim, double effect_sd, double latent_sd, double log_r,
                       std::mt19937_64& rng) {
  std::normal_distribution<double> e(0.0, effect_sd), l(0.0, latent_sd);
  AmenState s;
  s.alpha.resize(n);
  s.beta.resize(n);
  s.Z.resize(n, dim);
  s.W.resize(n, dim);
  for (Index i = 0; i < n; ++i) s.alpha(i) = e(rng);
  for (Index i = 0; i < n; ++i) s.beta(i) = e(rng);
  for (Index i = 0; i < s.Z.size(); ++i) s.Z.data()[i] = l(rng);
  for (Index i = 0; i < s.W.size(); ++i) s.W.data()[i] = l(rng);
  s.log_r = log_r;
  return s;
}

std::vector<DimensionRow> compare_dimensions(const MatrixXd& y, AmenConfig config,
                                             const std::vector<int>& dims) {
  std::vector<DimensionRow> rows;
  for (int d : dims) {
    config.dim = d;
    auto chains = fit(y, config);
    DimensionRow row;
    row.dim = d;
    for (const auto& c : chains) {
      auto ic = information_criteria(c, y);
      row.criteria.bic += ic.bic;
      row.criteria.dic += ic.dic;
      row.criteria.waic += ic.waic;
      row.criteria.p_d += ic.p_d;
      row.criteria.p_waic += ic.p_waic;
      row.criteria.lppd += ic.lppd;
    }
    const double k = static_cast<double>(chains.size());
    row.criteria.bic /= k;
    row.criteria.dic /= k;
    row.criteria.waic /= k;
    row.criteria.p_d /= k;
    row.criteria.p_waic /= k;
    row.criteria.lppd /= k;
    rows.push_back(row);
  }
  return rows;
}

namespace {

nlohmann::json matrix_json(const MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(row);
  }
  return rows;
}

MatrixXd matrix_from_json(const nlohmann::json& j, Index cols_hint) {
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows ? static_cast<Index>(j[0].size()) : cols_hint;
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (static_cast<Index>(j[i].size()) != cols) throw ParseError("ragged matrix in sample archive");
    for (Index k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

VectorXd vector_from_json(const nlohmann::json& j) {
  VectorXd v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

}  // namespace

void write_samples(const std::filesystem::path& path, const std::vector<PosteriorSamples>& chains) {
  std::ostringstream out;
  for (const auto& c : chains) {
    nlohmann::json head = {{"type", "chain"},
                           {"chain", c.chain},
                           {"seed", c.seed},
                           {"acceptance",
                            {{"alpha", c.acceptance.alpha},
                             {"beta", c.acceptance.beta},
                             {"z", c.acceptance.z},
                             {"w", c.acceptance.w},
                             {"log_r", c.acceptance.log_r}}},
                           {"mala_step_z", c.mala_step_z},
                           {"mala_step_w", c.mala_step_w},
                           {"nonfinite_proposals", c.nonfinite_proposals}};
    out << head.dump() << '\n';
    for (std::size_t k = 0; k < c.draws.size(); ++k) {
      const auto& d = c.draws[k];
      nlohmann::json line = {{"type", "draw"},
                             {"chain", c.chain},
                             {"iteration", c.iterations[k]},
                             {"alpha", std::vector<double>(d.alpha.data(), d.alpha.data() + d.alpha.size())},
                             {"beta", std::vector<double>(d.beta.data(), d.beta.data() + d.beta.size())},
                             {"Z", matrix_json(d.Z)},
                             {"W", matrix_json(d.W)},
                             {"log_r", d.log_r},
                             {"loglik", c.loglik[k]},
                             {"logpost", c.logpost[k]}};
      out << line.dump() << '\n';
    }
  }
  write_file(path, out.str());
}

std::vector<PosteriorSamples> read_samples(const std::filesystem::path& path, const MatrixXd& y) {
  std::vector<PosteriorSamples> chains;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t lineno = 0;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      int c = j.at("chain").get<int>();
      if (c < 0) throw ParseError("negative chain index");
      if (static_cast<std::size_t>(c) >= chains.size()) chains.resize(static_cast<std::size_t>(c) + 1);
      auto& ch = chains[static_cast<std::size_t>(c)];
      ch.chain = c;
      if (j.at("type") == "chain") {
        ch.seed = j.at("seed").get<std::uint64_t>();
        const auto& a = j.at("acceptance");
        ch.acceptance = {a.at("alpha"), a.at("beta"), a.at("z"), a.at("w"), a.at("log_r")};
        ch.mala_step_z = j.at("mala_step_z");
        ch.mala_step_w = j.at("mala_step_w");
        ch.nonfinite_proposals = j.value("nonfinite_proposals", std::size_t{0});
        continue;
      }
      AmenState s;
      s.alpha = vector_from_json(j.at("alpha"));
      s.beta = vector_from_json(j.at("beta"));
      s.Z = matrix_from_json(j.at("Z"), 0);
      s.W = matrix_from_json(j.at("W"), 0);
      s.log_r = j.at("log_r").get<double>();
      ch.iterations.push_back(j.at("iteration").get<int>());
      ch.draws.push_back(std::move(s));
      ch.loglik.push_back(j.at("loglik").get<double>());
      ch.logpost.push_back(j.at("logpost").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": line " + std::to_string(lineno) + ": " + e.what());
  }
  for (auto& c : chains) {
    if (c.draws.empty()) continue;
    c.pointwise.resize(static_cast<Index>(c.draws.size()), static_cast<Index>(dyad_count(y.rows())));
    for (std::size_t k = 0; k < c.draws.size(); ++k) {
      c.pointwise.row(static_cast<Index>(k)) = pointwise_loglik(y, c.draws[k]).transpose();
    }
  }
  return chains;
}

void write_latents(const std::filesystem::path& path, const std::vector<std::string>& ids,
                   const LatentSummary& summary) {
  std::ostringstream out;
  const Index d = summary.z_mean.cols();
  std::vector<std::string> header{"student_id"};
  for (Index k = 0; k < d; ++k) header.push_back("z" + std::to_string(k + 1));
  for (Index k = 0; k < d; ++k) header.push_back("w" + std::to_string(k + 1));
  csv::write_row(out, header);
  MatrixXd m = summary.mediators();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::vector<std::string> row{ids[i]};
    for (Index k = 0; k < m.cols(); ++k) {
      std::ostringstream s;
      s.precision(17);
      s << m(static_cast<Index>(i), k);
      row.push_back(s.str());
    }
    csv::write_row(out, row);
  }
  write_file(path, out.str());
}

LatentTable read_latents(const std::filesystem::path& path) {
  auto records = csv::parse(read_file(path));
  if (records.empty()) throw ParseError(path.string() + ": empty latent table");
  const auto& header = records.front().fields;
  if (header.size() < 3 || (header.size() - 1) % 2 != 0) {
    throw ParseError(path.string() + ": expected student_id plus 2d coordinate columns");
  }
  LatentTable t;
  t.dim = static_cast<int>((header.size() - 1) / 2);
  t.mediators.resize(static_cast<Index>(records.size() - 1), 2 * t.dim);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.size()) {
      throw ParseError(path.string() + ": line " + std::to_string(rec.line) + ": wrong field count");
    }
    t.ids.push_back(rec.fields[0]);
    for (int k = 0; k < 2 * t.dim; ++k) {
      try {
        t.mediators(static_cast<Index>(r - 1), k) = std::stod(rec.fields[static_cast<std::size_t>(k) + 1]);
      } catch (const std::exception&) {
        throw ParseError(path.string() + ": line " + std::to_string(rec.line) + ": bad coordinate");
      }
    }
  }
  return t;
}

void write_summary(const std::filesystem::path& path, const std::vector<std::string>& ids,
                   const MultiChainResult& result) {
  std::vector<AmenState> all;
  for (const auto& c : result.aligned) all.insert(all.end(), c.draws.begin(), c.draws.end());
  if (all.empty()) throw StateError("write_summary: no draws");
  std::ostringstream out;
  csv::write_row(out, {"parameter", "mean", "sd", "between_chain_sd"});
  auto stats = [&](auto getter) {
    double sum = 0, sq = 0;
    for (const auto& d : all) {
      double v = getter(d);
      sum += v;
      sq += v * v;
    }
    double k = static_cast<double>(all.size());
    double mean = sum / k;
    double var = all.size() > 1 ? std::max(0.0, (sq - k * mean * mean) / (k - 1.0)) : 0.0;
    std::vector<double> cm;
    for (const auto& c : result.aligned) {
      double s = 0;
      for (const auto& d : c.draws) s += getter(d);
      cm.push_back(s / static_cast<double>(c.draws.size()));
    }
    double between = 0.0;
    if (cm.size() > 1) {
      double m = 0;
      for (double v : cm) m += v;
      m /= static_cast<double>(cm.size());
      for (double v : cm) between += (v - m) * (v - m);
      between = std::sqrt(between / static_cast<double>(cm.size() - 1));
    }
    return std::array<double, 3>{mean, std::sqrt(var), between};
  };
  auto emit = [&](const std::string& name, std::array<double, 3> s) {
    std::vector<std::string> row{name};
    for (double v : s) {
      std::ostringstream o;
      o.precision(10);
      o << v;
      row.push_back(o.str());
    }
    csv::write_row(out, row);
  };
  const Index n = all.front().n();
  const Index d = all.front().dim();
  for (Index i = 0; i < n; ++i) emit("alpha[" + ids[static_cast<std::size_t>(i)] + "]", stats([i](const AmenState& s) { return s.alpha(i); }));
  for (Index i = 0; i < n; ++i) emit("beta[" + ids[static_cast<std::size_t>(i)] + "]", stats([i](const AmenState& s) { return s.beta(i); }));
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < d; ++k)
      emit("z[" + ids[static_cast<std::size_t>(i)] + "," + std::to_string(k + 1) + "]",
           stats([i, k](const AmenState& s) { return s.Z(i, k); }));
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < d; ++k)
      emit("w[" + ids[static_cast<std::size_t>(i)] + "," + std::to_string(k + 1) + "]",
           stats([i, k](const AmenState& s) { return s.W(i, k); }));
  emit("r", stats([](const AmenState& s) { return std::exp(s.log_r); }));
  write_file(path, out.str());
}

}  // namespace classnet::amen
