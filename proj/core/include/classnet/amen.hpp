#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace classnet::amen {

// Negative-binomial additive and multiplicative effects network model:
//   y_ij ~ NB(mu_ij, r),  log mu_ij = alpha_i + beta_j + z_i' w_j,
// with NB2 variance mu + mu^2 / r. Diagonal dyads are excluded throughout.

struct Priors {
  double sigma_alpha = 1.0;
  double sigma_beta = 1.0;
  double sigma_z = 1.0;
  double sigma_w = 1.0;
  double mu_r = 0.0;     // prior mean of log r
  double sigma_r = 1.0;  // prior sd of log r
};

struct AmenConfig {
  int dim = 2;
  Priors priors;
  double mala_step = 0.1;
  double scale_alpha = 0.3;
  double scale_beta = 0.3;
  double scale_log_r = 0.2;
  int iterations = 5000;
  int burn_in = 1000;
  int thin = 1;
  std::uint64_t seed = 1;
  int chains = 1;
  // Robbins-Monro tuning of step sizes during burn-in only.
  bool adapt = true;
  double target_mala_acceptance = 0.57;
  double target_mh_acceptance = 0.44;
  int max_nonfinite_sweeps = 20;

  void validate() const;  // throws ArgumentError
};

struct AmenState {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  Eigen::MatrixXd Z;  // N x d sender positions
  Eigen::MatrixXd W;  // N x d receiver positions
  double log_r = 0.0;

  int n() const { return static_cast<int>(alpha.size()); }
  int dim() const { return static_cast<int>(Z.cols()); }
  bool finite() const;
  Eigen::MatrixXd log_mean() const;  // alpha_i + beta_j + z_i'w_j (diagonal included)
};

// alpha, beta, log r at 0; Z, W ~ N(0, 0.1^2).
AmenState initial_state(int n, int dim, std::mt19937_64& rng);

// Number of free parameters counted by BIC: 2N + 2Nd + 1.
int parameter_count(int n, int dim);

// Throws ArgumentError unless y is square, finite, non-negative and
// integer-valued. The diagonal is not inspected.
void validate_counts(const Eigen::MatrixXd& y);

// log NB2 pmf of a single count.
double nb_logpmf(double y, double mu, double r);

double nb_loglik(const Eigen::MatrixXd& y, const AmenState& state);
// Pointwise log-likelihood per dyad, row-major over i != j.
Eigen::VectorXd pointwise_loglik(const Eigen::MatrixXd& y, const AmenState& state);
double log_prior(const AmenState& state, const Priors& priors);
double log_posterior(const Eigen::MatrixXd& y, const AmenState& state, const Priors& priors);

enum class Role { Sender, Receiver };

// Gradient of the log posterior with respect to z_i (Sender) or w_j
// (Receiver).
Eigen::VectorXd grad_latent(const Eigen::MatrixXd& y, const AmenState& state,
                            const Priors& priors, Role role, int index);

// Full gradient of the log posterior, every block, laid out as a state.
AmenState grad_log_posterior(const Eigen::MatrixXd& y, const AmenState& state,
                             const Priors& priors);

struct MalaResult {
  bool accepted = false;
  bool nonfinite = false;
  double log_ratio = 0.0;
  // log q(x | x') - log q(x' | x), the asymmetric proposal correction.
  double correction = 0.0;
};

// One Langevin update of a single latent row.
MalaResult mala_step(const Eigen::MatrixXd& y, AmenState& state, const Priors& priors,
                     Role role, int index, double step, std::mt19937_64& rng);

enum class ScalarBlock { Alpha, Beta, LogR };

// Symmetric normal random walk on alpha_i, beta_j or log r (index ignored).
bool mh_step(const Eigen::MatrixXd& y, AmenState& state, const Priors& priors,
             ScalarBlock block, int index, double scale, std::mt19937_64& rng);

struct AcceptanceRates {
  double alpha = 0.0;
  double beta = 0.0;
  double z = 0.0;
  double w = 0.0;
  double log_r = 0.0;
};

struct PosteriorSamples {
  int chain = 0;
  std::uint64_t seed = 0;
  std::vector<int> iterations;
  std::vector<AmenState> draws;
  std::vector<double> loglik;
  std::vector<double> logpost;
  Eigen::MatrixXd pointwise;  // draws x dyads
  AcceptanceRates acceptance;  // post burn-in
  double mala_step_z = 0.0;
  double mala_step_w = 0.0;
  std::size_t nonfinite_proposals = 0;

  std::size_t size() const { return draws.size(); }
  std::size_t map_index() const;  // highest log posterior draw
};

PosteriorSamples fit_chain(const Eigen::MatrixXd& y, const AmenConfig& config, int chain_index);
// One PosteriorSamples per chain, chain c seeded with seed + c. Chains run
// on separate threads and are returned in chain order.
std::vector<PosteriorSamples> fit(const Eigen::MatrixXd& y, const AmenConfig& config);

// Orthogonal R (d x d) minimising ||X R - Y||_F.
Eigen::MatrixXd procrustes_rotation(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

// Rotation applied to the stacked [Z; W] of `state` to match the stacked
// reference; returns the transform used.
Eigen::MatrixXd align_state(AmenState& state, const Eigen::MatrixXd& ref_z,
                            const Eigen::MatrixXd& ref_w);

PosteriorSamples procrustes_align(const PosteriorSamples& samples, const AmenState& reference);

// Posterior mean state after aligning every draw to the chain's MAP draw.
AmenState posterior_mean(const PosteriorSamples& samples);

struct InformationCriteria {
  double bic = 0.0;
  double dic = 0.0;
  double waic = 0.0;
  double p_d = 0.0;
  double p_waic = 0.0;
  double lppd = 0.0;
};

InformationCriteria information_criteria(const PosteriorSamples& samples, const Eigen::MatrixXd& y);

struct LatentSummary {
  Eigen::MatrixXd z_mean;  // N x d
  Eigen::MatrixXd w_mean;
  Eigen::MatrixXd z_between_sd;  // sd of per-chain means
  Eigen::MatrixXd w_between_sd;
  Eigen::VectorXd alpha_mean;
  Eigen::VectorXd beta_mean;
  double r_mean = 0.0;

  // N x 2d: sender axes 1..d then receiver axes 1..d.
  Eigen::MatrixXd mediators() const;
};

struct MultiChainResult {
  int reference_chain = 0;
  bool dic_tie = false;
  std::vector<double> dic;
  AmenState reference;  // MAP draw of the reference chain
  std::vector<PosteriorSamples> aligned;
  std::vector<LatentSummary> per_chain;
  LatentSummary pooled;
};

// Picks the lowest-DIC chain (ties to the lowest index), aligns every draw
// of every chain to that chain's MAP draw and pools.
MultiChainResult multi_chain_reference(const std::vector<PosteriorSamples>& chains,
                                       const Eigen::MatrixXd& y);

// Posterior mean of mu_ij over every draw of every chain (diagonal zero).
Eigen::MatrixXd posterior_mean_rate(const std::vector<PosteriorSamples>& chains);

// Draws y ~ NB(mu, r) off the diagonal.
Eigen::MatrixXd simulate(const AmenState& truth, std::mt19937_64& rng);
AmenState random_state(int n, int dim, double effect_sd, double latent_sd, double log_r,
                       std::mt19937_64& rng);

struct DimensionRow {
  int dim = 0;
  InformationCriteria criteria;  // averaged over chains
};
std::vector<DimensionRow> compare_dimensions(const Eigen::MatrixXd& y, AmenConfig config,
                                             const std::vector<int>& dims);

// Archive: one JSON object per line per draw.
void write_samples(const std::filesystem::path& path, const std::vector<PosteriorSamples>& chains);
std::vector<PosteriorSamples> read_samples(const std::filesystem::path& path, const Eigen::MatrixXd& y);

// student_id,z1..zd,w1..wd (pooled aligned posterior means).
void write_latents(const std::filesystem::path& path, const std::vector<std::string>& ids,
                   const LatentSummary& summary);
struct LatentTable {
  std::vector<std::string> ids;
  Eigen::MatrixXd mediators;  // N x 2d
  int dim = 0;
};
LatentTable read_latents(const std::filesystem::path& path);

// Posterior mean / sd per parameter.
void write_summary(const std::filesystem::path& path, const std::vector<std::string>& ids,
                   const MultiChainResult& result);

}  // namespace classnet::amen
