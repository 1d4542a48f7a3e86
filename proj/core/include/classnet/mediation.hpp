#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "classnet/amen.hpp"
#include "classnet/data_model.hpp"

namespace classnet::mediation {

// Regressions fitted per mediator k and for the outcome:
//   M_k = a0k + a1k x + a2k c
//   Y   = b0 + b1 x + sum_k b2k m_k + sum_k b3k x m_k + b4 c
struct MediationDesign {
  std::vector<std::string> ids;
  Eigen::VectorXd x;
  Eigen::VectorXd c;
  Eigen::MatrixXd m;  // N x K
  Eigen::VectorXd y;
  std::vector<std::string> mediator_names;
  Eigen::VectorXd mediator_means;  // subtracted when centred
  bool centered = false;
  std::vector<std::string> excluded;  // "id: reason"
  std::string gender_coding;

  int k() const { return static_cast<int>(m.cols()); }
  int n() const { return static_cast<int>(y.size()); }
};

struct DesignOptions {
  bool center_mediators = true;
};

// x = gender code, c = proficiency, y = post_score. Students with a missing
// outcome or pre-score, or absent from the latent table, are excluded.
MediationDesign make_design(const Roster& roster, const amen::LatentTable& latents,
                            const DesignOptions& options = {});

// Draws from the Gibbs sampler of one Gaussian linear model with
// coefficients ~ N(0, I) and sigma^2 ~ IG(0.001, 0.001).
struct LinearFit {
  std::vector<std::string> columns;
  Eigen::MatrixXd coef;    // draws x p
  Eigen::VectorXd sigma2;  // draws
};

LinearFit gibbs_regression(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int iterations,
                           int burn_in, std::mt19937_64& rng, std::vector<std::string> columns = {});

struct MediationPosterior {
  std::vector<LinearFit> mediator_models;  // one per k; columns 1, x, c
  LinearFit outcome_model;  // columns 1, x, m_1..m_K, x:m_1..x:m_K, c
  int k = 0;
  double c_mean = 0.0;
  std::vector<std::string> warnings;

  std::size_t draws() const { return static_cast<std::size_t>(outcome_model.sigma2.size()); }
};

// Throws FitError naming the column when x or c is constant.
MediationPosterior fit_mediation(const MediationDesign& design, int iterations, int burn_in,
                                 std::uint64_t seed);

struct Coefficients {
  Eigen::VectorXd a0, a1, a2;
  double b0 = 0.0, b1 = 0.0;
  Eigen::VectorXd b2, b3;
  double b4 = 0.0;
};

Coefficients coefficients_at(const MediationPosterior& posterior, std::size_t draw);

struct Effects {
  double nde = 0.0;
  double nie = 0.0;
  double te = 0.0;
};

Effects effects(const Coefficients& coef, double x, double x_star, double c);

struct EffectDraws {
  Eigen::VectorXd nde;
  Eigen::VectorXd nie;
  Eigen::VectorXd te;
};

// Per-draw effects. `c` defaults to the empirical share of c = 1, which is
// the average of NDE over the empirical confounder distribution.
EffectDraws effects(const MediationPosterior& posterior, double x = 1.0, double x_star = 0.0,
                    std::optional<double> c = std::nullopt);

struct EffectRow {
  std::string name;
  double mean = 0.0, sd = 0.0, lower = 0.0, upper = 0.0;
  // between-chain sd of each statistic
  double mean_sd = 0.0, sd_sd = 0.0, lower_sd = 0.0, upper_sd = 0.0;
  bool significant = false;
};

// Rows NIE, NDE, TE pooled over chains (mean of per-chain statistics,
// between-chain sd alongside). Star when the 95% interval excludes 0.
std::vector<EffectRow> report(const std::vector<EffectDraws>& chains);
bool interval_excludes_zero(double lower, double upper);

// Type-7 sample quantile.
double quantile(const Eigen::VectorXd& v, double p);

std::string report_csv(const std::vector<EffectRow>& rows, const std::string& header_comment = {});
std::string report_text(const std::vector<EffectRow>& rows, const std::string& title);

struct MediationRun {
  MediationDesign design;
  std::vector<MediationPosterior> chains;
  std::vector<EffectDraws> effects;
  std::vector<EffectRow> rows;
};

struct RunOptions {
  int chains = 10;
  int iterations = 6000;
  int burn_in = 1000;
  std::uint64_t seed = 1;
  double x = 1.0;
  double x_star = 0.0;
  std::optional<double> c;
  DesignOptions design;
};

MediationRun run(const Roster& roster, const amen::LatentTable& latents, const RunOptions& options);

}  // namespace classnet::mediation
