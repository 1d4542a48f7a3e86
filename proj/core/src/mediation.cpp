#include "classnet/mediation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "classnet/csv.hpp"
#include "classnet/error.hpp"

namespace classnet::mediation {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MediationDesign make_design(const Roster& roster, const amen::LatentTable& latents,
                            const DesignOptions& options) {
  std::unordered_map<std::string, Index> row_of;
  for (std::size_t i = 0; i < latents.ids.size(); ++i) row_of[latents.ids[i]] = static_cast<Index>(i);

  MediationDesign d;
  d.gender_coding = roster.gender_coding();
  const Index k = latents.mediators.cols();
  for (int a = 0; a < latents.dim; ++a) d.mediator_names.push_back("z" + std::to_string(a + 1));
  for (int a = 0; a < latents.dim; ++a) d.mediator_names.push_back("w" + std::to_string(a + 1));
  if (static_cast<Index>(d.mediator_names.size()) != k) {
    d.mediator_names.clear();
    for (Index a = 0; a < k; ++a) d.mediator_names.push_back("m" + std::to_string(a + 1));
  }

  std::vector<const Student*> kept;
  std::vector<Index> rows;
  for (const auto& s : roster.students()) {
    auto it = row_of.find(s.student_id);
    if (it == row_of.end()) {
      d.excluded.push_back(s.student_id + ": no latent position");
    } else if (!s.post_score) {
      d.excluded.push_back(s.student_id + ": missing post_score");
    } else if (!s.pre_score) {
      d.excluded.push_back(s.student_id + ": missing pre_score");
    } else {
      kept.push_back(&s);
      rows.push_back(it->second);
    }
  }
  const Index n = static_cast<Index>(kept.size());
  d.x.resize(n);
  d.c.resize(n);
  d.y.resize(n);
  d.m.resize(n, k);
  for (Index i = 0; i < n; ++i) {
    const Student& s = *kept[static_cast<std::size_t>(i)];
    d.ids.push_back(s.student_id);
    d.x(i) = s.gender;
    d.c(i) = *s.proficiency();
    d.y(i) = *s.post_score;
    d.m.row(i) = latents.mediators.row(rows[static_cast<std::size_t>(i)]);
  }
  d.mediator_means = n > 0 ? VectorXd(d.m.colwise().mean().transpose()) : VectorXd::Zero(k);
  if (options.center_mediators && n > 0) {
    d.m.rowwise() -= d.mediator_means.transpose();
    d.centered = true;
  }
  return d;
}

LinearFit gibbs_regression(const MatrixXd& x, const VectorXd& y, int iterations, int burn_in,
                           std::mt19937_64& rng, std::vector<std::string> columns) {
  if (x.rows() != y.size()) throw ArgumentError("design and outcome lengths differ");
  if (iterations < 1 || burn_in < 0 || burn_in >= iterations) {
    throw ArgumentError("need 0 <= burn-in < iterations");
  }
  const Index n = x.rows();
  const Index p = x.cols();
  const MatrixXd xtx = x.transpose() * x;
  const VectorXd xty = x.transpose() * y;
  const double a0 = 0.001, b0 = 0.001;

  LinearFit fit;
  fit.columns = std::move(columns);
  fit.coef.resize(iterations - burn_in, p);
  fit.sigma2.resize(iterations - burn_in);

  std::normal_distribution<double> normal(0.0, 1.0);
  double sigma2 = 1.0;
  VectorXd beta = VectorXd::Zero(p);
  for (int t = 0; t < iterations; ++t) {
    // beta | sigma2 ~ N(V X'y / sigma2, V), V = (X'X / sigma2 + I)^-1
    MatrixXd prec = xtx / sigma2 + MatrixXd::Identity(p, p);
    Eigen::LLT<MatrixXd> llt(prec);
    VectorXd mean = llt.solve(xty / sigma2);
    VectorXd zeta(p);
    for (Index k = 0; k < p; ++k) zeta(k) = normal(rng);
    // L L' = prec, so L'^-1 zeta has covariance prec^-1.
    beta = mean + llt.matrixU().solve(zeta);

    double ssr = (y - x * beta).squaredNorm();
    std::gamma_distribution<double> gamma(a0 + 0.5 * static_cast<double>(n), 1.0 / (b0 + 0.5 * ssr));
    sigma2 = 1.0 / gamma(rng);

    if (t >= burn_in) {
      fit.coef.row(t - burn_in) = beta.transpose();
      fit.sigma2(t - burn_in) = sigma2;
    }
  }
  return fit;
}

namespace {

bool constant(const VectorXd& v) {
  return v.size() == 0 || (v.array() == v(0)).all();
}

}  // namespace

MediationPosterior fit_mediation(const MediationDesign& design, int iterations, int burn_in,
                                 std::uint64_t seed) {
  const Index n = design.n();
  const Index k = design.k();
  if (n < 2) throw FitError("mediation needs at least two students, got " + std::to_string(n));
  if (design.x.size() != n || design.c.size() != n || design.m.rows() != n) {
    throw ArgumentError("mediation design vectors differ in length");
  }
  if (constant(design.x)) throw FitError("design column 'x' is constant; effects are not identified");
  if (constant(design.c)) throw FitError("design column 'c' is constant; effects are not identified");

  MediationPosterior post;
  post.k = static_cast<int>(k);
  post.c_mean = design.c.mean();
  std::mt19937_64 rng(seed);

  MatrixXd xm(n, 3);
  xm << VectorXd::Ones(n), design.x, design.c;
  for (Index j = 0; j < k; ++j) {
    post.mediator_models.push_back(
        gibbs_regression(xm, design.m.col(j), iterations, burn_in, rng, {"a0", "a1", "a2"}));
  }

  MatrixXd xo(n, 3 + 2 * k);
  std::vector<std::string> cols{"b0", "b1"};
  xo.col(0).setOnes();
  xo.col(1) = design.x;
  for (Index j = 0; j < k; ++j) {
    xo.col(2 + j) = design.m.col(j);
    cols.push_back("b2_" + design.mediator_names[static_cast<std::size_t>(j)]);
  }
  for (Index j = 0; j < k; ++j) {
    xo.col(2 + k + j) = design.x.cwiseProduct(design.m.col(j));
    cols.push_back("b3_" + design.mediator_names[static_cast<std::size_t>(j)]);
  }
  xo.col(2 + 2 * k) = design.c;
  cols.push_back("b4");

  Eigen::FullPivLU<MatrixXd> lu(xo);
  if (lu.rank() < xo.cols()) {
    post.warnings.push_back("outcome design is rank deficient (rank " + std::to_string(lu.rank()) + " of " +
                            std::to_string(xo.cols()) + "); the N(0, I) prior keeps the posterior proper");
  }
  post.outcome_model = gibbs_regression(xo, design.y, iterations, burn_in, rng, cols);
  return post;
}

Coefficients coefficients_at(const MediationPosterior& post, std::size_t draw) {
  if (draw >= post.draws()) throw ArgumentError("draw index out of range");
  const Index s = static_cast<Index>(draw);
  const Index k = post.k;
  Coefficients c;
  c.a0.resize(k);
  c.a1.resize(k);
  c.a2.resize(k);
  for (Index j = 0; j < k; ++j) {
    const auto& m = post.mediator_models[static_cast<std::size_t>(j)].coef;
    c.a0(j) = m(s, 0);
    c.a1(j) = m(s, 1);
    c.a2(j) = m(s, 2);
  }
  const auto& b = post.outcome_model.coef;
  c.b0 = b(s, 0);
  c.b1 = b(s, 1);
  c.b2 = b.row(s).segment(2, k).transpose();
  c.b3 = b.row(s).segment(2 + k, k).transpose();
  c.b4 = b(s, 2 + 2 * k);
  return c;
}

Effects effects(const Coefficients& coef, double x, double x_star, double c) {
  const double dx = x - x_star;
  Effects e;
  double direct = coef.b1;
  double indirect = 0.0;
  for (Index j = 0; j < coef.b2.size(); ++j) {
    direct += coef.b3(j) * (coef.a0(j) + coef.a1(j) * x_star + coef.a2(j) * c);
    indirect += coef.b2(j) * coef.a1(j) + coef.b3(j) * coef.a1(j) * x;
  }
  e.nde = direct * dx;
  e.nie = indirect * dx;
  e.te = e.nde + e.nie;
  return e;
}

EffectDraws effects(const MediationPosterior& post, double x, double x_star, std::optional<double> c) {
  const double cc = c.value_or(post.c_mean);
  const Index s = static_cast<Index>(post.draws());
  EffectDraws d;
  d.nde.resize(s);
  d.nie.resize(s);
  d.te.resize(s);
  for (Index i = 0; i < s; ++i) {
    Effects e = effects(coefficients_at(post, static_cast<std::size_t>(i)), x, x_star, cc);
    d.nde(i) = e.nde;
    d.nie(i) = e.nie;
    d.te(i) = e.te;
  }
  return d;
}

double quantile(const VectorXd& v, double p) {
  if (v.size() == 0) throw ArgumentError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("quantile probability outside [0, 1]");
  std::vector<double> s(v.data(), v.data() + v.size());
  std::sort(s.begin(), s.end());
  const double h = (static_cast<double>(s.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= s.size()) return s.back();
  return s[lo] + (h - static_cast<double>(lo)) * (s[lo + 1] - s[lo]);
}

bool interval_excludes_zero(double lower, double upper) { return lower > 0.0 || upper < 0.0; }

namespace {

struct Stats {
  double mean, sd, lower, upper;
};

Stats stats(const VectorXd& v) {
  Stats s{};
  s.mean = v.mean();
  s.sd = v.size() > 1 ? std::sqrt((v.array() - s.mean).square().sum() / static_cast<double>(v.size() - 1)) : 0.0;
  s.lower = quantile(v, 0.025);
  s.upper = quantile(v, 0.975);
  return s;
}

std::pair<double, double> mean_sd(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(digits) << (v == 0.0 ? 0.0 : v);
  return o.str();
}

}  // namespace

std::vector<EffectRow> report(const std::vector<EffectDraws>& chains) {
  if (chains.empty()) throw ArgumentError("report needs at least one chain");
  std::vector<EffectRow> rows;
  auto build = [&](const char* name, auto member) {
    std::vector<double> means, sds, lowers, uppers;
    for (const auto& c : chains) {
      Stats s = stats(c.*member);
      means.push_back(s.mean);
      sds.push_back(s.sd);
      lowers.push_back(s.lower);
      uppers.push_back(s.upper);
    }
    EffectRow r;
    r.name = name;
    std::tie(r.mean, r.mean_sd) = mean_sd(means);
    std::tie(r.sd, r.sd_sd) = mean_sd(sds);
    std::tie(r.lower, r.lower_sd) = mean_sd(lowers);
    std::tie(r.upper, r.upper_sd) = mean_sd(uppers);
    r.significant = interval_excludes_zero(r.lower, r.upper);
    rows.push_back(r);
  };
  build("NIE", &EffectDraws::nie);
  build("NDE", &EffectDraws::nde);
  build("TE", &EffectDraws::te);
  return rows;
}

std::string report_csv(const std::vector<EffectRow>& rows, const std::string& header_comment) {
  std::ostringstream out;
  if (!header_comment.empty()) {
    std::istringstream in(header_comment);
    std::string line;
    while (std::getline(in, line)) out << "# " << line << '\n';
  }
  csv::write_row(out, {"Effect", "Mean", "SD", "2.5%", "97.5%", "Sig"});
  for (const auto& r : rows) {
    csv::write_row(out, {r.name, fmt(r.mean) + " (" + fmt(r.mean_sd) + ")", fmt(r.sd) + " (" + fmt(r.sd_sd) + ")",
                         fmt(r.lower) + " (" + fmt(r.lower_sd) + ")", fmt(r.upper) + " (" + fmt(r.upper_sd) + ")",
                         r.significant ? "*" : ""});
  }
  return out.str();
}

std::string report_text(const std::vector<EffectRow>& rows, const std::string& title) {
  std::ostringstream out;
  out << title << '\n';
  out << std::left << std::setw(8) << "Effect" << std::right << std::setw(20) << "Mean" << std::setw(20) << "SD"
      << std::setw(20) << "2.5%" << std::setw(20) << "97.5%" << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(8) << r.name << std::right << std::setw(20)
        << fmt(r.mean) + " (" + fmt(r.mean_sd) + ")" << std::setw(20) << fmt(r.sd) + " (" + fmt(r.sd_sd) + ")"
        << std::setw(20) << fmt(r.lower) + " (" + fmt(r.lower_sd) + ")" << std::setw(20)
        << fmt(r.upper) + " (" + fmt(r.upper_sd) + ")" << (r.significant ? " *" : "") << '\n';
  }
  out << "* 95% credible interval excludes 0\n";
  return out.str();
}

MediationRun run(const Roster& roster, const amen::LatentTable& latents, const RunOptions& options) {
  if (options.chains < 1) throw ArgumentError("mediation needs at least one chain");
  MediationRun r;
  r.design = make_design(roster, latents, options.design);
  for (int c = 0; c < options.chains; ++c) {
    r.chains.push_back(fit_mediation(r.design, options.iterations, options.burn_in,
                                     options.seed + static_cast<std::uint64_t>(c)));
    r.effects.push_back(effects(r.chains.back(), options.x, options.x_star, options.c));
  }
  r.rows = report(r.effects);
  return r;
}

}  // namespace classnet::mediation
