// classnet: command-line entry point for every pipeline stage.
#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "classnet/classification.hpp"
#include "classnet/data_model.hpp"
#include "classnet/error.hpp"
#include "classnet/layout.hpp"
#include "classnet/pipeline.hpp"
#include "classnet/reliability.hpp"
#include "classnet/report.hpp"
#include "classnet/review_service.hpp"

namespace fs = std::filesystem;
using namespace classnet;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

// Flags fall back to the pipeline config when --config is given.
struct Context {
  Globals g;
  std::optional<pipeline::PipelineConfig> cfg;

  void init() {
    if (!g.config.empty()) cfg = pipeline::PipelineConfig::load(g.config);
  }
  fs::path out() const {
    if (!g.out_dir.empty()) return g.out_dir;
    if (cfg) return cfg->out_dir;
    return "out";
  }
  std::uint64_t seed() const { return g.seed.value_or(cfg ? cfg->seed : 1); }

  fs::path need(const std::string& flag, const std::string& given, fs::path pipeline::PipelineConfig::*member) const {
    if (!given.empty()) return given;
    if (cfg) return (*cfg).*member;
    throw ArgumentError("--" + flag + " is required (or pass --config)");
  }
  // Upstream stage outputs default to their place in the output directory.
  fs::path from_out(const std::string& given, const std::string& rel) const {
    return given.empty() ? out() / rel : fs::path(given);
  }
};

review::ReviewServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Classroom dialogue analysis: classification, reliability, networks, AMEN and mediation"};
  app.require_subcommand(1);
  Context ctx;
  app.add_option("--config", ctx.g.config, "Pipeline config (JSON); supplies defaults for every subcommand");
  app.add_option("--seed", ctx.g.seed, "Random seed");
  app.add_option("--out-dir", ctx.g.out_dir, "Output directory");

  // classify
  auto* classify = app.add_subcommand("classify", "Label every utterance with the backend ensemble");
  std::string c_transcripts, c_roster, c_backends, c_rules, c_prompts;
  std::optional<int> c_context;
  classify->add_option("--transcripts", c_transcripts);
  classify->add_option("--roster", c_roster);
  classify->add_option("--backends", c_backends);
  classify->add_option("--rules", c_rules, "Mock backend rule table");
  classify->add_option("--prompts", c_prompts, "Directory with system.txt, user.txt, few_shots.json");
  classify->add_option("--context-size", c_context)->check(CLI::NonNegativeNumber);

  // reliability / flag
  auto* reliability = app.add_subcommand("reliability", "Kappa statistics and entropy report from votes");
  std::string r_votes, r_backends;
  std::optional<double> r_pct;
  reliability->add_option("--votes", r_votes);
  reliability->add_option("--backends", r_backends, "Backend config, for per-tier Fleiss kappa");
  reliability->add_option("--percentile", r_pct)->check(CLI::Range(0.0, 100.0));

  auto* flag = app.add_subcommand("flag", "Flag high-entropy utterances for review");
  std::string f_votes;
  std::optional<double> f_pct;
  flag->add_option("--votes", f_votes);
  flag->add_option("--percentile", f_pct)->check(CLI::Range(0.0, 100.0));

  // review serve
  auto* review_cmd = app.add_subcommand("review", "Human review service");
  review_cmd->require_subcommand(1);
  auto* serve = review_cmd->add_subcommand("serve", "Serve the triage queue over HTTP");
  std::string s_transcripts, s_votes, s_entropy, s_triage, s_log, s_static, s_host = "127.0.0.1";
  int s_port = 8080;
  std::optional<int> s_context;
  std::vector<std::string> s_tokens;
  serve->add_option("--transcripts", s_transcripts);
  serve->add_option("--votes", s_votes);
  serve->add_option("--entropy", s_entropy);
  serve->add_option("--triage", s_triage);
  serve->add_option("--log", s_log, "Adjudication log (JSON lines, appended)");
  serve->add_option("--static", s_static, "review_ui build directory");
  serve->add_option("--host", s_host);
  serve->add_option("--port", s_port)->check(CLI::Range(0, 65535));
  serve->add_option("--context-size", s_context)->check(CLI::NonNegativeNumber);
  serve->add_option("--token", s_tokens, "Accepted annotator token (repeatable)");

  // network
  auto* network = app.add_subcommand("network", "Build EXP and EOI adjacency matrices");
  std::string n_transcripts, n_roster, n_labels;
  network->add_option("--transcripts", n_transcripts);
  network->add_option("--roster", n_roster);
  network->add_option("--labels", n_labels, "Merged labels (JSON lines)");

  // centrality
  auto* centrality = app.add_subcommand("centrality", "Centrality table for an adjacency matrix");
  std::string ce_adj, ce_out, ce_net;
  centrality->add_option("--adjacency", ce_adj);
  centrality->add_option("--network", ce_net, "exp or eoi (selects default paths)")->check(CLI::IsMember({"exp", "eoi"}));
  centrality->add_option("--out", ce_out);

  // amen fit / ic
  auto* amen_cmd = app.add_subcommand("amen", "Negative-binomial AMEN latent space model");
  amen_cmd->require_subcommand(1);
  auto* fit = amen_cmd->add_subcommand("fit", "Fit the model with multiple chains");
  std::string a_adj, a_net = "exp";
  std::optional<int> a_dim, a_iter, a_burn, a_thin, a_chains;
  fit->add_option("--adjacency", a_adj);
  fit->add_option("--network", a_net)->check(CLI::IsMember({"exp", "eoi"}));
  fit->add_option("--dim", a_dim)->check(CLI::PositiveNumber);
  fit->add_option("--iterations", a_iter)->check(CLI::PositiveNumber);
  fit->add_option("--burn-in", a_burn)->check(CLI::NonNegativeNumber);
  fit->add_option("--thin", a_thin)->check(CLI::PositiveNumber);
  fit->add_option("--chains", a_chains)->check(CLI::PositiveNumber);

  auto* ic = amen_cmd->add_subcommand("ic", "Compare latent dimensions by BIC, DIC and WAIC");
  std::vector<std::string> i_nets;
  std::vector<int> i_dims;
  std::optional<int> i_iter, i_burn, i_chains;
  ic->add_option("--network", i_nets, "name=adjacency.csv (repeatable); defaults to exp and eoi");
  ic->add_option("--dims", i_dims)->check(CLI::PositiveNumber);
  ic->add_option("--iterations", i_iter)->check(CLI::PositiveNumber);
  ic->add_option("--burn-in", i_burn)->check(CLI::NonNegativeNumber);
  ic->add_option("--chains", i_chains)->check(CLI::PositiveNumber);

  // mediate
  auto* mediate = app.add_subcommand("mediate", "Network mediation analysis");
  std::string m_latents, m_roster, m_outcome = "post", m_x = "gender", m_c = "proficiency", m_out, m_net = "exp";
  std::optional<int> m_chains, m_iter, m_burn;
  std::optional<double> m_xv, m_xs, m_cv;
  bool m_raw = false;
  mediate->add_option("--latents", m_latents);
  mediate->add_option("--roster", m_roster);
  mediate->add_option("--network", m_net, "exp or eoi (selects default paths)")->check(CLI::IsMember({"exp", "eoi"}));
  mediate->add_option("--outcome", m_outcome)->check(CLI::IsMember({"post"}));
  mediate->add_option("--x", m_x)->check(CLI::IsMember({"gender"}));
  mediate->add_option("--c", m_c)->check(CLI::IsMember({"proficiency"}));
  mediate->add_option("--chains", m_chains)->check(CLI::PositiveNumber);
  mediate->add_option("--iterations", m_iter)->check(CLI::PositiveNumber);
  mediate->add_option("--burn-in", m_burn)->check(CLI::NonNegativeNumber);
  mediate->add_option("--x-value", m_xv, "Exposure level x (default 1)");
  mediate->add_option("--x-star", m_xs, "Reference level x* (default 0)");
  mediate->add_option("--c-value", m_cv, "Confounder level (default: empirical share)");
  mediate->add_flag("--raw-mediators", m_raw, "Do not center the mediators");
  mediate->add_option("--out", m_out, "CSV output (default <out-dir>/mediation/<network>.csv)");

  auto* report_cmd = app.add_subcommand("report", "Assemble report.json, report.txt and network SVGs");
  auto* pipe = app.add_subcommand("pipeline", "Run every stage, skipping those whose inputs are unchanged");

  CLI11_PARSE(app, argc, argv);

  try {
    ctx.init();
    const fs::path out = ctx.out();
    auto* cfg = ctx.cfg ? &*ctx.cfg : nullptr;

    if (classify->parsed()) {
      using C = pipeline::PipelineConfig;
      pipeline::steps::classify(ctx.need("transcripts", c_transcripts, &C::transcripts),
                                ctx.need("roster", c_roster, &C::roster), ctx.need("backends", c_backends, &C::backends),
                                ctx.need("rules", c_rules, &C::mock_rules), ctx.need("prompts", c_prompts, &C::prompts),
                                c_context.value_or(cfg ? cfg->context_size : 5), out);
      std::cout << "votes written to " << (out / layout::kVotes).string() << '\n';
    } else if (reliability->parsed()) {
      std::optional<fs::path> backends;
      if (!r_backends.empty()) backends = r_backends;
      else if (cfg) backends = cfg->backends;
      pipeline::steps::reliability(ctx.from_out(r_votes, layout::kVotes),
                                   r_pct.value_or(cfg ? cfg->entropy_percentile : 95.0), out, backends);
      std::cout << read_file(out / layout::kAgreement);
    } else if (flag->parsed()) {
      auto votes = load_votes(ctx.from_out(f_votes, layout::kVotes));
      auto report = entropy_report(votes, f_pct.value_or(cfg ? cfg->entropy_percentile : 95.0));
      write_entropy_report(out / layout::kEntropy, report);
      std::cout << "threshold " << report.threshold << " bits; " << report.flagged.size() << " of "
                << report.entropies.size() << " flagged\n";
      for (const auto& id : report.flagged) std::cout << id << '\n';
    } else if (serve->parsed()) {
      using C = pipeline::PipelineConfig;
      auto utterances = load_transcripts(ctx.need("transcripts", s_transcripts, &C::transcripts));
      auto votes = load_votes(ctx.from_out(s_votes, layout::kVotes));
      auto entropy = load_entropy_report(ctx.from_out(s_entropy, layout::kEntropy));
      std::vector<TriageEntry> triage;
      fs::path triage_path = ctx.from_out(s_triage, layout::kTriage);
      if (fs::exists(triage_path)) {
        std::istringstream in(read_file(triage_path));
        for (std::string line; std::getline(in, line);) {
          if (line.empty()) continue;
          auto j = nlohmann::json::parse(line);
          triage.push_back({j.at("utterance_id"), j.value("reason", "")});
        }
      }
      fs::path log = !s_log.empty() ? fs::path(s_log)
                     : (cfg && cfg->adjudications) ? *cfg->adjudications
                                                    : out / "review/adjudications.jsonl";
      review::ReviewStore store(log, s_context.value_or(cfg ? cfg->context_size : 5));
      store.load(utterances, votes, entropy, triage);
      store.set_tokens({s_tokens.begin(), s_tokens.end()});
      review::ReviewServer server(store, {s_host, s_port, s_static});
      int port = server.bind();
      std::cout << "review service on http://" << s_host << ':' << port << "/ (" << store.progress().total
                << " items, log " << log.string() << ")" << std::endl;
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.listen();
      g_server = nullptr;
    } else if (network->parsed()) {
      using C = pipeline::PipelineConfig;
      pipeline::steps::network(ctx.need("transcripts", n_transcripts, &C::transcripts),
                               ctx.need("roster", n_roster, &C::roster), ctx.from_out(n_labels, layout::kMergedLabels),
                               out);
      std::cout << read_file(out / layout::kNetworkSummary);
    } else if (centrality->parsed()) {
      if (ce_adj.empty() && ce_net.empty()) throw ArgumentError("pass --adjacency or --network");
      std::string net = ce_net.empty() ? "custom" : ce_net;
      fs::path adj = ctx.from_out(ce_adj, layout::adjacency(net));
      fs::path dest = ce_out.empty() ? out / layout::centrality(net) : fs::path(ce_out);
      pipeline::steps::centrality(adj, dest);
      std::cout << read_file(dest);
    } else if (fit->parsed()) {
      amen::AmenConfig c;
      pipeline::AmenSettings s = cfg ? cfg->amen : pipeline::AmenSettings{};
      c.dim = a_dim.value_or(a_net == "eoi" ? s.eoi_dim : s.exp_dim);
      c.iterations = a_iter.value_or(s.iterations);
      c.burn_in = a_burn.value_or(s.burn_in);
      c.thin = a_thin.value_or(s.thin);
      c.chains = a_chains.value_or(s.chains);
      c.seed = ctx.seed();
      pipeline::steps::amen_fit(ctx.from_out(a_adj, layout::adjacency(a_net)), c, out, a_net);
      std::cout << read_file(out / layout::amen_fit(a_net));
    } else if (ic->parsed()) {
      pipeline::AmenSettings s = cfg ? cfg->amen : pipeline::AmenSettings{};
      std::vector<std::pair<std::string, fs::path>> nets;
      for (const auto& spec : i_nets) {
        auto eq = spec.find('=');
        if (eq == std::string::npos) nets.emplace_back(spec, out / layout::adjacency(spec));
        else nets.emplace_back(spec.substr(0, eq), spec.substr(eq + 1));
      }
      if (nets.empty()) nets = {{"exp", out / layout::adjacency("exp")}, {"eoi", out / layout::adjacency("eoi")}};
      amen::AmenConfig c;
      c.iterations = i_iter.value_or(s.compare_iterations);
      c.burn_in = i_burn.value_or(s.compare_burn_in);
      c.thin = s.thin;
      c.chains = i_chains.value_or(s.chains);
      c.seed = ctx.seed();
      pipeline::steps::amen_ic(nets, c, i_dims.empty() ? s.compare_dims : i_dims, out / layout::kIcJson,
                               out / layout::kIcCsv);
      std::cout << read_file(out / layout::kIcCsv);
    } else if (mediate->parsed()) {
      using C = pipeline::PipelineConfig;
      pipeline::MediationSettings s = cfg ? cfg->mediation : pipeline::MediationSettings{};
      mediation::RunOptions o;
      o.chains = m_chains.value_or(s.chains);
      o.iterations = m_iter.value_or(s.iterations);
      o.burn_in = m_burn.value_or(s.burn_in);
      o.seed = ctx.seed();
      o.x = m_xv.value_or(s.x);
      o.x_star = m_xs.value_or(s.x_star);
      o.c = m_cv ? m_cv : s.c;
      o.design.center_mediators = !m_raw;
      fs::path csv_out = m_out.empty() ? out / layout::mediation_csv(m_net) : fs::path(m_out);
      fs::path stem = csv_out;
      stem.replace_extension();
      std::string title = "Network mediation model results for " + std::string(m_net == "eoi" ? "EOI" : "EXP") + " network";
      pipeline::steps::mediate(ctx.from_out(m_latents, layout::latents(m_net)), ctx.need("roster", m_roster, &C::roster),
                               o, title, csv_out, stem.string() + ".txt", stem.string() + ".json");
      std::cout << read_file(stem.string() + ".txt");
    } else if (report_cmd->parsed()) {
      auto r = report::write_report(out);
      std::cout << read_file(r.text);
    } else if (pipe->parsed()) {
      if (!cfg) throw ArgumentError("pipeline needs --config");
      pipeline::PipelineConfig c = *cfg;
      if (ctx.g.seed) c.seed = *ctx.g.seed;
      if (!ctx.g.out_dir.empty()) c.out_dir = ctx.g.out_dir;
      auto manifest = pipeline::run(c);
      for (const auto& s : manifest.stages) {
        std::cout << (s.skipped ? "skipped " : "ran     ") << s.name << '\n';
      }
      std::cout << "outputs in " << c.out_dir.string() << '\n';
    }
  } catch (const pipeline::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
