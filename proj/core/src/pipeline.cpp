#include "classnet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "classnet/backends.hpp"
#include "classnet/centrality.hpp"
#include "classnet/classification.hpp"
#include "classnet/csv.hpp"
#include "classnet/data_model.hpp"
#include "classnet/digest.hpp"
#include "classnet/layout.hpp"
#include "classnet/network_builder.hpp"
#include "classnet/reliability.hpp"
#include "classnet/report.hpp"
#include "classnet/review_service.hpp"

namespace classnet::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* const kNets[] = {"exp", "eoi"};

std::string num(double v, int precision = 6) {
  std::ostringstream o;
  o << std::setprecision(precision) << v;
  return o.str();
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (const auto& [k, _] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ArgumentError("unknown key '" + k + "' in " + where);
  }
}

}  // namespace

PipelineConfig PipelineConfig::load(const fs::path& path) {
  auto base = fs::absolute(path).parent_path();
  try {
    return parse(read_file(path), base);
  } catch (const ArgumentError& e) {
    throw ArgumentError(path.string() + ": " + e.what());
  }
}

PipelineConfig PipelineConfig::parse(const std::string& json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("pipeline config: ") + e.what());
  }
  if (!j.is_object()) throw ArgumentError("pipeline config must be a JSON object");
  reject_unknown(j,
                 {"transcripts", "roster", "backends", "mock_rules", "prompts", "adjudications", "out_dir",
                  "context_size", "entropy_percentile", "seed", "amen", "mediation"},
                 "pipeline config");
  PipelineConfig c;
  c.base_dir = base_dir;
  auto path = [&](const char* key, bool required) -> std::optional<fs::path> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
      if (required) throw ArgumentError(std::string("pipeline config is missing '") + key + "'");
      return std::nullopt;
    }
    fs::path p = it->get<std::string>();
    return p.is_absolute() ? p : base_dir / p;
  };
  try {
    c.transcripts = *path("transcripts", true);
    c.roster = *path("roster", true);
    c.backends = *path("backends", true);
    c.mock_rules = *path("mock_rules", true);
    c.prompts = *path("prompts", true);
    c.adjudications = path("adjudications", false);
    if (auto o = path("out_dir", false)) c.out_dir = *o;
    else c.out_dir = base_dir / c.out_dir;
    read_opt(j, "context_size", c.context_size);
    read_opt(j, "entropy_percentile", c.entropy_percentile);
    read_opt(j, "seed", c.seed);
    if (auto it = j.find("amen"); it != j.end()) {
      reject_unknown(*it,
                     {"iterations", "burn_in", "thin", "chains", "exp_dim", "eoi_dim", "compare_dims",
                      "compare_iterations", "compare_burn_in"},
                     "amen settings");
      auto& a = c.amen;
      read_opt(*it, "iterations", a.iterations);
      read_opt(*it, "burn_in", a.burn_in);
      read_opt(*it, "thin", a.thin);
      read_opt(*it, "chains", a.chains);
      read_opt(*it, "exp_dim", a.exp_dim);
      read_opt(*it, "eoi_dim", a.eoi_dim);
      read_opt(*it, "compare_dims", a.compare_dims);
      read_opt(*it, "compare_iterations", a.compare_iterations);
      read_opt(*it, "compare_burn_in", a.compare_burn_in);
    }
    if (auto it = j.find("mediation"); it != j.end()) {
      reject_unknown(*it, {"chains", "iterations", "burn_in", "x", "x_star", "c"}, "mediation settings");
      auto& m = c.mediation;
      read_opt(*it, "chains", m.chains);
      read_opt(*it, "iterations", m.iterations);
      read_opt(*it, "burn_in", m.burn_in);
      read_opt(*it, "x", m.x);
      read_opt(*it, "x_star", m.x_star);
      if (auto cc = it->find("c"); cc != it->end() && !cc->is_null()) m.c = cc->get<double>();
    }
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("pipeline config: ") + e.what());
  }
  if (c.context_size < 0) throw ArgumentError("context_size must be non-negative");
  if (!(c.entropy_percentile > 0.0 && c.entropy_percentile <= 100.0)) {
    throw ArgumentError("entropy_percentile must lie in (0, 100]");
  }
  c.raw_json = j.dump();
  return c;
}

const StageRecord* RunManifest::stage(const std::string& name) const {
  for (const auto& s : stages) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

void write_manifest(const fs::path& path, const RunManifest& m) {
  json stages = json::array();
  for (const auto& s : m.stages) {
    stages.push_back({{"name", s.name}, {"key", s.key}, {"outputs", s.outputs}, {"skipped", s.skipped}});
  }
  json j = {{"config_hash", m.config_hash},
            {"input_digests", m.input_digests},
            {"seed", m.seed},
            {"tool_version", m.tool_version},
            {"stages", stages}};
  write_file(path, j.dump(2) + "\n");
}

std::optional<RunManifest> read_manifest(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    json j = json::parse(read_file(path));
    RunManifest m;
    m.config_hash = j.at("config_hash");
    m.input_digests = j.at("input_digests").get<std::map<std::string, std::string>>();
    m.seed = j.at("seed");
    m.tool_version = j.at("tool_version");
    for (const auto& s : j.at("stages")) {
      StageRecord r;
      r.name = s.at("name");
      r.key = s.at("key");
      r.outputs = s.at("outputs").get<std::map<std::string, std::string>>();
      r.skipped = s.value("skipped", false);
      m.stages.push_back(std::move(r));
    }
    return m;
  } catch (const json::exception&) {
    return std::nullopt;  // unreadable manifest: everything reruns
  }
}

namespace steps {

void classify(const fs::path& transcripts, const fs::path& roster_path, const fs::path& backends_path,
              const fs::path& mock_rules, const fs::path& prompts, int context_size, const fs::path& out_dir) {
  auto utterances = load_transcripts(transcripts);
  Roster roster = load_roster(roster_path);
  check_speakers(utterances, roster);
  auto rules = std::make_shared<const MockRuleTable>(MockRuleTable::load(mock_rules));
  auto backends = make_backends(load_backend_config(backends_path), rules);
  auto tmpl = PromptTemplate::load(prompts);
  ClassifyOptions options;
  options.context_size = context_size;
  ClassificationRun run = classify_transcript(utterances, backends, tmpl, options, &roster);

  write_votes(out_dir / layout::kVotes, run.votes);
  std::ostringstream triage;
  for (const auto& t : run.triage) triage << json{{"utterance_id", t.utterance_id}, {"reason", t.reason}}.dump() << '\n';
  write_file(out_dir / layout::kTriage, triage.str());
  std::vector<LabeledUtterance> per_model;
  for (const auto& [model, labels] : per_model_labels(run)) {
    per_model.insert(per_model.end(), labels.begin(), labels.end());
  }
  write_labels(out_dir / layout::kModelLabels, per_model);
}

void reliability(const fs::path& votes_path, double percentile, const fs::path& out_dir,
                 const std::optional<fs::path>& backends) {
  auto votes = load_votes(votes_path);
  EntropyReport report = entropy_report(votes, percentile);
  write_entropy_report(out_dir / layout::kEntropy, report);

  json j;
  KappaMatrix km = pairwise_kappa(votes);
  json matrix = json::array();
  for (const auto& row : km.kappa) {
    json r = json::array();
    for (double v : row) r.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    matrix.push_back(r);
  }
  j["pairwise"] = {{"raters", km.raters}, {"kappa", matrix}, {"common_items", km.n_common_items}};
  auto fleiss = [&](const std::vector<std::string>& models) -> json {
    try {
      double k = group_fleiss_kappa(votes, models);
      return {{"kappa", k}, {"interpretation", interpret_kappa(k)}, {"models", models}};
    } catch (const Error& e) {
      return {{"kappa", nullptr}, {"error", e.what()}, {"models", models}};
    }
  };
  j["fleiss"] = json::object();
  j["fleiss"]["all"] = fleiss(km.raters);
  if (backends) {
    std::vector<std::string> commercial, open;
    for (const auto& d : load_backend_config(*backends)) {
      if (std::find(km.raters.begin(), km.raters.end(), d.model_id) == km.raters.end()) continue;
      if (d.tier == Tier::Commercial) commercial.push_back(d.model_id);
      if (d.tier == Tier::OpenSource) open.push_back(d.model_id);
    }
    if (commercial.size() >= 2) j["fleiss"]["commercial"] = fleiss(commercial);
    if (open.size() >= 2) j["fleiss"]["open_source"] = fleiss(open);
  }
  j["entropy"] = {{"threshold", report.threshold},
                  {"percentile", report.percentile},
                  {"flagged", report.flagged.size()},
                  {"consensus", report.consensus_count},
                  {"n", report.entropies.size()}};
  write_file(out_dir / layout::kAgreement, j.dump(2) + "\n");
}

void merge_labels(const fs::path& votes_path, const std::optional<fs::path>& adjudications, const fs::path& out_dir) {
  auto votes = load_votes(votes_path);
  std::vector<review::Adjudication> adj;
  if (adjudications) adj = review::replay_log(*adjudications);
  auto merged = review::export_merged(votes, adj, true);
  write_labels(out_dir / layout::kMergedLabels, merged);
  write_file(out_dir / layout::kLabelCounts, review::label_counts_csv(review::count_labels(merged)));
}

void network(const fs::path& transcripts, const fs::path& roster_path, const fs::path& labels_path,
             const fs::path& out_dir) {
  auto utterances = load_transcripts(transcripts);
  Roster roster = load_roster(roster_path);
  auto labels = load_labels(labels_path);
  json summary = json::object();
  for (const char* net : kNets) {
    NetworkKind kind = parse_network_kind(net);
    NetworkBuild b = build_network(utterances, labels, roster, kind);
    write_adjacency_csv(out_dir / layout::adjacency(net), b.graph.node_ids, b.graph.weights);
    write_provenance(out_dir / layout::provenance(net), b.graph.provenance);
    json dropped = json::array();
    for (const auto& d : b.dropped) dropped.push_back({{"utterance_id", d.utterance_id}, {"reason", d.reason}});
    json od = nullptr;
    if (b.graph.size() >= 2) {
      Overdispersion o = overdispersion_check(b.graph.weights);
      od = {{"mean", o.mean}, {"variance", o.variance}, {"ratio", o.ratio ? json(*o.ratio) : json(nullptr)}};
    }
    summary[net] = {{"nodes", b.graph.size()},
                    {"total_weight", b.graph.total_weight()},
                    {"edges", b.graph.provenance.size()},
                    {"dropped", dropped},
                    {"overdispersion", od}};
  }
  write_file(out_dir / layout::kNetworkSummary, summary.dump(2) + "\n");
}

void centrality(const fs::path& adjacency, const fs::path& out_csv) {
  Adjacency a = read_adjacency_csv(adjacency);
  auto table = centrality::compute_all(a.node_ids, a.weights);
  centrality::write_table_csv(out_csv, table);
  for (const auto& w : table.warnings) std::fprintf(stderr, "warning: %s: %s\n", adjacency.c_str(), w.c_str());
}

void amen_fit(const fs::path& adjacency, const amen::AmenConfig& config, const fs::path& dir, const std::string& net) {
  Adjacency a = read_adjacency_csv(adjacency);
  auto chains = amen::fit(a.weights, config);
  auto result = amen::multi_chain_reference(chains, a.weights);
  amen::write_samples(dir / layout::samples(net), chains);
  amen::write_latents(dir / layout::latents(net), a.node_ids, result.pooled);
  amen::write_summary(dir / layout::amen_summary(net), a.node_ids, result);
  json per_chain = json::array();
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const auto& ch = chains[c];
    per_chain.push_back({{"chain", ch.chain},
                         {"seed", ch.seed},
                         {"dic", result.dic[c]},
                         {"draws", ch.size()},
                         {"acceptance",
                          {{"alpha", ch.acceptance.alpha},
                           {"beta", ch.acceptance.beta},
                           {"z", ch.acceptance.z},
                           {"w", ch.acceptance.w},
                           {"log_r", ch.acceptance.log_r}}},
                         {"mala_step_z", ch.mala_step_z},
                         {"mala_step_w", ch.mala_step_w},
                         {"nonfinite_proposals", ch.nonfinite_proposals}});
  }
  json j = {{"network", net},
            {"dim", config.dim},
            {"iterations", config.iterations},
            {"burn_in", config.burn_in},
            {"thin", config.thin},
            {"reference_chain", result.reference_chain},
            {"dic_tie", result.dic_tie},
            {"r_mean", result.pooled.r_mean},
            {"chains", per_chain}};
  write_file(dir / layout::amen_fit(net), j.dump(2) + "\n");
}

void amen_ic(const std::vector<std::pair<std::string, fs::path>>& networks, const amen::AmenConfig& config,
             const std::vector<int>& dims, const fs::path& out_json, const fs::path& out_csv) {
  json j = json::object();
  std::ostringstream out;
  csv::write_row(out, {"network", "d", "BIC", "DIC", "WAIC", "pD", "pWAIC"});
  for (const auto& [name, path] : networks) {
    Adjacency a = read_adjacency_csv(path);
    auto rows = amen::compare_dimensions(a.weights, config, dims);
    json arr = json::array();
    for (const auto& r : rows) {
      const auto& ic = r.criteria;
      arr.push_back({{"d", r.dim}, {"bic", ic.bic}, {"dic", ic.dic}, {"waic", ic.waic}, {"p_d", ic.p_d}, {"p_waic", ic.p_waic}});
      csv::write_row(out, {name, std::to_string(r.dim), num(ic.bic, 8), num(ic.dic, 8), num(ic.waic, 8),
                           num(ic.p_d, 6), num(ic.p_waic, 6)});
    }
    j[name] = arr;
  }
  write_file(out_json, j.dump(2) + "\n");
  write_file(out_csv, out.str());
}

void mediate(const fs::path& latents_path, const fs::path& roster_path, const mediation::RunOptions& options,
             const std::string& title, const fs::path& out_csv, const fs::path& out_text, const fs::path& out_json) {
  Roster roster = load_roster(roster_path);
  auto latents = amen::read_latents(latents_path);
  auto run = mediation::run(roster, latents, options);
  const auto& d = run.design;
  const double c_used = options.c.value_or(d.c.size() ? d.c.mean() : 0.0);
  std::ostringstream header;
  header << "gender coding (x): " << (d.gender_coding.empty() ? "undeclared" : d.gender_coding) << '\n'
         << "contrast: x=" << num(options.x) << " vs x*=" << num(options.x_star) << ", c=" << num(c_used)
         << (options.c ? "" : " (empirical share proficient)") << '\n'
         << "students: " << d.n() << ", mediators: " << d.k() << ", chains: " << run.chains.size() << '\n';
  for (const auto& e : d.excluded) header << "excluded " << e << '\n';
  for (const auto& w : run.chains.front().warnings) header << "warning: " << w << '\n';
  write_file(out_csv, mediation::report_csv(run.rows, title + "\n" + header.str()));
  write_file(out_text, mediation::report_text(run.rows, title + "\n" + header.str()));
  json rows = json::array();
  for (const auto& r : run.rows) {
    rows.push_back({{"effect", r.name},
                    {"mean", r.mean},
                    {"sd", r.sd},
                    {"lower", r.lower},
                    {"upper", r.upper},
                    {"mean_between_sd", r.mean_sd},
                    {"sd_between_sd", r.sd_sd},
                    {"lower_between_sd", r.lower_sd},
                    {"upper_between_sd", r.upper_sd},
                    {"significant", r.significant}});
  }
  json j = {{"title", title},
            {"gender_coding", d.gender_coding},
            {"x", options.x},
            {"x_star", options.x_star},
            {"c", c_used},
            {"n", d.n()},
            {"mediators", d.mediator_names},
            {"excluded", d.excluded},
            {"warnings", run.chains.front().warnings},
            {"rows", rows}};
  write_file(out_json, j.dump(2) + "\n");
}

}  // namespace steps

namespace {

std::string digest_or_absent(const fs::path& p) { return fs::exists(p) ? sha256_file(p) : "absent"; }

class Runner {
 public:
  Runner(const PipelineConfig& config) : config_(config), out_(config.out_dir) {
    previous_ = read_manifest(out_ / layout::kManifest);
    manifest_.config_hash = sha256_hex(config.raw_json);
    manifest_.seed = config.seed;
    auto add = [&](const std::string& name, const fs::path& p) { manifest_.input_digests[name] = digest_or_absent(p); };
    add("transcripts", config.transcripts);
    add("roster", config.roster);
    add("backends", config.backends);
    add("mock_rules", config.mock_rules);
    for (const char* f : {"system.txt", "user.txt", "few_shots.json"}) add(std::string("prompts/") + f, config.prompts / f);
    if (config.adjudications) add("adjudications", *config.adjudications);
  }

  // `inputs` are digests or setting strings that determine the stage's outputs.
  template <typename F>
  void stage(const std::string& name, const std::vector<std::string>& inputs, const std::vector<std::string>& outputs,
             F body) {
    std::string key_material = name + "\n" + manifest_.tool_version + "\n" + std::to_string(config_.seed) + "\n";
    for (const auto& i : inputs) key_material += i + "\n";
    StageRecord rec;
    rec.name = name;
    rec.key = sha256_hex(key_material);
    if (previous_) {
      if (const StageRecord* old = previous_->stage(name); old && old->key == rec.key && outputs_match(*old, outputs)) {
        rec.outputs = old->outputs;
        rec.skipped = true;
        manifest_.stages.push_back(rec);
        write_manifest(out_ / layout::kManifest, manifest_);
        return;
      }
    }
    try {
      body();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
    for (const auto& o : outputs) rec.outputs[o] = sha256_file(out_ / o);
    manifest_.stages.push_back(rec);
    write_manifest(out_ / layout::kManifest, manifest_);
  }

  std::string out_digest(const std::string& rel) const { return rel + "=" + digest_or_absent(out_ / rel); }
  std::string input(const std::string& name) const { return name + "=" + manifest_.input_digests.at(name); }
  RunManifest& manifest() { return manifest_; }

 private:
  bool outputs_match(const StageRecord& old, const std::vector<std::string>& outputs) const {
    if (old.outputs.size() != outputs.size()) return false;
    for (const auto& o : outputs) {
      auto it = old.outputs.find(o);
      if (it == old.outputs.end() || !fs::exists(out_ / o) || sha256_file(out_ / o) != it->second) return false;
    }
    return true;
  }

  const PipelineConfig& config_;
  fs::path out_;
  std::optional<RunManifest> previous_;
  RunManifest manifest_;
};

amen::AmenConfig amen_config(const PipelineConfig& c, int dim, std::uint64_t seed_offset) {
  amen::AmenConfig a;
  a.dim = dim;
  a.iterations = c.amen.iterations;
  a.burn_in = c.amen.burn_in;
  a.thin = c.amen.thin;
  a.chains = c.amen.chains;
  a.seed = c.seed + seed_offset;
  return a;
}

std::string settings(const json& j) { return j.dump(); }

}  // namespace

RunManifest run(const PipelineConfig& config) {
  const fs::path& out = config.out_dir;
  fs::create_directories(out);
  Runner r(config);

  r.stage("classify",
          {r.input("transcripts"), r.input("roster"), r.input("backends"), r.input("mock_rules"),
           r.input("prompts/system.txt"), r.input("prompts/user.txt"), r.input("prompts/few_shots.json"),
           settings({{"context_size", config.context_size}})},
          {layout::kVotes, layout::kTriage, layout::kModelLabels}, [&] {
            steps::classify(config.transcripts, config.roster, config.backends, config.mock_rules, config.prompts,
                            config.context_size, out);
          });

  r.stage("reliability", {r.out_digest(layout::kVotes), r.input("backends"),
                          settings({{"percentile", config.entropy_percentile}})},
          {layout::kEntropy, layout::kAgreement},
          [&] { steps::reliability(out / layout::kVotes, config.entropy_percentile, out, config.backends); });

  std::vector<std::string> merge_inputs{r.out_digest(layout::kVotes)};
  if (config.adjudications) merge_inputs.push_back(r.input("adjudications"));
  r.stage("labels", merge_inputs, {layout::kMergedLabels, layout::kLabelCounts},
          [&] { steps::merge_labels(out / layout::kVotes, config.adjudications, out); });

  std::vector<std::string> net_outputs{layout::kNetworkSummary};
  for (const char* n : kNets) {
    net_outputs.push_back(layout::adjacency(n));
    net_outputs.push_back(layout::provenance(n));
  }
  r.stage("network", {r.input("transcripts"), r.input("roster"), r.out_digest(layout::kMergedLabels)}, net_outputs,
          [&] { steps::network(config.transcripts, config.roster, out / layout::kMergedLabels, out); });

  r.stage("centrality", {r.out_digest(layout::adjacency("exp")), r.out_digest(layout::adjacency("eoi"))},
          {layout::centrality("exp"), layout::centrality("eoi")}, [&] {
            for (const char* n : kNets) steps::centrality(out / layout::adjacency(n), out / layout::centrality(n));
          });

  const auto& a = config.amen;
  json amen_settings = {{"iterations", a.iterations}, {"burn_in", a.burn_in}, {"thin", a.thin},
                        {"chains", a.chains},         {"exp_dim", a.exp_dim}, {"eoi_dim", a.eoi_dim}};
  std::vector<std::string> fit_outputs;
  for (const char* n : kNets) {
    for (const auto& p : {layout::samples(n), layout::latents(n), layout::amen_summary(n), layout::amen_fit(n)}) {
      fit_outputs.push_back(p);
    }
  }
  r.stage("amen_fit",
          {r.out_digest(layout::adjacency("exp")), r.out_digest(layout::adjacency("eoi")), settings(amen_settings)},
          fit_outputs, [&] {
            steps::amen_fit(out / layout::adjacency("exp"), amen_config(config, a.exp_dim, 0), out, "exp");
            steps::amen_fit(out / layout::adjacency("eoi"), amen_config(config, a.eoi_dim, 1000), out, "eoi");
          });

  json ic_settings = {{"dims", a.compare_dims},
                      {"iterations", a.compare_iterations},
                      {"burn_in", a.compare_burn_in},
                      {"chains", a.chains},
                      {"thin", a.thin}};
  r.stage("amen_ic",
          {r.out_digest(layout::adjacency("exp")), r.out_digest(layout::adjacency("eoi")), settings(ic_settings)},
          {layout::kIcJson, layout::kIcCsv}, [&] {
            amen::AmenConfig c = amen_config(config, 2, 2000);
            c.iterations = a.compare_iterations;
            c.burn_in = a.compare_burn_in;
            steps::amen_ic({{"exp", out / layout::adjacency("exp")}, {"eoi", out / layout::adjacency("eoi")}}, c,
                           a.compare_dims, out / layout::kIcJson, out / layout::kIcCsv);
          });

  const auto& m = config.mediation;
  json med_settings = {{"chains", m.chains}, {"iterations", m.iterations}, {"burn_in", m.burn_in},
                       {"x", m.x},           {"x_star", m.x_star},         {"c", m.c ? json(*m.c) : json(nullptr)}};
  std::vector<std::string> med_outputs;
  for (const char* n : kNets) {
    med_outputs.push_back(layout::mediation_csv(n));
    med_outputs.push_back(layout::mediation_text(n));
    med_outputs.push_back(layout::mediation_json(n));
  }
  r.stage("mediate",
          {r.out_digest(layout::latents("exp")), r.out_digest(layout::latents("eoi")), r.input("roster"),
           settings(med_settings)},
          med_outputs, [&] {
            for (const char* n : kNets) {
              mediation::RunOptions o;
              o.chains = m.chains;
              o.iterations = m.iterations;
              o.burn_in = m.burn_in;
              o.seed = config.seed + (std::string(n) == "exp" ? 3000 : 4000);
              o.x = m.x;
              o.x_star = m.x_star;
              o.c = m.c;
              std::string title = std::string("Network mediation model results for ") +
                                  (std::string(n) == "exp" ? "EXP" : "EOI") + " network";
              steps::mediate(out / layout::latents(n), config.roster, o, title, out / layout::mediation_csv(n),
                             out / layout::mediation_text(n), out / layout::mediation_json(n));
            }
          });

  std::vector<std::string> report_inputs;
  for (const auto& s : r.manifest().stages) {
    for (const auto& [path, digest] : s.outputs) report_inputs.push_back(path + "=" + digest);
  }
  r.stage("report", report_inputs,
          {"report/report.json", "report/report.txt", "report/exp_network.svg", "report/eoi_network.svg"},
          [&] { report::write_report(out); });
  return r.manifest();
}

}  // namespace classnet::pipeline
