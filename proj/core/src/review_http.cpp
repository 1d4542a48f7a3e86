#include <httplib.h>

#include <json.hpp>
#include <thread>

#include "classnet/error.hpp"
#include "classnet/review_service.hpp"

namespace classnet::review {

namespace {

using nlohmann::json;

json item_json(const ReviewItem& item) {
  json ctx = json::array();
  for (const auto& c : item.context) ctx.push_back({{"speaker", c.speaker}, {"text", c.text}});
  json votes = json::object();
  for (const auto& [model, label] : item.votes) votes[model] = std::string(to_string(label));
  json history = json::array();
  for (const auto& a : item.history) history.push_back(json::parse(adjudication_to_json(a)));
  return {{"utterance_id", item.utterance_id},
          {"speaker_id", item.speaker_id},
          {"text", item.text},
          {"context", ctx},
          {"votes", votes},
          {"entropy", item.entropy},
          {"current_label", item.current_label ? json(std::string(to_string(*item.current_label))) : json(nullptr)},
          {"status", std::string(to_string(item.status))},
          {"reasons", item.reasons},
          {"history", history}};
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, {{"error", message}}, status);
}

std::string bearer_token(const httplib::Request& req) {
  std::string auth = req.get_header_value("Authorization");
  const std::string prefix = "Bearer ";
  if (auth.rfind(prefix, 0) == 0) return auth.substr(prefix.size());
  return req.get_header_value("X-Annotator-Token");
}

}  // namespace

struct ReviewServer::Impl {
  ReviewStore& store;
  ServerOptions options;
  httplib::Server server;
  std::thread thread;
  int port = -1;

  Impl(ReviewStore& s, ServerOptions o) : store(s), options(std::move(o)) {}

  // Maps library exceptions onto HTTP status codes.
  template <typename F>
  httplib::Server::Handler wrap(F f) {
    return [this, f](const httplib::Request& req, httplib::Response& res) {
      if (!store.authorised(bearer_token(req))) return send_error(res, 401, "missing or unknown annotator token");
      try {
        f(req, res);
      } catch (const NotFoundError& e) {
        send_error(res, 404, e.what());
      } catch (const ValidationError& e) {
        send_error(res, 400, e.what());
      } catch (const ParseError& e) {
        send_error(res, 400, e.what());
      } catch (const StateError& e) {
        send_error(res, 409, e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    };
  }

  void routes() {
    server.Get("/api/queue", wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::optional<Status> filter;
      if (req.has_param("status") && !req.get_param_value("status").empty()) {
        filter = parse_status(req.get_param_value("status"));
      }
      json items = json::array();
      for (const auto& item : store.queue(filter)) items.push_back(item_json(item));
      send_json(res, {{"items", items}});
    }));
    server.Get(R"(/api/item/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, item_json(store.item(req.matches[1])));
    }));
    server.Post("/api/adjudicate", wrap([this](const httplib::Request& req, httplib::Response& res) {
      Adjudication a = adjudication_from_json(req.body);
      send_json(res, item_json(store.submit(std::move(a))));
    }));
    server.Get("/api/progress", wrap([this](const httplib::Request&, httplib::Response& res) {
      Progress p = store.progress();
      send_json(res, {{"total", p.total}, {"adjudicated", p.adjudicated}, {"pending", p.total - p.adjudicated}});
    }));
    server.Get("/api/export", wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::string mode = req.has_param("mode") ? req.get_param_value("mode") : "merged";
      if (mode != "merged" && mode != "ensemble") throw ValidationError("mode must be merged or ensemble");
      auto labels = store.export_merged(mode == "merged");
      json rows = json::array();
      for (const auto& l : labels) {
        json j = {{"utterance_id", l.utterance_id}, {"label", std::string(to_string(l.label))}, {"source", l.source}};
        if (l.annotator_id) j["annotator_id"] = *l.annotator_id;
        if (l.timestamp) j["timestamp"] = *l.timestamp;
        rows.push_back(j);
      }
      LabelCounts c = count_labels(labels);
      send_json(res, {{"mode", mode},
                      {"labels", rows},
                      {"counts",
                       {{"EXP", c.exp},
                        {"EOI total", c.eoi_total},
                        {"High", c.high},
                        {"Medium", c.medium},
                        {"Low", c.low},
                        {"Uncorrelated", c.uncorrelated},
                        {"Total", c.total}}}});
    }));
    if (!options.static_dir.empty()) server.set_mount_point("/", options.static_dir.string());
  }
};

ReviewServer::ReviewServer(ReviewStore& store, ServerOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {
  impl_->routes();
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind() {
  if (impl_->port >= 0) return impl_->port;
  if (impl_->options.port == 0) {
    impl_->port = impl_->server.bind_to_any_port(impl_->options.host);
  } else if (impl_->server.bind_to_port(impl_->options.host, impl_->options.port)) {
    impl_->port = impl_->options.port;
  }
  if (impl_->port < 0) {
    throw Error("cannot bind review server to " + impl_->options.host + ":" + std::to_string(impl_->options.port));
  }
  return impl_->port;
}

void ReviewServer::listen() {
  bind();
  impl_->server.listen_after_bind();
}

void ReviewServer::start() {
  bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void ReviewServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace classnet::review
