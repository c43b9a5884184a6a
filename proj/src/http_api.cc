#include "midas/http_api.h"

#include <fstream>

#include "httplib.h"
#include "json.hpp"

namespace midas {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

json labels_json(const LabelSet& labels) { return labels.tags(); }

json validation_json(const ValidationResult& result) {
  json violations = json::array();
  for (const auto& v : result.violations) {
    violations.push_back({{"rule", to_string(v.rule)}, {"tags", v.tags}, {"message", v.message}});
  }
  return {{"ok", result.ok()}, {"violations", violations}};
}

json suggestion_json(const Suggestion& s, const Taxonomy& taxonomy) {
  json scores = json::object();
  for (std::size_t i = 0; i < s.scores.size(); ++i) scores[taxonomy.tags()[i].id] = s.scores[i];
  return {{"labels", labels_json(s.labels)}, {"scores", scores}, {"model_version", s.model_version}};
}

json record_json(const AnnotationRecord& r) {
  json j{{"segment_id", r.segment_id},
         {"annotator_id", r.annotator_id},
         {"labels", labels_json(r.labels)},
         {"created_at", r.created_at},
         {"content_hash", r.content_hash()}};
  if (r.completed_text) j["completed_text"] = *r.completed_text;
  return j;
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void reply_error(httplib::Response& res, int status, const std::string& category,
                 const std::string& message) {
  reply(res, status, {{"error", {{"category", category}, {"message", message}}}});
}

// Runs a handler, turning exceptions into error responses.
template <typename F>
void guarded(httplib::Response& res, F&& handler) {
  try {
    handler();
  } catch (const json::exception& e) {
    reply_error(res, 400, "usage", std::string("bad request body: ") + e.what());
  } catch (const UsageError& e) {
    reply_error(res, 400, "usage", e.what());
  } catch (const DataError& e) {
    reply_error(res, 404, "data", e.what());
  } catch (const Error& e) {
    reply_error(res, 500, to_string(e.category()), e.what());
  } catch (const std::exception& e) {
    reply_error(res, 500, "internal", e.what());
  }
}

json parse_body(const httplib::Request& req) {
  json j = json::parse(req.body);
  if (!j.is_object()) throw UsageError("request body must be a JSON object");
  return j;
}

std::string required_string(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw UsageError(std::string("missing string field '") + key + "'");
  }
  return j.at(key).get<std::string>();
}

std::string resolve_path(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  return path.is_absolute() ? p : (base / path).string();
}

}  // namespace

ServerConfig ServerConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open service config " + path.string());
  ServerConfig c;
  try {
    json j = json::parse(in);
    auto base = path.parent_path();
    c.corpus = resolve_path(base, j.value("corpus", ""));
    c.log = resolve_path(base, j.value("log", ""));
    c.model = resolve_path(base, j.value("model", ""));
    c.vectors = resolve_path(base, j.value("vectors", ""));
    c.lock_ttl_seconds = j.value("lock_ttl_seconds", c.lock_ttl_seconds);
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.include_machine_segments = j.value("include_machine_segments", false);
  } catch (const json::exception& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
  return c;
}

std::string scheme_json(const Taxonomy& taxonomy) {
  json tags = json::array();
  for (const auto& t : taxonomy.tags()) {
    tags.push_back({{"id", t.id},
                    {"display_name", t.display_name},
                    {"category", t.category},
                    {"path", t.path},
                    {"index", t.index}});
  }
  json nodes = json::array();
  for (const auto& n : taxonomy.nodes()) {
    nodes.push_back({{"id", n.id},
                     {"kind", to_string(n.kind)},
                     {"parent", n.parent},
                     {"display_name", n.display_name},
                     {"description", n.description},
                     {"example", n.example}});
  }
  json exclusions = json::array();
  for (const auto& e : taxonomy.exclusions()) {
    exclusions.push_back({{"first", e.first}, {"second", e.second}});
  }
  return json{{"tags", tags},
              {"nodes", nodes},
              {"categories", taxonomy.categories()},
              {"exclusions", exclusions},
              {"aliases", taxonomy.aliases()},
              {"max_tags", 2}}
      .dump();
}

std::string task_json(const AnnotationTask& task, const Taxonomy& taxonomy) {
  json by = json::object();
  for (const auto& [a, labels] : task.labels_by_annotator) by[a] = labels_json(labels);
  json j{{"segment_id", task.segment_id},
         {"conversation_id", task.conversation_id},
         {"speaker", to_string(task.speaker)},
         {"text", task.text},
         {"context",
          {{"sys_unit", task.context.sys_unit},
           {"user_prev", task.context.user_prev},
           {"user_cur", task.context.user_cur},
           {"rendered", task.context.render()}}},
         {"labels_by_annotator", by},
         {"suggestion", nullptr},
         {"lock", {{"owner", task.lock.owner}, {"expires_at", to_iso8601(task.lock.expires)}}}};
  if (task.suggestion) j["suggestion"] = suggestion_json(*task.suggestion, taxonomy);
  return j.dump();
}

std::string agreement_json(const AgreementReport& report) {
  json pairs = json::array();
  for (const auto& p : report.pairs) {
    json j{{"annotators", {p.first, p.second}}, {"overlap", p.overlap}};
    if (p.kappa_exact_set) {
      j["status"] = "ok";
      j["kappa_exact_set"] = *p.kappa_exact_set;
      j["kappa_per_tag_mean"] = *p.kappa_per_tag_mean;
    } else {
      j["status"] = "empty_overlap";
    }
    pairs.push_back(std::move(j));
  }
  return json{{"segments", report.segments}, {"coverage", report.coverage}, {"pairs", pairs}}.dump();
}

struct ApiServer::Impl {
  AnnotationService& service;
  httplib::Server server;

  explicit Impl(AnnotationService& s) : service(s) { routes(); }

  void routes() {
    const Taxonomy& tax = service.taxonomy();
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        json model = service.has_model() ? json(service.model_version()) : json(nullptr);
        reply(res, 200,
              {{"status", "ok"},
               {"segments", service.segment_count()},
               {"annotators", service.annotators().size()},
               {"model", model}});
      });
    });

    server.Get("/scheme", [&tax](const httplib::Request&, httplib::Response& res) {
      res.set_content(scheme_json(tax), kJson);
    });

    server.Post("/validate", [&tax](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto labels = parse_body(req).at("labels").get<std::vector<std::string>>();
        try {
          reply(res, 200, validation_json(tax.validate(labels)));
        } catch (const UnknownTagError& e) {
          reply(res, 200, {{"ok", false}, {"violations", json::array()}, {"unknown_tag", e.tag()}});
        }
      });
    });

    server.Post("/annotators", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto id = required_string(parse_body(req), "annotator_id");
        bool created = service.register_annotator(id);
        reply(res, created ? 201 : 200, {{"annotator_id", id}, {"created", created}});
      });
    });

    server.Post("/tasks/next", [this, &tax](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto id = required_string(parse_body(req), "annotator_id");
        auto task = service.next_task(id);
        json body{{"task", task ? json::parse(task_json(*task, tax)) : json(nullptr)}};
        reply(res, 200, body);
      });
    });

    server.Post("/submit", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        json j = parse_body(req);
        SubmitRequest r;
        r.annotator_id = required_string(j, "annotator_id");
        r.segment_id = required_string(j, "segment_id");
        r.labels = j.at("labels").get<std::vector<std::string>>();
        if (j.contains("completed_text") && !j.at("completed_text").is_null()) {
          r.completed_text = j.at("completed_text").get<std::string>();
        }
        auto result = service.submit(r);
        json body{{"status", to_string(result.status)}};
        int status = 200;
        switch (result.status) {
          case SubmitResult::Status::accepted:
          case SubmitResult::Status::duplicate:
            body["record"] = record_json(*result.record);
            break;
          case SubmitResult::Status::rejected:
            status = 422;
            body["violations"] = validation_json(result.validation).at("violations");
            body["message"] = result.message;
            break;
          case SubmitResult::Status::stale_lock:
            status = 409;
            body["lock_owner"] = result.lock_owner;
            body["message"] = result.message;
            break;
        }
        reply(res, status, body);
      });
    });

    server.Get("/suggest", [this, &tax](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        if (!req.has_param("segment_id")) throw UsageError("missing segment_id parameter");
        std::string seg = req.get_param_value("segment_id");
        if (!service.has_model()) {
          if (!service.suggest(seg)) reply(res, 200, {{"enabled", false}});
          return;
        }
        auto s = service.suggest(seg);
        json body{{"enabled", true}, {"segment_id", seg}, {"suggestion", nullptr}};
        if (s) body["suggestion"] = suggestion_json(*s, tax);
        reply(res, 200, body);
      });
    });

    server.Get("/agreement", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { res.set_content(agreement_json(service.agreement_report()), kJson); });
    });

    server.Get("/export", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        std::ostringstream out;
        write_corpus(out, service.snapshot());
        res.set_content(out.str(), "application/x-ndjson");
      });
    });
  }
};

ApiServer::ApiServer(AnnotationService& service) : impl_(std::make_unique<Impl>(service)) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    int bound = impl_->server.bind_to_any_port(host);
    if (bound <= 0) throw UsageError("cannot bind to " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw UsageError("cannot bind to " + host + ":" + std::to_string(port));
  }
  return port;
}

void ApiServer::run() { impl_->server.listen_after_bind(); }

void ApiServer::start() {
  thread_ = std::thread([this] { run(); });
  impl_->server.wait_until_ready();
}

void ApiServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace midas
