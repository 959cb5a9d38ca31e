#include "atesa/service.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>

#include "atesa/errors.hpp"
#include "atesa/unicode.hpp"
#include "httplib.h"

namespace atesa {

namespace fs = std::filesystem;

ServiceConfig ServiceConfig::load(const std::optional<fs::path>& file) {
  ServiceConfig config;
  if (!file) return config;
  std::ifstream in(*file);
  if (!in) throw ConfigError("cannot open service config " + file->string());
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    static const std::set<std::string> known = {"ate_manifest", "atsa_manifest", "host",
                                                "port", "max_upload_bytes"};
    for (const auto& [key, value] : j.items()) {
      if (!known.contains(key)) throw ConfigError("unknown service config key '" + key + "'");
    }
    if (j.contains("ate_manifest")) config.ate_manifest = j["ate_manifest"].get<std::string>();
    if (j.contains("atsa_manifest")) config.atsa_manifest = j["atsa_manifest"].get<std::string>();
    config.host = j.value("host", config.host);
    config.port = j.value("port", config.port);
    config.max_upload_bytes = j.value("max_upload_bytes", config.max_upload_bytes);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid service config " + file->string() + ": " + e.what());
  }
  // Manifest paths in the file are relative to the file.
  const fs::path base = file->parent_path();
  for (auto* m : {&config.ate_manifest, &config.atsa_manifest}) {
    if (*m && fs::path(**m).is_relative()) *m = (base / **m).lexically_normal().string();
  }
  return config;
}

void ServiceConfig::apply_environment() {
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
  if (auto v = env("ATESA_ATE_MANIFEST")) ate_manifest = *v;
  if (auto v = env("ATESA_ATSA_MANIFEST")) atsa_manifest = *v;
  if (auto v = env("ATESA_HOST")) host = *v;
  try {
    if (auto v = env("ATESA_PORT")) port = std::stoi(*v);
    if (auto v = env("ATESA_MAX_UPLOAD_BYTES")) max_upload_bytes = std::stoull(*v);
  } catch (const std::exception&) {
    throw ConfigError("ATESA_PORT / ATESA_MAX_UPLOAD_BYTES must be integers");
  }
}

nlohmann::json analysis_to_json(const Analysis& analysis) {
  nlohmann::json tokens = nlohmann::json::array();
  for (const Token& t : analysis.tokens) tokens.push_back(t.text);
  nlohmann::json opinions = nlohmann::json::array();
  for (const AspectOpinion& o : analysis.opinions) {
    opinions.push_back({{"start", o.span.start},
                        {"end", o.span.end},
                        {"term", o.term},
                        {"polarity", polarity_name(o.polarity)}});
  }
  return {{"tokens", tokens}, {"opinions", opinions}};
}

nlohmann::json error_json(std::string_view code, std::string_view message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

namespace {

HttpResult json_result(int status, const nlohmann::json& body) {
  return {status, body.dump(), "application/json"};
}

HttpResult error_result(int status, std::string_view code, std::string_view message) {
  return json_result(status, error_json(code, message));
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v';
  });
}

}  // namespace

AnalysisService::AnalysisService(std::shared_ptr<const Analyzer> analyzer,
                                 nlohmann::json model_manifests,
                                 std::size_t max_upload_bytes)
    : analyzer_(std::move(analyzer)),
      model_manifests_(std::move(model_manifests)),
      max_upload_bytes_(max_upload_bytes) {}

std::shared_ptr<AnalysisService> AnalysisService::from_config(const ServiceConfig& config) {
  if (!config.ate_manifest && !config.atsa_manifest) {
    return std::make_shared<AnalysisService>(nullptr, nlohmann::json::array(),
                                             config.max_upload_bytes);
  }
  if (!config.ate_manifest || !config.atsa_manifest) {
    throw ConfigError("both an ATE and an ATSA ensemble manifest are required");
  }
  auto analyzer = std::make_shared<const Analyzer>(
      Analyzer::load(EnsembleConfig::load(*config.ate_manifest),
                     EnsembleConfig::load(*config.atsa_manifest)));
  nlohmann::json ate = analyzer->ate().describe();
  ate["manifest"] = *config.ate_manifest;
  nlohmann::json atsa = analyzer->atsa().describe();
  atsa["manifest"] = *config.atsa_manifest;
  return std::make_shared<AnalysisService>(std::move(analyzer), nlohmann::json::array({ate, atsa}),
                                           config.max_upload_bytes);
}

HttpResult AnalysisService::handle_health() const {
  return json_result(200, {{"status", "ok"}, {"models_loaded", ready()}});
}

HttpResult AnalysisService::handle_models() const {
  return json_result(200, {{"models", model_manifests_}});
}

HttpResult AnalysisService::handle_analyze(std::string_view body) const {
  if (body.size() > max_upload_bytes_) {
    return error_result(413, "payload_too_large", "request body exceeds the upload limit");
  }
  nlohmann::json request;
  try {
    request = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    return error_result(400, "invalid_json", "request body is not valid UTF-8 JSON");
  }
  if (!request.is_object() || !request.contains("text") || !request["text"].is_string()) {
    return error_result(400, "missing_text", "request needs a string field 'text'");
  }
  const std::string text = request["text"].get<std::string>();
  if (text.find_first_not_of(" \t\r\n\f\v") == std::string::npos) {
    return error_result(400, "empty_text", "text is empty");
  }
  if (!ready()) return error_result(503, "model_not_loaded", "no ensembles are loaded");
  return json_result(200, analysis_to_json(analyzer_->analyze(text)));
}

std::optional<HttpResult> AnalysisService::check_upload(std::string_view upload) const {
  if (upload.size() > max_upload_bytes_) {
    return error_result(413, "payload_too_large", "upload exceeds the size limit");
  }
  if (!unicode::is_valid_utf8(upload)) {
    return error_result(400, "invalid_encoding", "upload is not valid UTF-8");
  }
  if (!ready()) return error_result(503, "model_not_loaded", "no ensembles are loaded");
  return std::nullopt;
}

void AnalysisService::stream_analyze_file(
    std::string_view upload, const std::function<bool(std::string_view)>& emit) const {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < upload.size()) {
    std::size_t eol = upload.find('\n', pos);
    if (eol == std::string_view::npos) eol = upload.size();
    std::string_view line = upload.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    nlohmann::json record;
    if (is_blank(line)) {
      record = {{"line", line_no}, {"skipped", true}, {"reason", "blank"}};
    } else {
      record = analysis_to_json(analyzer_->analyze(line));
      record["line"] = line_no;
    }
    if (!emit(record.dump() + "\n")) return;
  }
}

std::string AnalysisService::analyze_file(std::string_view upload) const {
  std::string out;
  stream_analyze_file(upload, [&out](std::string_view rec) {
    out += rec;
    return true;
  });
  return out;
}

// ---------------------------------------------------------------------------
// HTTP front end
// ---------------------------------------------------------------------------

struct HttpServer::Impl {
  httplib::Server server;
  std::shared_ptr<const AnalysisService> service;
};

namespace {

void respond(httplib::Response& res, const HttpResult& result) {
  res.status = result.status;
  res.set_content(result.body, result.content_type);
}

}  // namespace

HttpServer::HttpServer(std::shared_ptr<const AnalysisService> service,
                       std::size_t max_upload_bytes)
    : impl_(std::make_unique<Impl>()) {
  impl_->service = std::move(service);
  auto& svr = impl_->server;
  auto svc = impl_->service;
  svr.set_payload_max_length(max_upload_bytes);
  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

  svr.Get("/api/health", [svc](const httplib::Request&, httplib::Response& res) {
    respond(res, svc->handle_health());
  });
  svr.Get("/api/models", [svc](const httplib::Request&, httplib::Response& res) {
    respond(res, svc->handle_models());
  });
  svr.Post("/api/analyze", [svc](const httplib::Request& req, httplib::Response& res) {
    respond(res, svc->handle_analyze(req.body));
  });
  svr.Post("/api/analyze-file", [svc](const httplib::Request& req, httplib::Response& res) {
    auto upload = std::make_shared<std::string>(
        req.is_multipart_form_data() ? req.get_file_value("file").content : req.body);
    if (auto error = svc->check_upload(*upload)) {
      respond(res, *error);
      return;
    }
    res.status = 200;
    res.set_chunked_content_provider(
        "application/x-ndjson", [svc, upload](std::size_t, httplib::DataSink& sink) {
          svc->stream_analyze_file(*upload, [&sink](std::string_view record) {
            return sink.write(record.data(), record.size());
          });
          sink.done();
          return true;
        });
  });
  svr.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  svr.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string message = "internal error";
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          message = e.what();
        } catch (...) {
        }
        respond(res, error_result(500, "internal_error", message));
      });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace atesa
