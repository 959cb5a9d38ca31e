#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "atesa/pipeline.hpp"
#include "json.hpp"

namespace atesa {

// Loaded from an optional JSON file, then overridden by ATESA_ATE_MANIFEST,
// ATESA_ATSA_MANIFEST, ATESA_HOST, ATESA_PORT and ATESA_MAX_UPLOAD_BYTES.
struct ServiceConfig {
  std::optional<std::string> ate_manifest;
  std::optional<std::string> atsa_manifest;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t max_upload_bytes = 1 << 20;

  static ServiceConfig load(const std::optional<std::filesystem::path>& file);
  void apply_environment();
};

struct HttpResult {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// {"tokens": [...], "opinions": [{"start", "end", "term", "polarity"}]}
nlohmann::json analysis_to_json(const Analysis& analysis);

// Error body: {"error": {"code": <machine code>, "message": <text>}}.
nlohmann::json error_json(std::string_view code, std::string_view message);

// Request handling independent of the HTTP transport. Stateless: the analyzer
// is fixed at construction and only read afterwards.
class AnalysisService {
 public:
  // A null analyzer makes the analysis endpoints answer 503.
  AnalysisService(std::shared_ptr<const Analyzer> analyzer,
                  nlohmann::json model_manifests = nlohmann::json::array(),
                  std::size_t max_upload_bytes = 1 << 20);

  static std::shared_ptr<AnalysisService> from_config(const ServiceConfig& config);

  bool ready() const { return analyzer_ != nullptr; }

  HttpResult handle_health() const;
  HttpResult handle_models() const;
  HttpResult handle_analyze(std::string_view body) const;

  // Checks an analyze-file upload before streaming starts. Returns the error
  // response, or nullopt when streaming may begin.
  std::optional<HttpResult> check_upload(std::string_view upload) const;

  // One NDJSON record per input line, in input order, each passed to |emit|
  // (newline included) as soon as it is ready. Blank lines produce
  // {"line": i, "skipped": true, "reason": "blank"}. Stops early if |emit|
  // returns false.
  void stream_analyze_file(std::string_view upload,
                           const std::function<bool(std::string_view)>& emit) const;

  // Entire stream as one string.
  std::string analyze_file(std::string_view upload) const;

 private:
  std::shared_ptr<const Analyzer> analyzer_;
  nlohmann::json model_manifests_;
  std::size_t max_upload_bytes_;
};

// HTTP/1.1 front end:
//   POST /api/analyze       {"text": ...}            -> AnalyzeResponse
//   POST /api/analyze-file  raw text or multipart "file" -> chunked NDJSON
//   GET  /api/health
//   GET  /api/models
class HttpServer {
 public:
  HttpServer(std::shared_ptr<const AnalysisService> service,
             std::size_t max_upload_bytes = 1 << 20);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds |port| (0 picks a free one) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace atesa
