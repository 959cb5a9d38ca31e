#include <thread>

#include "atesa/errors.hpp"
#include "atesa/service.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace atesa;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const AnalysisService> fixture_service() {
  static const auto service = [] {
    ServiceConfig cfg;
    cfg.ate_manifest = (testing::fixture_models_dir() / "ate.json").string();
    cfg.atsa_manifest = (testing::fixture_models_dir() / "atsa.json").string();
    return AnalysisService::from_config(cfg);
  }();
  return service;
}

std::string error_code(const HttpResult& r) {
  return json::parse(r.body).at("error").at("code").get<std::string>();
}

std::vector<json> records(const std::string& stream) {
  std::vector<json> out;
  std::size_t pos = 0;
  while (pos < stream.size()) {
    const std::size_t nl = stream.find('\n', pos);
    REQUIRE(nl != std::string::npos);
    out.push_back(json::parse(stream.substr(pos, nl - pos)));
    pos = nl + 1;
  }
  return out;
}

struct RunningServer {
  explicit RunningServer(std::shared_ptr<const AnalysisService> service)
      : server(std::move(service)) {
    port = server.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    thread = std::thread([this] { server.listen(); });
    server.wait_until_ready();
  }
  ~RunningServer() {
    server.stop();
    thread.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port); }

  HttpServer server;
  int port = 0;
  std::thread thread;
};

}  // namespace

TEST_CASE("analyze handler") {
  const auto service = fixture_service();
  REQUIRE(service->ready());

  SUBCASE("figure sentence matches the golden response") {
    const HttpResult r =
        service->handle_analyze(R"({"text": "I liked the pizza and the open kitchen"})");
    CHECK(r.status == 200);
    const json body = json::parse(r.body);
    CHECK(body.at("opinions").at(0).at("term") == "pizza");
    CHECK(r.body + "\n" == read_file(testing::data_dir() / "golden" / "analyze_figure.json"));
  }
  SUBCASE("all-O input gives no opinions") {
    const HttpResult r = service->handle_analyze(R"({"text": "the"})");
    CHECK(r.status == 200);
    CHECK(json::parse(r.body).at("opinions").empty());
  }
  SUBCASE("client errors") {
    CHECK(service->handle_analyze(R"({"text": ""})").status == 400);
    CHECK(error_code(service->handle_analyze(R"({"text": ""})")) == "empty_text");
    CHECK(error_code(service->handle_analyze(R"({"text": "   "})")) == "empty_text");
    CHECK(error_code(service->handle_analyze(R"({"txt": "a"})")) == "missing_text");
    CHECK(error_code(service->handle_analyze(R"({"text": 3})")) == "missing_text");
    CHECK(error_code(service->handle_analyze("{nope")) == "invalid_json");
  }
  SUBCASE("identical requests give identical responses") {
    const std::string req = R"({"text": "The soup was cold but the bread was fine"})";
    CHECK(service->handle_analyze(req).body == service->handle_analyze(req).body);
  }
}

TEST_CASE("no models loaded answers 503") {
  const AnalysisService empty(nullptr);
  const HttpResult r = empty.handle_analyze(R"({"text": "pizza"})");
  CHECK(r.status == 503);
  CHECK(error_code(r) == "model_not_loaded");
  CHECK(empty.check_upload("a\n")->status == 503);
  CHECK(json::parse(empty.handle_health().body).at("models_loaded") == false);
}

TEST_CASE("upload limits") {
  const AnalysisService small(nullptr, json::array(), 8);
  CHECK(small.handle_analyze(R"({"text": "long enough"})").status == 413);
  CHECK(small.check_upload("0123456789")->status == 413);
}

TEST_CASE("file streaming") {
  const auto service = fixture_service();

  SUBCASE("three lines come back in order") {
    const auto recs = records(service->analyze_file("Great pasta\nthe\nSlow service\n"));
    REQUIRE(recs.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(recs[static_cast<std::size_t>(i)].at("line") == i + 1);
    CHECK(recs[1].at("opinions").empty());
  }
  SUBCASE("blank line produces a skip marker") {
    const auto recs = records(service->analyze_file("Great pasta\n   \nSlow service"));
    REQUIRE(recs.size() == 3);
    CHECK(recs[1] == json{{"line", 2}, {"skipped", true}, {"reason", "blank"}});
    CHECK(recs[2].at("line") == 3);
  }
  SUBCASE("two-line golden stream") {
    const std::string stream = service->analyze_file(
        "I liked the pizza and the open kitchen\r\nThe soup was cold but the bread was fine\n");
    CHECK(stream == read_file(testing::data_dir() / "golden" / "stream_two_lines.ndjson"));
  }
  SUBCASE("each record is emitted separately and emission can stop") {
    std::vector<std::string> chunks;
    service->stream_analyze_file("a\nb\nc\n", [&](std::string_view c) {
      chunks.emplace_back(c);
      return chunks.size() < 2;
    });
    CHECK(chunks.size() == 2);
    CHECK(chunks[0].back() == '\n');
  }
  SUBCASE("undecodable upload is rejected before streaming") {
    const auto err = service->check_upload("ok\n\xff\xfe broken\n");
    REQUIRE(err.has_value());
    CHECK(err->status == 400);
    CHECK(error_code(*err) == "invalid_encoding");
    CHECK_FALSE(service->check_upload("fine\n").has_value());
  }
  CHECK(service->analyze_file("").empty());
}

TEST_CASE("HTTP endpoints") {
  RunningServer running(fixture_service());
  httplib::Client cli = running.client();

  auto health = cli.Get("/api/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body).at("models_loaded") == true);

  auto models = cli.Get("/api/models");
  REQUIRE(models);
  const json listed = json::parse(models->body).at("models");
  CHECK(listed.size() == 2);

  auto ok = cli.Post("/api/analyze", R"({"text": "I liked the pizza and the open kitchen"})",
                     "application/json");
  REQUIRE(ok);
  CHECK(ok->status == 200);
  CHECK(ok->body + "\n" == read_file(testing::data_dir() / "golden" / "analyze_figure.json"));

  auto bad = cli.Post("/api/analyze", R"({"text": ""})", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body).at("error").at("code") == "empty_text");

  SUBCASE("streamed file analysis") {
    httplib::Request req;
    req.method = "POST";
    req.path = "/api/analyze-file";
    req.body =
        "I liked the pizza and the open kitchen\r\nThe soup was cold but the bread was fine\n";
    req.set_header("Content-Type", "text/plain");
    std::string received;
    req.content_receiver = [&](const char* data, std::size_t n, std::uint64_t, std::uint64_t) {
      received.append(data, n);
      return true;
    };
    auto res = cli.send(req);
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Content-Type") == "application/x-ndjson");
    CHECK(res->get_header_value("Transfer-Encoding") == "chunked");
    CHECK(received == read_file(testing::data_dir() / "golden" / "stream_two_lines.ndjson"));
  }
  SUBCASE("multipart upload") {
    httplib::MultipartFormDataItems items = {{"file", "a\n\nb\n", "reviews.txt", "text/plain"}};
    auto res = cli.Post("/api/analyze-file", items);
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto recs = records(res->body);
    REQUIRE(recs.size() == 3);
    CHECK(recs[1].at("skipped") == true);
  }
  SUBCASE("bad upload is a 400") {
    auto res = cli.Post("/api/analyze-file", std::string("\xc3\x28"), "text/plain");
    REQUIRE(res);
    CHECK(res->status == 400);
  }
}

TEST_CASE("HTTP 503 without models") {
  RunningServer running(std::make_shared<AnalysisService>(nullptr));
  httplib::Client cli = running.client();
  auto res = cli.Post("/api/analyze", R"({"text": "pizza"})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 503);
  auto file = cli.Post("/api/analyze-file", "pizza\n", "text/plain");
  REQUIRE(file);
  CHECK(file->status == 503);
}

TEST_CASE("service config file and environment") {
  const fs::path dir = testing::scratch_dir("config");
  write_file(dir / "service.json",
             R"({"ate_manifest": "models/ate.json", "port": 9001, "max_upload_bytes": 4096})");
  ServiceConfig cfg = ServiceConfig::load(dir / "service.json");
  CHECK(cfg.port == 9001);
  CHECK(cfg.max_upload_bytes == 4096);
  CHECK(fs::path(*cfg.ate_manifest) == dir / "models" / "ate.json");
  CHECK_FALSE(cfg.atsa_manifest.has_value());

  setenv("ATESA_PORT", "9100", 1);
  setenv("ATESA_HOST", "0.0.0.0", 1);
  cfg.apply_environment();
  unsetenv("ATESA_PORT");
  unsetenv("ATESA_HOST");
  CHECK(cfg.port == 9100);
  CHECK(cfg.host == "0.0.0.0");

  write_file(dir / "bad.json", R"({"prot": 1})");
  CHECK_THROWS_AS(ServiceConfig::load(dir / "bad.json"), ConfigError);
  CHECK(ServiceConfig::load(std::nullopt).max_upload_bytes == 1u << 20);
  fs::remove_all(dir);
}
