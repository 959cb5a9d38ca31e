// Trains the fixture ensembles. With --write-golden DIR it also rewrites the
// frozen service responses; only do that after an intended model change.

#include <iostream>
#include <string>

#include "atesa/checkpoint.hpp"
#include "atesa/service.hpp"
#include "fixtures.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  fs::path dir = atesa::testing::fixture_models_dir();
  fs::path golden;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--write-golden" && i + 1 < argc) {
      golden = argv[++i];
    } else {
      dir = arg;
    }
  }
  try {
    atesa::testing::build_fixture_models(dir);
    if (!golden.empty()) {
      atesa::ServiceConfig cfg;
      cfg.ate_manifest = (dir / "ate.json").string();
      cfg.atsa_manifest = (dir / "atsa.json").string();
      const auto service = atesa::AnalysisService::from_config(cfg);
      fs::create_directories(golden);
      atesa::write_file(golden / "analyze_figure.json",
                        service->handle_analyze(R"({"text": ")" +
                                                atesa::testing::kFigureSentence + "\"}")
                                .body +
                            "\n");
      atesa::write_file(golden / "stream_two_lines.ndjson",
                        service->analyze_file("I liked the pizza and the open kitchen\r\n"
                                              "The soup was cold but the bread was fine\n"));
    }
  } catch (const std::exception& e) {
    std::cerr << "make_fixtures: " << e.what() << '\n';
    return 1;
  }
  std::cout << dir.string() << '\n';
  return 0;
}
