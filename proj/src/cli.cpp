#include "atesa/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "atesa/corpus.hpp"
#include "atesa/encoder.hpp"
#include "atesa/ensemble.hpp"
#include "atesa/errors.hpp"
#include "atesa/eval.hpp"
#include "atesa/pipeline.hpp"
#include "atesa/service.hpp"
#include "atesa/training.hpp"
#include "json.hpp"

namespace atesa {

namespace fs = std::filesystem;

namespace {

struct EncoderOptions {
  std::string family = "stub";
  int hidden_size = 32;
  int max_length = 128;
  std::uint64_t seed = 0;
  std::string checkpoint;

  void add_to(CLI::App* app) {
    app->add_option("--family", family, "Encoder family: stub, family_a, family_b")
        ->capture_default_str();
    app->add_option("--hidden-size", hidden_size, "Encoder hidden size")->capture_default_str();
    app->add_option("--max-length", max_length, "Encoder max sequence length")
        ->capture_default_str();
    app->add_option("--encoder-seed", seed, "Seed of a freshly initialized encoder")
        ->capture_default_str();
    app->add_option("--encoder-checkpoint", checkpoint,
                    "Encoder checkpoint directory (fine-tuned or pre-trained)");
  }

  EncoderSpec spec() const {
    if (!checkpoint.empty()) {
      EncoderCheckpoint ckpt = EncoderCheckpoint::load(checkpoint);
      return ckpt.spec;
    }
    EncoderSpec s;
    s.family = parse_family(family);
    s.hidden_size = hidden_size;
    s.max_sequence_length = max_length;
    s.seed = seed;
    return s;
  }
};

struct TrainOptions {
  TrainConfig config;

  void add_to(CLI::App* app) {
    app->add_option("--epochs", config.epochs)->capture_default_str();
    app->add_option("--batch-size", config.batch_size)->capture_default_str();
    app->add_option("--lr", config.learning_rate, "Learning rate")->capture_default_str();
    app->add_option("--seed", config.seed)->capture_default_str();
  }
};

void print_json(std::ostream& out, const nlohmann::json& j) { out << j.dump() << '\n'; }

std::vector<RawReview> load_corpus(const std::string& path, const std::string& format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return parse_corpus(in, parse_corpus_format(format));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Aspect term extraction and sentiment analysis with transformer ensembles",
               "atesa"};
  app.require_subcommand(1);
  app.fallthrough();

  // ingest -----------------------------------------------------------------
  std::string format, input, output;
  bool skip_invalid = false;
  auto* ingest = app.add_subcommand("ingest", "Convert an XML corpus to NDJSON examples");
  ingest->add_option("--format", format, "semeval2016 or mams")->required();
  ingest->add_option("--input", input, "XML corpus file")->required();
  ingest->add_option("--output", output, "NDJSON output file (default: stdout)");
  ingest->add_flag("--skip-invalid", skip_invalid,
                   "Skip sentences whose annotations cannot be labeled");

  // stats ------------------------------------------------------------------
  std::size_t top_n = 10;
  auto* stats = app.add_subcommand("stats", "Corpus statistics as JSON");
  stats->add_option("--format", format, "semeval2016 or mams")->required();
  stats->add_option("--input", input, "XML corpus file")->required();
  stats->add_option("--top", top_n, "Number of top terms")->capture_default_str();

  // split ------------------------------------------------------------------
  SplitConfig split_config;
  std::string out_dir;
  auto* split = app.add_subcommand("split", "Stratified train/validation/test split");
  split->add_option("--input", input, "NDJSON examples")->required();
  split->add_option("--out-dir", out_dir, "Directory for train/validation/test.ndjson")
      ->required();
  split->add_option("--train-fraction", split_config.train_fraction)->capture_default_str();
  split->add_option("--validation-fraction", split_config.validation_fraction_of_train)
      ->capture_default_str();
  split->add_option("--seed", split_config.seed)->capture_default_str();

  // finetune ---------------------------------------------------------------
  EncoderOptions ft_encoder;
  TrainOptions ft_train;
  std::string branch = "ate", train_path, dataset_id = "dataset";
  auto* finetune = app.add_subcommand("finetune", "Fine-tune an encoder through a Linear head");
  ft_encoder.add_to(finetune);
  ft_train.add_to(finetune);
  finetune->add_option("--branch", branch, "ate or atsa")->capture_default_str();
  finetune->add_option("--train", train_path, "NDJSON training examples")->required();
  finetune->add_option("--out", out_dir, "Output checkpoint directory")->required();
  finetune->add_option("--dataset-id", dataset_id)->capture_default_str();

  // train ------------------------------------------------------------------
  EncoderOptions tr_encoder;
  TrainOptions tr_train;
  std::string head_kind = "linear", validation_path;
  bool unfreeze = false;
  int lstm_units = 256;
  double dropout = 0.3;
  auto* train = app.add_subcommand("train", "Train one classifier head");
  tr_encoder.add_to(train);
  tr_train.add_to(train);
  train->add_option("--head", head_kind, "linear, bilstm or cnn_bilstm")->capture_default_str();
  train->add_option("--branch", branch, "ate or atsa")->capture_default_str();
  train->add_option("--train", train_path, "NDJSON training examples")->required();
  train->add_option("--validation", validation_path, "NDJSON validation examples");
  train->add_option("--out", out_dir, "Output checkpoint directory")->required();
  train->add_option("--dataset-id", dataset_id)->capture_default_str();
  train->add_option("--lstm-units", lstm_units)->capture_default_str();
  train->add_option("--dropout", dropout)->capture_default_str();
  train->add_flag("--unfreeze-encoder", unfreeze, "Train the encoder adapter jointly");

  // ensemble ---------------------------------------------------------------
  std::vector<std::string> member_args;
  std::string fusion = "soft", manifest_path;
  auto* ensemble = app.add_subcommand("ensemble", "Write an ensemble manifest");
  ensemble->add_option("--branch", branch, "ate or atsa")->capture_default_str();
  ensemble->add_option("--member", member_args, "Member checkpoint as [id=]dir")->required();
  ensemble->add_option("--fusion", fusion, "soft or hard")->capture_default_str();
  ensemble->add_option("--out", manifest_path, "Manifest file")->required();

  // evaluate ---------------------------------------------------------------
  EncoderOptions ev_encoder;
  TrainOptions ev_train;
  Protocol protocol;
  std::vector<std::string> heads;
  std::string records_path, name;
  bool same_seed = false;
  auto* evaluate = app.add_subcommand("evaluate", "Repeated-run evaluation protocol");
  ev_encoder.add_to(evaluate);
  ev_train.add_to(evaluate);
  evaluate->add_option("--data", input, "NDJSON examples")->required();
  evaluate->add_option("--branch", branch, "ate or atsa")->capture_default_str();
  evaluate->add_option("--head", heads, "Head kinds; several form a fused ensemble");
  evaluate->add_option("--runs", protocol.runs)->capture_default_str();
  evaluate->add_option("--train-fraction", protocol.split.train_fraction)->capture_default_str();
  evaluate->add_option("--validation-fraction", protocol.split.validation_fraction_of_train)
      ->capture_default_str();
  evaluate->add_option("--base-seed", protocol.base_seed)->capture_default_str();
  evaluate->add_flag("--same-seed", same_seed, "Use the base seed for every run");
  evaluate->add_option("--records", records_path, "NDJSON file for per-run records");
  evaluate->add_option("--name", name, "Row label in the summary table");
  evaluate->add_option("--lstm-units", lstm_units)->capture_default_str();
  evaluate->add_option("--dropout", dropout)->capture_default_str();
  evaluate->add_option("--fusion", fusion, "soft or hard")->capture_default_str();
  evaluate->add_flag("--unfreeze-encoder", unfreeze, "Train the encoder adapter jointly");

  // analyze ----------------------------------------------------------------
  std::string ate_manifest, atsa_manifest, text;
  auto* analyze = app.add_subcommand("analyze", "Analyze one text");
  analyze->add_option("--ate", ate_manifest, "ATE ensemble manifest")->required();
  analyze->add_option("--atsa", atsa_manifest, "ATSA ensemble manifest")->required();
  analyze->add_option("--text", text, "Text to analyze")->required();

  // serve ------------------------------------------------------------------
  std::string config_path, host;
  int port = -1;
  std::size_t max_upload = 0;
  auto* serve = app.add_subcommand("serve", "Run the REST analysis service");
  serve->add_option("--config", config_path, "Service config JSON");
  serve->add_option("--ate", ate_manifest, "ATE ensemble manifest");
  serve->add_option("--atsa", atsa_manifest, "ATSA ensemble manifest");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (0 picks a free one)");
  serve->add_option("--max-upload", max_upload, "Upload limit in bytes");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*ingest) {
      const auto reviews = load_corpus(input, format);
      std::vector<TaggedExample> examples;
      std::size_t skipped = 0;
      for (const RawReview& r : reviews) {
        for (const RawSentence& s : r.sentences) {
          try {
            examples.push_back(derive_labels(s));
          } catch (const ValidationError& e) {
            if (!skip_invalid) throw;
            err << "warning: skipping sentence: " << e.what() << '\n';
            ++skipped;
          }
        }
      }
      if (output.empty()) {
        write_examples(out, examples);
      } else {
        write_examples_file(output, examples);
        print_json(out, {{"examples", examples.size()}, {"skipped", skipped}, {"output", output}});
      }
    } else if (*stats) {
      out << stats_to_json(compute_stats(load_corpus(input, format)), top_n) << '\n';
    } else if (*split) {
      const auto examples = read_examples_file(input);
      const DataSplit parts = stratified_split(examples, split_config);
      fs::create_directories(out_dir);
      write_examples_file((fs::path(out_dir) / "train.ndjson").string(), parts.train);
      write_examples_file((fs::path(out_dir) / "validation.ndjson").string(), parts.validation);
      write_examples_file((fs::path(out_dir) / "test.ndjson").string(), parts.test);
      print_json(out, {{"train", parts.train.size()},
                       {"validation", parts.validation.size()},
                       {"test", parts.test.size()}});
    } else if (*finetune) {
      const auto examples = read_examples_file(train_path);
      const EncoderCheckpoint ckpt = fine_tune_encoder(
          ft_encoder.spec(), parse_branch(branch), examples, ft_train.config, dataset_id);
      const EncoderSpec saved = ckpt.save(out_dir);
      print_json(out, {{"checkpoint", out_dir},
                       {"spec", to_json(saved)},
                       {"provenance", to_json(ckpt.provenance)}});
    } else if (*train) {
      const auto examples = read_examples_file(train_path);
      std::vector<TaggedExample> validation;
      if (!validation_path.empty()) validation = read_examples_file(validation_path);
      Encoder encoder = Encoder::create(tr_encoder.spec());
      HeadConfig head_config =
          HeadConfig::make(parse_head_kind(head_kind), parse_branch(branch), encoder.hidden_size());
      head_config.lstm_units = lstm_units;
      head_config.dropout_rate = dropout;
      ModelCheckpoint ckpt = train_model(head_config, encoder, examples, validation,
                                         tr_train.config, !unfreeze, dataset_id);
      if (unfreeze) {
        EncoderCheckpoint enc = encoder.to_checkpoint(ckpt.provenance);
        enc.spec.variant = EncoderVariant::Finetuned;
        ckpt.encoder_spec = enc.save(fs::path(out_dir) / "encoder");
      }
      ckpt.save(out_dir);
      nlohmann::json history = nlohmann::json::array();
      for (const EpochRecord& r : ckpt.history) {
        history.push_back({{"epoch", r.epoch},
                           {"train_loss", r.train_loss},
                           {"train_accuracy", r.train_accuracy}});
      }
      print_json(out, {{"checkpoint", out_dir}, {"history", history}});
    } else if (*ensemble) {
      EnsembleConfig config;
      config.branch = parse_branch(branch);
      config.fusion = parse_fusion_rule(fusion);
      for (const std::string& m : member_args) {
        const auto eq = m.find('=');
        if (eq == std::string::npos) {
          config.members.push_back({fs::path(m).filename().string(), fs::path(m)});
        } else {
          config.members.push_back({m.substr(0, eq), fs::path(m.substr(eq + 1))});
        }
      }
      (void)LoadedEnsemble::load(config);
      config.save(manifest_path);
      print_json(out, to_json(config));
    } else if (*evaluate) {
      const auto examples = read_examples_file(input);
      ExperimentSubject subject;
      subject.branch = parse_branch(branch);
      subject.fusion = parse_fusion_rule(fusion);
      subject.lstm_units = lstm_units;
      subject.dropout_rate = dropout;
      if (heads.empty()) heads.push_back("linear");
      const EncoderSpec encoder_spec = ev_encoder.spec();
      for (const std::string& h : heads) {
        subject.members.push_back({parse_head_kind(h), encoder_spec, !unfreeze});
      }
      if (name.empty()) {
        for (std::size_t i = 0; i < heads.size(); ++i) name += (i ? "+" : "") + heads[i];
      }
      subject.name = name;
      protocol.train = ev_train.config;
      protocol.vary_seed_per_run = !same_seed;

      std::ofstream records;
      if (!records_path.empty()) {
        records.open(records_path, std::ios::trunc);
        if (!records) throw Error("cannot write " + records_path);
      }
      const RunSummary summary =
          run_experiment(examples, subject, protocol, [&](const RunRecord& r) {
            if (records.is_open()) write_run_record(records, r);
          });
      const std::vector<RunSummary> rows = {summary};
      const std::vector<std::string> transformers = {
          std::string(family_name(encoder_spec.family)) + " " +
          std::string(variant_name(encoder_spec.variant))};
      out << render_summary_table(rows, transformers);
    } else if (*analyze) {
      const Analyzer analyzer =
          Analyzer::load(EnsembleConfig::load(ate_manifest), EnsembleConfig::load(atsa_manifest));
      print_json(out, analysis_to_json(analyzer.analyze(text)));
    } else if (*serve) {
      ServiceConfig config = ServiceConfig::load(
          config_path.empty() ? std::nullopt : std::optional<fs::path>(config_path));
      config.apply_environment();
      if (!ate_manifest.empty()) config.ate_manifest = ate_manifest;
      if (!atsa_manifest.empty()) config.atsa_manifest = atsa_manifest;
      if (!host.empty()) config.host = host;
      if (port >= 0) config.port = port;
      if (max_upload > 0) config.max_upload_bytes = max_upload;
      auto service = AnalysisService::from_config(config);
      HttpServer server(service, config.max_upload_bytes);
      const int bound = server.bind(config.host, config.port);
      if (bound < 0) {
        throw Error("cannot bind " + config.host + ":" + std::to_string(config.port));
      }
      print_json(out, {{"listening", config.host + ":" + std::to_string(bound)},
                       {"models_loaded", service->ready()}});
      out.flush();
      server.listen();
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitSuccess;
}

}  // namespace atesa
