#include "fixtures.hpp"

#include <random>

#include "atesa/ensemble.hpp"

namespace atesa::testing {

namespace fs = std::filesystem;

fs::path data_dir() { return ATESA_TEST_DATA_DIR; }

std::vector<TaggedExample> toy_corpus() {
  return read_examples_file((data_dir() / "toy.ndjson").string());
}

EncoderSpec overfit_encoder_spec() {
  EncoderSpec spec;
  spec.family = EncoderFamily::Stub;
  spec.hidden_size = 128;
  spec.seed = 0;
  return spec;
}

HeadConfig overfit_head_config(HeadKind kind, Branch branch) {
  HeadConfig c = HeadConfig::make(kind, branch, overfit_encoder_spec().hidden_size);
  c.lstm_units = 32;
  return c;
}

TrainConfig overfit_train_config(int epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.learning_rate = 1e-2;
  t.seed = 0;
  return t;
}

void build_fixture_models(const fs::path& dir) {
  fs::create_directories(dir);
  const auto corpus = toy_corpus();
  for (Branch branch : {Branch::Ate, Branch::Atsa}) {
    EnsembleConfig config;
    config.branch = branch;
    for (std::uint64_t encoder_seed : {0u, 1u}) {
      EncoderSpec spec = overfit_encoder_spec();
      spec.seed = encoder_seed;
      Encoder encoder = Encoder::create(spec);
      for (HeadKind kind : {HeadKind::Linear, HeadKind::BiLstm, HeadKind::CnnBiLstm}) {
        const std::string id = std::string(branch_name(branch)) + "-" +
                                std::string(head_kind_name(kind)) + "-s" +
                                std::to_string(encoder_seed);
        TrainConfig train = overfit_train_config(kind == HeadKind::Linear ? 200 : 60);
        train.seed = encoder_seed;
        const ModelCheckpoint ckpt = train_model(overfit_head_config(kind, branch), encoder,
                                                 corpus, {}, train, true, "toy");
        ckpt.save(dir / id);
        config.members.push_back({id, dir / id});
      }
    }
    config.save(dir / (std::string(branch_name(branch)) + ".json"));
  }
}

fs::path fixture_models_dir() { return ATESA_TEST_FIXTURE_DIR; }

fs::path scratch_dir(const std::string& name) {
  static std::mt19937_64 rng{std::random_device{}()};
  fs::path p = fs::temp_directory_path() / ("atesa-" + name + "-" + std::to_string(rng()));
  fs::create_directories(p);
  return p;
}

}  // namespace atesa::testing
