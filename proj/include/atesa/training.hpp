#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "atesa/checkpoint.hpp"
#include "atesa/corpus.hpp"
#include "atesa/encoder.hpp"
#include "atesa/heads.hpp"

namespace atesa {

struct TrainConfig {
  int epochs = 2;
  int batch_size = 4;
  double learning_rate = 1e-5;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Adam with bias correction.
class AdamOptimizer {
 public:
  AdamOptimizer(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);

  void step(ParamSet& params, const ParamSet& grads);

 private:
  double learning_rate_;
  double beta1_;
  double beta2_;
  double epsilon_;
  long step_count_ = 0;
  ParamSet first_moment_;
  ParamSet second_moment_;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // token-averaged, training mode
  double train_accuracy = 0.0;  // inference mode after the epoch
  double validation_loss = std::numeric_limits<double>::quiet_NaN();
  double validation_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct ModelCheckpoint {
  HeadConfig head_config;
  EncoderSpec encoder_spec;
  ParamSet weights;
  std::vector<EpochRecord> history;
  Provenance provenance;

  Head head() const { return Head(head_config, weights); }

  // manifest.json + weights.bin + history.json.
  void save(const std::filesystem::path& dir) const;
  // Relative encoder checkpoint_refs are resolved against |dir|.
  static ModelCheckpoint load(const std::filesystem::path& dir);
};

// Gold labels of |example| for |branch|.
std::span<const int> branch_labels(const TaggedExample& example, Branch branch);

// Mini-batch training with Adam and token-averaged cross-entropy. Sentences
// run at their own length, which is padding with a masked loss. With
// freeze_encoder false the encoder's adapter is trained jointly and |encoder|
// is updated in place. Throws TrainingError on a non-finite loss.
ModelCheckpoint train_model(const HeadConfig& head_config, Encoder& encoder,
                            std::span<const TaggedExample> train,
                            std::span<const TaggedExample> validation,
                            const TrainConfig& config, bool freeze_encoder,
                            const std::string& dataset_id = "unnamed");

// Trains a Linear head end to end on a pre-trained encoder and returns the
// encoder alone, marked fine-tuned, with provenance naming dataset and branch.
EncoderCheckpoint fine_tune_encoder(const EncoderSpec& pretrained,
                                    Branch branch,
                                    std::span<const TaggedExample> train,
                                    const TrainConfig& config,
                                    const std::string& dataset_id);

// Token accuracy of |head| on |examples| in inference mode.
double token_accuracy(const Head& head, const Encoder& encoder,
                      std::span<const TaggedExample> examples);

}  // namespace atesa
