#include "atesa/training.hpp"

#include <cmath>
#include <numeric>

#include "atesa/errors.hpp"
#include "atesa/random.hpp"

namespace atesa {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (epochs <= 0) throw ValidationError("epochs must be positive");
  if (batch_size <= 0) throw ValidationError("batch_size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning_rate must be a finite non-negative number");
  }
}

nlohmann::json to_json(const TrainConfig& config) {
  return {{"epochs", config.epochs},
          {"batch_size", config.batch_size},
          {"learning_rate", config.learning_rate},
          {"seed", config.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

AdamOptimizer::AdamOptimizer(double learning_rate, double beta1, double beta2,
                             double epsilon)
    : learning_rate_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void AdamOptimizer::step(ParamSet& params, const ParamSet& grads) {
  if (!params.same_layout(grads)) {
    throw ShapeError("optimizer step with mismatched gradient layout");
  }
  if (first_moment_.empty()) {
    first_moment_ = params.zeros_like();
    second_moment_ = params.zeros_like();
  }
  ++step_count_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  auto p = params.begin();
  auto g = grads.begin();
  auto m = first_moment_.begin();
  auto v = second_moment_.begin();
  for (; p != params.end(); ++p, ++g, ++m, ++v) {
    m->value = beta1_ * m->value + (1.0 - beta1_) * g->value;
    v->value = beta2_ * v->value + (1.0 - beta2_) * g->value.cwiseAbs2();
    p->value.array() -= learning_rate_ * (m->value.array() / c1) /
                        ((v->value.array() / c2).sqrt() + epsilon_);
  }
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

nlohmann::json nan_to_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double null_to_nan(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j[key].get<double>();
}

nlohmann::json history_to_json(const std::vector<EpochRecord>& history) {
  nlohmann::json arr = nlohmann::json::array();
  for (const EpochRecord& r : history) {
    arr.push_back({{"epoch", r.epoch},
                   {"train_loss", nan_to_null(r.train_loss)},
                   {"train_accuracy", nan_to_null(r.train_accuracy)},
                   {"validation_loss", nan_to_null(r.validation_loss)},
                   {"validation_accuracy", nan_to_null(r.validation_accuracy)}});
  }
  return arr;
}

std::vector<EpochRecord> history_from_json(const nlohmann::json& arr) {
  std::vector<EpochRecord> out;
  for (const auto& j : arr) {
    EpochRecord r;
    r.epoch = j.value("epoch", 0);
    r.train_loss = null_to_nan(j, "train_loss");
    r.train_accuracy = null_to_nan(j, "train_accuracy");
    r.validation_loss = null_to_nan(j, "validation_loss");
    r.validation_accuracy = null_to_nan(j, "validation_accuracy");
    out.push_back(r);
  }
  return out;
}

}  // namespace

void ModelCheckpoint::save(const fs::path& dir) const {
  EncoderSpec stored = encoder_spec;
  if (stored.checkpoint_ref) {
    const fs::path ref(*stored.checkpoint_ref);
    std::error_code ec;
    fs::create_directories(dir, ec);
    const fs::path rel = fs::proximate(fs::absolute(ref), fs::absolute(dir), ec);
    if (!ec) stored.checkpoint_ref = rel.string();
  }
  nlohmann::json fields;
  fields["head_config"] = to_json(head_config);
  fields["encoder_spec"] = to_json(stored);
  fields["provenance"] = to_json(provenance);
  write_checkpoint(dir, "head", std::move(fields),
                   {{std::string(kWeightsFile), serialize_weights(weights)},
                    {"history.json", history_to_json(history).dump(2) + "\n"}});
}

ModelCheckpoint ModelCheckpoint::load(const fs::path& dir) {
  const CheckpointBundle bundle = read_checkpoint(dir, "head");
  ModelCheckpoint ckpt;
  try {
    ckpt.head_config = head_config_from_json(bundle.manifest.at("head_config"));
    ckpt.encoder_spec = encoder_spec_from_json(bundle.manifest.at("encoder_spec"));
    ckpt.provenance = provenance_from_json(bundle.manifest.at("provenance"));
    if (bundle.files.contains("history.json")) {
      ckpt.history = history_from_json(nlohmann::json::parse(bundle.files.at("history.json")));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt head checkpoint in " + dir.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw CheckpointError("corrupt head checkpoint in " + dir.string() + ": " + e.what());
  }
  if (ckpt.encoder_spec.checkpoint_ref) {
    const fs::path ref(*ckpt.encoder_spec.checkpoint_ref);
    if (ref.is_relative()) {
      ckpt.encoder_spec.checkpoint_ref = (dir / ref).lexically_normal().string();
    }
  }
  ckpt.weights = deserialize_weights(bundle.files.at(std::string(kWeightsFile)));
  try {
    (void)ckpt.head();
  } catch (const ShapeError& e) {
    throw CheckpointError(dir.string() + ": " + e.what());
  }
  return ckpt;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

std::span<const int> branch_labels(const TaggedExample& example, Branch branch) {
  return branch == Branch::Ate ? std::span<const int>(example.iob_aspect_tags)
                               : std::span<const int>(example.atsa_tags);
}

namespace {

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

Evaluation evaluate_split(const Head& head, const std::vector<Matrix>& embeddings,
                          const std::vector<std::span<const int>>& labels) {
  double loss = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    const Matrix scores = head.forward(embeddings[i]);
    loss += softmax_cross_entropy(scores, labels[i]);
    const std::vector<int> pred = argmax_rows(scores);
    for (std::size_t t = 0; t < pred.size(); ++t) correct += pred[t] == labels[i][t];
    total += pred.size();
  }
  if (total == 0) return {0.0, 0.0};
  return {loss / static_cast<double>(total),
          static_cast<double>(correct) / static_cast<double>(total)};
}

}  // namespace

ModelCheckpoint train_model(const HeadConfig& head_config, Encoder& encoder,
                            std::span<const TaggedExample> train,
                            std::span<const TaggedExample> validation,
                            const TrainConfig& config, bool freeze_encoder,
                            const std::string& dataset_id) {
  head_config.validate();
  config.validate();
  if (train.empty()) throw ValidationError("training set is empty");
  if (head_config.input_size != encoder.hidden_size()) {
    throw ShapeError("head input_size " + std::to_string(head_config.input_size) +
                     " does not match encoder hidden size " +
                     std::to_string(encoder.hidden_size()));
  }
  const Branch branch = head_config.branch;

  auto prepare = [&](std::span<const TaggedExample> examples,
                     std::vector<Matrix>& base,
                     std::vector<std::span<const int>>& labels) {
    for (const TaggedExample& ex : examples) {
      ex.validate();
      base.push_back(encoder.encode_base(ex.tokens));
      labels.push_back(branch_labels(ex, branch).first(
          static_cast<std::size_t>(base.back().rows())));
    }
  };
  std::vector<Matrix> train_base;
  std::vector<Matrix> val_base;
  std::vector<std::span<const int>> train_labels;
  std::vector<std::span<const int>> val_labels;
  prepare(train, train_base, train_labels);
  prepare(validation, val_base, val_labels);

  auto adapt = [&](const std::vector<Matrix>& base) {
    std::vector<Matrix> out;
    out.reserve(base.size());
    for (const Matrix& b : base) out.push_back(encoder.apply_adapter(b));
    return out;
  };
  std::vector<Matrix> train_emb = adapt(train_base);

  Head head(head_config, config.seed);
  ParamSet grads = head.parameters().zeros_like();
  ParamSet encoder_grads = encoder.adapter().zeros_like();
  AdamOptimizer head_optimizer(config.learning_rate);
  AdamOptimizer encoder_optimizer(config.learning_rate);
  Rng rng(config.seed ^ 0x7261696e696e67ULL);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  ModelCheckpoint ckpt;
  ckpt.head_config = head_config;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    double epoch_loss = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::size_t batch_tokens = 0;
      for (std::size_t k = start; k < stop; ++k) batch_tokens += train_labels[order[k]].size();
      if (batch_tokens == 0) continue;

      grads.set_zero();
      encoder_grads.set_zero();
      const double scale = 1.0 / static_cast<double>(batch_tokens);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        if (train_labels[i].empty()) continue;
        if (freeze_encoder) {
          batch_loss += head.accumulate_gradients(train_emb[i], train_labels[i],
                                                  Mode::Train, rng, scale, grads);
        } else {
          const Matrix emb = encoder.apply_adapter(train_base[i]);
          Matrix d_emb;
          batch_loss += head.accumulate_gradients(emb, train_labels[i], Mode::Train,
                                                  rng, scale, grads, &d_emb);
          encoder_grads.at("weight").noalias() += d_emb.transpose() * train_base[i];
          encoder_grads.at("bias") += d_emb.colwise().sum();
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("non-finite loss in epoch " + std::to_string(epoch) +
                            ", batch starting at position " + std::to_string(start));
      }
      head_optimizer.step(head.parameters(), grads);
      if (!freeze_encoder) encoder_optimizer.step(encoder.adapter(), encoder_grads);
      epoch_loss += batch_loss;
      epoch_tokens += batch_tokens;
    }

    if (!freeze_encoder) train_emb = adapt(train_base);
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = epoch_tokens ? epoch_loss / static_cast<double>(epoch_tokens) : 0.0;
    record.train_accuracy = evaluate_split(head, train_emb, train_labels).accuracy;
    if (!validation.empty()) {
      const Evaluation v = evaluate_split(head, adapt(val_base), val_labels);
      record.validation_loss = v.loss;
      record.validation_accuracy = v.accuracy;
    }
    ckpt.history.push_back(record);
  }

  ckpt.encoder_spec = encoder.spec();
  ckpt.weights = head.parameters();
  ckpt.provenance = make_provenance(dataset_id, std::string(branch_name(branch)));
  return ckpt;
}

EncoderCheckpoint fine_tune_encoder(const EncoderSpec& pretrained, Branch branch,
                                    std::span<const TaggedExample> train,
                                    const TrainConfig& config,
                                    const std::string& dataset_id) {
  if (pretrained.variant != EncoderVariant::Pretrained) {
    throw ValidationError("fine-tuning starts from a pre-trained encoder");
  }
  Encoder encoder = Encoder::create(pretrained);
  const HeadConfig head_config =
      HeadConfig::make(HeadKind::Linear, branch, encoder.hidden_size());
  (void)train_model(head_config, encoder, train, {}, config, false, dataset_id);
  EncoderCheckpoint ckpt =
      encoder.to_checkpoint(make_provenance(dataset_id, std::string(branch_name(branch))));
  ckpt.spec.variant = EncoderVariant::Finetuned;
  ckpt.spec.checkpoint_ref.reset();
  return ckpt;
}

double token_accuracy(const Head& head, const Encoder& encoder,
                      std::span<const TaggedExample> examples) {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const TaggedExample& ex : examples) {
    const std::vector<int> pred = argmax_rows(head.forward(encoder.encode(ex.tokens)));
    const auto gold = branch_labels(ex, head.config().branch);
    for (std::size_t t = 0; t < pred.size(); ++t) correct += pred[t] == gold[t];
    total += pred.size();
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace atesa
