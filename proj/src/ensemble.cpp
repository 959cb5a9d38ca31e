#include "atesa/ensemble.hpp"

#include <cmath>
#include <fstream>
#include <unordered_map>

#include "atesa/checkpoint.hpp"
#include "atesa/errors.hpp"
#include "atesa/training.hpp"

namespace atesa {

namespace fs = std::filesystem;

std::string_view fusion_rule_name(FusionRule rule) {
  return rule == FusionRule::SoftVote ? "soft" : "hard";
}

FusionRule parse_fusion_rule(std::string_view name) {
  if (name == "soft") return FusionRule::SoftVote;
  if (name == "hard") return FusionRule::HardVote;
  throw ValidationError("unknown fusion rule '" + std::string(name) +
                        "' (expected soft or hard)");
}

std::vector<int> fuse_predictions(std::span<const MemberPrediction> predictions,
                                  FusionRule rule) {
  if (predictions.empty()) throw ValidationError("no member predictions to fuse");
  const Eigen::Index rows = predictions.front().distributions.rows();
  const Eigen::Index cols = predictions.front().distributions.cols();
  for (const MemberPrediction& p : predictions) {
    if (p.distributions.rows() != rows || p.distributions.cols() != cols) {
      throw ValidationError("member '" + p.member_id + "' predicts " +
                            std::to_string(p.distributions.rows()) + "x" +
                            std::to_string(p.distributions.cols()) + ", expected " +
                            std::to_string(rows) + "x" + std::to_string(cols));
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      if ((p.distributions.row(r).array() < 0.0).any() ||
          std::abs(p.distributions.row(r).sum() - 1.0) > 1e-6) {
        throw ValidationError("member '" + p.member_id + "' row " + std::to_string(r) +
                              " is not a probability distribution");
      }
    }
  }

  const auto members = static_cast<double>(predictions.size());
  std::vector<int> labels(static_cast<std::size_t>(rows), 0);
  for (Eigen::Index r = 0; r < rows; ++r) {
    RowVector combined = RowVector::Zero(cols);
    if (rule == FusionRule::SoftVote) {
      for (const MemberPrediction& p : predictions) combined += p.distributions.row(r);
      combined /= members;
    } else {
      for (const MemberPrediction& p : predictions) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < cols; ++c) {
          if (p.distributions(r, c) > p.distributions(r, best)) best = c;
        }
        combined(best) += 1.0;
      }
    }
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < cols; ++c) {
      if (combined(c) > combined(best)) best = c;
    }
    labels[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

void EnsembleConfig::validate() const {
  if (members.empty()) throw ValidationError("an ensemble needs at least one member");
  for (std::size_t i = 0; i < members.size(); ++i) {
    for (std::size_t j = i + 1; j < members.size(); ++j) {
      if (members[i].id == members[j].id) {
        throw ValidationError("duplicate ensemble member id '" + members[i].id + "'");
      }
    }
  }
}

nlohmann::json to_json(const EnsembleConfig& config) {
  nlohmann::json members = nlohmann::json::array();
  for (const EnsembleMemberRef& m : config.members) {
    members.push_back({{"id", m.id}, {"checkpoint", m.checkpoint.string()}});
  }
  return {{"branch", branch_name(config.branch)},
          {"fusion", fusion_rule_name(config.fusion)},
          {"members", members}};
}

EnsembleConfig EnsembleConfig::load(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw ConfigError("cannot open ensemble manifest " + manifest.string());
  EnsembleConfig config;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    config.branch = parse_branch(j.at("branch").get<std::string>());
    config.fusion = parse_fusion_rule(j.value("fusion", "soft"));
    const fs::path base = manifest.parent_path();
    for (const auto& m : j.at("members")) {
      fs::path ckpt = m.at("checkpoint").get<std::string>();
      if (ckpt.is_relative()) ckpt = (base / ckpt).lexically_normal();
      config.members.push_back({m.at("id").get<std::string>(), ckpt});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid ensemble manifest " + manifest.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ConfigError("invalid ensemble manifest " + manifest.string() + ": " + e.what());
  }
  config.validate();
  return config;
}

void EnsembleConfig::save(const fs::path& manifest) const {
  validate();
  EnsembleConfig stored = *this;
  const fs::path base = fs::absolute(manifest).parent_path();
  for (EnsembleMemberRef& m : stored.members) {
    std::error_code ec;
    const fs::path rel = fs::proximate(fs::absolute(m.checkpoint), base, ec);
    if (!ec) m.checkpoint = rel;
  }
  std::ofstream out(manifest);
  if (!out) throw ConfigError("cannot write ensemble manifest " + manifest.string());
  out << to_json(stored).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Loaded ensemble
// ---------------------------------------------------------------------------

LoadedEnsemble::LoadedEnsemble(Branch branch, FusionRule fusion,
                               std::vector<Member> members)
    : branch_(branch), fusion_(fusion), members_(std::move(members)) {
  if (members_.empty()) throw ValidationError("an ensemble needs at least one member");
  for (const Member& m : members_) {
    if (!m.encoder) throw ValidationError("member '" + m.id + "' has no encoder");
    if (m.head.config().branch != branch_) {
      throw ConfigError("member '" + m.id + "' was trained for the " +
                        std::string(branch_name(m.head.config().branch)) + " branch");
    }
    if (m.head.config().input_size != m.encoder->hidden_size()) {
      throw ConfigError("member '" + m.id + "' head width does not match its encoder");
    }
  }
}

LoadedEnsemble LoadedEnsemble::load(const EnsembleConfig& config) {
  config.validate();
  std::unordered_map<std::string, std::shared_ptr<const Encoder>> encoders;
  std::vector<Member> members;
  for (const EnsembleMemberRef& ref : config.members) {
    try {
      const ModelCheckpoint ckpt = ModelCheckpoint::load(ref.checkpoint);
      const std::string key = ckpt.encoder_spec.key();
      auto it = encoders.find(key);
      if (it == encoders.end()) {
        it = encoders
                 .emplace(key, std::make_shared<const Encoder>(
                                   Encoder::create(ckpt.encoder_spec)))
                 .first;
      }
      members.push_back({ref.id, it->second, ckpt.head()});
    } catch (const ConfigError& e) {
      throw ConfigError("ensemble member '" + ref.id + "': " + e.what());
    } catch (const Error& e) {
      throw ConfigError("ensemble member '" + ref.id + "' (" +
                        ref.checkpoint.string() + "): " + e.what());
    }
  }
  return LoadedEnsemble(config.branch, config.fusion, std::move(members));
}

std::vector<MemberPrediction> LoadedEnsemble::predict(
    std::span<const std::string> tokens) const {
  const int classes = class_count(branch_);
  const auto t_len = static_cast<Eigen::Index>(tokens.size());
  std::unordered_map<const Encoder*, Matrix> encoded;
  std::vector<MemberPrediction> out;
  out.reserve(members_.size());
  for (const Member& m : members_) {
    auto it = encoded.find(m.encoder.get());
    if (it == encoded.end()) it = encoded.emplace(m.encoder.get(), m.encoder->encode(tokens)).first;
    const Matrix probs = softmax_rows(m.head.forward(it->second));
    Matrix dist = Matrix::Zero(t_len, classes);
    dist.topRows(probs.rows()) = probs;
    for (Eigen::Index r = probs.rows(); r < t_len; ++r) dist(r, 0) = 1.0;
    out.push_back({m.id, std::move(dist)});
  }
  return out;
}

std::vector<int> LoadedEnsemble::run_branch(std::span<const std::string> tokens) const {
  const std::vector<MemberPrediction> predictions = predict(tokens);
  return fuse_predictions(predictions, fusion_);
}

nlohmann::json LoadedEnsemble::describe() const {
  nlohmann::json members = nlohmann::json::array();
  for (const Member& m : members_) {
    members.push_back({{"id", m.id},
                       {"head", head_kind_name(m.head.config().kind)},
                       {"encoder", to_json(m.encoder->spec())}});
  }
  return {{"branch", branch_name(branch_)},
          {"fusion", fusion_rule_name(fusion_)},
          {"members", members}};
}

}  // namespace atesa
