#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atesa/encoder.hpp"
#include "atesa/heads.hpp"
#include "json.hpp"

namespace atesa {

// Soft: average the member distributions, then argmax.
// Hard: majority vote over member argmaxes.
// Both break ties toward the lowest class index.
enum class FusionRule { SoftVote, HardVote };

std::string_view fusion_rule_name(FusionRule rule);
FusionRule parse_fusion_rule(std::string_view name);

struct MemberPrediction {
  std::string member_id;
  Matrix distributions;  // T x C, rows sum to 1
};

// Throws ValidationError when members disagree on T or C, or a row is not a
// distribution (negative entry, sum off by more than 1e-6).
std::vector<int> fuse_predictions(std::span<const MemberPrediction> predictions,
                                  FusionRule rule = FusionRule::SoftVote);

struct EnsembleMemberRef {
  std::string id;
  std::filesystem::path checkpoint;
};

// JSON manifest: {"branch": "ate", "fusion": "soft", "members":
// [{"id": ..., "checkpoint": <dir>}]}. Relative checkpoint paths are
// resolved against the manifest's directory.
struct EnsembleConfig {
  Branch branch = Branch::Ate;
  FusionRule fusion = FusionRule::SoftVote;
  std::vector<EnsembleMemberRef> members;

  void validate() const;
  static EnsembleConfig load(const std::filesystem::path& manifest);
  void save(const std::filesystem::path& manifest) const;
};

nlohmann::json to_json(const EnsembleConfig& config);

// A branch ensemble ready for inference. Immutable after construction, so
// concurrent run_branch calls are safe.
class LoadedEnsemble {
 public:
  struct Member {
    std::string id;
    std::shared_ptr<const Encoder> encoder;
    Head head;
  };

  LoadedEnsemble(Branch branch, FusionRule fusion, std::vector<Member> members);

  // Throws ConfigError naming the member whose checkpoint cannot be loaded.
  static LoadedEnsemble load(const EnsembleConfig& config);

  Branch branch() const { return branch_; }
  FusionRule fusion() const { return fusion_; }
  std::size_t size() const { return members_.size(); }
  const std::vector<Member>& members() const { return members_; }

  // Per-member distributions, each encoder run once per distinct spec.
  // Rows beyond the encoder's max length are filled with class 0.
  std::vector<MemberPrediction> predict(std::span<const std::string> tokens) const;

  std::vector<int> run_branch(std::span<const std::string> tokens) const;

  nlohmann::json describe() const;

 private:
  Branch branch_;
  FusionRule fusion_;
  std::vector<Member> members_;
};

}  // namespace atesa
