#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace atesa {

inline constexpr int kCheckpointFormatVersion = 1;
inline constexpr std::string_view kManifestFile = "manifest.json";
inline constexpr std::string_view kWeightsFile = "weights.bin";

struct Provenance {
  std::string dataset_id;
  std::optional<std::string> branch;
  std::string created_at;  // ISO-8601 UTC

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

Provenance make_provenance(std::string dataset_id,
                           std::optional<std::string> branch = std::nullopt);
nlohmann::json to_json(const Provenance& provenance);
Provenance provenance_from_json(const nlohmann::json& j);

std::string sha256_hex(std::string_view bytes);

// A checkpoint is a directory holding manifest.json plus payload files. The
// manifest records format, version, kind, caller fields and a SHA-256 per
// payload file.
struct CheckpointBundle {
  nlohmann::json manifest;
  std::map<std::string, std::string> files;
};

void write_checkpoint(const std::filesystem::path& dir, std::string_view kind,
                      nlohmann::json fields,
                      const std::map<std::string, std::string>& files);

// Throws CheckpointError on a missing manifest, unsupported version, wrong
// kind, missing payload or checksum mismatch.
CheckpointBundle read_checkpoint(const std::filesystem::path& dir,
                                 std::string_view expected_kind);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace atesa
