#include "atesa/checkpoint.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "atesa/errors.hpp"

namespace atesa {

namespace fs = std::filesystem;

Provenance make_provenance(std::string dataset_id,
                           std::optional<std::string> branch) {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  std::ostringstream ts;
  ts << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ");
  return {std::move(dataset_id), std::move(branch), ts.str()};
}

nlohmann::json to_json(const Provenance& provenance) {
  nlohmann::json j;
  j["dataset_id"] = provenance.dataset_id;
  j["branch"] = provenance.branch ? nlohmann::json(*provenance.branch)
                                  : nlohmann::json(nullptr);
  j["created_at"] = provenance.created_at;
  return j;
}

Provenance provenance_from_json(const nlohmann::json& j) {
  Provenance p;
  p.dataset_id = j.value("dataset_id", "");
  if (j.contains("branch") && !j["branch"].is_null()) {
    p.branch = j["branch"].get<std::string>();
  }
  p.created_at = j.value("created_at", "");
  return p;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw CheckpointError("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("short write to " + path.string());
}

void write_checkpoint(const fs::path& dir, std::string_view kind,
                      nlohmann::json fields,
                      const std::map<std::string, std::string>& files) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CheckpointError("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json checksums = nlohmann::json::object();
  for (const auto& [name, bytes] : files) {
    write_file(dir / name, bytes);
    checksums[name] = {{"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}};
  }
  fields["format"] = "atesa-checkpoint";
  fields["version"] = kCheckpointFormatVersion;
  fields["kind"] = kind;
  fields["files"] = checksums;
  // Manifest last: a directory with a manifest is complete.
  write_file(dir / kManifestFile, fields.dump(2) + "\n");
}

CheckpointBundle read_checkpoint(const fs::path& dir,
                                 std::string_view expected_kind) {
  const fs::path manifest_path = dir / kManifestFile;
  if (!fs::exists(manifest_path)) {
    throw CheckpointError("no checkpoint manifest in " + dir.string());
  }
  CheckpointBundle bundle;
  try {
    bundle.manifest = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt manifest in " + dir.string() + ": " + e.what());
  }
  const auto& m = bundle.manifest;
  if (m.value("format", "") != "atesa-checkpoint") {
    throw CheckpointError(dir.string() + " is not an atesa checkpoint");
  }
  if (m.value("version", 0) != kCheckpointFormatVersion) {
    throw CheckpointError("unsupported checkpoint version in " + dir.string());
  }
  if (m.value("kind", "") != expected_kind) {
    throw CheckpointError(dir.string() + " holds a '" + m.value("kind", "") +
                          "' checkpoint, expected '" + std::string(expected_kind) + "'");
  }
  if (!m.contains("files") || !m["files"].is_object()) {
    throw CheckpointError("manifest in " + dir.string() + " lists no files");
  }
  for (const auto& [name, info] : m["files"].items()) {
    const fs::path path = dir / name;
    if (!fs::exists(path)) {
      throw CheckpointError("missing checkpoint file " + path.string());
    }
    std::string bytes = read_file(path);
    if (sha256_hex(bytes) != info.value("sha256", "")) {
      throw CheckpointError("checksum mismatch for " + path.string());
    }
    bundle.files.emplace(name, std::move(bytes));
  }
  return bundle;
}

}  // namespace atesa
