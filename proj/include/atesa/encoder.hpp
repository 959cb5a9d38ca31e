#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atesa/checkpoint.hpp"
#include "atesa/params.hpp"
#include "json.hpp"

namespace atesa {

// Two contextual families stand in for the masked-language encoder (family_a,
// WordPiece-style pieces) and the denoising sequence-to-sequence encoder
// (family_b, byte-level BPE-style pieces). The stub is context free.
enum class EncoderFamily { FamilyA, FamilyB, Stub };
enum class EncoderVariant { Pretrained, Finetuned };

std::string_view family_name(EncoderFamily family);
EncoderFamily parse_family(std::string_view name);
std::string_view variant_name(EncoderVariant variant);
EncoderVariant parse_variant(std::string_view name);

struct EncoderSpec {
  EncoderFamily family = EncoderFamily::Stub;
  EncoderVariant variant = EncoderVariant::Pretrained;
  int hidden_size = 32;
  int max_sequence_length = 128;
  // Directory of an encoder checkpoint. Required for fine-tuned encoders;
  // for pre-trained ones it replaces the seeded weights.
  std::optional<std::string> checkpoint_ref;
  std::uint64_t seed = 0;

  void validate() const;
  // Identity used to share one encoder between ensemble members.
  std::string key() const;

  friend bool operator==(const EncoderSpec&, const EncoderSpec&) = default;
};

nlohmann::json to_json(const EncoderSpec& spec);
EncoderSpec encoder_spec_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Building blocks, exposed for tests and fixtures
// ---------------------------------------------------------------------------

// Seeded hash-to-unit-vector rule used by the stub and by subword pieces:
//   h    = FNV-1a-64 over (8 little-endian bytes of seed, UTF-8 bytes of token)
//   x_d  = splitmix64 stream seeded with h; v_d = 2 * (x_d >> 11) * 2^-53 - 1
//   out  = v / ||v||
Vector hashed_unit_vector(std::string_view token, int dimension,
                          std::uint64_t seed);

// Sinusoidal position code scaled by 0.1:
//   p[2k]   = 0.1 * sin(pos / 10000^(2k / H))
//   p[2k+1] = 0.1 * cos(pos / 10000^(2k / H))
Vector position_component(std::size_t position, int dimension);

// [begin, end) rows of the subword matrix that belong to one word.
struct SubwordRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// One row per word: the word's first subword. Ranges must tile [0, S) in
// order; otherwise ValidationError.
Matrix align_to_words(const Matrix& subword_vectors,
                      std::span<const SubwordRange> word_ranges);

// Subword pieces of |word| for a contextual family.
std::vector<std::string> segment_word(EncoderFamily family,
                                      std::string_view word, bool first_word);

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

struct EncoderCheckpoint;

// Every encoder ends in a trainable affine adapter (identity at creation):
//   output = base(tokens) * W^T + b
// Fine-tuning updates the adapter; the base weights stay as loaded.
class Encoder {
 public:
  // Pre-trained encoders without checkpoint_ref are initialized from the
  // spec seed. Anything with checkpoint_ref is loaded from disk.
  static Encoder create(const EncoderSpec& spec);
  static Encoder from_checkpoint(const EncoderCheckpoint& checkpoint);

  const EncoderSpec& spec() const { return spec_; }
  int hidden_size() const { return spec_.hidden_size; }

  // min(T, L) x H. Inputs longer than L are truncated with a warning.
  Matrix encode(std::span<const std::string> tokens) const;

  Matrix encode_base(std::span<const std::string> tokens) const;
  Matrix apply_adapter(const Matrix& base) const;

  ParamSet& adapter() { return adapter_; }
  const ParamSet& adapter() const { return adapter_; }
  const ParamSet& base() const { return base_; }

  EncoderCheckpoint to_checkpoint(Provenance provenance) const;

 private:
  Encoder(EncoderSpec spec, ParamSet base, ParamSet adapter);

  Matrix encode_contextual(std::span<const std::string> words) const;

  EncoderSpec spec_;
  ParamSet base_;
  ParamSet adapter_;
};

struct EncoderCheckpoint {
  EncoderSpec spec;
  ParamSet weights;  // "base.*" and "adapter.*"
  Provenance provenance;

  // Returns the spec to use for loading: variant kept, checkpoint_ref = dir.
  EncoderSpec save(const std::filesystem::path& dir) const;
  // The returned spec has checkpoint_ref set to |dir|.
  static EncoderCheckpoint load(const std::filesystem::path& dir);
};

}  // namespace atesa
