#include "atesa/encoder.hpp"

#include <cmath>
#include <iostream>

#include "atesa/errors.hpp"
#include "atesa/random.hpp"
#include "atesa/unicode.hpp"

namespace atesa {

namespace fs = std::filesystem;

std::string_view family_name(EncoderFamily family) {
  switch (family) {
    case EncoderFamily::FamilyA:
      return "family_a";
    case EncoderFamily::FamilyB:
      return "family_b";
    case EncoderFamily::Stub:
      return "stub";
  }
  return "stub";
}

EncoderFamily parse_family(std::string_view name) {
  if (name == "family_a") return EncoderFamily::FamilyA;
  if (name == "family_b") return EncoderFamily::FamilyB;
  if (name == "stub") return EncoderFamily::Stub;
  throw ValidationError("unknown encoder family '" + std::string(name) +
                        "' (expected family_a, family_b or stub)");
}

std::string_view variant_name(EncoderVariant variant) {
  return variant == EncoderVariant::Pretrained ? "pretrained" : "finetuned";
}

EncoderVariant parse_variant(std::string_view name) {
  if (name == "pretrained") return EncoderVariant::Pretrained;
  if (name == "finetuned") return EncoderVariant::Finetuned;
  throw ValidationError("unknown encoder variant '" + std::string(name) + "'");
}

void EncoderSpec::validate() const {
  if (hidden_size <= 0) throw ValidationError("encoder hidden_size must be positive");
  if (max_sequence_length <= 0) {
    throw ValidationError("encoder max_sequence_length must be positive");
  }
  if (variant == EncoderVariant::Finetuned && !checkpoint_ref) {
    throw ValidationError("a fine-tuned encoder needs a checkpoint_ref");
  }
}

std::string EncoderSpec::key() const { return to_json(*this).dump(); }

nlohmann::json to_json(const EncoderSpec& spec) {
  nlohmann::json j;
  j["family"] = family_name(spec.family);
  j["variant"] = variant_name(spec.variant);
  j["hidden_size"] = spec.hidden_size;
  j["max_sequence_length"] = spec.max_sequence_length;
  j["checkpoint_ref"] =
      spec.checkpoint_ref ? nlohmann::json(*spec.checkpoint_ref) : nlohmann::json(nullptr);
  j["seed"] = spec.seed;
  return j;
}

EncoderSpec encoder_spec_from_json(const nlohmann::json& j) {
  EncoderSpec spec;
  try {
    spec.family = parse_family(j.at("family").get<std::string>());
    spec.variant = parse_variant(j.value("variant", "pretrained"));
    spec.hidden_size = j.at("hidden_size").get<int>();
    spec.max_sequence_length = j.value("max_sequence_length", 128);
    if (j.contains("checkpoint_ref") && !j["checkpoint_ref"].is_null()) {
      spec.checkpoint_ref = j["checkpoint_ref"].get<std::string>();
    }
    spec.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid encoder spec: ") + e.what());
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

Vector hashed_unit_vector(std::string_view token, int dimension,
                          std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>((seed >> (8 * i)) & 0xFF));
  for (char c : token) mix(static_cast<unsigned char>(c));

  Vector v(dimension);
  std::uint64_t state = h;
  for (int d = 0; d < dimension; ++d) {
    const std::uint64_t x = splitmix64(state);
    v(d) = 2.0 * (static_cast<double>(x >> 11) * 0x1.0p-53) - 1.0;
  }
  const double norm = v.norm();
  if (norm == 0.0) {
    v.setZero();
    v(0) = 1.0;
    return v;
  }
  return v / norm;
}

Vector position_component(std::size_t position, int dimension) {
  Vector p(dimension);
  for (int i = 0; i < dimension; ++i) {
    const int k = i / 2;
    const double angle = static_cast<double>(position) /
                         std::pow(10000.0, 2.0 * k / static_cast<double>(dimension));
    p(i) = 0.1 * (i % 2 == 0 ? std::sin(angle) : std::cos(angle));
  }
  return p;
}

Matrix align_to_words(const Matrix& subword_vectors,
                      std::span<const SubwordRange> word_ranges) {
  std::size_t expected = 0;
  for (std::size_t w = 0; w < word_ranges.size(); ++w) {
    const SubwordRange& r = word_ranges[w];
    if (r.begin != expected || r.end <= r.begin) {
      throw ValidationError("subword range of word " + std::to_string(w) +
                            " is not contiguous with the previous word");
    }
    expected = r.end;
  }
  if (expected != static_cast<std::size_t>(subword_vectors.rows())) {
    throw ValidationError("subword ranges cover " + std::to_string(expected) +
                          " rows, matrix has " +
                          std::to_string(subword_vectors.rows()));
  }
  Matrix out(static_cast<Eigen::Index>(word_ranges.size()), subword_vectors.cols());
  for (std::size_t w = 0; w < word_ranges.size(); ++w) {
    out.row(static_cast<Eigen::Index>(w)) =
        subword_vectors.row(static_cast<Eigen::Index>(word_ranges[w].begin));
  }
  return out;
}

std::vector<std::string> segment_word(EncoderFamily family,
                                      std::string_view word, bool first_word) {
  const unicode::Utf8Text chars(word);
  const std::size_t piece = family == EncoderFamily::FamilyA ? 3 : 4;
  std::vector<std::string> pieces;
  for (std::size_t i = 0; i < chars.size(); i += piece) {
    std::string p(chars.slice(i, std::min(chars.size(), i + piece)));
    if (family == EncoderFamily::FamilyA) {
      if (i > 0) p = "##" + p;
    } else if (i == 0 && !first_word) {
      p = "\xC4\xA0" + p;  // U+0120, word-initial marker
    }
    pieces.push_back(std::move(p));
  }
  if (pieces.empty()) pieces.emplace_back();
  return pieces;
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

namespace {

std::uint64_t family_salt(EncoderFamily family) {
  switch (family) {
    case EncoderFamily::FamilyA:
      return 0xa11ce5eedULL;
    case EncoderFamily::FamilyB:
      return 0xb0b5eed5ULL;
    case EncoderFamily::Stub:
      return 0;
  }
  return 0;
}

ParamSet identity_adapter(int h) {
  ParamSet p;
  p.add("weight", Matrix::Identity(h, h));
  p.add("bias", Matrix::Zero(1, h));
  return p;
}

ParamSet seeded_attention(int h, std::uint64_t seed) {
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  ParamSet p;
  for (const char* name : {"query", "key", "value", "output"}) {
    Matrix m(h, h);
    for (Eigen::Index r = 0; r < h; ++r) {
      for (Eigen::Index c = 0; c < h; ++c) m(r, c) = uniform(rng, -bound, bound);
    }
    p.add(name, std::move(m));
  }
  return p;
}

void check_shape(const ParamSet& p, std::string_view name, Eigen::Index rows,
                 Eigen::Index cols) {
  if (!p.contains(name)) {
    throw CheckpointError("encoder weights lack '" + std::string(name) + "'");
  }
  const Matrix& m = p.at(name);
  if (m.rows() != rows || m.cols() != cols) {
    throw CheckpointError("encoder weight '" + std::string(name) + "' has shape " +
                          std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

}  // namespace

Encoder::Encoder(EncoderSpec spec, ParamSet base, ParamSet adapter)
    : spec_(std::move(spec)), base_(std::move(base)), adapter_(std::move(adapter)) {
  const int h = spec_.hidden_size;
  check_shape(adapter_, "weight", h, h);
  check_shape(adapter_, "bias", 1, h);
  if (spec_.family != EncoderFamily::Stub) {
    for (const char* name : {"query", "key", "value", "output"}) {
      check_shape(base_, name, h, h);
    }
  }
}

Encoder Encoder::create(const EncoderSpec& spec) {
  spec.validate();
  if (spec.checkpoint_ref) {
    const EncoderCheckpoint ckpt = EncoderCheckpoint::load(*spec.checkpoint_ref);
    if (ckpt.spec.family != spec.family || ckpt.spec.hidden_size != spec.hidden_size) {
      throw ConfigError("encoder checkpoint " + *spec.checkpoint_ref + " holds " +
                        std::string(family_name(ckpt.spec.family)) + "/" +
                        std::to_string(ckpt.spec.hidden_size) + ", spec asks for " +
                        std::string(family_name(spec.family)) + "/" +
                        std::to_string(spec.hidden_size));
    }
    Encoder enc = from_checkpoint(ckpt);
    enc.spec_ = spec;
    return enc;
  }
  ParamSet base;
  if (spec.family != EncoderFamily::Stub) {
    base = seeded_attention(spec.hidden_size, spec.seed ^ family_salt(spec.family));
  }
  return Encoder(spec, std::move(base), identity_adapter(spec.hidden_size));
}

Encoder Encoder::from_checkpoint(const EncoderCheckpoint& checkpoint) {
  return Encoder(checkpoint.spec, checkpoint.weights.extract("base."),
                 checkpoint.weights.extract("adapter."));
}

Matrix Encoder::encode(std::span<const std::string> tokens) const {
  return apply_adapter(encode_base(tokens));
}

Matrix Encoder::encode_base(std::span<const std::string> tokens) const {
  const int h = spec_.hidden_size;
  const auto limit = static_cast<std::size_t>(spec_.max_sequence_length);
  if (tokens.size() > limit) {
    std::cerr << "warning: " << tokens.size() << " tokens exceed the encoder limit of "
              << limit << "; truncating\n";
    tokens = tokens.first(limit);
  }
  if (spec_.family != EncoderFamily::Stub) return encode_contextual(tokens);

  Matrix out(static_cast<Eigen::Index>(tokens.size()), h);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    out.row(static_cast<Eigen::Index>(t)) =
        (hashed_unit_vector(tokens[t], h, spec_.seed) + position_component(t, h))
            .transpose();
  }
  return out;
}

Matrix Encoder::encode_contextual(std::span<const std::string> words) const {
  const int h = spec_.hidden_size;
  std::vector<std::string> pieces;
  std::vector<SubwordRange> ranges;
  for (std::size_t w = 0; w < words.size(); ++w) {
    auto p = segment_word(spec_.family, words[w], w == 0);
    ranges.push_back({pieces.size(), pieces.size() + p.size()});
    for (auto& s : p) pieces.push_back(std::move(s));
  }
  if (pieces.empty()) return Matrix(0, h);

  const std::uint64_t seed = spec_.seed ^ family_salt(spec_.family);
  const auto s = static_cast<Eigen::Index>(pieces.size());
  Matrix x(s, h);
  for (Eigen::Index i = 0; i < s; ++i) {
    x.row(i) = (hashed_unit_vector(pieces[static_cast<std::size_t>(i)], h, seed) +
                position_component(static_cast<std::size_t>(i), h))
                   .transpose();
  }
  // One bidirectional self-attention layer with a residual connection.
  const Matrix q = x * base_.at("query").transpose();
  const Matrix k = x * base_.at("key").transpose();
  const Matrix v = x * base_.at("value").transpose();
  Matrix scores = (q * k.transpose()) / std::sqrt(static_cast<double>(h));
  for (Eigen::Index i = 0; i < s; ++i) {
    const double m = scores.row(i).maxCoeff();
    scores.row(i) = (scores.row(i).array() - m).exp();
    scores.row(i) /= scores.row(i).sum();
  }
  const Matrix y = x + (scores * v) * base_.at("output").transpose();
  return align_to_words(y, ranges);
}

Matrix Encoder::apply_adapter(const Matrix& base) const {
  Matrix out = base * adapter_.at("weight").transpose();
  out.rowwise() += adapter_.at("bias").row(0);
  return out;
}

EncoderCheckpoint Encoder::to_checkpoint(Provenance provenance) const {
  EncoderCheckpoint ckpt;
  ckpt.spec = spec_;
  ckpt.weights.merge(base_, "base.");
  ckpt.weights.merge(adapter_, "adapter.");
  ckpt.provenance = std::move(provenance);
  return ckpt;
}

EncoderSpec EncoderCheckpoint::save(const fs::path& dir) const {
  EncoderSpec stored = spec;
  stored.checkpoint_ref.reset();
  nlohmann::json fields;
  fields["spec"] = to_json(stored);
  fields["provenance"] = to_json(provenance);
  write_checkpoint(dir, "encoder", std::move(fields),
                   {{std::string(kWeightsFile), serialize_weights(weights)}});
  stored.checkpoint_ref = dir.string();
  return stored;
}

EncoderCheckpoint EncoderCheckpoint::load(const fs::path& dir) {
  const CheckpointBundle bundle = read_checkpoint(dir, "encoder");
  EncoderCheckpoint ckpt;
  try {
    ckpt.spec = encoder_spec_from_json(bundle.manifest.at("spec"));
    ckpt.provenance = provenance_from_json(bundle.manifest.at("provenance"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt encoder manifest in " + dir.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw CheckpointError("corrupt encoder manifest in " + dir.string() + ": " + e.what());
  }
  ckpt.spec.checkpoint_ref = dir.string();
  ckpt.weights = deserialize_weights(bundle.files.at(std::string(kWeightsFile)));
  return ckpt;
}

}  // namespace atesa
