#include "atesa/params.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include "atesa/errors.hpp"

namespace atesa {

Matrix& ParamSet::add(std::string name, Matrix value) {
  if (contains(name)) throw ValidationError("duplicate parameter '" + name + "'");
  entries_.push_back({std::move(name), std::move(value)});
  return entries_.back().value;
}

bool ParamSet::contains(std::string_view name) const {
  for (const Entry& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

Matrix& ParamSet::at(std::string_view name) {
  for (Entry& e : entries_) {
    if (e.name == name) return e.value;
  }
  throw ValidationError("no parameter named '" + std::string(name) + "'");
}

const Matrix& ParamSet::at(std::string_view name) const {
  return const_cast<ParamSet*>(this)->at(name);
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const Entry& e : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const Entry& e : entries_) {
    out.entries_.push_back({e.name, Matrix::Zero(e.value.rows(), e.value.cols())});
  }
  return out;
}

void ParamSet::set_zero() {
  for (Entry& e : entries_) e.value.setZero();
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const Entry& a = entries_[i];
    const Entry& b = other.entries_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() ||
        a.value.cols() != b.value.cols()) {
      return false;
    }
  }
  return true;
}

void ParamSet::merge(const ParamSet& other, std::string_view prefix) {
  for (const Entry& e : other.entries_) add(std::string(prefix) + e.name, e.value);
}

ParamSet ParamSet::extract(std::string_view prefix) const {
  ParamSet out;
  for (const Entry& e : entries_) {
    if (e.name.starts_with(prefix)) {
      out.add(e.name.substr(prefix.size()), e.value);
    }
  }
  return out;
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (!a.same_layout(b)) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    if (a.entries_[i].value != b.entries_[i].value) return false;
  }
  return true;
}

namespace {

constexpr char kMagic[4] = {'A', 'T', 'S', 'W'};
constexpr std::uint32_t kBlobVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i]))
              << (8 * i);
    }
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("weights blob truncated");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_weights(const ParamSet& params) {
  std::string out(kMagic, 4);
  put_u32(out, kBlobVersion);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& e : params) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    put_u32(out, static_cast<std::uint32_t>(e.value.rows()));
    put_u32(out, static_cast<std::uint32_t>(e.value.cols()));
    for (Eigen::Index r = 0; r < e.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < e.value.cols(); ++c) put_f64(out, e.value(r, c));
    }
  }
  return out;
}

ParamSet deserialize_weights(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(4) != std::string_view(kMagic, 4)) {
    throw CheckpointError("not a weights blob (bad magic)");
  }
  const std::uint32_t version = in.u32();
  if (version != kBlobVersion) {
    throw CheckpointError("unsupported weights blob version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32();
  ParamSet params;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(in.take(in.u32()));
    const std::uint32_t rows = in.u32();
    const std::uint32_t cols = in.u32();
    Matrix m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = in.f64();
    }
    params.add(std::move(name), std::move(m));
  }
  if (!in.done()) throw CheckpointError("trailing bytes after weights blob");
  return params;
}

}  // namespace atesa
