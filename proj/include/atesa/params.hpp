#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace atesa {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Ordered collection of named parameter tensors. Order is insertion order and
// is part of the serialized format.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Matrix value;
  };

  Matrix& add(std::string name, Matrix value);

  bool contains(std::string_view name) const;
  Matrix& at(std::string_view name);
  const Matrix& at(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t scalar_count() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  ParamSet zeros_like() const;
  void set_zero();

  // Same names, same order, same shapes.
  bool same_layout(const ParamSet& other) const;

  // Appends every entry of |other| with |prefix| prepended to its name.
  void merge(const ParamSet& other, std::string_view prefix = {});
  // Entries whose name starts with |prefix|, prefix stripped.
  ParamSet extract(std::string_view prefix) const;

  friend bool operator==(const ParamSet& a, const ParamSet& b);

 private:
  std::vector<Entry> entries_;
};

// Binary weights blob: "ATSW", u32 version, u32 count, then per tensor
// u32 name length, name bytes, u32 rows, u32 cols, rows*cols little-endian
// IEEE-754 doubles in row-major order.
std::string serialize_weights(const ParamSet& params);
ParamSet deserialize_weights(std::string_view bytes);

}  // namespace atesa
