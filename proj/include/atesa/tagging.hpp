#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace atesa {

// Integer values are the wire codes used in the JSON records and as class
// indices of the classifier heads.
enum class IobTag : int { Outside = 0, Beginning = 1, Inside = 2 };

enum class Polarity : int { None = 0, Negative = 1, Neutral = 2, Positive = 3 };

inline constexpr int kIobClassCount = 3;
inline constexpr int kPolarityClassCount = 4;

// ATE predicts IOB tags, ATSA predicts token polarities.
enum class Branch { Ate, Atsa };

inline constexpr int class_count(Branch branch) {
  return branch == Branch::Ate ? kIobClassCount : kPolarityClassCount;
}

std::string_view branch_name(Branch branch);  // "ate" / "atsa"
Branch parse_branch(std::string_view name);

// Inclusive token range [start, end].
struct AspectSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start + 1; }
  friend bool operator==(const AspectSpan&, const AspectSpan&) = default;
};

// Throws ValidationError on overlapping or out-of-range spans. Spans need not
// be sorted.
std::vector<IobTag> spans_to_iob(std::span<const AspectSpan> spans,
                                 std::size_t length);

// Total: an Inside that does not continue a span opens a new one. Output is
// sorted by start and pairwise disjoint.
std::vector<AspectSpan> iob_to_spans(std::span<const IobTag> tags);

std::vector<int> encode_labels(std::span<const IobTag> tags);
std::vector<int> encode_labels(std::span<const Polarity> labels);

// Throw ValidationError on codes outside the class range.
std::vector<IobTag> decode_iob(std::span<const int> codes);
std::vector<Polarity> decode_polarity(std::span<const int> codes);

// "negative" / "neutral" / "positive"; None maps to "none".
std::string_view polarity_name(Polarity polarity);

// Accepts the three polarity strings case-insensitively. Throws
// ValidationError otherwise.
Polarity parse_polarity(std::string_view name);

}  // namespace atesa
