#include "atesa/tagging.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "atesa/errors.hpp"

namespace atesa {

std::string_view branch_name(Branch branch) {
  return branch == Branch::Ate ? "ate" : "atsa";
}

Branch parse_branch(std::string_view name) {
  if (name == "ate" || name == "ATE") return Branch::Ate;
  if (name == "atsa" || name == "ATSA") return Branch::Atsa;
  throw ValidationError("unknown branch '" + std::string(name) +
                        "' (expected ate or atsa)");
}

std::vector<IobTag> spans_to_iob(std::span<const AspectSpan> spans,
                                 std::size_t length) {
  std::vector<IobTag> tags(length, IobTag::Outside);
  std::vector<bool> taken(length, false);
  for (const AspectSpan& span : spans) {
    if (span.start > span.end || span.end >= length) {
      throw ValidationError("span (" + std::to_string(span.start) + "," +
                            std::to_string(span.end) +
                            ") out of range for length " +
                            std::to_string(length));
    }
    for (std::size_t i = span.start; i <= span.end; ++i) {
      if (taken[i]) {
        throw ValidationError("overlapping spans at token " +
                              std::to_string(i));
      }
      taken[i] = true;
      tags[i] = i == span.start ? IobTag::Beginning : IobTag::Inside;
    }
  }
  return tags;
}

std::vector<AspectSpan> iob_to_spans(std::span<const IobTag> tags) {
  std::vector<AspectSpan> spans;
  bool open = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    switch (tags[i]) {
      case IobTag::Outside:
        open = false;
        break;
      case IobTag::Beginning:
        spans.push_back({i, i});
        open = true;
        break;
      case IobTag::Inside:
        if (open) {
          spans.back().end = i;
        } else {
          // Orphan Inside: treated as a Beginning.
          spans.push_back({i, i});
          open = true;
        }
        break;
    }
  }
  return spans;
}

std::vector<int> encode_labels(std::span<const IobTag> tags) {
  std::vector<int> codes;
  codes.reserve(tags.size());
  for (IobTag t : tags) codes.push_back(static_cast<int>(t));
  return codes;
}

std::vector<int> encode_labels(std::span<const Polarity> labels) {
  std::vector<int> codes;
  codes.reserve(labels.size());
  for (Polarity p : labels) codes.push_back(static_cast<int>(p));
  return codes;
}

namespace {

template <typename E>
std::vector<E> decode(std::span<const int> codes, int class_count,
                      const char* what) {
  std::vector<E> out;
  out.reserve(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] < 0 || codes[i] >= class_count) {
      throw ValidationError(std::string(what) + " code " +
                            std::to_string(codes[i]) + " at position " +
                            std::to_string(i) + " is outside [0, " +
                            std::to_string(class_count) + ")");
    }
    out.push_back(static_cast<E>(codes[i]));
  }
  return out;
}

}  // namespace

std::vector<IobTag> decode_iob(std::span<const int> codes) {
  return decode<IobTag>(codes, kIobClassCount, "IOB");
}

std::vector<Polarity> decode_polarity(std::span<const int> codes) {
  return decode<Polarity>(codes, kPolarityClassCount, "polarity");
}

std::string_view polarity_name(Polarity polarity) {
  switch (polarity) {
    case Polarity::None:
      return "none";
    case Polarity::Negative:
      return "negative";
    case Polarity::Neutral:
      return "neutral";
    case Polarity::Positive:
      return "positive";
  }
  return "none";
}

Polarity parse_polarity(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "negative") return Polarity::Negative;
  if (lower == "neutral") return Polarity::Neutral;
  if (lower == "positive") return Polarity::Positive;
  throw ValidationError("unknown polarity '" + std::string(name) + "'");
}

}  // namespace atesa
