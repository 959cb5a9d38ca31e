#include <random>

#include "atesa/errors.hpp"
#include "atesa/tagging.hpp"
#include "doctest.h"

using namespace atesa;

namespace {

std::vector<IobTag> tags(std::initializer_list<int> codes) {
  std::vector<int> v(codes);
  return decode_iob(v);
}

}  // namespace

TEST_CASE("spans_to_iob on the figure sentence") {
  const std::vector<AspectSpan> spans = {{3, 3}, {6, 7}};
  CHECK(spans_to_iob(spans, 8) == tags({0, 0, 0, 1, 0, 0, 1, 2}));
}

TEST_CASE("spans_to_iob trivial cases") {
  CHECK(spans_to_iob({}, 5) == tags({0, 0, 0, 0, 0}));
  const std::vector<AspectSpan> full = {{0, 2}};
  CHECK(spans_to_iob(full, 3) == tags({1, 2, 2}));
  const std::vector<AspectSpan> unsorted = {{6, 7}, {3, 3}};
  CHECK(spans_to_iob(unsorted, 8) == tags({0, 0, 0, 1, 0, 0, 1, 2}));
}

TEST_CASE("spans_to_iob rejects overlap and out-of-range spans") {
  const std::vector<AspectSpan> overlap = {{1, 3}, {3, 4}};
  CHECK_THROWS_AS(spans_to_iob(overlap, 6), ValidationError);
  const std::vector<AspectSpan> past_end = {{2, 5}};
  CHECK_THROWS_AS(spans_to_iob(past_end, 5), ValidationError);
  const std::vector<AspectSpan> reversed = {{3, 2}};
  CHECK_THROWS_AS(spans_to_iob(reversed, 5), ValidationError);
}

TEST_CASE("iob_to_spans") {
  CHECK(iob_to_spans(tags({0, 0, 0, 1, 0, 0, 1, 2})) ==
        std::vector<AspectSpan>{{3, 3}, {6, 7}});
  CHECK(iob_to_spans(tags({0, 0, 0})).empty());
  CHECK(iob_to_spans(tags({})).empty());

  SUBCASE("orphan inside opens a span") {
    CHECK(iob_to_spans(tags({2, 2, 0})) == std::vector<AspectSpan>{{0, 1}});
    CHECK(iob_to_spans(tags({0, 2, 1, 2})) == std::vector<AspectSpan>{{1, 1}, {2, 3}});
  }
  SUBCASE("adjacent beginnings are separate spans") {
    CHECK(iob_to_spans(tags({1, 1, 2})) == std::vector<AspectSpan>{{0, 0}, {1, 2}});
  }
}

TEST_CASE("encode and decode labels") {
  CHECK(encode_labels(tags({0, 1, 2})) == std::vector<int>{0, 1, 2});
  const std::vector<Polarity> pol = {Polarity::None, Polarity::Negative, Polarity::Neutral,
                                     Polarity::Positive};
  CHECK(encode_labels(pol) == std::vector<int>{0, 1, 2, 3});
  CHECK(encode_labels(std::vector<IobTag>{}).empty());

  const std::vector<int> codes = {0, 1, 2, 3};
  CHECK(decode_polarity(codes) == pol);
  const std::vector<int> bad_iob = {0, 3};
  CHECK_THROWS_AS(decode_iob(bad_iob), ValidationError);
  const std::vector<int> bad_pol = {-1};
  CHECK_THROWS_AS(decode_polarity(bad_pol), ValidationError);
}

TEST_CASE("polarity and branch names") {
  CHECK(polarity_name(Polarity::Positive) == "positive");
  CHECK(polarity_name(Polarity::None) == "none");
  CHECK(parse_polarity("NEGATIVE") == Polarity::Negative);
  CHECK(parse_polarity("Neutral") == Polarity::Neutral);
  CHECK_THROWS_AS(parse_polarity("conflict"), ValidationError);
  CHECK(parse_branch("atsa") == Branch::Atsa);
  CHECK(branch_name(Branch::Ate) == "ate");
  CHECK(class_count(Branch::Ate) == 3);
  CHECK(class_count(Branch::Atsa) == 4);
}

TEST_CASE("property: span round trip on random span sets") {
  std::mt19937_64 rng(20240501);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t length = rng() % 40;
    std::vector<AspectSpan> spans;
    std::size_t pos = 0;
    while (pos < length) {
      pos += rng() % 4;
      if (pos >= length) break;
      const std::size_t end = std::min(length - 1, pos + rng() % 4);
      spans.push_back({pos, end});
      pos = end + 1;
    }
    REQUIRE(iob_to_spans(spans_to_iob(spans, length)) == spans);
  }
}

TEST_CASE("property: iob_to_spans output is well formed on arbitrary tags") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5000; ++trial) {
    std::vector<IobTag> t(rng() % 30);
    for (auto& x : t) x = static_cast<IobTag>(rng() % 3);
    const auto spans = iob_to_spans(t);
    std::size_t next_free = 0;
    for (const AspectSpan& s : spans) {
      REQUIRE(s.start >= next_free);
      REQUIRE(s.start <= s.end);
      REQUIRE(s.end < t.size());
      next_free = s.end + 1;
    }
    // Repaired spans encode back to tags with no orphan Inside.
    const auto again = iob_to_spans(spans_to_iob(spans, t.size()));
    REQUIRE(again == spans);
  }
}
