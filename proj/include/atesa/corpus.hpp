#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "atesa/tagging.hpp"

namespace atesa {

// ---------------------------------------------------------------------------
// Raw corpus records
// ---------------------------------------------------------------------------

// Offsets are code-point indices into the sentence text, end exclusive.
// A target of std::nullopt is the corpus "NULL" marker (sentence-level
// opinion without a span); its offsets are 0/0.
struct AspectAnnotation {
  std::optional<std::string> target;
  std::size_t char_from = 0;
  std::size_t char_to = 0;
  Polarity polarity = Polarity::Neutral;

  bool is_null_target() const { return !target.has_value(); }
};

struct RawSentence {
  std::string id;
  std::string text;
  std::vector<AspectAnnotation> annotations;
};

struct RawReview {
  std::string review_id;
  std::vector<RawSentence> sentences;
};

enum class CorpusFormat { SemEval2016, Mams };

CorpusFormat parse_corpus_format(std::string_view name);

// SemEval-2016 Task 5: <Reviews><Review rid><sentences><sentence id><text>
// <Opinions><Opinion target from to polarity/>.
// MAMS: <sentences><sentence><text><aspectTerms><aspectTerm term from to
// polarity/>. MAMS has no review level, each sentence becomes its own review.
//
// Throws ParseError (with line/column) on malformed XML and ValidationError
// on unknown polarities or offsets that disagree with the target.
std::vector<RawReview> parse_corpus(std::istream& source, CorpusFormat format);
std::vector<RawReview> parse_corpus(std::string_view xml, CorpusFormat format);

// ---------------------------------------------------------------------------
// Tokenization and gold labels
// ---------------------------------------------------------------------------

struct Token {
  std::string text;
  std::size_t begin = 0;  // code point offset, inclusive
  std::size_t end = 0;    // code point offset, exclusive
};

// Splits on whitespace, then separates word runs from punctuation. Each
// punctuation character is its own token. Apostrophes and hyphens between
// word characters stay inside the word ("don't", "open-air").
std::vector<Token> tokenize(std::string_view text);

// One labeled sentence in the newline-delimited JSON training format.
struct TaggedExample {
  std::string text;
  std::vector<std::string> tokens;
  std::vector<int> iob_aspect_tags;
  std::vector<int> atsa_tags;

  // Throws ValidationError naming the first violated field.
  void validate() const;

  friend bool operator==(const TaggedExample&, const TaggedExample&) = default;
};

// Tokens overlapping an annotation by at least one character are tagged
// B (first) / I (rest) and take its polarity. NULL targets are ignored.
// Duplicate spans (same offsets, several opinion categories) collapse to the
// first listed annotation; partially overlapping spans throw ValidationError.
TaggedExample derive_labels(const RawSentence& sentence,
                            std::span<const Token> tokens);

TaggedExample derive_labels(const RawSentence& sentence);

std::vector<TaggedExample> label_corpus(std::span<const RawReview> reviews);

// ---------------------------------------------------------------------------
// NDJSON codec
// ---------------------------------------------------------------------------

std::string to_json_line(const TaggedExample& example);
TaggedExample from_json_line(std::string_view line);

void write_examples(std::ostream& out, std::span<const TaggedExample> examples);
// Blank lines are ignored. Errors carry the 1-based line number.
std::vector<TaggedExample> read_examples(std::istream& in);
std::vector<TaggedExample> read_examples_file(const std::string& path);
void write_examples_file(const std::string& path,
                         std::span<const TaggedExample> examples);

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

struct SplitConfig {
  double train_fraction = 0.8;
  double validation_fraction_of_train = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

struct DataSplit {
  std::vector<TaggedExample> train;
  std::vector<TaggedExample> validation;
  std::vector<TaggedExample> test;
};

// Stratum = sorted multiset of the aspect polarities in the sentence, e.g.
// "1,3,3"; "" for sentences without aspects.
std::string stratum_key(const TaggedExample& example);

// Per stratum of n examples: round(n * train_fraction) go to train+validation,
// of those round(k * validation_fraction) go to validation. Each partition is
// returned in ascending index order.
SplitIndices stratified_split_indices(std::span<const TaggedExample> examples,
                                      const SplitConfig& config);
DataSplit stratified_split(std::span<const TaggedExample> examples,
                           const SplitConfig& config);

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

inline constexpr std::string_view kNullTarget = "NULL";

struct DatasetStats {
  std::size_t review_count = 0;
  std::size_t sentence_count = 0;
  std::size_t opinion_count = 0;
  // Distinct non-NULL target strings.
  std::size_t aspect_term_vocabulary_size = 0;
  std::map<Polarity, std::size_t> polarity_counts;
  // Occurrences per target string (NULL included as "NULL"), descending by
  // count, ties lexicographic.
  std::vector<std::pair<std::string, std::size_t>> top_terms;
};

DatasetStats compute_stats(std::span<const RawReview> reviews);

std::string stats_to_json(const DatasetStats& stats, std::size_t top_n = 10);

}  // namespace atesa
