#include "atesa/corpus.hpp"

#include <expat.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "atesa/errors.hpp"
#include "atesa/random.hpp"
#include "atesa/unicode.hpp"
#include "json.hpp"

namespace atesa {

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "semeval2016" || name == "semeval") return CorpusFormat::SemEval2016;
  if (name == "mams") return CorpusFormat::Mams;
  throw ValidationError("unknown corpus format '" + std::string(name) +
                        "' (expected semeval2016 or mams)");
}

// ---------------------------------------------------------------------------
// XML ingestion
// ---------------------------------------------------------------------------

namespace {

struct PendingAnnotation {
  std::string target;
  std::string from;
  std::string to;
  std::string polarity;
};

class CorpusReader {
 public:
  explicit CorpusReader(CorpusFormat format) : format_(format) {
    parser_ = XML_ParserCreate("UTF-8");
    XML_SetUserData(parser_, this);
    XML_SetElementHandler(parser_, &CorpusReader::on_start, &CorpusReader::on_end);
    XML_SetCharacterDataHandler(parser_, &CorpusReader::on_text);
  }
  ~CorpusReader() { XML_ParserFree(parser_); }
  CorpusReader(const CorpusReader&) = delete;
  CorpusReader& operator=(const CorpusReader&) = delete;

  void feed(const char* data, std::size_t size, bool final) {
    if (XML_Parse(parser_, data, static_cast<int>(size), final ? 1 : 0) ==
        XML_STATUS_ERROR) {
      if (failure_) std::rethrow_exception(failure_);
      throw ParseError(XML_ErrorString(XML_GetErrorCode(parser_)),
                       XML_GetCurrentLineNumber(parser_),
                       XML_GetCurrentColumnNumber(parser_) + 1);
    }
  }

  std::vector<RawReview> take() { return std::move(reviews_); }

 private:
  static void XMLCALL on_start(void* self, const XML_Char* name,
                               const XML_Char** attrs) {
    static_cast<CorpusReader*>(self)->guarded([&](CorpusReader& r) {
      r.start_element(name, attrs);
    });
  }
  static void XMLCALL on_end(void* self, const XML_Char* name) {
    static_cast<CorpusReader*>(self)->guarded(
        [&](CorpusReader& r) { r.end_element(name); });
  }
  static void XMLCALL on_text(void* self, const XML_Char* s, int len) {
    auto* r = static_cast<CorpusReader*>(self);
    if (r->in_text_) r->sentence_.text.append(s, static_cast<std::size_t>(len));
  }

  // Exceptions must not cross the C parser; stash and stop instead.
  template <typename F>
  void guarded(F&& f) {
    try {
      f(*this);
    } catch (...) {
      failure_ = std::current_exception();
      XML_StopParser(parser_, XML_FALSE);
    }
  }

  static std::string attr(const XML_Char** attrs, std::string_view key) {
    for (std::size_t i = 0; attrs[i] != nullptr; i += 2) {
      if (key == attrs[i]) return attrs[i + 1];
    }
    return {};
  }

  void start_element(std::string_view name, const XML_Char** attrs) {
    if (format_ == CorpusFormat::SemEval2016 && name == "Review") {
      review_ = RawReview{attr(attrs, "rid"), {}};
      if (review_.review_id.empty()) {
        review_.review_id = "review-" + std::to_string(reviews_.size() + 1);
      }
      in_review_ = true;
    } else if (name == "sentence") {
      sentence_ = RawSentence{attr(attrs, "id"), {}, {}};
      ++sentence_ordinal_;
      if (sentence_.id.empty()) {
        sentence_.id = "s" + std::to_string(sentence_ordinal_);
      }
      pending_.clear();
      in_sentence_ = true;
    } else if (name == "text" && in_sentence_) {
      in_text_ = true;
    } else if (in_sentence_ &&
               ((format_ == CorpusFormat::SemEval2016 && name == "Opinion") ||
                (format_ == CorpusFormat::Mams && name == "aspectTerm"))) {
      const char* target_key =
          format_ == CorpusFormat::SemEval2016 ? "target" : "term";
      pending_.push_back({attr(attrs, target_key), attr(attrs, "from"),
                          attr(attrs, "to"), attr(attrs, "polarity")});
    }
  }

  void end_element(std::string_view name) {
    if (name == "text") {
      in_text_ = false;
    } else if (name == "sentence" && in_sentence_) {
      finish_sentence();
      in_sentence_ = false;
    } else if (name == "Review" && in_review_) {
      reviews_.push_back(std::move(review_));
      in_review_ = false;
    }
  }

  std::size_t parse_offset(const std::string& value, const char* what) const {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(value, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (value.empty() || pos != value.size()) {
      throw ValidationError("sentence " + sentence_.id + ": invalid '" + what +
                            "' offset '" + value + "'");
    }
    return static_cast<std::size_t>(v);
  }

  void finish_sentence() {
    const unicode::Utf8Text text(sentence_.text);
    for (const PendingAnnotation& p : pending_) {
      AspectAnnotation a;
      try {
        a.polarity = parse_polarity(p.polarity);
      } catch (const ValidationError&) {
        throw ValidationError("sentence " + sentence_.id +
                              ": unknown polarity '" + p.polarity + "'");
      }
      if (p.target == kNullTarget) {
        a.target.reset();
      } else {
        a.target = p.target;
        a.char_from = parse_offset(p.from, "from");
        a.char_to = parse_offset(p.to, "to");
        if (a.char_from >= a.char_to || a.char_to > text.size()) {
          throw ValidationError("sentence " + sentence_.id + ": offsets [" +
                                p.from + ", " + p.to +
                                ") invalid for text of length " +
                                std::to_string(text.size()));
        }
        if (text.slice(a.char_from, a.char_to) != p.target) {
          throw ValidationError("sentence " + sentence_.id + ": text[" +
                                p.from + ":" + p.to + "] is '" +
                                std::string(text.slice(a.char_from, a.char_to)) +
                                "', target is '" + p.target + "'");
        }
      }
      sentence_.annotations.push_back(std::move(a));
    }
    if (in_review_) {
      review_.sentences.push_back(std::move(sentence_));
    } else {
      reviews_.push_back(RawReview{sentence_.id, {std::move(sentence_)}});
    }
  }

  CorpusFormat format_;
  XML_Parser parser_;
  std::exception_ptr failure_;
  std::vector<RawReview> reviews_;
  RawReview review_;
  RawSentence sentence_;
  std::vector<PendingAnnotation> pending_;
  std::size_t sentence_ordinal_ = 0;
  bool in_review_ = false;
  bool in_sentence_ = false;
  bool in_text_ = false;
};

}  // namespace

std::vector<RawReview> parse_corpus(std::istream& source, CorpusFormat format) {
  CorpusReader reader(format);
  std::vector<char> buffer(1 << 16);
  while (source) {
    source.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    const auto got = static_cast<std::size_t>(source.gcount());
    if (got == 0) break;
    reader.feed(buffer.data(), got, false);
  }
  reader.feed(nullptr, 0, true);
  return reader.take();
}

std::vector<RawReview> parse_corpus(std::string_view xml, CorpusFormat format) {
  CorpusReader reader(format);
  reader.feed(xml.data(), xml.size(), true);
  return reader.take();
}

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

namespace {

bool is_connector(char32_t c) {
  return c == U'\'' || c == U'-' || c == 0x2019 || c == 0x2010 || c == 0x2011;
}

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  const unicode::Utf8Text chars(text);
  std::vector<Token> tokens;
  std::size_t i = 0;
  const std::size_t n = chars.size();
  while (i < n) {
    if (unicode::is_space(chars[i])) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    if (unicode::is_word_char(chars[i])) {
      while (j < n) {
        if (unicode::is_word_char(chars[j])) {
          ++j;
        } else if (is_connector(chars[j]) && j + 1 < n &&
                   unicode::is_word_char(chars[j + 1])) {
          j += 2;
        } else {
          break;
        }
      }
    }
    tokens.push_back({std::string(chars.slice(i, j)), i, j});
    i = j;
  }
  return tokens;
}

// ---------------------------------------------------------------------------
// Gold labels
// ---------------------------------------------------------------------------

void TaggedExample::validate() const {
  const std::size_t n = tokens.size();
  if (iob_aspect_tags.size() != n) {
    throw ValidationError("iob_aspect_tags length mismatch (" +
                          std::to_string(n) + " tokens, " +
                          std::to_string(iob_aspect_tags.size()) + " tags)");
  }
  if (atsa_tags.size() != n) {
    throw ValidationError("atsa_tags length mismatch (" + std::to_string(n) +
                          " tokens, " + std::to_string(atsa_tags.size()) +
                          " tags)");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int iob = iob_aspect_tags[i];
    const int atsa = atsa_tags[i];
    if (iob < 0 || iob >= kIobClassCount) {
      throw ValidationError("iob_aspect_tags[" + std::to_string(i) +
                            "] = " + std::to_string(iob) + " out of range");
    }
    if (atsa < 0 || atsa >= kPolarityClassCount) {
      throw ValidationError("atsa_tags[" + std::to_string(i) + "] = " +
                            std::to_string(atsa) + " out of range");
    }
    if (atsa > 0 && iob == 0) {
      throw ValidationError("atsa_tags[" + std::to_string(i) +
                            "] carries a polarity outside any aspect");
    }
    if (iob == static_cast<int>(IobTag::Inside) &&
        (i == 0 || iob_aspect_tags[i - 1] == 0)) {
      throw ValidationError("iob_aspect_tags[" + std::to_string(i) +
                            "] is Inside without a preceding Beginning");
    }
  }
}

TaggedExample derive_labels(const RawSentence& sentence,
                            std::span<const Token> tokens) {
  TaggedExample ex;
  ex.text = sentence.text;
  ex.tokens.reserve(tokens.size());
  for (const Token& t : tokens) ex.tokens.push_back(t.text);
  ex.iob_aspect_tags.assign(tokens.size(), 0);
  ex.atsa_tags.assign(tokens.size(), 0);

  struct Placed {
    std::size_t char_from, char_to;
    std::size_t first, last;  // token range, inclusive
    Polarity polarity;
    std::optional<std::string> target;
  };
  std::vector<Placed> placed;

  auto describe = [](const auto& x) {
    return "'" + std::string(x.target.value()) + "' [" + std::to_string(x.char_from) + ", " +
           std::to_string(x.char_to) + ")";
  };

  for (const AspectAnnotation& a : sentence.annotations) {
    if (a.is_null_target()) continue;
    bool duplicate = false;
    for (const Placed& p : placed) {
      if (p.char_from == a.char_from && p.char_to == a.char_to) {
        duplicate = true;
        break;
      }
      if (a.char_from < p.char_to && p.char_from < a.char_to) {
        throw ValidationError("sentence " + sentence.id +
                              ": overlapping annotations " +
                              describe(p) + " and " + describe(a));
      }
    }
    if (duplicate) continue;
    std::size_t first = tokens.size();
    std::size_t last = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i].begin < a.char_to && tokens[i].end > a.char_from) {
        first = std::min(first, i);
        last = i;
      }
    }
    if (first == tokens.size()) continue;  // span covers no token
    placed.push_back({a.char_from, a.char_to, first, last, a.polarity, a.target});
  }

  // Character-disjoint annotations may still share a token; they merge into
  // the earlier span.
  std::sort(placed.begin(), placed.end(),
            [](const Placed& x, const Placed& y) { return x.first < y.first; });
  std::vector<Placed> merged;
  for (const Placed& p : placed) {
    if (!merged.empty() && p.first <= merged.back().last) {
      merged.back().last = std::max(merged.back().last, p.last);
    } else {
      merged.push_back(p);
    }
  }

  for (const Placed& p : merged) {
    for (std::size_t i = p.first; i <= p.last; ++i) {
      ex.iob_aspect_tags[i] = static_cast<int>(
          i == p.first ? IobTag::Beginning : IobTag::Inside);
      ex.atsa_tags[i] = static_cast<int>(p.polarity);
    }
  }
  return ex;
}

TaggedExample derive_labels(const RawSentence& sentence) {
  const std::vector<Token> tokens = tokenize(sentence.text);
  return derive_labels(sentence, tokens);
}

std::vector<TaggedExample> label_corpus(std::span<const RawReview> reviews) {
  std::vector<TaggedExample> out;
  for (const RawReview& r : reviews) {
    for (const RawSentence& s : r.sentences) out.push_back(derive_labels(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// NDJSON codec
// ---------------------------------------------------------------------------

std::string to_json_line(const TaggedExample& example) {
  example.validate();
  nlohmann::ordered_json j;
  j["text"] = example.text;
  j["tokens"] = example.tokens;
  j["iob_aspect_tags"] = example.iob_aspect_tags;
  j["atsa_tags"] = example.atsa_tags;
  return j.dump();
}

TaggedExample from_json_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("record is not a JSON object");
  auto field = [&](const char* name) -> const nlohmann::json& {
    auto it = j.find(name);
    if (it == j.end()) {
      throw ValidationError(std::string("missing field '") + name + "'");
    }
    return *it;
  };
  TaggedExample ex;
  try {
    ex.text = field("text").get<std::string>();
    ex.tokens = field("tokens").get<std::vector<std::string>>();
    ex.iob_aspect_tags = field("iob_aspect_tags").get<std::vector<int>>();
    ex.atsa_tags = field("atsa_tags").get<std::vector<int>>();
  } catch (const nlohmann::json::type_error& e) {
    throw ValidationError(std::string("wrong field type: ") + e.what());
  }
  ex.validate();
  return ex;
}

void write_examples(std::ostream& out, std::span<const TaggedExample> examples) {
  for (const TaggedExample& ex : examples) out << to_json_line(ex) << '\n';
}

std::vector<TaggedExample> read_examples(std::istream& in) {
  std::vector<TaggedExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(from_json_line(line));
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<TaggedExample> read_examples_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_examples(in);
}

void write_examples_file(const std::string& path,
                         std::span<const TaggedExample> examples) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_examples(out, examples);
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

void SplitConfig::validate() const {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw ValidationError("train_fraction must lie in (0, 1]");
  }
  if (!(validation_fraction_of_train >= 0.0 &&
        validation_fraction_of_train < 1.0)) {
    throw ValidationError("validation_fraction_of_train must lie in [0, 1)");
  }
}

std::string stratum_key(const TaggedExample& example) {
  std::vector<int> polarities;
  for (std::size_t i = 0; i < example.iob_aspect_tags.size(); ++i) {
    if (example.iob_aspect_tags[i] == static_cast<int>(IobTag::Beginning)) {
      polarities.push_back(example.atsa_tags[i]);
    }
  }
  std::sort(polarities.begin(), polarities.end());
  std::string key;
  for (std::size_t i = 0; i < polarities.size(); ++i) {
    if (i) key += ',';
    key += std::to_string(polarities[i]);
  }
  return key;
}

SplitIndices stratified_split_indices(std::span<const TaggedExample> examples,
                                      const SplitConfig& config) {
  config.validate();
  if (examples.empty()) throw ValidationError("cannot split an empty dataset");

  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    strata[stratum_key(examples[i])].push_back(i);
  }

  Rng rng(config.seed);
  SplitIndices out;
  for (auto& [key, members] : strata) {
    shuffle(std::span<std::size_t>(members), rng);
    const auto n = static_cast<double>(members.size());
    const auto keep = static_cast<std::size_t>(std::llround(n * config.train_fraction));
    const auto val = static_cast<std::size_t>(std::llround(
        static_cast<double>(keep) * config.validation_fraction_of_train));
    for (std::size_t k = 0; k < members.size(); ++k) {
      if (k < val) {
        out.validation.push_back(members[k]);
      } else if (k < keep) {
        out.train.push_back(members[k]);
      } else {
        out.test.push_back(members[k]);
      }
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

DataSplit stratified_split(std::span<const TaggedExample> examples,
                           const SplitConfig& config) {
  const SplitIndices idx = stratified_split_indices(examples, config);
  DataSplit out;
  for (std::size_t i : idx.train) out.train.push_back(examples[i]);
  for (std::size_t i : idx.validation) out.validation.push_back(examples[i]);
  for (std::size_t i : idx.test) out.test.push_back(examples[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

DatasetStats compute_stats(std::span<const RawReview> reviews) {
  DatasetStats stats;
  std::map<std::string, std::size_t> term_counts;
  for (Polarity p : {Polarity::Negative, Polarity::Neutral, Polarity::Positive}) {
    stats.polarity_counts[p] = 0;
  }
  stats.review_count = reviews.size();
  for (const RawReview& r : reviews) {
    stats.sentence_count += r.sentences.size();
    for (const RawSentence& s : r.sentences) {
      for (const AspectAnnotation& a : s.annotations) {
        ++stats.opinion_count;
        ++stats.polarity_counts[a.polarity];
        ++term_counts[a.target ? *a.target : std::string(kNullTarget)];
      }
    }
  }
  stats.aspect_term_vocabulary_size =
      term_counts.size() - (term_counts.contains(std::string(kNullTarget)) ? 1 : 0);
  stats.top_terms.assign(term_counts.begin(), term_counts.end());
  std::stable_sort(stats.top_terms.begin(), stats.top_terms.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return stats;
}

std::string stats_to_json(const DatasetStats& stats, std::size_t top_n) {
  nlohmann::ordered_json j;
  j["review_count"] = stats.review_count;
  j["sentence_count"] = stats.sentence_count;
  j["opinion_count"] = stats.opinion_count;
  j["aspect_term_vocabulary_size"] = stats.aspect_term_vocabulary_size;
  nlohmann::ordered_json pol = nlohmann::ordered_json::object();
  for (const auto& [p, c] : stats.polarity_counts) {
    pol[std::string(polarity_name(p))] = c;
  }
  j["polarity_counts"] = pol;
  nlohmann::ordered_json top = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < stats.top_terms.size() && i < top_n; ++i) {
    top.push_back({{"term", stats.top_terms[i].first},
                   {"count", stats.top_terms[i].second}});
  }
  j["top_terms"] = top;
  return j.dump();
}

}  // namespace atesa
