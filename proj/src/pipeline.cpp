#include "atesa/pipeline.hpp"

#include <array>

#include "atesa/errors.hpp"

namespace atesa {

Polarity aggregate_polarity(AspectSpan span, std::span<const Polarity> span_polarities) {
  if (span_polarities.empty() || span_polarities.size() != span.length()) {
    throw ValidationError("aggregate_polarity needs one label per span token");
  }
  std::array<std::size_t, kPolarityClassCount> votes{};
  for (Polarity p : span_polarities) {
    if (p != Polarity::None) ++votes[static_cast<std::size_t>(p)];
  }
  std::size_t top = 0;
  for (std::size_t c = 1; c < votes.size(); ++c) top = std::max(top, votes[c]);
  if (top == 0) return Polarity::Neutral;

  auto is_tied = [&](Polarity p) {
    return p != Polarity::None && votes[static_cast<std::size_t>(p)] == top;
  };
  if (is_tied(span_polarities.front())) return span_polarities.front();
  for (Polarity p : span_polarities) {
    if (is_tied(p)) return p;
  }
  return Polarity::Neutral;  // unreachable: top > 0 implies a tied label
}

Analyzer::Analyzer(std::shared_ptr<const LoadedEnsemble> ate,
                   std::shared_ptr<const LoadedEnsemble> atsa)
    : ate_(std::move(ate)), atsa_(std::move(atsa)) {
  if (!ate_ || !atsa_) throw ValidationError("analyzer needs both branch ensembles");
  if (ate_->branch() != Branch::Ate) throw ConfigError("first ensemble is not an ATE ensemble");
  if (atsa_->branch() != Branch::Atsa) {
    throw ConfigError("second ensemble is not an ATSA ensemble");
  }
}

Analyzer Analyzer::load(const EnsembleConfig& ate, const EnsembleConfig& atsa) {
  return Analyzer(std::make_shared<const LoadedEnsemble>(LoadedEnsemble::load(ate)),
                  std::make_shared<const LoadedEnsemble>(LoadedEnsemble::load(atsa)));
}

Analysis Analyzer::analyze(std::string_view text) const {
  Analysis result;
  result.tokens = tokenize(text);
  if (result.tokens.empty()) return result;

  std::vector<std::string> words;
  words.reserve(result.tokens.size());
  for (const Token& t : result.tokens) words.push_back(t.text);

  const std::vector<int> iob_codes = ate_->run_branch(words);
  const std::vector<AspectSpan> spans = iob_to_spans(decode_iob(iob_codes));
  if (spans.empty()) return result;

  const std::vector<Polarity> polarities = decode_polarity(atsa_->run_branch(words));
  for (const AspectSpan& span : spans) {
    AspectOpinion opinion;
    opinion.span = span;
    for (std::size_t i = span.start; i <= span.end; ++i) {
      if (i > span.start) opinion.term += ' ';
      opinion.term += words[i];
    }
    opinion.polarity = aggregate_polarity(
        span, std::span<const Polarity>(polarities).subspan(span.start, span.length()));
    result.opinions.push_back(std::move(opinion));
  }
  return result;
}

}  // namespace atesa
