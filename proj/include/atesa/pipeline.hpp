#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atesa/corpus.hpp"
#include "atesa/ensemble.hpp"
#include "atesa/tagging.hpp"

namespace atesa {

struct AspectOpinion {
  AspectSpan span;
  std::string term;  // span tokens joined with single spaces
  Polarity polarity = Polarity::Neutral;
};

struct Analysis {
  std::vector<Token> tokens;
  std::vector<AspectOpinion> opinions;
};

// Majority over the non-None labels of the span. A tie goes to the label of
// the span's first token if it is among the tied labels, otherwise to the
// tied label that occurs first. All None gives Neutral.
Polarity aggregate_polarity(AspectSpan span,
                            std::span<const Polarity> span_polarities);

// text -> tokens -> ATE ensemble -> spans -> ATSA ensemble -> per-span
// polarity. The ATSA branch sees the plain token sequence; spans are applied
// afterwards.
class Analyzer {
 public:
  Analyzer(std::shared_ptr<const LoadedEnsemble> ate,
           std::shared_ptr<const LoadedEnsemble> atsa);

  static Analyzer load(const EnsembleConfig& ate, const EnsembleConfig& atsa);

  Analysis analyze(std::string_view text) const;

  const LoadedEnsemble& ate() const { return *ate_; }
  const LoadedEnsemble& atsa() const { return *atsa_; }

 private:
  std::shared_ptr<const LoadedEnsemble> ate_;
  std::shared_ptr<const LoadedEnsemble> atsa_;
};

}  // namespace atesa
