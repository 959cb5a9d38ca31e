#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atesa/corpus.hpp"
#include "atesa/encoder.hpp"
#include "atesa/ensemble.hpp"
#include "atesa/heads.hpp"
#include "atesa/training.hpp"
#include "json.hpp"

namespace atesa {

struct ClassCounts {
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;
};

struct ConfusionCounts {
  std::vector<ClassCounts> per_class;
  std::size_t total = 0;
  std::size_t correct = 0;
};

struct MetricsReport {
  double accuracy = 0.0;
  double micro_precision = 0.0;
  double micro_recall = 0.0;
  double micro_f1 = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

// Labels outside [0, class_count) or sequences of different lengths throw
// ValidationError.
ConfusionCounts count_confusion(std::span<const std::vector<int>> predictions,
                                std::span<const std::vector<int>> golds,
                                int class_count);

// Zero denominators give 0. Macro scores average over all class_count
// classes; macro F1 is the mean of per-class F1.
MetricsReport metrics_from_counts(const ConfusionCounts& counts);

MetricsReport compute_metrics(std::span<const std::vector<int>> predictions,
                              std::span<const std::vector<int>> golds,
                              int class_count);

// Metric names in table order: accuracy, micro_precision, macro_precision,
// micro_recall, macro_recall, micro_f1, macro_f1.
const std::vector<std::string>& metric_names();
double metric_value(const MetricsReport& report, const std::string& name);

nlohmann::json to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Repeated-run protocol
// ---------------------------------------------------------------------------

struct MemberSpec {
  HeadKind head = HeadKind::Linear;
  EncoderSpec encoder;
  bool freeze_encoder = true;
};

// One member is a single model; several members are trained independently
// and fused.
struct ExperimentSubject {
  std::string name;
  Branch branch = Branch::Ate;
  std::vector<MemberSpec> members;
  FusionRule fusion = FusionRule::SoftVote;
  // Optional overrides applied to every member's HeadConfig.
  std::optional<int> lstm_units;
  std::optional<double> dropout_rate;
};

// The seeds inside |split| and |train| are ignored; run r uses
// base_seed + r for both (or base_seed alone when vary_seed_per_run is off).
struct Protocol {
  int runs = 10;
  SplitConfig split;
  TrainConfig train;
  std::uint64_t base_seed = 0;
  bool vary_seed_per_run = true;
};

struct RunRecord {
  int run_index = 0;
  std::uint64_t seed = 0;
  MetricsReport metrics;
  double train_seconds = 0.0;
  double test_seconds = 0.0;
  double execution_seconds = 0.0;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  std::size_t test_size = 0;
};

nlohmann::json to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& j);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

struct RunSummary {
  std::string name;
  int run_count = 0;
  std::map<std::string, MeanStd> metrics;
  MeanStd execution_seconds;
};

MeanStd mean_std(std::span<const double> values);

// Aggregates records sorted by run index; order of |records| is irrelevant.
RunSummary summarize_runs(const std::string& name,
                          std::span<const RunRecord> records);

// Called after every finished run, in run order.
using RunSink = std::function<void(const RunRecord&)>;

// Per run r: seed = base seed + r, stratified split, train every member, fuse
// member predictions on the test partition, record metrics and wall time.
// On a training failure records already passed to |sink| stay persisted and
// the error propagates.
RunSummary run_experiment(std::span<const TaggedExample> dataset,
                          const ExperimentSubject& subject,
                          const Protocol& protocol,
                          const RunSink& sink = nullptr);

void write_run_record(std::ostream& out, const RunRecord& record);
std::vector<RunRecord> read_run_records(std::istream& in);

// Plain-text table: Model | Transformer | Accuracy | Precision (Micro,
// Macro) | Recall (Micro, Macro) | F1 (Micro, Macro) | Execution time (s).
// Scores are percentages "mean ± std".
std::string render_summary_table(std::span<const RunSummary> summaries,
                                 std::span<const std::string> transformers = {});

}  // namespace atesa
