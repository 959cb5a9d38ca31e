#include "atesa/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>

#include "atesa/errors.hpp"
#include "atesa/unicode.hpp"

namespace atesa {

ConfusionCounts count_confusion(std::span<const std::vector<int>> predictions,
                                std::span<const std::vector<int>> golds,
                                int class_count) {
  if (class_count <= 0) throw ValidationError("class_count must be positive");
  if (predictions.size() != golds.size()) {
    throw ValidationError("got " + std::to_string(predictions.size()) +
                          " prediction sequences for " + std::to_string(golds.size()) +
                          " gold sequences");
  }
  ConfusionCounts counts;
  counts.per_class.resize(static_cast<std::size_t>(class_count));
  auto check = [class_count](int label, const char* what) {
    if (label < 0 || label >= class_count) {
      throw ValidationError(std::string(what) + " label " + std::to_string(label) +
                            " outside [0, " + std::to_string(class_count) + ")");
    }
    return static_cast<std::size_t>(label);
  };
  for (std::size_t s = 0; s < golds.size(); ++s) {
    if (predictions[s].size() != golds[s].size()) {
      throw ValidationError("sequence " + std::to_string(s) + " has " +
                            std::to_string(predictions[s].size()) + " predictions for " +
                            std::to_string(golds[s].size()) + " gold labels");
    }
    for (std::size_t t = 0; t < golds[s].size(); ++t) {
      const std::size_t p = check(predictions[s][t], "predicted");
      const std::size_t g = check(golds[s][t], "gold");
      ++counts.total;
      if (p == g) {
        ++counts.correct;
        ++counts.per_class[g].true_positive;
      } else {
        ++counts.per_class[p].false_positive;
        ++counts.per_class[g].false_negative;
      }
    }
  }
  return counts;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricsReport metrics_from_counts(const ConfusionCounts& counts) {
  MetricsReport m;
  m.accuracy = ratio(counts.correct, counts.total);

  std::size_t tp = 0, fp = 0, fn = 0;
  double p_sum = 0.0, r_sum = 0.0, f_sum = 0.0;
  for (const ClassCounts& c : counts.per_class) {
    tp += c.true_positive;
    fp += c.false_positive;
    fn += c.false_negative;
    p_sum += ratio(c.true_positive, c.true_positive + c.false_positive);
    r_sum += ratio(c.true_positive, c.true_positive + c.false_negative);
    f_sum += ratio(2 * c.true_positive,
                   2 * c.true_positive + c.false_positive + c.false_negative);
  }
  m.micro_precision = ratio(tp, tp + fp);
  m.micro_recall = ratio(tp, tp + fn);
  m.micro_f1 = ratio(2 * tp, 2 * tp + fp + fn);
  const auto k = static_cast<double>(counts.per_class.size());
  if (k > 0) {
    m.macro_precision = p_sum / k;
    m.macro_recall = r_sum / k;
    m.macro_f1 = f_sum / k;
  }
  return m;
}

MetricsReport compute_metrics(std::span<const std::vector<int>> predictions,
                              std::span<const std::vector<int>> golds,
                              int class_count) {
  return metrics_from_counts(count_confusion(predictions, golds, class_count));
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {
      "accuracy",     "micro_precision", "macro_precision", "micro_recall",
      "macro_recall", "micro_f1",        "macro_f1"};
  return names;
}

double metric_value(const MetricsReport& r, const std::string& name) {
  if (name == "accuracy") return r.accuracy;
  if (name == "micro_precision") return r.micro_precision;
  if (name == "micro_recall") return r.micro_recall;
  if (name == "micro_f1") return r.micro_f1;
  if (name == "macro_precision") return r.macro_precision;
  if (name == "macro_recall") return r.macro_recall;
  if (name == "macro_f1") return r.macro_f1;
  throw ValidationError("unknown metric '" + name + "'");
}

nlohmann::json to_json(const MetricsReport& report) {
  nlohmann::json j = nlohmann::json::object();
  for (const std::string& name : metric_names()) j[name] = metric_value(report, name);
  return j;
}

MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.accuracy = j.at("accuracy").get<double>();
  r.micro_precision = j.at("micro_precision").get<double>();
  r.micro_recall = j.at("micro_recall").get<double>();
  r.micro_f1 = j.at("micro_f1").get<double>();
  r.macro_precision = j.at("macro_precision").get<double>();
  r.macro_recall = j.at("macro_recall").get<double>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  return r;
}

nlohmann::json to_json(const RunRecord& record) {
  return {{"run_index", record.run_index},
          {"seed", record.seed},
          {"metrics", to_json(record.metrics)},
          {"train_seconds", record.train_seconds},
          {"test_seconds", record.test_seconds},
          {"execution_seconds", record.execution_seconds},
          {"train_size", record.train_size},
          {"validation_size", record.validation_size},
          {"test_size", record.test_size}};
}

RunRecord run_record_from_json(const nlohmann::json& j) {
  RunRecord r;
  try {
    r.run_index = j.at("run_index").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.metrics = metrics_from_json(j.at("metrics"));
    r.train_seconds = j.value("train_seconds", 0.0);
    r.test_seconds = j.value("test_seconds", 0.0);
    r.execution_seconds = j.at("execution_seconds").get<double>();
    r.train_size = j.value("train_size", std::size_t{0});
    r.validation_size = j.value("validation_size", std::size_t{0});
    r.test_size = j.value("test_size", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid run record: ") + e.what());
  }
  return r;
}

void write_run_record(std::ostream& out, const RunRecord& record) {
  out << to_json(record).dump() << '\n';
  out.flush();
}

std::vector<RunRecord> read_run_records(std::istream& in) {
  std::vector<RunRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(run_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(std::string("invalid run record: ") + e.what());
    }
  }
  return out;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {};
  const auto n = static_cast<double>(values.size());
  // Shifted by the first value so identical inputs give exactly zero spread.
  const double shift = values.front();
  double sum = 0.0;
  for (double v : values) sum += v - shift;
  const double mean = shift + sum / n;
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / n)};
}

RunSummary summarize_runs(const std::string& name, std::span<const RunRecord> records) {
  std::vector<RunRecord> sorted(records.begin(), records.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const RunRecord& a, const RunRecord& b) { return a.run_index < b.run_index; });
  RunSummary summary;
  summary.name = name;
  summary.run_count = static_cast<int>(sorted.size());
  for (const std::string& metric : metric_names()) {
    std::vector<double> values;
    for (const RunRecord& r : sorted) values.push_back(metric_value(r.metrics, metric));
    summary.metrics[metric] = mean_std(values);
  }
  std::vector<double> times;
  for (const RunRecord& r : sorted) times.push_back(r.execution_seconds);
  summary.execution_seconds = mean_std(times);
  return summary;
}

// ---------------------------------------------------------------------------
// Protocol
// ---------------------------------------------------------------------------

RunSummary run_experiment(std::span<const TaggedExample> dataset,
                          const ExperimentSubject& subject, const Protocol& protocol,
                          const RunSink& sink) {
  if (protocol.runs <= 0) throw ValidationError("runs must be positive");
  if (subject.members.empty()) throw ValidationError("experiment subject has no members");
  protocol.split.validate();
  protocol.train.validate();

  using Clock = std::chrono::steady_clock;
  auto seconds = [](Clock::duration d) { return std::chrono::duration<double>(d).count(); };

  std::vector<RunRecord> records;
  for (int run = 0; run < protocol.runs; ++run) {
    RunRecord record;
    record.run_index = run;
    record.seed = protocol.base_seed +
                  (protocol.vary_seed_per_run ? static_cast<std::uint64_t>(run) : 0);

    const auto start = Clock::now();
    SplitConfig split_config = protocol.split;
    split_config.seed = record.seed;
    const DataSplit split = stratified_split(dataset, split_config);
    record.train_size = split.train.size();
    record.validation_size = split.validation.size();
    record.test_size = split.test.size();

    std::vector<LoadedEnsemble::Member> members;
    for (std::size_t m = 0; m < subject.members.size(); ++m) {
      const MemberSpec& spec = subject.members[m];
      auto encoder = std::make_shared<Encoder>(Encoder::create(spec.encoder));
      HeadConfig head_config =
          HeadConfig::make(spec.head, subject.branch, encoder->hidden_size());
      if (subject.lstm_units) head_config.lstm_units = *subject.lstm_units;
      if (subject.dropout_rate) head_config.dropout_rate = *subject.dropout_rate;
      TrainConfig train_config = protocol.train;
      train_config.seed = record.seed + 7919 * m;
      const ModelCheckpoint ckpt =
          train_model(head_config, *encoder, split.train, split.validation, train_config,
                      spec.freeze_encoder, subject.name);
      members.push_back({std::string(head_kind_name(spec.head)) + "-" + std::to_string(m),
                         std::move(encoder), ckpt.head()});
    }
    const LoadedEnsemble ensemble(subject.branch, subject.fusion, std::move(members));
    const auto trained = Clock::now();

    std::vector<std::vector<int>> predictions;
    std::vector<std::vector<int>> golds;
    for (const TaggedExample& ex : split.test) {
      predictions.push_back(ensemble.run_branch(ex.tokens));
      const auto gold = branch_labels(ex, subject.branch);
      golds.emplace_back(gold.begin(), gold.end());
    }
    record.metrics = compute_metrics(predictions, golds, class_count(subject.branch));
    const auto done = Clock::now();

    record.train_seconds = seconds(trained - start);
    record.test_seconds = seconds(done - trained);
    record.execution_seconds = seconds(done - start);
    records.push_back(record);
    if (sink) sink(record);
  }
  return summarize_runs(subject.name, records);
}

// ---------------------------------------------------------------------------
// Table
// ---------------------------------------------------------------------------

namespace {

std::string format_pair(MeanStd v, double scale) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f \xC2\xB1 %.2f", v.mean * scale, v.std * scale);
  return buf;
}

std::size_t display_width(const std::string& s) { return unicode::code_point_length(s); }

std::string pad(const std::string& s, std::size_t width) {
  return s + std::string(width > display_width(s) ? width - display_width(s) : 0, ' ');
}

}  // namespace

std::string render_summary_table(std::span<const RunSummary> summaries,
                                 std::span<const std::string> transformers) {
  const std::vector<std::string> header = {
      "Model",           "Transformer",  "Accuracy",     "Precision Micro",
      "Precision Macro", "Recall Micro", "Recall Macro", "F1 Micro",
      "F1 Macro",        "Execution time (s)"};
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const RunSummary& s = summaries[i];
    std::vector<std::string> row = {s.name, i < transformers.size() ? transformers[i] : "-"};
    for (const std::string& metric : metric_names()) {
      row.push_back(format_pair(s.metrics.at(metric), 100.0));
    }
    row.push_back(format_pair(s.execution_seconds, 1.0));
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> widths(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    widths[c] = display_width(header[c]);
    for (const auto& row : rows) widths[c] = std::max(widths[c], display_width(row[c]));
  }
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    out << "|";
    for (std::size_t c = 0; c < cells.size(); ++c) out << ' ' << pad(cells[c], widths[c]) << " |";
    out << '\n';
  };
  auto rule = [&] {
    out << "|";
    for (std::size_t w : widths) out << std::string(w + 2, '-') << "|";
    out << '\n';
  };
  line(header);
  rule();
  for (const auto& row : rows) line(row);
  return out.str();
}

}  // namespace atesa
