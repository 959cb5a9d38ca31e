#include <random>
#include <sstream>

#include "atesa/errors.hpp"
#include "atesa/eval.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace atesa;

namespace {

using Seqs = std::vector<std::vector<int>>;

void check_against_oracle(const Seqs& p, const Seqs& g, int classes) {
  const MetricsReport m = compute_metrics(p, g, classes);
  const testing::OracleMetrics o = testing::brute_force_metrics(p, g, classes);
  CHECK(m.accuracy == doctest::Approx(o.accuracy).epsilon(1e-9));
  CHECK(m.micro_precision == doctest::Approx(o.micro_precision).epsilon(1e-9));
  CHECK(m.micro_recall == doctest::Approx(o.micro_recall).epsilon(1e-9));
  CHECK(m.micro_f1 == doctest::Approx(o.micro_f1).epsilon(1e-9));
  CHECK(m.macro_precision == doctest::Approx(o.macro_precision).epsilon(1e-9));
  CHECK(m.macro_recall == doctest::Approx(o.macro_recall).epsilon(1e-9));
  CHECK(m.macro_f1 == doctest::Approx(o.macro_f1).epsilon(1e-9));
}

}  // namespace

TEST_CASE("perfect predictions") {
  const Seqs g = {{0, 1, 2}, {0, 0}};
  const MetricsReport m = compute_metrics(g, g, 3);
  CHECK(m.accuracy == 1.0);
  CHECK(m.micro_f1 == 1.0);
  CHECK(m.macro_f1 == 1.0);
}

TEST_CASE("hand-enumerated 3-class confusion") {
  // gold:  0 0 0 1 1 2
  // pred:  0 0 1 1 2 2
  const Seqs g = {{0, 0, 0, 1, 1, 2}};
  const Seqs p = {{0, 0, 1, 1, 2, 2}};
  const MetricsReport m = compute_metrics(p, g, 3);
  CHECK(m.accuracy == doctest::Approx(4.0 / 6.0));
  // per class P: 1, 1/2, 1/2; R: 2/3, 1/2, 1
  CHECK(m.macro_precision == doctest::Approx((1.0 + 0.5 + 0.5) / 3.0));
  CHECK(m.macro_recall == doctest::Approx((2.0 / 3.0 + 0.5 + 1.0) / 3.0));
  CHECK(m.macro_f1 == doctest::Approx((0.8 + 0.5 + 2.0 / 3.0) / 3.0));
  check_against_oracle(p, g, 3);
}

TEST_CASE("zero denominators give zero") {
  const Seqs g = {{0, 0}};
  const Seqs p = {{0, 0}};
  const MetricsReport m = compute_metrics(p, g, 4);
  CHECK(m.macro_precision == doctest::Approx(0.25));
  CHECK(m.macro_f1 == doctest::Approx(0.25));
  const MetricsReport empty = compute_metrics(Seqs{}, Seqs{}, 3);
  CHECK(empty.accuracy == 0.0);
}

TEST_CASE("invalid metric input") {
  CHECK_THROWS_AS(compute_metrics(Seqs{{0, 1}}, Seqs{{0}}, 3), ValidationError);
  CHECK_THROWS_AS(compute_metrics(Seqs{{0}}, Seqs{{0}, {1}}, 3), ValidationError);
  CHECK_THROWS_AS(compute_metrics(Seqs{{3}}, Seqs{{0}}, 3), ValidationError);
}

TEST_CASE("property: metrics against oracle, micro identity, relabeling invariance") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const int classes = 2 + static_cast<int>(rng() % 4);
    Seqs p, g;
    for (std::size_t s = 1 + rng() % 5; s > 0; --s) {
      std::vector<int> ps, gs;
      for (std::size_t t = 1 + rng() % 12; t > 0; --t) {
        gs.push_back(static_cast<int>(rng() % static_cast<unsigned>(classes)));
        ps.push_back(rng() % 3 ? gs.back() : static_cast<int>(rng() % static_cast<unsigned>(classes)));
      }
      p.push_back(ps);
      g.push_back(gs);
    }
    check_against_oracle(p, g, classes);
    const MetricsReport m = compute_metrics(p, g, classes);
    REQUIRE(m.micro_precision == m.accuracy);
    REQUIRE(m.micro_recall == m.accuracy);
    REQUIRE(m.micro_f1 == m.accuracy);
    REQUIRE(m.macro_f1 <= 1.0);

    std::vector<int> perm(static_cast<std::size_t>(classes));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Seqs pp = p, gp = g;
    for (auto& s : pp) for (int& x : s) x = perm[static_cast<std::size_t>(x)];
    for (auto& s : gp) for (int& x : s) x = perm[static_cast<std::size_t>(x)];
    const MetricsReport r = compute_metrics(pp, gp, classes);
    REQUIRE(r.macro_f1 == doctest::Approx(m.macro_f1).epsilon(1e-12));
    REQUIRE(r.macro_precision == doctest::Approx(m.macro_precision).epsilon(1e-12));
  }
}

TEST_CASE("mean and population std") {
  const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  const MeanStd ms = mean_std(v);
  CHECK(ms.mean == 2.5);
  CHECK(ms.std == doctest::Approx(std::sqrt(1.25)));
  const std::vector<double> one = {0.7};
  CHECK(mean_std(one).std == 0.0);
}

TEST_CASE("run_experiment on the toy corpus") {
  const auto corpus = testing::toy_corpus();
  ExperimentSubject subject;
  subject.name = "Linear";
  subject.branch = Branch::Ate;
  MemberSpec member;
  member.encoder.hidden_size = 16;
  subject.members = {member};
  Protocol protocol;
  protocol.runs = 3;
  protocol.train.learning_rate = 1e-2;

  std::vector<RunRecord> records;
  const RunSummary summary =
      run_experiment(corpus, subject, protocol, [&](const RunRecord& r) { records.push_back(r); });
  REQUIRE(records.size() == 3);
  CHECK(summary.run_count == 3);
  for (int r = 0; r < 3; ++r) {
    CHECK(records[static_cast<std::size_t>(r)].run_index == r);
    CHECK(records[static_cast<std::size_t>(r)].seed == static_cast<std::uint64_t>(r));
    CHECK(records[static_cast<std::size_t>(r)].test_size == 2);
  }

  SUBCASE("persisted records reproduce the summary") {
    std::stringstream io;
    for (auto it = records.rbegin(); it != records.rend(); ++it) write_run_record(io, *it);
    const auto back = read_run_records(io);
    const RunSummary again = summarize_runs("Linear", back);
    for (const std::string& name : metric_names()) {
      CHECK(again.metrics.at(name).mean == doctest::Approx(summary.metrics.at(name).mean).epsilon(1e-12));
      CHECK(again.metrics.at(name).std == doctest::Approx(summary.metrics.at(name).std).epsilon(1e-12));
    }
  }
  SUBCASE("one run has zero std") {
    protocol.runs = 1;
    const RunSummary one = run_experiment(corpus, subject, protocol);
    for (const auto& [name, ms] : one.metrics) CHECK(ms.std == 0.0);
  }
  SUBCASE("equal seeds give zero std") {
    protocol.vary_seed_per_run = false;
    const RunSummary same = run_experiment(corpus, subject, protocol);
    for (const auto& [name, ms] : same.metrics) CHECK(ms.std == 0.0);
  }
  SUBCASE("table layout") {
    const std::vector<RunSummary> rows = {summary};
    const std::string table = render_summary_table(rows);
    CHECK(table.find("Accuracy") != std::string::npos);
    CHECK(table.find("Precision Micro") < table.find("Precision Macro"));
    CHECK(table.find("Macro") < table.find("Recall Micro"));
    CHECK(table.find("F1 Macro") < table.find("Execution time"));
    CHECK(table.find(" ± ") != std::string::npos);
  }
}

TEST_CASE("run records json round trip") {
  RunRecord r;
  r.run_index = 4;
  r.seed = 12;
  r.metrics.accuracy = 0.125;
  r.execution_seconds = 1.5;
  const RunRecord back = run_record_from_json(to_json(r));
  CHECK(back.run_index == 4);
  CHECK(back.seed == 12);
  CHECK(back.metrics.accuracy == 0.125);
  CHECK(back.execution_seconds == 1.5);
}
