#include "atesa/errors.hpp"
#include "atesa/heads.hpp"
#include "doctest.h"
#include "gradcheck.hpp"

using namespace atesa;

namespace {

Matrix stub_embeddings(std::size_t tokens, int hidden) {
  static const std::vector<std::string> vocab = {"I", "liked", "the", "pizza",
                                                 "and", "the", "open", "kitchen"};
  std::vector<std::string> words;
  for (std::size_t t = 0; t < tokens; ++t) words.push_back(vocab[t % vocab.size()]);
  EncoderSpec spec;
  spec.hidden_size = hidden;
  return Encoder::create(spec).encode(words);
}

constexpr HeadKind kKinds[] = {HeadKind::Linear, HeadKind::BiLstm, HeadKind::CnnBiLstm};

}  // namespace

TEST_CASE("head output shapes") {
  const Matrix emb = stub_embeddings(8, 16);
  HeadConfig linear = HeadConfig::make(HeadKind::Linear, Branch::Ate, 16);
  CHECK(Head(linear, 1).forward(emb).rows() == 8);
  CHECK(Head(linear, 1).forward(emb).cols() == 3);

  HeadConfig cnn = HeadConfig::make(HeadKind::CnnBiLstm, Branch::Atsa, 16);
  cnn.lstm_units = 8;
  const Head head(cnn, 1);
  CHECK(head.parameters().at("conv.weight").rows() == 16);
  CHECK(head.parameters().at("conv.weight").cols() == 48);
  CHECK(head.parameters().at("dense.weight").cols() == 16);
  const Matrix out = head.forward(emb);
  CHECK(out.rows() == 8);
  CHECK(out.cols() == 4);
}

TEST_CASE("default BiLSTM maps 2U features to C") {
  const Head head(HeadConfig::make(HeadKind::BiLstm, Branch::Ate, 8), 0);
  CHECK(head.parameters().at("lstm.fwd.w_ih").rows() == 4 * 256);
  CHECK(head.parameters().at("dense.weight").rows() == 3);
  CHECK(head.parameters().at("dense.weight").cols() == 512);
}

TEST_CASE("width mismatch is a shape error") {
  const Head head(HeadConfig::make(HeadKind::Linear, Branch::Ate, 16), 0);
  CHECK_THROWS_AS(head.forward(stub_embeddings(3, 8)), ShapeError);
  ParamSet wrong;
  wrong.add("dense.weight", Matrix::Zero(3, 4));
  CHECK_THROWS_AS(Head(HeadConfig::make(HeadKind::Linear, Branch::Ate, 16), wrong), ShapeError);
}

TEST_CASE("inference is deterministic and train mode applies dropout") {
  const Matrix emb = stub_embeddings(6, 8);
  for (HeadKind kind : kKinds) {
    HeadConfig cfg = HeadConfig::make(kind, Branch::Ate, 8);
    cfg.lstm_units = 4;
    const Head head(cfg, 3);
    Rng rng(1);
    CHECK(head.forward(emb) == head.forward(emb, Mode::Infer, rng));
    CHECK(head.forward(emb, Mode::Train, rng) != head.forward(emb));
  }
}

TEST_CASE("linear head is position independent") {
  const Matrix emb = stub_embeddings(5, 8);
  const Head head(HeadConfig::make(HeadKind::Linear, Branch::Atsa, 8), 2);
  const std::vector<int> perm = {3, 0, 4, 1, 2};
  Matrix permuted(5, 8);
  for (int i = 0; i < 5; ++i) permuted.row(i) = emb.row(perm[static_cast<std::size_t>(i)]);
  const Matrix out = head.forward(emb);
  const Matrix out_p = head.forward(permuted);
  for (int i = 0; i < 5; ++i) CHECK(out_p.row(i) == out.row(perm[static_cast<std::size_t>(i)]));

  HeadConfig rnn = HeadConfig::make(HeadKind::BiLstm, Branch::Atsa, 8);
  rnn.lstm_units = 4;
  const Head lstm(rnn, 2);
  CHECK(lstm.forward(permuted).row(0) != lstm.forward(emb).row(3));
}

TEST_CASE("softmax cross-entropy") {
  Matrix scores(2, 3);
  scores << 1.0, 2.0, 3.0, 0.0, 0.0, 0.0;
  const std::vector<int> labels = {2, 1};
  Matrix grad;
  const double loss = softmax_cross_entropy(scores, labels, &grad);
  const double expected = -std::log(std::exp(3.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0))) +
                          std::log(3.0);
  CHECK(loss == doctest::Approx(expected).epsilon(1e-12));
  CHECK(grad.row(1).sum() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(loss > 0.0);

  Matrix confident(1, 3);
  confident << 0.0, 60.0, 0.0;
  const std::vector<int> one = {1};
  CHECK(softmax_cross_entropy(confident, one) < 1e-20);
  CHECK(softmax_cross_entropy(confident, one) >= 0.0);

  const std::vector<int> out_of_range = {3};
  CHECK_THROWS_AS(softmax_cross_entropy(confident, out_of_range), ValidationError);
  CHECK_THROWS_AS(softmax_cross_entropy(scores, one), ShapeError);
}

TEST_CASE("argmax ties go to the lowest index") {
  Matrix m(2, 3);
  m << 0.5, 0.5, 0.0, 0.1, 0.3, 0.3;
  CHECK(argmax_rows(m) == std::vector<int>{0, 1});
  const Matrix p = softmax_rows(m);
  CHECK(p.row(0).sum() == doctest::Approx(1.0));
}

TEST_CASE("gradients match central differences") {
  Rng rng(1234);
  for (HeadKind kind : kKinds) {
    for (int trial = 0; trial < 4; ++trial) {
      const testing::GradInstance inst = testing::random_grad_instance(kind, rng);
      for (Mode mode : {Mode::Infer, Mode::Train}) {
        const auto r = testing::gradient_check(inst.config, inst.embeddings, inst.labels, mode,
                                               static_cast<std::uint64_t>(trial));
        INFO(head_kind_name(kind), " trial ", trial, " train=", mode == Mode::Train);
        CHECK(r.param_error <= 1e-4);
        CHECK(r.input_error <= 1e-4);
      }
    }
  }
}

TEST_CASE("head config json and validation") {
  HeadConfig cfg = HeadConfig::make(HeadKind::CnnBiLstm, Branch::Atsa, 12);
  CHECK(head_config_from_json(to_json(cfg)) == cfg);
  cfg.class_count = 3;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = HeadConfig::make(HeadKind::Linear, Branch::Ate, 12);
  cfg.dropout_rate = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  CHECK(parse_head_kind("cnn_bilstm") == HeadKind::CnnBiLstm);
  CHECK_THROWS_AS(parse_head_kind("crf"), ValidationError);
}
