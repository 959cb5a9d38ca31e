#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "atesa/params.hpp"
#include "atesa/random.hpp"
#include "atesa/tagging.hpp"
#include "json.hpp"

namespace atesa {

enum class HeadKind { Linear, BiLstm, CnnBiLstm };

std::string_view head_kind_name(HeadKind kind);  // linear, bilstm, cnn_bilstm
HeadKind parse_head_kind(std::string_view name);

struct HeadConfig {
  HeadKind kind = HeadKind::Linear;
  Branch branch = Branch::Ate;
  int input_size = 0;
  int class_count = kIobClassCount;
  double dropout_rate = 0.3;
  int lstm_units = 256;  // per direction
  int conv_kernel = 3;
  int max_sequence_length = 128;

  static HeadConfig make(HeadKind kind, Branch branch, int input_size);
  void validate() const;

  friend bool operator==(const HeadConfig&, const HeadConfig&) = default;
};

nlohmann::json to_json(const HeadConfig& config);
HeadConfig head_config_from_json(const nlohmann::json& j);

enum class Mode { Train, Infer };

// Token classifier over a T x H embedding matrix.
//
//   Linear:     dropout -> dense(C)
//   BiLSTM:     dropout -> BiLSTM(U) -> dropout -> dense(C)
//   CNN-BiLSTM: dropout -> conv1d(H, kernel k, same padding) -> BiLSTM(U)
//               -> dropout -> dense(C)
//
// The BiLSTM concatenates forward and backward states, so the dense layer
// maps 2U -> C. Gate order inside the LSTM weights is i, f, g, o.
class Head {
 public:
  // Fresh weights, uniform in +-1/sqrt(fan_in).
  Head(HeadConfig config, std::uint64_t seed);
  // Throws ShapeError if |params| does not match the config's layout.
  Head(HeadConfig config, ParamSet params);

  const HeadConfig& config() const { return config_; }
  const ParamSet& parameters() const { return params_; }
  ParamSet& parameters() { return params_; }

  // Unnormalized T x C scores, inference mode.
  Matrix forward(const Matrix& embeddings) const;
  Matrix forward(const Matrix& embeddings, Mode mode, Rng& rng) const;

  // Adds d(loss_scale * CE)/d(params) into |grads| (layout of parameters())
  // and, when |input_grad| is given, stores d/d(embeddings) there. Returns the
  // unscaled summed cross-entropy over the rows.
  double accumulate_gradients(const Matrix& embeddings,
                              std::span<const int> labels, Mode mode, Rng& rng,
                              double loss_scale, ParamSet& grads,
                              Matrix* input_grad = nullptr) const;

 private:
  void check_input(const Matrix& embeddings) const;

  HeadConfig config_;
  ParamSet params_;
};

// Row-wise softmax.
Matrix softmax_rows(const Matrix& scores);

// Row-wise argmax, ties to the lowest index.
std::vector<int> argmax_rows(const Matrix& scores);

// Summed cross-entropy of |scores| against |labels|; when |grad| is given it
// receives d(loss)/d(scores).
double softmax_cross_entropy(const Matrix& scores, std::span<const int> labels,
                             Matrix* grad = nullptr);

}  // namespace atesa
