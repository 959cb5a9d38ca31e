#include "atesa/heads.hpp"

#include <cmath>
#include <string>

#include "atesa/errors.hpp"

namespace atesa {

std::string_view head_kind_name(HeadKind kind) {
  switch (kind) {
    case HeadKind::Linear:
      return "linear";
    case HeadKind::BiLstm:
      return "bilstm";
    case HeadKind::CnnBiLstm:
      return "cnn_bilstm";
  }
  return "linear";
}

HeadKind parse_head_kind(std::string_view name) {
  if (name == "linear") return HeadKind::Linear;
  if (name == "bilstm") return HeadKind::BiLstm;
  if (name == "cnn_bilstm" || name == "cnn-bilstm") return HeadKind::CnnBiLstm;
  throw ValidationError("unknown head kind '" + std::string(name) +
                        "' (expected linear, bilstm or cnn_bilstm)");
}

HeadConfig HeadConfig::make(HeadKind kind, Branch branch, int input_size) {
  HeadConfig c;
  c.kind = kind;
  c.branch = branch;
  c.input_size = input_size;
  c.class_count = atesa::class_count(branch);
  return c;
}

void HeadConfig::validate() const {
  if (input_size <= 0) throw ValidationError("head input_size must be positive");
  if (class_count != atesa::class_count(branch)) {
    throw ValidationError("class_count " + std::to_string(class_count) +
                          " does not match branch " + std::string(branch_name(branch)));
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ValidationError("dropout_rate must lie in [0, 1)");
  }
  if (lstm_units <= 0) throw ValidationError("lstm_units must be positive");
  if (conv_kernel <= 0 || conv_kernel % 2 == 0) {
    throw ValidationError("conv_kernel must be a positive odd number");
  }
  if (max_sequence_length <= 0) {
    throw ValidationError("max_sequence_length must be positive");
  }
}

nlohmann::json to_json(const HeadConfig& config) {
  return {{"kind", head_kind_name(config.kind)},
          {"branch", branch_name(config.branch)},
          {"input_size", config.input_size},
          {"class_count", config.class_count},
          {"dropout_rate", config.dropout_rate},
          {"lstm_units", config.lstm_units},
          {"conv_kernel", config.conv_kernel},
          {"max_sequence_length", config.max_sequence_length}};
}

HeadConfig head_config_from_json(const nlohmann::json& j) {
  HeadConfig c;
  try {
    c.kind = parse_head_kind(j.at("kind").get<std::string>());
    c.branch = parse_branch(j.at("branch").get<std::string>());
    c.input_size = j.at("input_size").get<int>();
    c.class_count = j.value("class_count", class_count(c.branch));
    c.dropout_rate = j.value("dropout_rate", 0.3);
    c.lstm_units = j.value("lstm_units", 256);
    c.conv_kernel = j.value("conv_kernel", 3);
    c.max_sequence_length = j.value("max_sequence_length", 128);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid head config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

namespace {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = uniform(rng, -bound, bound);
  }
  return m;
}

// Inverted dropout. |mask| is left empty in inference mode.
Matrix apply_dropout(const Matrix& x, double rate, Mode mode, Rng& rng, Matrix& mask) {
  if (mode == Mode::Infer || rate == 0.0) {
    mask.resize(0, 0);
    return x;
  }
  const double keep = 1.0 / (1.0 - rate);
  mask.resize(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      mask(r, c) = uniform01(rng) >= rate ? keep : 0.0;
    }
  }
  return x.cwiseProduct(mask);
}

Matrix dropout_backward(const Matrix& grad, const Matrix& mask) {
  if (mask.size() == 0) return grad;
  return grad.cwiseProduct(mask);
}

Matrix dense_forward(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = x * w.transpose();
  y.rowwise() += b.row(0);
  return y;
}

// Rows t hold [x_{t-p}, ..., x_{t+p}] with zero padding, p = (k - 1) / 2.
Matrix unfold(const Matrix& x, int kernel) {
  const Eigen::Index t_len = x.rows();
  const Eigen::Index in = x.cols();
  const int pad = (kernel - 1) / 2;
  Matrix u = Matrix::Zero(t_len, kernel * in);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    for (int j = 0; j < kernel; ++j) {
      const Eigen::Index src = t + j - pad;
      if (src >= 0 && src < t_len) u.block(t, j * in, 1, in) = x.row(src);
    }
  }
  return u;
}

Matrix fold(const Matrix& du, int kernel, Eigen::Index in) {
  const Eigen::Index t_len = du.rows();
  const int pad = (kernel - 1) / 2;
  Matrix dx = Matrix::Zero(t_len, in);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    for (int j = 0; j < kernel; ++j) {
      const Eigen::Index src = t + j - pad;
      if (src >= 0 && src < t_len) dx.row(src) += du.block(t, j * in, 1, in);
    }
  }
  return dx;
}

Matrix reverse_rows(const Matrix& m) { return m.colwise().reverse(); }

struct LstmCache {
  Matrix x;
  Matrix gates;   // activated i, f, g, o
  Matrix cell;
  Matrix hidden;
  Matrix tanh_cell;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Matrix lstm_forward(const Matrix& x, const Matrix& w_ih, const Matrix& w_hh,
                    const Matrix& bias, LstmCache& cache) {
  const Eigen::Index t_len = x.rows();
  const Eigen::Index units = w_hh.cols();
  Matrix z_in = x * w_ih.transpose();
  z_in.rowwise() += bias.row(0);

  cache.x = x;
  cache.gates.resize(t_len, 4 * units);
  cache.cell.resize(t_len, units);
  cache.hidden.resize(t_len, units);
  cache.tanh_cell.resize(t_len, units);

  Vector h_prev = Vector::Zero(units);
  Vector c_prev = Vector::Zero(units);
  Vector z(4 * units);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    z.noalias() = w_hh * h_prev;
    z += z_in.row(t).transpose();
    for (Eigen::Index u = 0; u < units; ++u) {
      const double i = sigmoid(z(u));
      const double f = sigmoid(z(units + u));
      const double g = std::tanh(z(2 * units + u));
      const double o = sigmoid(z(3 * units + u));
      const double c = f * c_prev(u) + i * g;
      const double tc = std::tanh(c);
      cache.gates(t, u) = i;
      cache.gates(t, units + u) = f;
      cache.gates(t, 2 * units + u) = g;
      cache.gates(t, 3 * units + u) = o;
      cache.cell(t, u) = c;
      cache.tanh_cell(t, u) = tc;
      cache.hidden(t, u) = o * tc;
    }
    h_prev = cache.hidden.row(t).transpose();
    c_prev = cache.cell.row(t).transpose();
  }
  return cache.hidden;
}

// Returns d/dx; accumulates parameter gradients.
Matrix lstm_backward(const LstmCache& cache, const Matrix& d_hidden,
                     const Matrix& w_ih, const Matrix& w_hh, Matrix& dw_ih,
                     Matrix& dw_hh, Matrix& d_bias) {
  const Eigen::Index t_len = cache.x.rows();
  const Eigen::Index units = w_hh.cols();
  Matrix dz(t_len, 4 * units);
  Vector dh_next = Vector::Zero(units);
  Vector dc_next = Vector::Zero(units);
  for (Eigen::Index t = t_len - 1; t >= 0; --t) {
    for (Eigen::Index u = 0; u < units; ++u) {
      const double i = cache.gates(t, u);
      const double f = cache.gates(t, units + u);
      const double g = cache.gates(t, 2 * units + u);
      const double o = cache.gates(t, 3 * units + u);
      const double tc = cache.tanh_cell(t, u);
      const double c_prev = t > 0 ? cache.cell(t - 1, u) : 0.0;
      const double dh = d_hidden(t, u) + dh_next(u);
      const double dc = dh * o * (1.0 - tc * tc) + dc_next(u);
      dz(t, u) = dc * g * i * (1.0 - i);
      dz(t, units + u) = dc * c_prev * f * (1.0 - f);
      dz(t, 2 * units + u) = dc * i * (1.0 - g * g);
      dz(t, 3 * units + u) = dh * tc * o * (1.0 - o);
      dc_next(u) = dc * f;
    }
    dh_next.noalias() = w_hh.transpose() * dz.row(t).transpose();
  }
  dw_ih.noalias() += dz.transpose() * cache.x;
  d_bias += dz.colwise().sum();
  if (t_len > 1) {
    dw_hh.noalias() +=
        dz.bottomRows(t_len - 1).transpose() * cache.hidden.topRows(t_len - 1);
  }
  return dz * w_ih;
}

struct ForwardCache {
  Matrix input_mask;
  Matrix dropped_input;
  Matrix unfolded;
  Matrix conv_out;
  LstmCache forward_dir;
  LstmCache backward_dir;
  Matrix middle_mask;
  Matrix dense_input;
  Matrix scores;
};

void forward_impl(const HeadConfig& cfg, const ParamSet& p, const Matrix& x,
                  Mode mode, Rng& rng, ForwardCache& cache) {
  cache.dropped_input = apply_dropout(x, cfg.dropout_rate, mode, rng, cache.input_mask);
  if (cfg.kind == HeadKind::Linear) {
    cache.dense_input = cache.dropped_input;
  } else {
    Matrix lstm_in;
    if (cfg.kind == HeadKind::CnnBiLstm) {
      cache.unfolded = unfold(cache.dropped_input, cfg.conv_kernel);
      cache.conv_out = dense_forward(cache.unfolded, p.at("conv.weight"), p.at("conv.bias"));
      lstm_in = cache.conv_out;
    } else {
      lstm_in = cache.dropped_input;
    }
    const Eigen::Index units = cfg.lstm_units;
    Matrix both(lstm_in.rows(), 2 * units);
    both.leftCols(units) = lstm_forward(lstm_in, p.at("lstm.fwd.w_ih"),
                                        p.at("lstm.fwd.w_hh"),
                                        p.at("lstm.fwd.bias"), cache.forward_dir);
    both.rightCols(units) = reverse_rows(
        lstm_forward(reverse_rows(lstm_in), p.at("lstm.bwd.w_ih"),
                     p.at("lstm.bwd.w_hh"), p.at("lstm.bwd.bias"),
                     cache.backward_dir));
    cache.dense_input =
        apply_dropout(both, cfg.dropout_rate, mode, rng, cache.middle_mask);
  }
  cache.scores = dense_forward(cache.dense_input, p.at("dense.weight"), p.at("dense.bias"));
}

}  // namespace

// ---------------------------------------------------------------------------
// Head
// ---------------------------------------------------------------------------

Head::Head(HeadConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  const Eigen::Index h = config_.input_size;
  const Eigen::Index u = config_.lstm_units;
  const Eigen::Index c = config_.class_count;
  if (config_.kind == HeadKind::CnnBiLstm) {
    const Eigen::Index fan_in = config_.conv_kernel * h;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    params_.add("conv.weight", uniform_matrix(h, fan_in, bound, rng));
    params_.add("conv.bias", uniform_matrix(1, h, bound, rng));
  }
  Eigen::Index dense_in = h;
  if (config_.kind != HeadKind::Linear) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(u));
    for (const char* dir : {"fwd", "bwd"}) {
      const std::string prefix = std::string("lstm.") + dir + ".";
      params_.add(prefix + "w_ih", uniform_matrix(4 * u, h, bound, rng));
      params_.add(prefix + "w_hh", uniform_matrix(4 * u, u, bound, rng));
      params_.add(prefix + "bias", uniform_matrix(1, 4 * u, bound, rng));
    }
    dense_in = 2 * u;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(dense_in));
  params_.add("dense.weight", uniform_matrix(c, dense_in, bound, rng));
  params_.add("dense.bias", uniform_matrix(1, c, bound, rng));
}

Head::Head(HeadConfig config, ParamSet params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const Head reference(config_, std::uint64_t{0});
  if (!reference.params_.same_layout(params_)) {
    throw ShapeError("weights do not match the " +
                     std::string(head_kind_name(config_.kind)) + " head layout");
  }
}

void Head::check_input(const Matrix& embeddings) const {
  if (embeddings.cols() != config_.input_size) {
    throw ShapeError("embedding width " + std::to_string(embeddings.cols()) +
                     " does not match head input_size " +
                     std::to_string(config_.input_size));
  }
}

Matrix Head::forward(const Matrix& embeddings) const {
  Rng unused(0);
  return forward(embeddings, Mode::Infer, unused);
}

Matrix Head::forward(const Matrix& embeddings, Mode mode, Rng& rng) const {
  check_input(embeddings);
  ForwardCache cache;
  forward_impl(config_, params_, embeddings, mode, rng, cache);
  return std::move(cache.scores);
}

double Head::accumulate_gradients(const Matrix& embeddings,
                                  std::span<const int> labels, Mode mode, Rng& rng,
                                  double loss_scale, ParamSet& grads,
                                  Matrix* input_grad) const {
  check_input(embeddings);
  if (!grads.same_layout(params_)) {
    throw ShapeError("gradient buffer does not match the head parameters");
  }
  ForwardCache cache;
  forward_impl(config_, params_, embeddings, mode, rng, cache);

  Matrix d_scores;
  const double loss = softmax_cross_entropy(cache.scores, labels, &d_scores);
  d_scores *= loss_scale;

  grads.at("dense.weight").noalias() += d_scores.transpose() * cache.dense_input;
  grads.at("dense.bias") += d_scores.colwise().sum();
  Matrix d = d_scores * params_.at("dense.weight");

  if (config_.kind != HeadKind::Linear) {
    d = dropout_backward(d, cache.middle_mask);
    const Eigen::Index units = config_.lstm_units;
    const Matrix d_fwd = d.leftCols(units);
    const Matrix d_bwd = reverse_rows(d.rightCols(units));
    Matrix d_lstm_in =
        lstm_backward(cache.forward_dir, d_fwd, params_.at("lstm.fwd.w_ih"),
                      params_.at("lstm.fwd.w_hh"), grads.at("lstm.fwd.w_ih"),
                      grads.at("lstm.fwd.w_hh"), grads.at("lstm.fwd.bias"));
    d_lstm_in += reverse_rows(
        lstm_backward(cache.backward_dir, d_bwd, params_.at("lstm.bwd.w_ih"),
                      params_.at("lstm.bwd.w_hh"), grads.at("lstm.bwd.w_ih"),
                      grads.at("lstm.bwd.w_hh"), grads.at("lstm.bwd.bias")));
    if (config_.kind == HeadKind::CnnBiLstm) {
      grads.at("conv.weight").noalias() += d_lstm_in.transpose() * cache.unfolded;
      grads.at("conv.bias") += d_lstm_in.colwise().sum();
      d = fold(d_lstm_in * params_.at("conv.weight"), config_.conv_kernel,
               config_.input_size);
    } else {
      d = std::move(d_lstm_in);
    }
  }
  if (input_grad != nullptr) *input_grad = dropout_backward(d, cache.input_mask);
  return loss;
}

// ---------------------------------------------------------------------------
// Scores
// ---------------------------------------------------------------------------

Matrix softmax_rows(const Matrix& scores) {
  Matrix out(scores.rows(), scores.cols());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const double m = scores.row(r).maxCoeff();
    out.row(r) = (scores.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()), 0);
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c) {
      if (scores(r, c) > scores(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

double softmax_cross_entropy(const Matrix& scores, std::span<const int> labels,
                             Matrix* grad) {
  if (static_cast<Eigen::Index>(labels.size()) != scores.rows()) {
    throw ShapeError("label count " + std::to_string(labels.size()) +
                     " does not match " + std::to_string(scores.rows()) + " score rows");
  }
  if (grad != nullptr) grad->resize(scores.rows(), scores.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const int label = labels[static_cast<std::size_t>(r)];
    if (label < 0 || label >= scores.cols()) {
      throw ValidationError("label " + std::to_string(label) + " outside [0, " +
                            std::to_string(scores.cols()) + ")");
    }
    const double m = scores.row(r).maxCoeff();
    const RowVector e = (scores.row(r).array() - m).exp();
    const double sum = e.sum();
    loss += m + std::log(sum) - scores(r, label);
    if (grad != nullptr) {
      grad->row(r) = e / sum;
      (*grad)(r, label) -= 1.0;
    }
  }
  return loss;
}

}  // namespace atesa
