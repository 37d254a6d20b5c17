#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cryptofc/dataset.hpp"

namespace cryptofc::lstm {

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// Weights of a single LSTM layer with a linear scalar head. Gate
/// pre-activations are row-vector products: x_t * W_x (D x H) plus
/// h_{t-1} * W_h (H x H) plus b (H). Gradients share this layout.
struct LstmParams {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;

  Matrix w_ix, w_fx, w_cx, w_ox;
  Matrix w_ih, w_fh, w_ch, w_oh;
  std::vector<double> b_i, b_f, b_c, b_o;
  std::vector<double> w_y;
  double b_y = 0.0;

  LstmParams() = default;
  /// Zero-initialized parameters for D inputs and H hidden units.
  LstmParams(std::size_t input_size, std::size_t hidden_size);

  std::size_t parameter_count() const noexcept;

  /// Visits every tensor as a flat span, in a fixed order (w_ix, w_fx, w_cx,
  /// w_ox, w_ih, w_fh, w_ch, w_oh, b_i, b_f, b_c, b_o, w_y, b_y).
  template <typename F>
  void for_each_tensor(F&& f) {
    for (Matrix* m : {&w_ix, &w_fx, &w_cx, &w_ox, &w_ih, &w_fh, &w_ch, &w_oh}) f(std::span<double>(m->data));
    for (auto* v : {&b_i, &b_f, &b_c, &b_o, &w_y}) f(std::span<double>(*v));
    f(std::span<double>(&b_y, 1));
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    for (const Matrix* m : {&w_ix, &w_fx, &w_cx, &w_ox, &w_ih, &w_fh, &w_ch, &w_oh}) {
      f(std::span<const double>(m->data));
    }
    for (const auto* v : {&b_i, &b_f, &b_c, &b_o, &w_y}) f(std::span<const double>(*v));
    f(std::span<const double>(&b_y, 1));
  }

  /// Copies all parameters, in for_each_tensor order, into one vector.
  std::vector<double> flatten() const;
  /// Inverse of flatten(). Throws ShapeMismatch on a size mismatch.
  void assign(std::span<const double> flat);

  bool same_shape(const LstmParams& other) const noexcept {
    return input_size == other.input_size && hidden_size == other.hidden_size;
  }
};

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;

  static LstmState zeros(std::size_t hidden_size) {
    return {std::vector<double>(hidden_size, 0.0), std::vector<double>(hidden_size, 0.0)};
  }
};

/// Activations of one cell step kept for the backward pass.
struct CellCache {
  std::vector<double> x;
  std::vector<double> h_prev;
  std::vector<double> c_prev;
  std::vector<double> input_gate;
  std::vector<double> forget_gate;
  std::vector<double> candidate;
  std::vector<double> output_gate;
  std::vector<double> cell;
  std::vector<double> tanh_cell;
};

struct CellOutput {
  LstmState state;
  CellCache cache;
};

/// One step: i, f, o = sigmoid(.), candidate = tanh(.),
/// C_t = f * C_{t-1} + i * candidate, h_t = o * tanh(C_t).
CellOutput cell_forward(std::span<const double> x, const LstmState& state, const LstmParams& p);

struct SequenceOutput {
  double prediction = 0.0;
  std::vector<CellCache> caches;
};

/// Unrolls the cell over a univariate window from a zero state and applies
/// the head to the final hidden state. Requires p.input_size == 1.
SequenceOutput sequence_forward(std::span<const double> window, const LstmParams& p);

/// Prediction only; skips cache storage.
double predict(std::span<const double> window, const LstmParams& p);

struct Gradients {
  LstmParams grad;
  double loss = 0.0;
  double prediction = 0.0;
};

/// Exact gradient of (prediction - target)^2 by backpropagation through time.
Gradients bptt_gradients(std::span<const double> window, double target, const LstmParams& p);

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  LstmParams m;
  LstmParams v;
  std::int64_t t = 0;
  AdamConfig config;

  AdamState() = default;
  AdamState(const LstmParams& shape_like, AdamConfig cfg);
};

/// One bias-corrected Adam update of `p` in place.
void adam_step(LstmParams& p, const LstmParams& g, AdamState& s);

struct TrainConfig {
  std::size_t hidden_size = 50;
  std::size_t batch_size = 32;
  AdamConfig adam;
  double forget_bias = 1.0;
};

struct TrainRecord {
  int epoch = 0;
  double train_mse = 0.0;
  double test_mse = 0.0;
};

struct TrainResult {
  LstmParams model;
  std::vector<TrainRecord> history;
};

/// Uniform(-1/sqrt(H), 1/sqrt(H)) weights from a seeded mt19937_64, forget
/// gate bias set to `forget_bias`.
LstmParams init_params(std::size_t input_size, std::size_t hidden_size, std::uint64_t seed,
                       double forget_bias = 1.0);

/// Mini-batch Adam over the samples in order. Deterministic in (data, test,
/// epochs, seed, cfg). An empty `test` leaves test_mse at 0.
TrainResult train(const dataset::WindowedDataset& data, const dataset::WindowedDataset& test, int epochs,
                  std::uint64_t seed, const TrainConfig& cfg);

/// Predictions for every sample of a windowed dataset.
std::vector<double> predict_all(const dataset::WindowedDataset& data, const LstmParams& p);

struct Checkpoint {
  LstmParams params;
  double scaler_min = 0.0;
  double scaler_max = 1.0;
  std::uint64_t seed = 0;
  int epochs = 0;
  std::string config_hash;  // empty when not produced by a pipeline run
};

/// Versioned text checkpoint; doubles are written as hexfloats so a
/// save/load round trip is bit-exact.
void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& in);

}  // namespace cryptofc::lstm
