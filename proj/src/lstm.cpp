#include "cryptofc/lstm.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "cryptofc/eval.hpp"

namespace cryptofc::lstm {
namespace {

constexpr std::string_view kCheckpointMagic = "cryptofc-lstm-checkpoint";
constexpr int kCheckpointVersion = 1;

double sigmoid(double z) {
  // Split by sign so exp never overflows.
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// out[j] = bias[j] + sum_d x[d] * wx(d, j) + sum_k h[k] * wh(k, j)
void gate_preactivation(std::span<const double> x, std::span<const double> h, const Matrix& wx,
                        const Matrix& wh, const std::vector<double>& bias, std::vector<double>& out) {
  out.assign(bias.begin(), bias.end());
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double xd = x[d];
    const double* row = &wx.data[d * wx.cols];
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += xd * row[j];
  }
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double hk = h[k];
    const double* row = &wh.data[k * wh.cols];
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += hk * row[j];
  }
}

// Accumulates d(pre-activation) into the gate's weights and into dh_prev.
void gate_backward(const CellCache& cache, std::span<const double> da, const Matrix& wh, Matrix& dwx,
                   Matrix& dwh, std::vector<double>& db, std::vector<double>& dh_prev) {
  const std::size_t hidden = da.size();
  for (std::size_t d = 0; d < cache.x.size(); ++d) {
    double* row = &dwx.data[d * hidden];
    for (std::size_t j = 0; j < hidden; ++j) row[j] += cache.x[d] * da[j];
  }
  for (std::size_t k = 0; k < hidden; ++k) {
    double* grow = &dwh.data[k * hidden];
    const double* wrow = &wh.data[k * hidden];
    double acc = 0.0;
    for (std::size_t j = 0; j < hidden; ++j) {
      grow[j] += cache.h_prev[k] * da[j];
      acc += wrow[j] * da[j];
    }
    dh_prev[k] += acc;
  }
  for (std::size_t j = 0; j < hidden; ++j) db[j] += da[j];
}

void check_window(std::span<const double> window, const LstmParams& p) {
  if (window.empty()) throw std::invalid_argument("lstm: empty window");
  if (p.input_size != 1) throw ShapeMismatch("lstm: univariate windows need input_size == 1");
}

double uniform01(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

std::string hexfloat(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  return std::string(buf, ptr);
}

double parse_hexfloat(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v, std::chars_format::hex);
  if (ec != std::errc() || ptr != end) throw std::runtime_error("checkpoint: bad number '" + s + "'");
  return v;
}

}  // namespace

LstmParams::LstmParams(std::size_t d, std::size_t h)
    : input_size(d),
      hidden_size(h),
      w_ix(d, h), w_fx(d, h), w_cx(d, h), w_ox(d, h),
      w_ih(h, h), w_fh(h, h), w_ch(h, h), w_oh(h, h),
      b_i(h, 0.0), b_f(h, 0.0), b_c(h, 0.0), b_o(h, 0.0),
      w_y(h, 0.0) {}

std::size_t LstmParams::parameter_count() const noexcept {
  return 4 * input_size * hidden_size + 4 * hidden_size * hidden_size + 5 * hidden_size + 1;
}

std::vector<double> LstmParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for_each_tensor([&](std::span<const double> t) { out.insert(out.end(), t.begin(), t.end()); });
  return out;
}

void LstmParams::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw ShapeMismatch("lstm: flat parameter size mismatch");
  std::size_t offset = 0;
  for_each_tensor([&](std::span<double> t) {
    std::copy_n(flat.begin() + static_cast<long>(offset), t.size(), t.begin());
    offset += t.size();
  });
}

CellOutput cell_forward(std::span<const double> x, const LstmState& state, const LstmParams& p) {
  const std::size_t hidden = p.hidden_size;
  if (x.size() != p.input_size || state.h.size() != hidden || state.c.size() != hidden) {
    throw ShapeMismatch("lstm: cell_forward input or state does not match parameters");
  }
  CellOutput out;
  auto& c = out.cache;
  c.x.assign(x.begin(), x.end());
  c.h_prev = state.h;
  c.c_prev = state.c;

  gate_preactivation(x, state.h, p.w_ix, p.w_ih, p.b_i, c.input_gate);
  gate_preactivation(x, state.h, p.w_fx, p.w_fh, p.b_f, c.forget_gate);
  gate_preactivation(x, state.h, p.w_cx, p.w_ch, p.b_c, c.candidate);
  gate_preactivation(x, state.h, p.w_ox, p.w_oh, p.b_o, c.output_gate);

  c.cell.resize(hidden);
  c.tanh_cell.resize(hidden);
  out.state.h.resize(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    c.input_gate[j] = sigmoid(c.input_gate[j]);
    c.forget_gate[j] = sigmoid(c.forget_gate[j]);
    c.candidate[j] = std::tanh(c.candidate[j]);
    c.output_gate[j] = sigmoid(c.output_gate[j]);
    c.cell[j] = c.forget_gate[j] * state.c[j] + c.input_gate[j] * c.candidate[j];
    c.tanh_cell[j] = std::tanh(c.cell[j]);
    out.state.h[j] = c.output_gate[j] * c.tanh_cell[j];
  }
  out.state.c = c.cell;
  return out;
}

SequenceOutput sequence_forward(std::span<const double> window, const LstmParams& p) {
  check_window(window, p);
  SequenceOutput out;
  out.caches.reserve(window.size());
  auto state = LstmState::zeros(p.hidden_size);
  for (const double& x : window) {
    auto step = cell_forward(std::span<const double>(&x, 1), state, p);
    state = std::move(step.state);
    out.caches.push_back(std::move(step.cache));
  }
  double y = p.b_y;
  for (std::size_t j = 0; j < p.hidden_size; ++j) y += state.h[j] * p.w_y[j];
  out.prediction = y;
  return out;
}

double predict(std::span<const double> window, const LstmParams& p) {
  check_window(window, p);
  auto state = LstmState::zeros(p.hidden_size);
  for (const double& x : window) state = cell_forward(std::span<const double>(&x, 1), state, p).state;
  double y = p.b_y;
  for (std::size_t j = 0; j < p.hidden_size; ++j) y += state.h[j] * p.w_y[j];
  return y;
}

Gradients bptt_gradients(std::span<const double> window, double target, const LstmParams& p) {
  const auto fwd = sequence_forward(window, p);
  const std::size_t hidden = p.hidden_size;

  Gradients out;
  out.grad = LstmParams(p.input_size, hidden);
  out.prediction = fwd.prediction;
  const double residual = fwd.prediction - target;
  out.loss = residual * residual;

  auto& g = out.grad;
  const double dy = 2.0 * residual;
  g.b_y = dy;
  const auto& h_last = fwd.caches.back();
  std::vector<double> dh(hidden), dc_next(hidden, 0.0);
  for (std::size_t j = 0; j < hidden; ++j) {
    g.w_y[j] = dy * h_last.output_gate[j] * h_last.tanh_cell[j];
    dh[j] = dy * p.w_y[j];
  }

  std::vector<double> da_i(hidden), da_f(hidden), da_c(hidden), da_o(hidden), dh_prev(hidden);
  for (auto it = fwd.caches.rbegin(); it != fwd.caches.rend(); ++it) {
    const auto& c = *it;
    for (std::size_t j = 0; j < hidden; ++j) {
      const double i = c.input_gate[j], f = c.forget_gate[j], cand = c.candidate[j], o = c.output_gate[j];
      const double tc = c.tanh_cell[j];
      const double d_o = dh[j] * tc;
      const double dcell = dc_next[j] + dh[j] * o * (1.0 - tc * tc);
      da_i[j] = dcell * cand * i * (1.0 - i);
      da_f[j] = dcell * c.c_prev[j] * f * (1.0 - f);
      da_c[j] = dcell * i * (1.0 - cand * cand);
      da_o[j] = d_o * o * (1.0 - o);
      dc_next[j] = dcell * f;
    }
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    gate_backward(c, da_i, p.w_ih, g.w_ix, g.w_ih, g.b_i, dh_prev);
    gate_backward(c, da_f, p.w_fh, g.w_fx, g.w_fh, g.b_f, dh_prev);
    gate_backward(c, da_c, p.w_ch, g.w_cx, g.w_ch, g.b_c, dh_prev);
    gate_backward(c, da_o, p.w_oh, g.w_ox, g.w_oh, g.b_o, dh_prev);
    dh.swap(dh_prev);
  }
  return out;
}

AdamState::AdamState(const LstmParams& shape_like, AdamConfig cfg)
    : m(shape_like.input_size, shape_like.hidden_size),
      v(shape_like.input_size, shape_like.hidden_size),
      config(cfg) {}

void adam_step(LstmParams& p, const LstmParams& g, AdamState& s) {
  if (!p.same_shape(g) || !p.same_shape(s.m) || !p.same_shape(s.v)) {
    throw ShapeMismatch("adam_step: parameter, gradient and moment shapes differ");
  }
  const auto& cfg = s.config;
  s.t += 1;
  const double t = static_cast<double>(s.t);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);

  std::vector<std::span<double>> params, moments1, moments2;
  std::vector<std::span<const double>> grads;
  p.for_each_tensor([&](std::span<double> x) { params.push_back(x); });
  s.m.for_each_tensor([&](std::span<double> x) { moments1.push_back(x); });
  s.v.for_each_tensor([&](std::span<double> x) { moments2.push_back(x); });
  g.for_each_tensor([&](std::span<const double> x) { grads.push_back(x); });

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto theta = params[k];
    auto m = moments1[k];
    auto v = moments2[k];
    auto grad = grads[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      theta[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

LstmParams init_params(std::size_t input_size, std::size_t hidden_size, std::uint64_t seed,
                       double forget_bias) {
  if (input_size == 0 || hidden_size == 0) throw ShapeMismatch("lstm: sizes must be positive");
  LstmParams p(input_size, hidden_size);
  std::mt19937_64 gen(seed);
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  p.for_each_tensor([&](std::span<double> t) {
    for (double& x : t) x = -k + 2.0 * k * uniform01(gen);
  });
  std::fill(p.b_f.begin(), p.b_f.end(), forget_bias);
  return p;
}

std::vector<double> predict_all(const dataset::WindowedDataset& data, const LstmParams& p) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& window : data.inputs) out.push_back(predict(window, p));
  return out;
}

TrainResult train(const dataset::WindowedDataset& data, const dataset::WindowedDataset& test, int epochs,
                  std::uint64_t seed, const TrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("lstm::train: empty dataset");
  if (epochs < 1) throw std::invalid_argument("lstm::train: epochs must be >= 1");
  if (cfg.batch_size == 0) throw std::invalid_argument("lstm::train: batch_size must be >= 1");

  TrainResult result;
  result.model = init_params(1, cfg.hidden_size, seed, cfg.forget_bias);
  auto& p = result.model;
  AdamState adam(p, cfg.adam);
  LstmParams batch_grad(1, cfg.hidden_size);
  std::vector<std::span<double>> acc;
  batch_grad.for_each_tensor([&](std::span<double> t) { acc.push_back(t); });

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    for (std::size_t start = 0; start < data.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, data.size());
      const double inv = 1.0 / static_cast<double>(stop - start);
      batch_grad.for_each_tensor([](std::span<double> t) { std::fill(t.begin(), t.end(), 0.0); });
      for (std::size_t k = start; k < stop; ++k) {
        const auto sample = bptt_gradients(data.inputs[k], data.targets[k], p);
        std::size_t idx = 0;
        sample.grad.for_each_tensor([&](std::span<const double> t) {
          auto dst = acc[idx++];
          for (std::size_t i = 0; i < t.size(); ++i) dst[i] += t[i] * inv;
        });
      }
      adam_step(p, batch_grad, adam);
    }
    TrainRecord rec;
    rec.epoch = epoch;
    rec.train_mse = eval::mse(data.targets, predict_all(data, p));
    if (!test.empty()) rec.test_mse = eval::mse(test.targets, predict_all(test, p));
    result.history.push_back(rec);
  }
  return result;
}

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const auto& p = ckpt.params;
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "input_size " << p.input_size << '\n';
  out << "hidden_size " << p.hidden_size << '\n';
  out << "seed " << ckpt.seed << '\n';
  out << "epochs " << ckpt.epochs << '\n';
  out << "config_hash " << (ckpt.config_hash.empty() ? "-" : ckpt.config_hash) << '\n';
  out << "scaler_min " << hexfloat(ckpt.scaler_min) << '\n';
  out << "scaler_max " << hexfloat(ckpt.scaler_max) << '\n';
  const auto flat = p.flatten();
  out << "params " << flat.size() << '\n';
  for (double v : flat) out << hexfloat(v) << '\n';
  out << "end\n";
}

Checkpoint load_checkpoint(std::istream& in) {
  auto expect = [&](std::string_view key) {
    std::string word;
    if (!(in >> word) || word != key) throw std::runtime_error("checkpoint: expected '" + std::string(key) + "'");
  };
  auto read_word = [&]() {
    std::string word;
    if (!(in >> word)) throw std::runtime_error("checkpoint: truncated");
    return word;
  };

  expect(kCheckpointMagic);
  int version = 0;
  if (!(in >> version) || version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version");
  }
  Checkpoint ckpt;
  std::size_t input_size = 0, hidden_size = 0, count = 0;
  expect("input_size");
  in >> input_size;
  expect("hidden_size");
  in >> hidden_size;
  expect("seed");
  in >> ckpt.seed;
  expect("epochs");
  in >> ckpt.epochs;
  expect("config_hash");
  ckpt.config_hash = read_word();
  if (ckpt.config_hash == "-") ckpt.config_hash.clear();
  expect("scaler_min");
  ckpt.scaler_min = parse_hexfloat(read_word());
  expect("scaler_max");
  ckpt.scaler_max = parse_hexfloat(read_word());
  expect("params");
  in >> count;
  if (!in) throw std::runtime_error("checkpoint: malformed header");

  ckpt.params = LstmParams(input_size, hidden_size);
  if (count != ckpt.params.parameter_count()) throw ShapeMismatch("checkpoint: parameter count mismatch");
  std::vector<double> flat(count);
  for (auto& v : flat) v = parse_hexfloat(read_word());
  expect("end");
  ckpt.params.assign(flat);
  return ckpt;
}

}  // namespace cryptofc::lstm
