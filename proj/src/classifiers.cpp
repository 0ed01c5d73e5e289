#include "mmfusion/classifiers.hpp"

#include <algorithm>
#include <cmath>

#include "mmfusion/activation.hpp"
#include "mmfusion/kernels.hpp"

namespace mmfusion {

std::vector<int> argmax_columns(const Matrix& probs) {
  std::vector<int> out(probs.cols(), 0);
  for (std::size_t j = 0; j < probs.cols(); ++j) {
    int best = 0;
    for (std::size_t c = 1; c < probs.rows(); ++c) {
      if (probs(c, j) > probs(static_cast<std::size_t>(best), j)) best = static_cast<int>(c);
    }
    out[j] = best;
  }
  return out;
}

DropoutResult dropout(const Matrix& x, double rate, bool train_mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw DomainError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  DropoutResult r{x, Matrix(x.rows(), x.cols(), 1.0)};
  if (!train_mode || rate == 0.0) return r;
  const double keep_scale = 1.0 / (1.0 - rate);
  auto out = r.output.data();
  auto mask = r.mask.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    out[i] *= mask[i];
  }
  return r;
}

// ---------------------------------------------------------------------------

LrClassifier::LrClassifier(std::size_t input_dim, std::size_t classes)
    : head("clf.lr", input_dim, classes, Activation::kIdentity) {
  if (classes < 2) throw std::invalid_argument("classifier needs at least 2 classes");
}

void LrClassifier::init(Rng& rng) { head.init(rng); }

Prediction LrClassifier::predict(const Matrix& z) const {
  Prediction p;
  p.probs = softmax_columns(head.infer(z));
  p.labels = argmax_columns(p.probs);
  return p;
}

LossAndGrad LrClassifier::loss_and_backward(const Matrix& z, std::span<const int> targets,
                                            double normalizer) {
  const Matrix probs = softmax_columns(head.forward(z));
  LossAndGrad ce = cross_entropy(probs, targets, normalizer);
  return {ce.loss, head.backward(ce.grad)};
}

void LrClassifier::collect(ParamStore& store) { head.collect(store); }

ParamStore LrClassifier::params() {
  ParamStore s;
  collect(s);
  return s;
}

// ---------------------------------------------------------------------------

LstmCell::LstmCell(const std::string& name, std::size_t input_dim, std::size_t hidden_dim)
    : wx(name + ".Wx", 4 * hidden_dim, input_dim),
      wh(name + ".Wh", 4 * hidden_dim, hidden_dim),
      b(name + ".b", 4 * hidden_dim, 1) {
  if (input_dim == 0 || hidden_dim == 0) throw ShapeError("LSTM dimensions must be positive");
}

void LstmCell::init(Rng& rng) {
  const std::size_t h = hidden_dim();
  // Each gate block is its own (H x D) map for the fan computation.
  const double lx = std::sqrt(6.0 / static_cast<double>(input_dim() + h));
  const double lh = std::sqrt(6.0 / static_cast<double>(2 * h));
  for (double& w : wx.value.data()) w = (2.0 * rng.uniform() - 1.0) * lx;
  for (double& w : wh.value.data()) w = (2.0 * rng.uniform() - 1.0) * lh;
  b.value.fill(0.0);
  for (std::size_t k = 0; k < h; ++k) b.value(h + k, 0) = 1.0;
}

LstmStep LstmCell::step(std::span<const double> x, std::span<const double> h_prev,
                        std::span<const double> c_prev) const {
  const std::size_t h = hidden_dim();
  const std::size_t d = input_dim();
  if (x.size() != d || h_prev.size() != h || c_prev.size() != h) {
    throw ShapeError("lstm_cell '" + wx.name + "': got x/h/c of length " +
                     std::to_string(x.size()) + "/" + std::to_string(h_prev.size()) + "/" +
                     std::to_string(c_prev.size()) + ", expected " + std::to_string(d) + "/" +
                     std::to_string(h) + "/" + std::to_string(h));
  }
  std::vector<double> a(4 * h);
  for (std::size_t r = 0; r < 4 * h; ++r) {
    double s = b.value(r, 0);
    const auto wxr = wx.value.row(r);
    for (std::size_t k = 0; k < d; ++k) s += wxr[k] * x[k];
    const auto whr = wh.value.row(r);
    for (std::size_t k = 0; k < h; ++k) s += whr[k] * h_prev[k];
    a[r] = s;
  }
  LstmStep st;
  st.x.assign(x.begin(), x.end());
  st.h_prev.assign(h_prev.begin(), h_prev.end());
  st.c_prev.assign(c_prev.begin(), c_prev.end());
  st.i.resize(h);
  st.f.resize(h);
  st.o.resize(h);
  st.g.resize(h);
  st.c.resize(h);
  st.tanh_c.resize(h);
  st.h.resize(h);
  for (std::size_t k = 0; k < h; ++k) {
    st.i[k] = sigmoid(a[k]);
    st.f[k] = sigmoid(a[h + k]);
    st.o[k] = sigmoid(a[2 * h + k]);
    st.g[k] = std::tanh(a[3 * h + k]);
    st.c[k] = st.f[k] * c_prev[k] + st.i[k] * st.g[k];
    st.tanh_c[k] = std::tanh(st.c[k]);
    st.h[k] = st.o[k] * st.tanh_c[k];
  }
  return st;
}

LstmStepGrad LstmCell::backward(const LstmStep& s, std::span<const double> dh,
                                std::span<const double> dc) {
  const std::size_t h = hidden_dim();
  const std::size_t d = input_dim();
  std::vector<double> da(4 * h);
  LstmStepGrad g;
  g.dc_prev.resize(h);
  for (std::size_t k = 0; k < h; ++k) {
    const double dct = dc[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
    const double d_o = dh[k] * s.tanh_c[k];
    const double d_i = dct * s.g[k];
    const double d_g = dct * s.i[k];
    const double d_f = dct * s.c_prev[k];
    g.dc_prev[k] = dct * s.f[k];
    da[k] = d_i * s.i[k] * (1.0 - s.i[k]);
    da[h + k] = d_f * s.f[k] * (1.0 - s.f[k]);
    da[2 * h + k] = d_o * s.o[k] * (1.0 - s.o[k]);
    da[3 * h + k] = d_g * (1.0 - s.g[k] * s.g[k]);
  }
  g.dx.assign(d, 0.0);
  g.dh_prev.assign(h, 0.0);
  for (std::size_t r = 0; r < 4 * h; ++r) {
    const double a = da[r];
    b.grad(r, 0) += a;
    auto gx = wx.grad.row(r);
    const auto vx = wx.value.row(r);
    for (std::size_t k = 0; k < d; ++k) {
      gx[k] += a * s.x[k];
      g.dx[k] += vx[k] * a;
    }
    auto gh = wh.grad.row(r);
    const auto vh = wh.value.row(r);
    for (std::size_t k = 0; k < h; ++k) {
      gh[k] += a * s.h_prev[k];
      g.dh_prev[k] += vh[k] * a;
    }
  }
  return g;
}

void LstmCell::collect(ParamStore& store) {
  store.add(wx);
  store.add(wh);
  store.add(b);
}

std::vector<LstmStep> lstm_run(const LstmCell& cell, const Matrix& inputs, bool reverse) {
  const std::size_t n = inputs.cols();
  std::vector<LstmStep> steps;
  steps.reserve(n);
  std::vector<double> h(cell.hidden_dim(), 0.0);
  std::vector<double> c(cell.hidden_dim(), 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = reverse ? n - 1 - k : k;
    const std::vector<double> x = inputs.col(t);
    steps.push_back(cell.step(x, h, c));
    h = steps.back().h;
    c = steps.back().c;
  }
  return steps;
}

Matrix lstm_states(const std::vector<LstmStep>& steps, bool reverse) {
  const std::size_t n = steps.size();
  Matrix out(n ? steps.front().h.size() : 0, n);
  for (std::size_t k = 0; k < n; ++k) out.set_col(reverse ? n - 1 - k : k, steps[k].h);
  return out;
}

// ---------------------------------------------------------------------------

BiLstmClassifier::BiLstmClassifier(std::size_t input_dim, std::size_t hidden_dim,
                                   std::size_t classes, double in_drop, double out_drop)
    : forward_cell("lstm.fwd", input_dim, hidden_dim),
      backward_cell("lstm.bwd", input_dim, hidden_dim),
      head("clf.head", 2 * hidden_dim, classes, Activation::kIdentity),
      input_dropout(in_drop),
      output_dropout(out_drop) {
  if (classes < 2) throw std::invalid_argument("classifier needs at least 2 classes");
}

void BiLstmClassifier::init(Rng& rng) {
  forward_cell.init(rng);
  backward_cell.init(rng);
  head.init(rng);
}

Prediction BiLstmClassifier::run(const Matrix& sequence, bool train_mode, Rng* rng,
                                 Cache* cache) const {
  if (sequence.cols() == 0) throw std::invalid_argument("bilstm_forward: empty sequence");
  if (sequence.rows() != input_dim()) {
    throw ShapeError("bilstm_forward: sequence has " + std::to_string(sequence.rows()) +
                     " features per step, expected " + std::to_string(input_dim()));
  }
  const bool needs_rng = train_mode && (input_dropout > 0.0 || output_dropout > 0.0);
  if (needs_rng && rng == nullptr) {
    throw std::invalid_argument("bilstm_forward: train mode with dropout requires an rng");
  }
  Rng unused(0);
  Rng& r = rng != nullptr ? *rng : unused;

  DropoutResult in = dropout(sequence, input_dropout, train_mode, r);
  std::vector<LstmStep> fwd = lstm_run(forward_cell, in.output, false);
  std::vector<LstmStep> bwd = lstm_run(backward_cell, in.output, true);

  const std::size_t n = sequence.cols();
  const std::size_t h = hidden_dim();
  Matrix states(2 * h, n);
  for (std::size_t t = 0; t < n; ++t) {
    const LstmStep& sf = fwd[t];
    const LstmStep& sb = bwd[n - 1 - t];
    for (std::size_t k = 0; k < h; ++k) {
      states(k, t) = sf.h[k];
      states(h + k, t) = sb.h[k];
    }
  }
  DropoutResult out = dropout(states, output_dropout, train_mode, r);

  Prediction p;
  p.probs = softmax_columns(head.infer(out.output));
  p.labels = argmax_columns(p.probs);

  if (cache != nullptr) {
    cache->input_mask = std::move(in.mask);
    cache->output_mask = std::move(out.mask);
    cache->fwd = std::move(fwd);
    cache->bwd = std::move(bwd);
    cache->head_input = std::move(out.output);
    cache->probs = p.probs;
    cache->valid = true;
  }
  return p;
}

Prediction BiLstmClassifier::forward(const Matrix& sequence, bool train_mode, Rng* rng) {
  return run(sequence, train_mode, rng, &cache_);
}

Prediction BiLstmClassifier::infer(const Matrix& sequence) const {
  return run(sequence, false, nullptr, nullptr);
}

LossAndGrad BiLstmClassifier::loss_and_backward(std::span<const int> targets,
                                                double normalizer) {
  if (!cache_.valid) throw StateError("bilstm_backward called before forward");
  const LossAndGrad ce = cross_entropy(cache_.probs, targets, normalizer);

  head.weight.grad += matmul_nt(ce.grad, cache_.head_input);
  head.bias.grad += row_sums(ce.grad);
  const Matrix d_states = hadamard(matmul_tn(head.weight.value, ce.grad), cache_.output_mask);

  const std::size_t n = cache_.fwd.size();
  const std::size_t h = hidden_dim();
  Matrix d_input(input_dim(), n);

  auto run_direction = [&](LstmCell& cell, const std::vector<LstmStep>& steps, bool reverse,
                           std::size_t row_offset) {
    std::vector<double> dh_next(h, 0.0);
    std::vector<double> dc_next(h, 0.0);
    std::vector<double> dh(h);
    for (std::size_t k = n; k-- > 0;) {
      const std::size_t t = reverse ? n - 1 - k : k;
      for (std::size_t j = 0; j < h; ++j) dh[j] = d_states(row_offset + j, t) + dh_next[j];
      LstmStepGrad g = cell.backward(steps[k], dh, dc_next);
      for (std::size_t j = 0; j < g.dx.size(); ++j) d_input(j, t) += g.dx[j];
      dh_next = std::move(g.dh_prev);
      dc_next = std::move(g.dc_prev);
    }
  };
  run_direction(forward_cell, cache_.fwd, false, 0);
  run_direction(backward_cell, cache_.bwd, true, h);

  return {ce.loss, hadamard(d_input, cache_.input_mask)};
}

void BiLstmClassifier::collect(ParamStore& store) {
  forward_cell.collect(store);
  backward_cell.collect(store);
  head.collect(store);
}

ParamStore BiLstmClassifier::params() {
  ParamStore s;
  collect(s);
  return s;
}

}  // namespace mmfusion
