#pragma once

#include <string>
#include <vector>

#include "mmfusion/dense.hpp"
#include "mmfusion/loss.hpp"
#include "mmfusion/rng.hpp"

namespace mmfusion {

/// Class probabilities (C x N) and argmax labels, lowest index on ties.
struct Prediction {
  Matrix probs;
  std::vector<int> labels;
};

std::vector<int> argmax_columns(const Matrix& probs);

/// Utterances of one video in source order, as the columns of `features`.
struct VideoSequence {
  std::string video_id;
  Matrix features;  ///< D x n
  std::vector<int> labels;

  std::size_t length() const { return features.cols(); }
};

// ---------------------------------------------------------------------------
// Dropout

struct DropoutResult {
  Matrix output;
  /// 0 for dropped entries, 1/(1-rate) for kept ones; all ones in eval mode.
  Matrix mask;
};

/// Inverted dropout. Identity when !train_mode or rate == 0 (no rng draws).
DropoutResult dropout(const Matrix& x, double rate, bool train_mode, Rng& rng);

// ---------------------------------------------------------------------------
// Logistic regression head: P = softmax(W z + b)

class LrClassifier {
 public:
  LrClassifier() = default;
  LrClassifier(std::size_t input_dim, std::size_t classes);

  void init(Rng& rng);
  Prediction predict(const Matrix& z) const;
  /// Cross-entropy against targets plus backward; returns loss and dL/dz.
  LossAndGrad loss_and_backward(const Matrix& z, std::span<const int> targets,
                                double normalizer = 0.0);

  std::size_t input_dim() const { return head.in_dim(); }
  std::size_t classes() const { return head.out_dim(); }

  void collect(ParamStore& store);
  ParamStore params();

  DenseLayer head;
};

// ---------------------------------------------------------------------------
// LSTM

/// Activations of one cell step, kept for backpropagation through time.
struct LstmStep {
  std::vector<double> x, h_prev, c_prev;
  std::vector<double> i, f, o, g;
  std::vector<double> c, tanh_c, h;
};

struct LstmStepGrad {
  std::vector<double> dx, dh_prev, dc_prev;
};

/// Standard LSTM cell without peepholes. Gate rows are stacked in the
/// order input, forget, output, candidate:
///
///   [i f o] = sigmoid(Wx x + Wh h_prev + b),  g = tanh(...)
///   c = f (.) c_prev + i (.) g,  h = o (.) tanh(c)
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(const std::string& name, std::size_t input_dim, std::size_t hidden_dim);

  /// Glorot-uniform weights, forget-gate bias 1, other biases 0.
  void init(Rng& rng);

  LstmStep step(std::span<const double> x, std::span<const double> h_prev,
                std::span<const double> c_prev) const;
  /// dh and dc are the total gradients arriving at this step's h and c.
  LstmStepGrad backward(const LstmStep& s, std::span<const double> dh,
                        std::span<const double> dc);

  std::size_t input_dim() const { return wx.value.cols(); }
  std::size_t hidden_dim() const { return wh.value.cols(); }

  void collect(ParamStore& store);

  Param wx;  ///< 4H x D_in
  Param wh;  ///< 4H x H
  Param b;   ///< 4H x 1
};

/// Runs a cell over the columns of `inputs` from zero initial state, left
/// to right, or right to left when `reverse`. Steps are returned in
/// processing order.
std::vector<LstmStep> lstm_run(const LstmCell& cell, const Matrix& inputs, bool reverse);

/// Hidden states of a run laid out by original time index (H x n).
Matrix lstm_states(const std::vector<LstmStep>& steps, bool reverse);

// ---------------------------------------------------------------------------
// Context-dependent bidirectional LSTM classifier

/// h_j = [forward h_j ; backward h_j] in R^{2 D_l}, P_j = softmax(W h_j + b)
/// with the softmax head shared across time steps and directions.
class BiLstmClassifier {
 public:
  BiLstmClassifier() = default;
  BiLstmClassifier(std::size_t input_dim, std::size_t hidden_dim, std::size_t classes,
                   double input_dropout = 0.2, double output_dropout = 0.2);

  void init(Rng& rng);

  /// Caches everything for loss_and_backward(). rng is needed in train mode
  /// when a dropout rate is nonzero.
  Prediction forward(const Matrix& sequence, bool train_mode, Rng* rng = nullptr);
  /// Eval-mode forward that leaves the cache untouched.
  Prediction infer(const Matrix& sequence) const;

  /// Cross-entropy over the cached forward plus full BPTT through both
  /// directions and the shared head. Returns loss and dL/d(sequence).
  LossAndGrad loss_and_backward(std::span<const int> targets, double normalizer = 0.0);

  std::size_t input_dim() const { return forward_cell.input_dim(); }
  std::size_t hidden_dim() const { return forward_cell.hidden_dim(); }
  std::size_t classes() const { return head.out_dim(); }

  void collect(ParamStore& store);
  ParamStore params();

  LstmCell forward_cell;
  LstmCell backward_cell;
  DenseLayer head;
  double input_dropout = 0.2;
  double output_dropout = 0.2;

 private:
  struct Cache {
    Matrix input_mask;
    Matrix output_mask;
    std::vector<LstmStep> fwd;
    std::vector<LstmStep> bwd;
    Matrix head_input;
    Matrix probs;
    bool valid = false;
  };
  Prediction run(const Matrix& sequence, bool train_mode, Rng* rng, Cache* cache) const;
  Cache cache_;
};

}  // namespace mmfusion
