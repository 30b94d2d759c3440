#pragma once

// Dense kernels for the pointer-generator engine.
//
// Everything here is double precision. Matrices are row-major; a weight
// matrix that maps an input of size `cols` to an output of size `rows`
// is applied as y = W x. All functions are pure and thread-safe.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tailorsum {

using Vec = std::vector<double>;

struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

  bool operator==(const Tensor2&) const = default;
};

// y += W x
void matvec_add(const Tensor2& w, std::span<const double> x, std::span<double> y);
// dx += W^T dy
void matvec_transposed_add(const Tensor2& w, std::span<const double> dy, std::span<double> dx);
// G += dy x^T
void add_outer(Tensor2& g, std::span<const double> dy, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);

double sigmoid(double x);

// Numerically stable softmax (max-subtracted). Throws std::invalid_argument
// on empty input or non-finite scores.
Vec softmax(std::span<const double> scores);

// Given p = softmax(s) and dL/dp, accumulates dL/ds = p * (dp - <p, dp>).
void softmax_backward(std::span<const double> probs, std::span<const double> d_probs,
                      std::span<double> d_scores);

// Four-gate LSTM cell. Gate rows are stacked as [input, forget, candidate, output],
// each block `hidden` rows tall.
struct LstmParams {
  Tensor2 w_input;   // 4H x I
  Tensor2 w_hidden;  // 4H x H
  Vec bias;          // 4H

  static LstmParams zeros(std::size_t input_size, std::size_t hidden_size);
  std::size_t input_size() const { return w_input.cols; }
  std::size_t hidden_size() const { return w_hidden.cols; }

  bool operator==(const LstmParams&) const = default;
};

struct LstmState {
  Vec hidden;
  Vec cell;

  static LstmState zeros(std::size_t hidden_size) {
    return {Vec(hidden_size, 0.0), Vec(hidden_size, 0.0)};
  }
  bool operator==(const LstmState&) const = default;
};

// Everything the backward pass needs from one forward step.
struct LstmCache {
  Vec input;
  Vec prev_hidden;
  Vec prev_cell;
  Vec gates;  // activated gates, 4H, same layout as the weight rows
  Vec cell;
  Vec tanh_cell;
};

// Throws std::invalid_argument naming the operand whose size disagrees with
// `params`.
LstmState recurrent_step(const LstmParams& params, std::span<const double> input,
                         std::span<const double> prev_hidden, std::span<const double> prev_cell,
                         LstmCache* cache = nullptr);

// Backpropagates dL/dh and dL/dc of one step. Parameter gradients are
// accumulated into `grads`; input and previous-state gradients are
// accumulated into the given spans.
void recurrent_step_backward(const LstmParams& params, const LstmCache& cache,
                             std::span<const double> d_hidden, std::span<const double> d_cell,
                             LstmParams& grads, std::span<double> d_input,
                             std::span<double> d_prev_hidden, std::span<double> d_prev_cell);

using ScalarFn = std::function<double(std::span<const double>)>;

// Central differences (f(x + eps e_i) - f(x - eps e_i)) / 2eps per coordinate.
// Throws std::domain_error naming the coordinate when a probe is non-finite.
Vec finite_diff_gradient(const ScalarFn& loss, Vec params, double epsilon);

struct GradCheckReport {
  bool pass = true;
  double max_error = 0.0;
  // (index, relative error), worst first.
  std::vector<std::pair<std::size_t, double>> worst;
};

// Relative error per coordinate is |a - n| / max(1e-8, |a| + |n|).
GradCheckReport check_gradients(std::span<const double> analytic, std::span<const double> numeric,
                                double tolerance, std::size_t worst_count = 5);

std::string describe(const GradCheckReport& report);

}  // namespace tailorsum
