#include "tailorsum/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tailorsum {

void matvec_add(const Tensor2& w, std::span<const double> x, std::span<double> y) {
  if (x.size() != w.cols || y.size() != w.rows) {
    throw std::invalid_argument("matvec: shape mismatch");
  }
  const double* row = w.values.data();
  for (std::size_t r = 0; r < w.rows; ++r, row += w.cols) {
    double acc = 0.0;
    for (std::size_t c = 0; c < w.cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

void matvec_transposed_add(const Tensor2& w, std::span<const double> dy, std::span<double> dx) {
  if (dy.size() != w.rows || dx.size() != w.cols) {
    throw std::invalid_argument("matvec_transposed: shape mismatch");
  }
  const double* row = w.values.data();
  for (std::size_t r = 0; r < w.rows; ++r, row += w.cols) {
    const double g = dy[r];
    if (g == 0.0) continue;
    for (std::size_t c = 0; c < w.cols; ++c) dx[c] += row[c] * g;
  }
}

void add_outer(Tensor2& g, std::span<const double> dy, std::span<const double> x) {
  if (dy.size() != g.rows || x.size() != g.cols) {
    throw std::invalid_argument("add_outer: shape mismatch");
  }
  double* row = g.values.data();
  for (std::size_t r = 0; r < g.rows; ++r, row += g.cols) {
    const double d = dy[r];
    if (d == 0.0) continue;
    for (std::size_t c = 0; c < g.cols; ++c) row[c] += d * x[c];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec softmax(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("empty score vector");
  double top = scores[0];
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("non-finite score");
    top = std::max(top, s);
  }
  Vec out(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - top);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

void softmax_backward(std::span<const double> probs, std::span<const double> d_probs,
                      std::span<double> d_scores) {
  const double inner = dot(probs, d_probs);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    d_scores[i] += probs[i] * (d_probs[i] - inner);
  }
}

LstmParams LstmParams::zeros(std::size_t input_size, std::size_t hidden_size) {
  LstmParams p;
  p.w_input = Tensor2(4 * hidden_size, input_size);
  p.w_hidden = Tensor2(4 * hidden_size, hidden_size);
  p.bias.assign(4 * hidden_size, 0.0);
  return p;
}

LstmState recurrent_step(const LstmParams& params, std::span<const double> input,
                         std::span<const double> prev_hidden, std::span<const double> prev_cell,
                         LstmCache* cache) {
  const std::size_t h = params.hidden_size();
  if (params.w_input.rows != 4 * h || params.w_hidden.rows != 4 * h || params.bias.size() != 4 * h) {
    throw std::invalid_argument("recurrent_step: cell_params are inconsistent");
  }
  if (input.size() != params.input_size()) {
    throw std::invalid_argument("recurrent_step: input has size " + std::to_string(input.size()) +
                                ", expected " + std::to_string(params.input_size()));
  }
  if (prev_hidden.size() != h) {
    throw std::invalid_argument("recurrent_step: prev_hidden has size " +
                                std::to_string(prev_hidden.size()) + ", expected " +
                                std::to_string(h));
  }
  if (prev_cell.size() != h) {
    throw std::invalid_argument("recurrent_step: prev_cell has size " +
                                std::to_string(prev_cell.size()) + ", expected " +
                                std::to_string(h));
  }

  Vec gates = params.bias;
  matvec_add(params.w_input, input, gates);
  matvec_add(params.w_hidden, prev_hidden, gates);
  for (std::size_t k = 0; k < h; ++k) {
    gates[k] = sigmoid(gates[k]);
    gates[h + k] = sigmoid(gates[h + k]);
    gates[2 * h + k] = std::tanh(gates[2 * h + k]);
    gates[3 * h + k] = sigmoid(gates[3 * h + k]);
  }

  LstmState next{Vec(h), Vec(h)};
  Vec tanh_cell(h);
  for (std::size_t k = 0; k < h; ++k) {
    next.cell[k] = gates[h + k] * prev_cell[k] + gates[k] * gates[2 * h + k];
    tanh_cell[k] = std::tanh(next.cell[k]);
    next.hidden[k] = gates[3 * h + k] * tanh_cell[k];
  }

  if (cache != nullptr) {
    cache->input.assign(input.begin(), input.end());
    cache->prev_hidden.assign(prev_hidden.begin(), prev_hidden.end());
    cache->prev_cell.assign(prev_cell.begin(), prev_cell.end());
    cache->gates = std::move(gates);
    cache->cell = next.cell;
    cache->tanh_cell = std::move(tanh_cell);
  }
  return next;
}

void recurrent_step_backward(const LstmParams& params, const LstmCache& cache,
                             std::span<const double> d_hidden, std::span<const double> d_cell,
                             LstmParams& grads, std::span<double> d_input,
                             std::span<double> d_prev_hidden, std::span<double> d_prev_cell) {
  const std::size_t h = params.hidden_size();
  const Vec& g = cache.gates;
  Vec d_pre(4 * h);
  for (std::size_t k = 0; k < h; ++k) {
    const double i_g = g[k];
    const double f_g = g[h + k];
    const double c_g = g[2 * h + k];
    const double o_g = g[3 * h + k];
    const double tc = cache.tanh_cell[k];
    const double dc = d_cell[k] + d_hidden[k] * o_g * (1.0 - tc * tc);
    d_pre[k] = dc * c_g * i_g * (1.0 - i_g);
    d_pre[h + k] = dc * cache.prev_cell[k] * f_g * (1.0 - f_g);
    d_pre[2 * h + k] = dc * i_g * (1.0 - c_g * c_g);
    d_pre[3 * h + k] = d_hidden[k] * tc * o_g * (1.0 - o_g);
    d_prev_cell[k] += dc * f_g;
  }
  add_outer(grads.w_input, d_pre, cache.input);
  add_outer(grads.w_hidden, d_pre, cache.prev_hidden);
  axpy(1.0, d_pre, grads.bias);
  matvec_transposed_add(params.w_input, d_pre, d_input);
  matvec_transposed_add(params.w_hidden, d_pre, d_prev_hidden);
}

Vec finite_diff_gradient(const ScalarFn& loss, Vec params, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("finite_diff_gradient: epsilon must be > 0");
  Vec grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + epsilon;
    const double up = loss(params);
    params[i] = saved - epsilon;
    const double down = loss(params);
    params[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::domain_error("finite_diff_gradient: non-finite loss at coordinate " +
                              std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * epsilon);
  }
  return grad;
}

GradCheckReport check_gradients(std::span<const double> analytic, std::span<const double> numeric,
                                double tolerance, std::size_t worst_count) {
  if (analytic.size() != numeric.size()) {
    throw std::invalid_argument("check_gradients: length mismatch (" +
                                std::to_string(analytic.size()) + " vs " +
                                std::to_string(numeric.size()) + ")");
  }
  GradCheckReport report;
  std::vector<std::pair<std::size_t, double>> errors;
  errors.reserve(analytic.size());
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i];
    const double n = numeric[i];
    const double err = std::abs(a - n) / std::max(1e-8, std::abs(a) + std::abs(n));
    errors.emplace_back(i, err);
    report.max_error = std::max(report.max_error, err);
    if (!(err <= tolerance)) report.pass = false;
  }
  const std::size_t keep = std::min(worst_count, errors.size());
  std::partial_sort(errors.begin(), errors.begin() + static_cast<std::ptrdiff_t>(keep), errors.end(),
                    [](const auto& x, const auto& y) {
                      return x.second > y.second || (x.second == y.second && x.first < y.first);
                    });
  errors.resize(keep);
  report.worst = std::move(errors);
  return report;
}

std::string describe(const GradCheckReport& report) {
  std::ostringstream out;
  out << (report.pass ? "PASS" : "FAIL") << " max_rel_error=" << report.max_error;
  for (const auto& [index, err] : report.worst) out << " [" << index << "]=" << err;
  return out.str();
}

}  // namespace tailorsum
