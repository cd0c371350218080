#pragma once

// Small dense layers over row-major batches (one sample per row).

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "rrhtpp/checkpoint.hpp"
#include "rrhtpp/tensor.hpp"

namespace rrhtpp {

inline Tensor uniform_tensor(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

/// W1 tanh(W0 x), no biases.
struct InteractionMlp {
  ad::Var w0, w1;

  InteractionMlp() = default;
  InteractionMlp(ParameterStore& ps, const std::string& prefix, std::size_t in, std::size_t hidden, std::size_t out,
                 std::mt19937_64& rng)
      : w0(ps.add(prefix + ".w0", uniform_tensor(in, hidden, 1.0 / std::sqrt(double(in)), rng))),
        w1(ps.add(prefix + ".w1", uniform_tensor(hidden, out, 1.0 / std::sqrt(double(hidden)), rng))) {}

  ad::Var operator()(const ad::Var& x) const { return ad::matmul(ad::tanh(ad::matmul(x, w0)), w1); }
};

/// Gated recurrent cell: h' = (1 - z) * n + z * h.
struct GruCell {
  ad::Var w_x, w_h, b_x, b_h;  // gates packed as [reset | update | candidate]
  std::size_t hidden = 0;

  GruCell() = default;
  GruCell(ParameterStore& ps, const std::string& prefix, std::size_t input, std::size_t hidden_size,
          std::mt19937_64& rng)
      : hidden(hidden_size) {
    const double bound = 1.0 / std::sqrt(double(hidden_size));
    w_x = ps.add(prefix + ".w_x", uniform_tensor(input, 3 * hidden_size, bound, rng));
    w_h = ps.add(prefix + ".w_h", uniform_tensor(hidden_size, 3 * hidden_size, bound, rng));
    b_x = ps.add(prefix + ".b_x", uniform_tensor(1, 3 * hidden_size, bound, rng));
    b_h = ps.add(prefix + ".b_h", uniform_tensor(1, 3 * hidden_size, bound, rng));
  }

  ad::Var operator()(const ad::Var& h, const ad::Var& x) const {
    using namespace ad;
    const Var gx = add(matmul(x, w_x), b_x);
    const Var gh = add(matmul(h, w_h), b_h);
    const Var r = sigmoid(slice_cols(gx, 0, hidden) + slice_cols(gh, 0, hidden));
    const Var z = sigmoid(slice_cols(gx, hidden, hidden) + slice_cols(gh, hidden, hidden));
    const Var n = tanh(slice_cols(gx, 2 * hidden, hidden) + r * slice_cols(gh, 2 * hidden, hidden));
    return n + z * (h - n);
  }
};

/// Multi-head self-attention over a set of rows. Queries, keys and values
/// are full-width projections of the same input; heads split the width and
/// the concatenated head outputs are projected to `out` columns.
struct AttentionBlock {
  ad::Var w_q, w_k, w_v, b_q, b_k, b_v, w_o, b_o;
  std::size_t width = 0;
  std::size_t heads = 0;

  AttentionBlock() = default;
  AttentionBlock(ParameterStore& ps, const std::string& prefix, std::size_t width_, std::size_t heads_,
                 std::size_t out, std::mt19937_64& rng)
      : width(width_), heads(heads_) {
    if (heads == 0 || width % heads != 0)
      throw std::invalid_argument("attention: head count " + std::to_string(heads) + " does not divide width " +
                                  std::to_string(width));
    const double bound = 1.0 / std::sqrt(double(width));
    w_q = ps.add(prefix + ".w_q", uniform_tensor(width, width, bound, rng));
    w_k = ps.add(prefix + ".w_k", uniform_tensor(width, width, bound, rng));
    w_v = ps.add(prefix + ".w_v", uniform_tensor(width, width, bound, rng));
    b_q = ps.add(prefix + ".b_q", Tensor(1, width));
    b_k = ps.add(prefix + ".b_k", Tensor(1, width));
    b_v = ps.add(prefix + ".b_v", Tensor(1, width));
    w_o = ps.add(prefix + ".w_o", uniform_tensor(width, out, bound, rng));
    b_o = ps.add(prefix + ".b_o", Tensor(1, out));
  }

  /// x: k x width -> k x out; row i is the attended representation of input i.
  ad::Var operator()(const ad::Var& x) const {
    using namespace ad;
    if (x.rows() == 0) throw std::invalid_argument("attention over an empty set");
    if (x.cols() != width) throw std::invalid_argument("attention: input width mismatch");
    const Var q = add(matmul(x, w_q), b_q);
    const Var k = add(matmul(x, w_k), b_k);
    const Var v = add(matmul(x, w_v), b_v);
    const std::size_t dh = width / heads;
    const double inv_sqrt = 1.0 / std::sqrt(double(dh));
    std::vector<Var> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      const Var qh = slice_cols(q, h * dh, dh);
      const Var kh = slice_cols(k, h * dh, dh);
      const Var vh = slice_cols(v, h * dh, dh);
      const Var weights = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt));
      outs.push_back(matmul(weights, vh));
    }
    return add(matmul(heads == 1 ? outs.front() : concat_cols(outs), w_o), b_o);
  }
};

}  // namespace rrhtpp
