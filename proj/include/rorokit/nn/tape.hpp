#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "rorokit/nn/parameters.hpp"

namespace rorokit::nn {

class Tape;

/// Handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Reverse-mode tape. Nodes are appended in evaluation order; backward()
/// walks them in reverse. Parameter leaves accumulate into the owning
/// ParameterStore's gradient buffers. A tape created with record = false
/// only evaluates values.
class Tape {
public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix value);
  Var param(Parameter& p);
  /// Rows of a parameter table; the backward pass scatters into the rows
  /// that were read and leaves the rest of the table's gradient untouched.
  Var gather_rows(Parameter& table, std::span<const Eigen::Index> rows);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and propagates.
  void backward(Var out);

  // Op plumbing.
  using Backward = std::function<void(Tape&, std::size_t self)>;
  Var push(Matrix value, std::vector<std::size_t> inputs, Backward back);
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  Matrix& grad_of(std::size_t id);
  const Matrix& value_of(std::size_t id) const { return nodes_[id].value; }

  std::size_t size() const { return nodes_.size(); }

private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward back;
    bool needs_grad = false;
  };
  bool record_;
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape->value(*this); }

// ---------------------------------------------------------------------------
// Differentiable ops. Shapes are checked; mismatches throw std::invalid_argument.

Var add(Var a, Var b);
Var sub(Var a, Var b);
/// a + row broadcast over every row; row is 1 x cols(a).
Var add_row(Var a, Var row);
Var scale(Var a, double factor);
Var matmul(Var a, Var b);
/// a * b^T
Var matmul_transposed(Var a, Var b);
Var relu(Var a);
Var softmax_rows(Var logits);
/// Row-wise layer normalization with learned gain and shift (both 1 x cols).
Var layer_norm(Var x, Var gain, Var shift, double eps = 1e-5);
/// a + lambda * bias where lambda is a 1x1 node and bias a constant matrix.
Var add_scaled_constant(Var a, Var lambda, const Matrix& bias);
Var columns(Var a, Eigen::Index start, Eigen::Index count);
Var concat_columns(std::span<const Var> parts);
/// Row i of the result is the mean of rows [spans[i].first, spans[i].second).
Var mean_rows(Var a, std::span<const std::pair<Eigen::Index, Eigen::Index>> spans);
/// Sum of all coefficients (1x1).
Var sum(Var a);
/// Sum of coefficientwise products with a constant weight matrix (1x1).
Var weighted_sum(Var a, const Matrix& weights);

}  // namespace rorokit::nn
