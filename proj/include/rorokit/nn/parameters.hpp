#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rorokit/nn/kernels.hpp"

namespace rorokit::nn {

/// A dense f64 array with an optional gradient of the same shape. All tensors
/// in this library are rank <= 2; vectors are stored as 1 x n.
struct Tensor {
  Matrix values;
  Matrix grad;

  Tensor() = default;
  explicit Tensor(Matrix v) : values(std::move(v)) {}

  std::vector<Eigen::Index> shape() const { return {values.rows(), values.cols()}; }
  bool has_grad() const { return grad.rows() == values.rows() && grad.cols() == values.cols(); }
};

struct Parameter {
  Tensor tensor;
  Matrix adam_m;
  Matrix adam_v;
  double lr_scale = 1.0;
  bool trainable = true;

  Matrix& value() { return tensor.values; }
  const Matrix& value() const { return tensor.values; }
  Matrix& grad() { return tensor.grad; }
  const Matrix& grad() const { return tensor.grad; }
};

class MissingParameter : public std::out_of_range {
public:
  using std::out_of_range::out_of_range;
};

/// Named parameters in lexicographic name order. Shapes are fixed at
/// creation; every parameter carries a zero-initialized gradient buffer.
class ParameterStore {
public:
  Parameter& add(const std::string& name, Matrix init);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  /// Replaces the values of an existing parameter; the shape must match.
  void assign(const std::string& name, const Matrix& values);

  void zero_grad();
  void mark_grads_ready() { grads_ready_ = true; }
  bool grads_ready() const { return grads_ready_; }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::int64_t adam_step = 0;

private:
  std::map<std::string, Parameter> params_;
  bool grads_ready_ = false;
};

}  // namespace rorokit::nn
