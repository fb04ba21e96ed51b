#include "rorokit/nn/tape.hpp"

#include <stdexcept>
#include <string>

namespace rorokit::nn {

namespace {

std::string shape_text(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void require(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_text(a) + " vs " + shape_text(b));
}

void same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::invalid_argument("operands live on different tapes");
}

}  // namespace

// ---------------------------------------------------------------------------
// ParameterStore

Parameter& ParameterStore::add(const std::string& name, Matrix init) {
  if (params_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  Parameter p;
  p.tensor.grad = Matrix::Zero(init.rows(), init.cols());
  p.adam_m = Matrix::Zero(init.rows(), init.cols());
  p.adam_v = Matrix::Zero(init.rows(), init.cols());
  p.tensor.values = std::move(init);
  return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw MissingParameter("parameter '" + name + "' is not initialized");
  return it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw MissingParameter("parameter '" + name + "' is not initialized");
  return it->second;
}

void ParameterStore::assign(const std::string& name, const Matrix& values) {
  auto& p = at(name);
  if (p.value().rows() != values.rows() || p.value().cols() != values.cols())
    throw std::invalid_argument("parameter '" + name + "': shape " + shape_text(p.value()) + " is immutable, got " +
                                shape_text(values));
  p.value() = values;
}

void ParameterStore::zero_grad() {
  for (auto& [name, p] : params_) p.grad().setZero();
  grads_ready_ = false;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += static_cast<std::size_t>(p.value().size());
  return n;
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::push(Matrix value, std::vector<std::size_t> inputs, Backward back) {
  Node node;
  node.value = std::move(value);
  if (record_) {
    for (auto id : inputs) node.needs_grad = node.needs_grad || nodes_[id].needs_grad;
    if (node.needs_grad) node.back = std::move(back);
  }
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Matrix& Tape::grad_of(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::constant(Matrix value) { return push(std::move(value), {}, nullptr); }

Var Tape::param(Parameter& p) {
  Node node;
  node.value = p.value();
  if (record_ && p.trainable) {
    node.needs_grad = true;
    node.back = [&p](Tape& t, std::size_t self) { p.grad() += t.nodes_[self].grad; };
  }
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Var Tape::gather_rows(Parameter& table, std::span<const Eigen::Index> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), table.value().cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= table.value().rows()) throw std::out_of_range("gather_rows: row index out of range");
    out.row(static_cast<Eigen::Index>(k)) = table.value().row(rows[k]);
  }
  Node node;
  node.value = std::move(out);
  if (record_ && table.trainable) {
    node.needs_grad = true;
    std::vector<Eigen::Index> idx(rows.begin(), rows.end());
    node.back = [&table, idx = std::move(idx)](Tape& t, std::size_t self) {
      const auto& g = t.nodes_[self].grad;
      for (std::size_t k = 0; k < idx.size(); ++k) table.grad().row(idx[k]) += g.row(static_cast<Eigen::Index>(k));
    };
  }
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

void Tape::backward(Var out) {
  if (!record_) throw std::logic_error("backward() on a tape created without recording");
  if (out.tape != this) throw std::invalid_argument("backward(): variable belongs to another tape");
  const auto& v = nodes_[out.id].value;
  if (v.rows() != 1 || v.cols() != 1) throw std::invalid_argument("backward() needs a scalar (1x1) output");
  grad_of(out.id)(0, 0) += 1.0;
  for (std::size_t i = out.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.back && n.grad.size() != 0) n.back(*this, i);
  }
}

// ---------------------------------------------------------------------------
// Ops

Var add(Var a, Var b) {
  same_tape(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add", a.value(), b.value());
  return a.tape->push(a.value() + b.value(), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, std::size_t self) {
    const Matrix g = t.grad_of(self);
    if (t.needs_grad(a)) t.grad_of(a) += g;
    if (t.needs_grad(b)) t.grad_of(b) += g;
  });
}

Var sub(Var a, Var b) {
  same_tape(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub", a.value(), b.value());
  return a.tape->push(a.value() - b.value(), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, std::size_t self) {
    const Matrix g = t.grad_of(self);
    if (t.needs_grad(a)) t.grad_of(a) += g;
    if (t.needs_grad(b)) t.grad_of(b) -= g;
  });
}

Var add_row(Var a, Var row) {
  same_tape(a, row);
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row", a.value(), row.value());
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return a.tape->push(std::move(out), {a.id, row.id}, [a = a.id, r = row.id](Tape& t, std::size_t self) {
    const Matrix g = t.grad_of(self);
    if (t.needs_grad(a)) t.grad_of(a) += g;
    if (t.needs_grad(r)) t.grad_of(r) += g.colwise().sum();
  });
}

Var scale(Var a, double factor) {
  return a.tape->push(a.value() * factor, {a.id}, [a = a.id, factor](Tape& t, std::size_t self) {
    if (t.needs_grad(a)) t.grad_of(a) += t.grad_of(self) * factor;
  });
}

Var matmul(Var a, Var b) {
  same_tape(a, b);
  require(a.cols() == b.rows(), "matmul", a.value(), b.value());
  return a.tape->push(a.value() * b.value(), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, std::size_t self) {
    const Matrix g = t.grad_of(self);
    if (t.needs_grad(a)) t.grad_of(a).noalias() += g * t.value_of(b).transpose();
    if (t.needs_grad(b)) t.grad_of(b).noalias() += t.value_of(a).transpose() * g;
  });
}

Var matmul_transposed(Var a, Var b) {
  same_tape(a, b);
  require(a.cols() == b.cols(), "matmul_transposed", a.value(), b.value());
  return a.tape->push(a.value() * b.value().transpose(), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, std::size_t self) {
    const Matrix g = t.grad_of(self);
    if (t.needs_grad(a)) t.grad_of(a).noalias() += g * t.value_of(b);
    if (t.needs_grad(b)) t.grad_of(b).noalias() += g.transpose() * t.value_of(a);
  });
}

Var relu(Var a) {
  return a.tape->push(a.value().cwiseMax(0.0), {a.id}, [a = a.id](Tape& t, std::size_t self) {
    if (!t.needs_grad(a)) return;
    const Matrix mask = (t.value_of(a).array() > 0.0).cast<double>().matrix();
    t.grad_of(a) += t.grad_of(self).cwiseProduct(mask);
  });
}

Var softmax_rows(Var logits) {
  return logits.tape->push(nn::softmax_rows(logits.value()), {logits.id}, [x = logits.id](Tape& t, std::size_t self) {
    if (!t.needs_grad(x)) return;
    const Matrix& y = t.value_of(self);
    const Matrix& g = t.grad_of(self);
    const Eigen::VectorXd dots = g.cwiseProduct(y).rowwise().sum();
    t.grad_of(x) += y.cwiseProduct(g - dots.replicate(1, g.cols()));
  });
}

Var layer_norm(Var x, Var gain, Var shift, double eps) {
  same_tape(x, gain);
  same_tape(x, shift);
  require(gain.rows() == 1 && gain.cols() == x.cols(), "layer_norm gain", x.value(), gain.value());
  require(shift.rows() == 1 && shift.cols() == x.cols(), "layer_norm shift", x.value(), shift.value());
  RowVector inv_std;
  Matrix xhat = normalize_rows(x.value(), eps, &inv_std);
  Matrix out = xhat * gain.value().row(0).asDiagonal();
  out.rowwise() += shift.value().row(0);
  return x.tape->push(std::move(out), {x.id, gain.id, shift.id},
                      [x = x.id, g = gain.id, b = shift.id, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                          Tape& t, std::size_t self) {
                        const Matrix dy = t.grad_of(self);
                        if (t.needs_grad(g)) t.grad_of(g) += dy.cwiseProduct(xhat).colwise().sum();
                        if (t.needs_grad(b)) t.grad_of(b) += dy.colwise().sum();
                        if (!t.needs_grad(x)) return;
                        const Matrix dxhat = dy * t.value_of(g).row(0).asDiagonal();
                        const double d = static_cast<double>(dxhat.cols());
                        auto& gx = t.grad_of(x);
                        for (Eigen::Index i = 0; i < dxhat.rows(); ++i) {
                          const double mean_g = dxhat.row(i).sum() / d;
                          const double mean_gx = dxhat.row(i).dot(xhat.row(i)) / d;
                          gx.row(i) += inv_std(i) * (dxhat.row(i).array() - mean_g - xhat.row(i).array() * mean_gx).matrix();
                        }
                      });
}

Var add_scaled_constant(Var a, Var lambda, const Matrix& bias) {
  same_tape(a, lambda);
  require(lambda.rows() == 1 && lambda.cols() == 1, "add_scaled_constant lambda", a.value(), lambda.value());
  require(bias.rows() == a.rows() && bias.cols() == a.cols(), "add_scaled_constant bias", a.value(), bias);
  Matrix out = a.value();
  out += lambda.value()(0, 0) * bias;
  return a.tape->push(std::move(out), {a.id, lambda.id}, [a = a.id, l = lambda.id, bias](Tape& t, std::size_t self) {
    const Matrix& g = t.grad_of(self);
    if (t.needs_grad(l)) t.grad_of(l)(0, 0) += g.cwiseProduct(bias).sum();
    if (t.needs_grad(a)) t.grad_of(a) += g;
  });
}

Var columns(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::invalid_argument("columns: range out of bounds");
  return a.tape->push(a.value().middleCols(start, count), {a.id}, [a = a.id, start, count](Tape& t, std::size_t self) {
    if (t.needs_grad(a)) t.grad_of(a).middleCols(start, count) += t.grad_of(self);
  });
}

Var concat_columns(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_columns: no inputs");
  Eigen::Index cols = 0;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    same_tape(parts[0], p);
    require(p.rows() == parts[0].rows(), "concat_columns", parts[0].value(), p.value());
    cols += p.cols();
    ids.push_back(p.id);
  }
  Matrix out(parts[0].rows(), cols);
  Eigen::Index at = 0;
  std::vector<Eigen::Index> widths;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
    widths.push_back(p.cols());
  }
  return parts[0].tape->push(std::move(out), ids, [ids, widths](Tape& t, std::size_t self) {
    Eigen::Index at = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.needs_grad(ids[k])) t.grad_of(ids[k]) += t.grad_of(self).middleCols(at, widths[k]);
      at += widths[k];
    }
  });
}

Var mean_rows(Var a, std::span<const std::pair<Eigen::Index, Eigen::Index>> spans) {
  Matrix out(static_cast<Eigen::Index>(spans.size()), a.cols());
  std::vector<std::pair<Eigen::Index, Eigen::Index>> owned(spans.begin(), spans.end());
  for (std::size_t i = 0; i < owned.size(); ++i) {
    const auto [first, last] = owned[i];
    if (first < 0 || last > a.rows() || first >= last) throw std::invalid_argument("mean_rows: empty or out-of-range span");
    out.row(static_cast<Eigen::Index>(i)) = a.value().middleRows(first, last - first).colwise().mean();
  }
  return a.tape->push(std::move(out), {a.id}, [a = a.id, owned = std::move(owned)](Tape& t, std::size_t self) {
    if (!t.needs_grad(a)) return;
    const Matrix& g = t.grad_of(self);
    auto& ga = t.grad_of(a);
    for (std::size_t i = 0; i < owned.size(); ++i) {
      const auto [first, last] = owned[i];
      const double w = 1.0 / static_cast<double>(last - first);
      for (Eigen::Index r = first; r < last; ++r) ga.row(r) += w * g.row(static_cast<Eigen::Index>(i));
    }
  });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape->push(std::move(out), {a.id}, [a = a.id](Tape& t, std::size_t self) {
    if (t.needs_grad(a)) t.grad_of(a).array() += t.grad_of(self)(0, 0);
  });
}

Var weighted_sum(Var a, const Matrix& weights) {
  require(weights.rows() == a.rows() && weights.cols() == a.cols(), "weighted_sum", a.value(), weights);
  Matrix out(1, 1);
  out(0, 0) = a.value().cwiseProduct(weights).sum();
  return a.tape->push(std::move(out), {a.id}, [a = a.id, weights](Tape& t, std::size_t self) {
    if (t.needs_grad(a)) t.grad_of(a) += t.grad_of(self)(0, 0) * weights;
  });
}

}  // namespace rorokit::nn
