#include "rorokit/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace rorokit::nn {

void adamw_step(ParameterStore& store, double learning_rate, const AdamWConfig& config) {
  if (!store.grads_ready()) throw MissingGradients("optimizer step without a preceding backward pass");
  ++store.adam_step;
  const double t = static_cast<double>(store.adam_step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (auto& [name, p] : store) {
    if (!p.trainable) continue;
    if (!p.tensor.has_grad()) throw MissingGradients("parameter '" + name + "' has no gradient buffer");
    const double lr = learning_rate * p.lr_scale;
    const auto& g = p.grad().array();
    p.adam_m.array() = config.beta1 * p.adam_m.array() + (1.0 - config.beta1) * g;
    p.adam_v.array() = config.beta2 * p.adam_v.array() + (1.0 - config.beta2) * g.square();
    p.value() *= 1.0 - lr * config.weight_decay;
    p.value().array() -= lr * (p.adam_m.array() / c1) / ((p.adam_v.array() / c2).sqrt() + config.eps);
  }
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const LossFn& loss, ParameterStore& store, const GradCheckOptions& options) {
  store.zero_grad();
  const double base = loss(store, true);
  if (!std::isfinite(base)) throw NonFiniteLoss("grad_check: loss is not finite");

  std::mt19937_64 rng(options.seed);
  GradCheckResult result;
  for (auto& [name, p] : store) {
    if (!p.trainable) continue;
    if (!options.only.empty() && std::find(options.only.begin(), options.only.end(), name) == options.only.end()) continue;

    const Matrix analytic = p.grad();
    const Eigen::Index size = analytic.size();
    std::vector<Eigen::Index> nonzero, all(static_cast<std::size_t>(size));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    for (Eigen::Index i = 0; i < size; ++i)
      if (analytic(i) != 0.0) nonzero.push_back(i);
    auto& pool = nonzero.empty() ? all : nonzero;
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(std::min(pool.size(), options.samples_per_param));

    double worst = 0.0;
    for (Eigen::Index i : pool) {
      const double saved = p.value()(i);
      p.value()(i) = saved + options.step;
      const double up = loss(store, false);
      p.value()(i) = saved - options.step;
      const double down = loss(store, false);
      p.value()(i) = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) throw NonFiniteLoss("grad_check: loss is not finite");
      const double numeric = (up - down) / (2.0 * options.step);
      const double err = relative_error(analytic(i), numeric, options.floor);
      ++result.coordinates;
      worst = std::max(worst, err);
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = name;
        result.worst_index = i;
      }
    }
    result.per_param[name] = worst;
  }
  result.passed = result.max_rel_error <= options.tolerance;
  return result;
}

nlohmann::json checkpoint_json(const ParameterStore& store, const nlohmann::json& config) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, p] : store) {
    const auto& m = p.value();
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
    params[name] = {{"shape", {m.rows(), m.cols()}}, {"values", std::move(values)}};
  }
  return {{"format_version", kCheckpointFormat}, {"config", config}, {"params", std::move(params)}};
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store, const nlohmann::json& config) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::filesystem::filesystem_error("cannot write checkpoint", path, std::make_error_code(std::errc::io_error));
  out << checkpoint_json(store, config).dump() << '\n';
  if (!out) throw std::filesystem::filesystem_error("write failed", path, std::make_error_code(std::errc::io_error));
}

Checkpoint parse_checkpoint(const nlohmann::json& j) {
  if (j.value("format_version", 0) != kCheckpointFormat) throw std::invalid_argument("unsupported checkpoint format_version");
  Checkpoint ck;
  ck.config = j.at("config");
  for (const auto& [name, pj] : j.at("params").items()) {
    const auto shape = pj.at("shape").get<std::vector<Eigen::Index>>();
    if (shape.size() != 2) throw std::invalid_argument("parameter '" + name + "': shape must have two dimensions");
    const auto values = pj.at("values").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != shape[0] * shape[1])
      throw std::invalid_argument("parameter '" + name + "': value count does not match shape");
    Matrix m(shape[0], shape[1]);
    for (Eigen::Index r = 0; r < shape[0]; ++r)
      for (Eigen::Index c = 0; c < shape[1]; ++c) m(r, c) = values[static_cast<std::size_t>(r * shape[1] + c)];
    ck.params.add(name, std::move(m));
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::filesystem::filesystem_error("cannot open checkpoint", path, std::make_error_code(std::errc::io_error));
  return parse_checkpoint(nlohmann::json::parse(in));
}

}  // namespace rorokit::nn
