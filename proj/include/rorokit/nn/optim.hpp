#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>

#include <json.hpp>

#include "rorokit/nn/parameters.hpp"

namespace rorokit::nn {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

class MissingGradients : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// One AdamW step over every trainable parameter: bias-corrected adaptive
/// moments plus decoupled decay p <- p - lr * wd * p. Per-parameter
/// `lr_scale` multiplies the learning rate.
void adamw_step(ParameterStore& store, double learning_rate, const AdamWConfig& config = {});

// ---------------------------------------------------------------------------

/// Evaluates the loss for the current parameter values. When `backward` is
/// true it must also accumulate gradients into the store.
using LossFn = std::function<double(ParameterStore&, bool backward)>;

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  std::size_t samples_per_param = 6;
  std::uint64_t seed = 0;
  // Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  // Restrict the check to these parameter names (empty means all).
  std::vector<std::string> only;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  Eigen::Index worst_index = -1;
  std::size_t coordinates = 0;
  std::map<std::string, double> per_param;
  bool passed = true;
};

class NonFiniteLoss : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Compares backprop against central finite differences on a sampled set of
/// coordinates per parameter (coordinates with a nonzero analytic gradient
/// are preferred). Parameter values are restored afterwards.
GradCheckResult grad_check(const LossFn& loss, ParameterStore& store, const GradCheckOptions& options = {});

double relative_error(double analytic, double numeric, double floor);

// ---------------------------------------------------------------------------

inline constexpr int kCheckpointFormat = 1;

/// {"format_version": 1, "config": ..., "params": {name: {"shape": [r, c], "values": [...]}}}
/// with values in row-major order.
nlohmann::json checkpoint_json(const ParameterStore& store, const nlohmann::json& config);
void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store, const nlohmann::json& config);

struct Checkpoint {
  nlohmann::json config;
  ParameterStore params;
};

Checkpoint parse_checkpoint(const nlohmann::json& j);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rorokit::nn
