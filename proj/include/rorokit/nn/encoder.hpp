#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rorokit/layout.hpp"
#include "rorokit/nn/tape.hpp"

namespace rorokit::nn {

struct EncoderConfig {
  int layers = 2;
  int model_dim = 64;
  int heads = 4;
  int ff_dim = 128;
  int vocab_hash_size = 4096;
  int coord_buckets = kCoordMax + 1;
  int max_tokens = 2048;
  double layer_norm_eps = 1e-5;
  // Relation-aware attention: per-layer weights are created for the first
  // `bias_layers` layers (-1 means every layer) with this initial value.
  bool relation_aware = false;
  int bias_layers = -1;
  double lambda_init = 10.0;
  double lambda_lr_scale = 1.0;
  bool freeze_lambda = false;
  // Keep the sinusoidal coordinate tables fixed during training.
  bool freeze_coordinates = false;

  int head_dim() const { return model_dim / heads; }
  int biased_layer_count() const { return relation_aware ? (bias_layers < 0 ? layers : std::min(bias_layers, layers)) : 0; }
  void validate() const;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

/// Parameter names used by the encoder.
std::string layer_param(int layer, const std::string& name);
std::string lambda_param(int layer);

/// Creates every encoder parameter in `store`. Coordinate tables start as
/// fixed-frequency sinusoids, each coordinate in its own slice of the model
/// dimension; dense weights are Glorot-uniform. Relation weights (if any) do
/// not consume random draws, so vanilla and relation-aware stores built from
/// the same seed share all other values.
void init_encoder(const EncoderConfig& config, ParameterStore& store, std::uint64_t seed);

/// Sets learning-rate scales and frozen flags from the config; used after
/// init and after loading a checkpoint.
void apply_training_flags(const EncoderConfig& config, ParameterStore& store);

/// Hash bucket of a text token (64-bit FNV-1a modulo vocab size).
std::int64_t token_bucket(const std::string& text, int vocab_hash_size);
std::uint64_t fnv1a(const std::string& text);

class TokenOverflow : public std::length_error {
public:
  using std::length_error::length_error;
};

struct TokenInput {
  std::vector<std::string> texts;
  std::vector<BBox> boxes;
  std::size_t size() const { return texts.size(); }
};

/// Token-hash embedding plus four coordinate embeddings, summed. Inputs longer
/// than max_tokens throw TokenOverflow unless `truncate` is set.
Var embed(Tape& tape, const EncoderConfig& config, ParameterStore& store, const TokenInput& tokens, bool truncate = false);

/// Binary n x n relation matrix plus the layer whose weight scales it.
struct AttentionBias {
  const Matrix* rho = nullptr;
  Var lambda;
};

/// Multi-head scaled dot-product attention over already projected q, k, v
/// (n x model_dim each). With a bias, logits are (q k^T + lambda rho) / sqrt(d_k).
/// If `weights_out` is given, the per-head attention matrices are appended.
Var attention(Var q, Var k, Var v, int heads, const AttentionBias* bias = nullptr,
              std::vector<Var>* weights_out = nullptr);

struct EncoderTrace {
  std::vector<Var> attention_weights;  // layers x heads, in order
};

/// Pre-norm transformer encoder. `rho` (n x n, entries 0/1) enables the
/// relation-aware bias in every layer that has a weight parameter.
Var encoder_forward(Tape& tape, const EncoderConfig& config, ParameterStore& store, const TokenInput& tokens,
                    const Matrix* rho = nullptr, EncoderTrace* trace = nullptr);

/// Value-only convenience wrapper.
Matrix encode(const EncoderConfig& config, ParameterStore& store, const TokenInput& tokens, const Matrix* rho = nullptr);

}  // namespace rorokit::nn
