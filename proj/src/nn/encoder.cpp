#include "rorokit/nn/encoder.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace rorokit::nn {

void EncoderConfig::validate() const {
  if (layers < 0 || model_dim <= 0 || heads <= 0 || ff_dim <= 0 || vocab_hash_size <= 0 || coord_buckets <= kCoordMax ||
      max_tokens <= 0)
    throw std::invalid_argument("encoder config: sizes must be positive (layers may be 0, coord_buckets > 1000)");
  if (model_dim % heads != 0) throw std::invalid_argument("encoder config: model_dim must be divisible by heads");
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = nlohmann::json{{"layers", c.layers},
                     {"model_dim", c.model_dim},
                     {"heads", c.heads},
                     {"head_dim", c.head_dim()},
                     {"ff_dim", c.ff_dim},
                     {"vocab_hash_size", c.vocab_hash_size},
                     {"coord_buckets", c.coord_buckets},
                     {"max_tokens", c.max_tokens},
                     {"layer_norm_eps", c.layer_norm_eps},
                     {"relation_aware", c.relation_aware},
                     {"bias_layers", c.bias_layers},
                     {"lambda_init", c.lambda_init},
                     {"lambda_lr_scale", c.lambda_lr_scale},
                     {"freeze_lambda", c.freeze_lambda},
                     {"freeze_coordinates", c.freeze_coordinates}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  c.layers = j.value("layers", c.layers);
  c.model_dim = j.value("model_dim", c.model_dim);
  c.heads = j.value("heads", c.heads);
  c.ff_dim = j.value("ff_dim", c.ff_dim);
  c.vocab_hash_size = j.value("vocab_hash_size", c.vocab_hash_size);
  c.coord_buckets = j.value("coord_buckets", c.coord_buckets);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
  c.relation_aware = j.value("relation_aware", c.relation_aware);
  c.bias_layers = j.value("bias_layers", c.bias_layers);
  c.lambda_init = j.value("lambda_init", c.lambda_init);
  c.lambda_lr_scale = j.value("lambda_lr_scale", c.lambda_lr_scale);
  c.freeze_lambda = j.value("freeze_lambda", c.freeze_lambda);
  c.freeze_coordinates = j.value("freeze_coordinates", c.freeze_coordinates);
  c.validate();
}

std::string layer_param(int layer, const std::string& name) { return "layer" + std::to_string(layer) + "." + name; }
std::string lambda_param(int layer) { return layer_param(layer, "attn.lambda"); }

namespace {

constexpr const char* kCoordTables[] = {"emb.x0", "emb.y0", "emb.x1", "emb.y1"};

Matrix glorot(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-a, a);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

// Sinusoids of coordinate value b with periods spaced geometrically from
// 2000 down to 20 units, written into columns [offset, offset + width).
Matrix coordinate_table(int buckets, int dim, int offset, int width) {
  Matrix m = Matrix::Zero(buckets, dim);
  const int freqs = width / 2;
  for (int f = 0; f < freqs; ++f) {
    const double t = freqs > 1 ? static_cast<double>(f) / (freqs - 1) : 0.0;
    const double period = 2000.0 * std::pow(20.0 / 2000.0, t);
    const double omega = 2.0 * std::numbers::pi / period;
    for (int b = 0; b < buckets; ++b) {
      m(b, offset + 2 * f) = std::sin(omega * b);
      m(b, offset + 2 * f + 1) = std::cos(omega * b);
    }
  }
  return m;
}

}  // namespace

void init_encoder(const EncoderConfig& config, ParameterStore& store, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  const int d = config.model_dim;

  {
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    Matrix table(config.vocab_hash_size, d);
    for (Eigen::Index i = 0; i < table.rows(); ++i)
      for (Eigen::Index j = 0; j < d; ++j) table(i, j) = u(rng);
    store.add("emb.token", std::move(table));
  }
  const int slice = d / 4;
  for (int c = 0; c < 4; ++c) store.add(kCoordTables[c], coordinate_table(config.coord_buckets, d, c * slice, slice));

  for (int l = 0; l < config.layers; ++l) {
    for (const char* ln : {"ln1", "ln2"}) {
      store.add(layer_param(l, std::string(ln) + ".gain"), Matrix::Ones(1, d));
      store.add(layer_param(l, std::string(ln) + ".shift"), Matrix::Zero(1, d));
    }
    for (const char* w : {"wq", "wk", "wv", "wo"}) store.add(layer_param(l, std::string("attn.") + w), glorot(d, d, rng));
    for (const char* b : {"bq", "bk", "bv", "bo"}) store.add(layer_param(l, std::string("attn.") + b), Matrix::Zero(1, d));
    store.add(layer_param(l, "ff.w1"), glorot(d, config.ff_dim, rng));
    store.add(layer_param(l, "ff.b1"), Matrix::Zero(1, config.ff_dim));
    store.add(layer_param(l, "ff.w2"), glorot(config.ff_dim, d, rng));
    store.add(layer_param(l, "ff.b2"), Matrix::Zero(1, d));
  }
  if (config.layers > 0) {
    store.add("final_ln.gain", Matrix::Ones(1, d));
    store.add("final_ln.shift", Matrix::Zero(1, d));
  }
  for (int l = 0; l < config.biased_layer_count(); ++l) store.add(lambda_param(l), Matrix::Constant(1, 1, config.lambda_init));
  apply_training_flags(config, store);
}

void apply_training_flags(const EncoderConfig& config, ParameterStore& store) {
  for (const char* name : kCoordTables) store.at(name).trainable = !config.freeze_coordinates;
  for (int l = 0; l < config.biased_layer_count(); ++l) {
    auto& p = store.at(lambda_param(l));
    p.lr_scale = config.lambda_lr_scale;
    p.trainable = !config.freeze_lambda;
  }
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::int64_t token_bucket(const std::string& text, int vocab_hash_size) {
  return static_cast<std::int64_t>(fnv1a(text) % static_cast<std::uint64_t>(vocab_hash_size));
}

Var embed(Tape& tape, const EncoderConfig& config, ParameterStore& store, const TokenInput& tokens, bool truncate) {
  if (tokens.texts.size() != tokens.boxes.size()) throw std::invalid_argument("embed: one box per token required");
  std::size_t n = tokens.size();
  if (n > static_cast<std::size_t>(config.max_tokens)) {
    if (!truncate)
      throw TokenOverflow(std::to_string(n) + " tokens exceed max_tokens = " + std::to_string(config.max_tokens));
    n = static_cast<std::size_t>(config.max_tokens);
  }
  std::vector<Eigen::Index> ids(n);
  std::vector<Eigen::Index> coords[4];
  for (auto& c : coords) c.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto& b = tokens.boxes[t];
    if (!b.valid()) throw std::invalid_argument("embed: invalid token box");
    ids[t] = token_bucket(tokens.texts[t], config.vocab_hash_size);
    coords[0][t] = b.x0;
    coords[1][t] = b.y0;
    coords[2][t] = b.x1;
    coords[3][t] = b.y1;
  }
  Var x = tape.gather_rows(store.at("emb.token"), ids);
  for (int c = 0; c < 4; ++c) x = add(x, tape.gather_rows(store.at(kCoordTables[c]), coords[c]));
  return x;
}

Var attention(Var q, Var k, Var v, int heads, const AttentionBias* bias, std::vector<Var>* weights_out) {
  if (q.rows() != k.rows() || k.rows() != v.rows() || q.cols() != k.cols() || q.cols() != v.cols())
    throw std::invalid_argument("attention: q, k, v must share shape");
  if (heads <= 0 || q.cols() % heads != 0) throw std::invalid_argument("attention: width not divisible by heads");
  if (bias && (!bias->rho || bias->rho->rows() != q.rows() || bias->rho->cols() != q.rows()))
    throw std::invalid_argument("attention: relation matrix must be n x n");
  const Eigen::Index dk = q.cols() / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Var> outputs;
  for (int h = 0; h < heads; ++h) {
    Var qh = columns(q, h * dk, dk);
    Var kh = columns(k, h * dk, dk);
    Var vh = columns(v, h * dk, dk);
    Var logits = matmul_transposed(qh, kh);
    if (bias) logits = add_scaled_constant(logits, bias->lambda, *bias->rho);
    Var weights = softmax_rows(scale(logits, inv_sqrt));
    if (weights_out) weights_out->push_back(weights);
    outputs.push_back(matmul(weights, vh));
  }
  return concat_columns(outputs);
}

namespace {

Var linear(Tape& tape, ParameterStore& store, Var x, int layer, const std::string& w, const std::string& b) {
  return add_row(matmul(x, tape.param(store.at(layer_param(layer, w)))), tape.param(store.at(layer_param(layer, b))));
}

Var norm(Tape& tape, ParameterStore& store, Var x, const std::string& prefix, double eps) {
  return layer_norm(x, tape.param(store.at(prefix + ".gain")), tape.param(store.at(prefix + ".shift")), eps);
}

}  // namespace

Var encoder_forward(Tape& tape, const EncoderConfig& config, ParameterStore& store, const TokenInput& tokens,
                    const Matrix* rho, EncoderTrace* trace) {
  config.validate();
  Var x = embed(tape, config, store, tokens);
  if (rho) {
    if (rho->rows() != x.rows() || rho->cols() != x.rows())
      throw std::invalid_argument("relation matrix is " + std::to_string(rho->rows()) + "x" + std::to_string(rho->cols()) +
                                  " but there are " + std::to_string(x.rows()) + " tokens");
    if (((rho->array() != 0.0) && (rho->array() != 1.0)).any())
      throw std::invalid_argument("relation matrix entries must be 0 or 1");
    if (config.biased_layer_count() == 0)
      throw std::invalid_argument("relation matrix given to an encoder without relation-aware layers");
  }

  for (int l = 0; l < config.layers; ++l) {
    Var h = norm(tape, store, x, layer_param(l, "ln1"), config.layer_norm_eps);
    Var q = linear(tape, store, h, l, "attn.wq", "attn.bq");
    Var k = linear(tape, store, h, l, "attn.wk", "attn.bk");
    Var v = linear(tape, store, h, l, "attn.wv", "attn.bv");
    std::optional<AttentionBias> bias;
    if (rho && l < config.biased_layer_count()) bias = AttentionBias{rho, tape.param(store.at(lambda_param(l)))};
    Var o = attention(q, k, v, config.heads, bias ? &*bias : nullptr, trace ? &trace->attention_weights : nullptr);
    x = add(x, linear(tape, store, o, l, "attn.wo", "attn.bo"));

    Var h2 = norm(tape, store, x, layer_param(l, "ln2"), config.layer_norm_eps);
    Var f = linear(tape, store, relu(linear(tape, store, h2, l, "ff.w1", "ff.b1")), l, "ff.w2", "ff.b2");
    x = add(x, f);
  }
  if (config.layers > 0) x = norm(tape, store, x, "final_ln", config.layer_norm_eps);
  return x;
}

Matrix encode(const EncoderConfig& config, ParameterStore& store, const TokenInput& tokens, const Matrix* rho) {
  Tape tape(false);
  return encoder_forward(tape, config, store, tokens, rho).value();
}

}  // namespace rorokit::nn
