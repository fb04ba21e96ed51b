#include <doctest.h>

#include <random>

#include "rorokit/nn/encoder.hpp"
#include "rorokit/nn/optim.hpp"
#include "test_util.hpp"

using namespace rorokit;
using namespace rorokit::nn;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = n(rng);
  return m;
}

Matrix random_rho(std::mt19937_64& rng, Eigen::Index n, double density = 0.3) {
  std::bernoulli_distribution coin(density);
  Matrix m = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j && coin(rng)) m(i, j) = 1.0;
  return m;
}

TokenInput random_tokens(std::mt19937_64& rng, std::size_t n) {
  static const std::vector<std::string> words{"total", "date", "name", "amount", "address", "item", "qty"};
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  std::uniform_int_distribution<int> coord(0, 900);
  TokenInput t;
  for (std::size_t i = 0; i < n; ++i) {
    t.texts.push_back(words[pick(rng)]);
    const int x = coord(rng), y = coord(rng);
    t.boxes.push_back({x, y, x + 40, y + 16});
  }
  return t;
}

EncoderConfig small_config(bool relation_aware) {
  EncoderConfig c;
  c.layers = 2;
  c.model_dim = 8;
  c.heads = 2;
  c.ff_dim = 16;
  c.vocab_hash_size = 16;
  c.relation_aware = relation_aware;
  c.lambda_init = 0.7;
  return c;
}

}  // namespace

TEST_CASE("softmax rows are distributions") {
  std::mt19937_64 rng(1);
  const Matrix x = random_matrix(rng, 6, 9, 30.0);
  const Matrix p = softmax_rows(x);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-12);
    CHECK(p.row(i).minCoeff() >= 0.0);
  }
  // Shift invariance per row.
  Matrix shifted = x;
  shifted.row(2).array() += 1000.0;
  CHECK((softmax_rows(shifted) - p).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tape op gradients match finite differences") {
  std::mt19937_64 rng(2);
  ParameterStore store;
  store.add("a", random_matrix(rng, 4, 5));
  store.add("b", random_matrix(rng, 5, 3));
  store.add("c", random_matrix(rng, 4, 5));
  store.add("row", random_matrix(rng, 1, 5));
  store.add("gain", random_matrix(rng, 1, 5) + Matrix::Ones(1, 5));
  store.add("shift", random_matrix(rng, 1, 5));
  store.add("lambda", Matrix::Constant(1, 1, 0.8));
  store.add("table", random_matrix(rng, 7, 5));
  const Matrix bias = random_rho(rng, 4, 0.5) * 1.0;
  const Matrix w1 = random_matrix(rng, 4, 3);
  const Matrix w2 = random_matrix(rng, 4, 5);
  const Matrix w3 = random_matrix(rng, 2, 5);
  const std::vector<Eigen::Index> rows{3, 0, 3, 6};
  const std::vector<std::pair<Eigen::Index, Eigen::Index>> spans{{0, 1}, {1, 4}};

  LossFn loss = [&](ParameterStore& s, bool backward) {
    Tape tape(backward);
    auto a = tape.param(s.at("a"));
    auto b = tape.param(s.at("b"));
    auto c = tape.param(s.at("c"));
    auto g = tape.gather_rows(s.at("table"), rows);
    auto x = add_row(add(a, scale(sub(c, g), 0.5)), tape.param(s.at("row")));
    auto ln = layer_norm(x, tape.param(s.at("gain")), tape.param(s.at("shift")));
    auto h = relu(matmul(ln, b));
    auto scores = add_scaled_constant(matmul_transposed(ln, x), tape.param(s.at("lambda")), bias);
    auto attn = softmax_rows(scores);
    std::vector<Var> parts{columns(x, 0, 2), columns(x, 2, 3)};
    auto joined = concat_columns(parts);
    auto pooled = mean_rows(joined, spans);
    auto out = add(add(weighted_sum(h, w1), weighted_sum(matmul(attn, joined), w2)),
                   add(weighted_sum(pooled, w3), scale(sum(attn), 0.1)));
    if (backward) tape.backward(out);
    return out.value()(0, 0);
  };

  GradCheckOptions opt;
  opt.samples_per_param = 20;
  const auto res = grad_check(loss, store, opt);
  INFO("worst ", res.worst_param, " ", res.max_rel_error);
  CHECK(res.passed);
  CHECK(res.per_param.size() == store.size());
}

TEST_CASE("gather_rows leaves unread rows untouched") {
  ParameterStore store;
  auto& table = store.add("t", Matrix::Ones(5, 2));
  store.zero_grad();
  Tape tape;
  const std::vector<Eigen::Index> rows{1, 1, 3};
  auto g = tape.gather_rows(table, rows);
  tape.backward(sum(g));
  CHECK(table.grad()(0, 0) == 0.0);
  CHECK(table.grad()(1, 0) == 2.0);
  CHECK(table.grad()(3, 1) == 1.0);
  CHECK(table.grad()(4, 1) == 0.0);
}

TEST_CASE("shape mismatches throw") {
  Tape tape;
  auto a = tape.constant(Matrix::Ones(2, 3));
  auto b = tape.constant(Matrix::Ones(3, 2));
  CHECK_THROWS_AS(add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(matmul(a, a), std::invalid_argument);
  CHECK_THROWS_AS(tape.backward(a), std::invalid_argument);
}

TEST_CASE("relation-aware attention reduces to plain attention") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix q = random_matrix(rng, 7, 4), k = random_matrix(rng, 7, 4);
    const Matrix rho = random_rho(rng, 7);
    const Matrix plain = attention_weights(q, k);
    CHECK((attention_weights(q, k, rho, 0.0) - plain).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((attention_weights(q, k, Matrix::Zero(7, 7), 3.5) - plain).cwiseAbs().maxCoeff() <= 1e-12);
    const Matrix biased = attention_weights(q, k, rho, 2.0);
    for (Eigen::Index i = 0; i < 7; ++i) CHECK(std::abs(biased.row(i).sum() - 1.0) < 1e-9);
  }
}

TEST_CASE("relation-aware attention logits match the direct formula") {
  std::mt19937_64 rng(4);
  const Matrix q = random_matrix(rng, 5, 3), k = random_matrix(rng, 5, 3), rho = random_rho(rng, 5, 0.5);
  const double lambda = 1.7;
  Matrix expected(5, 5);
  for (int i = 0; i < 5; ++i) {
    double denom = 0.0;
    for (int j = 0; j < 5; ++j) denom += std::exp((q.row(i).dot(k.row(j)) + lambda * rho(i, j)) / std::sqrt(3.0));
    for (int j = 0; j < 5; ++j) expected(i, j) = std::exp((q.row(i).dot(k.row(j)) + lambda * rho(i, j)) / std::sqrt(3.0)) / denom;
  }
  CHECK((attention_weights(q, k, rho, lambda) - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attention mass on related tokens grows with lambda") {
  std::mt19937_64 rng(5);
  const Matrix q = random_matrix(rng, 8, 4), k = random_matrix(rng, 8, 4), rho = random_rho(rng, 8, 0.4);
  double previous_total = -1.0;
  std::vector<double> previous(8, -1.0);
  for (double lambda = 0.0; lambda <= 20.0; lambda += 0.5) {
    const Matrix w = attention_weights(q, k, rho, lambda);
    double total = 0.0;
    for (Eigen::Index i = 0; i < 8; ++i) {
      const double mass = w.row(i).cwiseProduct(rho.row(i)).sum();
      CHECK(mass >= previous[static_cast<std::size_t>(i)] - 1e-15);
      previous[static_cast<std::size_t>(i)] = mass;
      total += mass;
    }
    CHECK(total >= previous_total - 1e-12);
    previous_total = total;
  }
}

TEST_CASE("multi-head attention op: zero lambda equals no bias") {
  std::mt19937_64 rng(6);
  Tape tape(false);
  auto q = tape.constant(random_matrix(rng, 6, 8));
  auto k = tape.constant(random_matrix(rng, 6, 8));
  auto v = tape.constant(random_matrix(rng, 6, 8));
  const Matrix rho = random_rho(rng, 6);
  AttentionBias bias{&rho, tape.constant(Matrix::Zero(1, 1))};
  std::vector<Var> wa, wb;
  const Matrix plain = attention(q, k, v, 2, nullptr, &wa).value();
  const Matrix zero = attention(q, k, v, 2, &bias, &wb).value();
  CHECK((plain - zero).cwiseAbs().maxCoeff() <= 1e-12);
  REQUIRE(wb.size() == 2);
  for (const auto& w : wb)
    for (Eigen::Index i = 0; i < 6; ++i) CHECK(std::abs(w.value().row(i).sum() - 1.0) < 1e-9);
}

TEST_CASE("encoder output is bit-identical with an all-zero relation matrix") {
  std::mt19937_64 rng(7);
  const auto tokens = random_tokens(rng, 9);
  ParameterStore vanilla, aware;
  init_encoder(small_config(false), vanilla, 11);
  init_encoder(small_config(true), aware, 11);
  for (const auto& [name, p] : vanilla) CHECK(aware.at(name).value() == p.value());
  const Matrix zero = Matrix::Zero(9, 9);
  const Matrix a = encode(small_config(false), vanilla, tokens);
  const Matrix b = encode(small_config(true), aware, tokens, &zero);
  CHECK(a == b);
  const Matrix rho = random_rho(rng, 9);
  aware.assign(lambda_param(0), Matrix::Zero(1, 1));
  aware.assign(lambda_param(1), Matrix::Zero(1, 1));
  CHECK((encode(small_config(true), aware, tokens, &rho) - a).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("encoder relation matrix validation") {
  std::mt19937_64 rng(8);
  const auto tokens = random_tokens(rng, 4);
  ParameterStore vanilla, aware;
  init_encoder(small_config(false), vanilla, 1);
  init_encoder(small_config(true), aware, 1);
  const Matrix rho = Matrix::Zero(4, 4);
  CHECK_THROWS(encode(small_config(false), vanilla, tokens, &rho));
  const Matrix wrong = Matrix::Zero(3, 3);
  CHECK_THROWS(encode(small_config(true), aware, tokens, &wrong));
  Matrix nonbinary = Matrix::Zero(4, 4);
  nonbinary(0, 1) = 0.5;
  CHECK_THROWS(encode(small_config(true), aware, tokens, &nonbinary));
}

TEST_CASE("encoder gradients match finite differences for every parameter family") {
  std::mt19937_64 rng(9);
  for (bool relation_aware : {false, true}) {
    CAPTURE(relation_aware);
    const auto cfg = small_config(relation_aware);
    const auto tokens = random_tokens(rng, 6);
    const Matrix rho = random_rho(rng, 6, 0.4);
    const Matrix weights = random_matrix(rng, 6, cfg.model_dim);
    ParameterStore store;
    init_encoder(cfg, store, 21);
    LossFn loss = [&](ParameterStore& s, bool backward) {
      Tape tape(backward);
      auto h = encoder_forward(tape, cfg, s, tokens, relation_aware ? &rho : nullptr);
      auto out = weighted_sum(h, weights);
      if (backward) tape.backward(out);
      return out.value()(0, 0);
    };
    // Key biases shift every logit of a row equally, so their exact gradient
    // is zero and only roundoff is left to compare.
    GradCheckOptions opt;
    opt.samples_per_param = 4;
    opt.seed = 3;
    std::vector<std::string> key_biases;
    for (const auto& [name, p] : store) {
      if (name.ends_with("attn.bk")) key_biases.push_back(name);
      else opt.only.push_back(name);
    }
    const auto res = grad_check(loss, store, opt);
    INFO("worst ", res.worst_param, " ", res.max_rel_error);
    CHECK(res.passed);
    CHECK(res.per_param.size() == store.size() - key_biases.size());
    if (relation_aware) CHECK(res.per_param.count(lambda_param(1)) == 1);

    REQUIRE(key_biases.size() == static_cast<std::size_t>(cfg.layers));
    store.zero_grad();
    loss(store, true);
    for (const auto& name : key_biases) {
      auto& p = store.at(name);
      CHECK(p.grad().cwiseAbs().maxCoeff() < 1e-12);
      const double saved = p.value()(0, 0);
      p.value()(0, 0) = saved + 1e-5;
      const double up = loss(store, false);
      p.value()(0, 0) = saved - 1e-5;
      const double down = loss(store, false);
      p.value()(0, 0) = saved;
      CHECK(std::abs(up - down) / 2e-5 < 1e-8);
    }
  }
}

TEST_CASE("bias preset creates weights for the first layers only") {
  auto cfg = small_config(true);
  cfg.layers = 3;
  cfg.bias_layers = 2;
  cfg.lambda_init = 0.1;
  ParameterStore store;
  init_encoder(cfg, store, 0);
  CHECK(store.contains(lambda_param(0)));
  CHECK(store.contains(lambda_param(1)));
  CHECK_FALSE(store.contains(lambda_param(2)));
  CHECK(store.at(lambda_param(0)).value()(0, 0) == 0.1);
}

TEST_CASE("token embedding limits") {
  auto cfg = small_config(false);
  cfg.max_tokens = 3;
  ParameterStore store;
  init_encoder(cfg, store, 0);
  std::mt19937_64 rng(1);
  const auto tokens = random_tokens(rng, 5);
  Tape tape(false);
  CHECK_THROWS_AS(embed(tape, cfg, store, tokens), TokenOverflow);
  CHECK(embed(tape, cfg, store, tokens, true).rows() == 3);
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a("") == 14695981039346656037ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
  CHECK(token_bucket("a", 4096) == static_cast<std::int64_t>(0xaf63dc4c8601ec8cull % 4096));
}

TEST_CASE("adamw step matches hand arithmetic") {
  ParameterStore store;
  auto& p = store.add("w", Matrix::Constant(1, 2, 0.5));
  p.grad()(0, 0) = 0.2;
  p.grad()(0, 1) = -0.4;
  store.mark_grads_ready();
  AdamWConfig cfg;
  cfg.weight_decay = 0.1;
  adamw_step(store, 0.01, cfg);
  for (int i = 0; i < 2; ++i) {
    const double g = i == 0 ? 0.2 : -0.4;
    const double m = 0.1 * g, v = 0.001 * g * g;
    const double mhat = m / (1 - 0.9), vhat = v / (1 - 0.999);
    const double expected = 0.5 * (1 - 0.01 * 0.1) - 0.01 * mhat / (std::sqrt(vhat) + 1e-8);
    CHECK(p.value()(0, i) == doctest::Approx(expected).epsilon(1e-14));
  }
  CHECK(store.adam_step == 1);

  ParameterStore fresh;
  fresh.add("w", Matrix::Ones(1, 1));
  CHECK_THROWS_AS(adamw_step(fresh, 0.01), MissingGradients);
}

TEST_CASE("adamw honours lr scale and frozen parameters") {
  ParameterStore store;
  auto& fast = store.add("fast", Matrix::Zero(1, 1));
  auto& slow = store.add("slow", Matrix::Zero(1, 1));
  auto& frozen = store.add("frozen", Matrix::Zero(1, 1));
  fast.lr_scale = 2.0;
  frozen.trainable = false;
  for (auto* p : {&fast, &slow, &frozen}) p->grad()(0, 0) = 1.0;
  store.mark_grads_ready();
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  adamw_step(store, 0.1, cfg);
  CHECK(fast.value()(0, 0) == doctest::Approx(2.0 * slow.value()(0, 0)));
  CHECK(frozen.value()(0, 0) == 0.0);
}

TEST_CASE("checkpoint round trip is exact") {
  testutil::TempDir dir;
  ParameterStore store;
  init_encoder(small_config(true), store, 5);
  store.at(lambda_param(0)).value()(0, 0) = 1.0 / 3.0;
  nlohmann::json cfg = small_config(true);
  save_checkpoint(dir / "ck.json", store, cfg);
  const auto ck = load_checkpoint(dir / "ck.json");
  CHECK(ck.config == cfg);
  CHECK(ck.params.size() == store.size());
  for (const auto& [name, p] : store) CHECK(ck.params.at(name).value() == p.value());
  save_checkpoint(dir / "ck2.json", ck.params, ck.config);
  CHECK(testutil::read_file(dir / "ck.json") == testutil::read_file(dir / "ck2.json"));
}

TEST_CASE("encoder config json round trip") {
  auto cfg = small_config(true);
  cfg.bias_layers = 4;
  nlohmann::json j = cfg;
  CHECK(nlohmann::json(j.get<EncoderConfig>()) == j);
  auto bad = small_config(false);
  bad.heads = 3;
  CHECK_THROWS(bad.validate());
}
