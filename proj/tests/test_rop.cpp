#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "rorokit/rop.hpp"
#include "test_util.hpp"

using namespace rorokit;
using namespace rorokit::rop;
using nn::Matrix;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = n(rng);
  return m;
}

// Direct summation over the two sets, no shifting.
double naive_loss(const Matrix& s, const Relation& label, bool mask_diagonal = false) {
  double neg = 1.0, pos = 1.0;
  for (Index i = 0; i < label.element_count(); ++i)
    for (Index j = 0; j < label.element_count(); ++j) {
      const double v = s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (label.contains(i, j)) pos += std::exp(-v);
      else if (!(mask_diagonal && i == j)) neg += std::exp(v);
    }
  return std::log(neg) + std::log(pos);
}

nn::EncoderConfig tiny_encoder() {
  nn::EncoderConfig e;
  e.layers = 1;
  e.model_dim = 16;
  e.heads = 2;
  e.ff_dim = 32;
  e.vocab_hash_size = 64;
  return e;
}

RopConfig tiny_rop() {
  RopConfig c;
  c.head_size = 16;
  c.learning_rate = 3e-3;
  c.epochs = 200;
  c.patience = 200;
  c.batch_size = 4;
  c.seed = 3;
  return c;
}

Corpus chains(std::size_t n, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_docs = n;
  cfg.mix = {1, 0, 0, 0};
  cfg.chain_min = 3;
  cfg.chain_max = 5;
  cfg.train_fraction = 1.0;
  return synth_generate(cfg, seed);
}

}  // namespace

TEST_CASE("pool_elements") {
  Matrix h(3, 1);
  h << 1, 3, 7;
  const std::vector<Span> spans{{0, 2}, {2, 3}};
  const Matrix pooled = pool_elements(h, spans);
  CHECK(pooled(0, 0) == 2.0);
  CHECK(pooled(1, 0) == 7.0);

  std::mt19937_64 rng(1);
  const Matrix x = random_matrix(rng, 5, 4);
  const std::vector<Span> singles{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}};
  CHECK(pool_elements(x, singles) == x);
  const std::vector<Span> uneven{{0, 3}, {3, 5}};
  CHECK(pool_elements(x, uneven).rows() == 2);
  CHECK(pool_elements(x, uneven).cols() == 4);

  const std::vector<Span> empty_span{{0, 0}, {0, 5}};
  CHECK_THROWS(pool_elements(x, empty_span));
  const std::vector<Span> gap{{0, 2}, {3, 5}};
  CHECK_THROWS(pool_elements(x, gap));
}

TEST_CASE("score_pairs") {
  GlobalPointerHead id{Matrix::Identity(2, 2), Matrix::Identity(2, 2), Matrix::Zero(1, 2), Matrix::Zero(1, 2)};
  CHECK(score_pairs(Matrix::Identity(2, 2), id) == Matrix::Identity(2, 2));

  GlobalPointerHead zero{Matrix::Zero(3, 4), Matrix::Zero(3, 4), Matrix::Zero(1, 4), Matrix::Zero(1, 4)};
  std::mt19937_64 rng(2);
  CHECK(score_pairs(random_matrix(rng, 5, 3), zero).isZero(0.0));

  GlobalPointerHead head{random_matrix(rng, 6, 4), random_matrix(rng, 6, 4), random_matrix(rng, 1, 4), random_matrix(rng, 1, 4)};
  const Matrix h = random_matrix(rng, 5, 6);
  const Matrix s = score_pairs(h, head);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      double expected = 0.0;
      for (int k = 0; k < 4; ++k) {
        double q = head.bq(0, k), kk = head.bk(0, k);
        for (int d = 0; d < 6; ++d) {
          q += h(i, d) * head.wq(d, k);
          kk += h(j, d) * head.wk(d, k);
        }
        expected += q * kk;
      }
      CHECK(std::abs(s(i, j) - expected) < 1e-12);
    }

  GlobalPointerHead wrong{Matrix::Zero(2, 4), Matrix::Zero(2, 4), Matrix::Zero(1, 4), Matrix::Zero(1, 4)};
  CHECK_THROWS(score_pairs(h, wrong));
}

TEST_CASE("gp_loss closed-form values") {
  CHECK(std::abs(gp_loss(Matrix::Zero(2, 2), Relation(2, {{0, 1}})) - (std::log(4.0) + std::log(2.0))) < 1e-9);
  CHECK(std::abs(gp_loss(Matrix::Zero(2, 2), Relation(2)) - std::log(5.0)) < 1e-9);

  const Relation label(3, {{0, 1}, {1, 2}});
  Matrix s = Matrix::Constant(3, 3, -40.0);
  s(0, 1) = s(1, 2) = 40.0;
  CHECK(gp_loss(s, label) < 1e-12);

  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS(gp_loss(bad, Relation(2)));
  CHECK_THROWS(gp_loss(Matrix::Zero(2, 2), Relation(3)));
}

TEST_CASE("gp_loss is overflow safe and matches direct summation") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 1 + trial % 6;
    const auto label = oracle::to_relation(n, oracle::random_pairs(rng, n, 0.3));
    const Matrix s = random_matrix(rng, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), 3.0);
    CHECK(gp_loss(s, label) == doctest::Approx(naive_loss(s, label)).epsilon(1e-12));
    CHECK(gp_loss(s, label, true) == doctest::Approx(naive_loss(s, label, true)).epsilon(1e-12));
  }
  Matrix huge = Matrix::Constant(2, 2, 800.0);
  const double l = gp_loss(huge, Relation(2));
  CHECK(std::isfinite(l));
  CHECK(l == doctest::Approx(800.0 + std::log(4.0)));
}

TEST_CASE("gp_loss gradient matches central differences") {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = 2 + trial % 5;
    const auto label = oracle::to_relation(n, oracle::random_pairs(rng, n, 0.4));
    Matrix s = random_matrix(rng, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), 1.0);
    for (bool mask : {false, true}) {
      const Matrix g = gp_loss_gradient(s, label, mask);
      for (Eigen::Index k = 0; k < s.size(); ++k) {
        const double saved = s(k);
        const double numeric = oracle::central_difference(
            [&](double v) {
              s(k) = v;
              return gp_loss(s, label, mask);
            },
            saved, 1e-5);
        s(k) = saved;
        worst = std::max(worst, nn::relative_error(g(k), numeric, 1e-6));
      }
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("gp_loss is equivariant under relabeling of elements") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = 2 + trial % 6;
    const auto label = oracle::to_relation(n, oracle::random_pairs(rng, n, 0.3));
    const Matrix s = random_matrix(rng, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<Index> perm(n);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix ps(s.rows(), s.cols());
    Relation pl(n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) ps(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j])) = s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    for (const auto& [a, b] : label.pairs()) pl.insert(perm[a], perm[b]);
    CHECK(gp_loss(ps, pl) == doctest::Approx(gp_loss(s, label)).epsilon(1e-12));
  }
}

TEST_CASE("gp_loss moves the right way as scores change") {
  std::mt19937_64 rng(7);
  const Relation label(4, {{0, 1}, {1, 2}, {2, 3}});
  Matrix s = random_matrix(rng, 4, 4);
  const double base = gp_loss(s, label);
  Matrix up_pos = s;
  up_pos(0, 1) += 0.5;
  CHECK(gp_loss(up_pos, label) < base);
  Matrix up_neg = s;
  up_neg(3, 0) += 0.5;
  CHECK(gp_loss(up_neg, label) > base);
}

TEST_CASE("decode") {
  Matrix s(2, 2);
  s << -1, 3, -2, -1;
  CHECK(decode(s) == Relation(2, {{0, 1}}));
  CHECK(decode(Matrix::Constant(3, 3, -1.0)).empty());
  Matrix cyc(2, 2);
  cyc << -5, 2, 1, -5;
  CHECK(decode(cyc) == Relation(2, {{0, 1}, {1, 0}}));
  CHECK(decode(cyc, 0.0, true) == Relation(2, {{0, 1}}));
  CHECK(decode(cyc, 1.5) == Relation(2, {{0, 1}}));

  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix r = random_matrix(rng, 7, 7);
    const auto fixed = decode(r, 0.0, true);
    CHECK(is_acyclic(fixed).ok);
    CHECK(fixed.is_subset_of(decode(r)));
  }
}

TEST_CASE("tape scores and loss agree with the matrix path") {
  std::mt19937_64 rng(9);
  RopModel model = init_model(tiny_encoder(), tiny_rop());
  SynthConfig cfg;
  cfg.n_docs = 3;
  const auto corpus = synth_generate(cfg, 2);
  for (const auto& doc : corpus.documents) {
    const auto ex = make_example(doc, model.config);
    const Matrix scores = predict_scores(model, ex);
    const Matrix h = pool_elements(nn::encode(model.encoder, model.params, ex.tokens), ex.spans);
    CHECK((score_pairs(h, head_from(model.params)) - scores).cwiseAbs().maxCoeff() < 1e-12);
    nn::Tape tape(false);
    CHECK(example_loss(tape, model, ex).value()(0, 0) == doctest::Approx(gp_loss(scores, *ex.label)).epsilon(1e-12));
  }
}

TEST_CASE("end-to-end loss gradient matches finite differences") {
  SynthConfig cfg;
  cfg.n_docs = 1;
  cfg.mix = {0, 0, 1, 0};
  const auto doc = synth_generate(cfg, 4).documents[0];
  RopModel model = init_model(tiny_encoder(), tiny_rop());
  const auto ex = make_example(doc, model.config);
  nn::LossFn loss = [&](nn::ParameterStore& store, bool backward) {
    nn::Tape tape(backward);
    std::swap(store, model.params);
    auto l = example_loss(tape, model, ex);
    if (backward) tape.backward(l);
    std::swap(store, model.params);
    return l.value()(0, 0);
  };
  nn::ParameterStore store = model.params;
  nn::GradCheckOptions opt;
  opt.samples_per_param = 3;
  for (const auto& [name, p] : store)
    if (!name.ends_with("attn.bk")) opt.only.push_back(name);
  const auto res = nn::grad_check(loss, store, opt);
  INFO("worst ", res.worst_param, " ", res.max_rel_error);
  CHECK(res.passed);
}

TEST_CASE("make_example levels") {
  SynthConfig cfg;
  cfg.n_docs = 1;
  cfg.words_min = 2;
  cfg.words_max = 3;
  const auto doc = synth_generate(cfg, 1).documents[0];
  RopConfig seg;
  const auto a = make_example(doc, seg);
  CHECK(a.spans.size() == doc.segments.size());
  CHECK(*a.label == *doc.isdr);
  CHECK(a.tokens.boxes[0] == doc.segments[0].box);

  RopConfig word;
  word.task_level = Level::word;
  word.bbox_level = Level::word;
  const auto b = make_example(doc, word);
  CHECK(b.spans.size() == doc.word_count());
  CHECK(*b.label == derive_word_level(doc));
  CHECK(b.tokens.boxes[0] == doc.segments[0].words[0].box);
  CHECK(word.element_limit() == 512);
  CHECK(seg.element_limit() == 256);
}

TEST_CASE("training overfits a small chain corpus") {
  const auto corpus = chains(20, 10);
  const auto result = train(corpus, tiny_rop(), tiny_encoder());
  CHECK(result.report.validation_is_train);
  CHECK(result.report.best_validation_f1 == 1.0);
  RopModel model = result.model;
  PairMetrics total;
  for (const auto& d : corpus.documents) total += pair_f1(*d.isdr, predict(model, d));
  CHECK(total.f1() == 1.0);

  PseudoLabelReport report;
  const auto pseudo = predict_pseudo_labels(model, corpus, &report);
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) CHECK(*pseudo.documents[i].isdr == *corpus.documents[i].isdr);
  CHECK(report.acyclic_rate() == 1.0);
  CHECK(report.documents.size() == 20);
  CHECK(predict_pseudo_labels(model, Corpus{}).documents.empty());
}

TEST_CASE("training is deterministic and early stopping keeps the best epoch") {
  const auto corpus = chains(6, 11);
  auto cfg = tiny_rop();
  cfg.epochs = 12;
  const auto a = train(corpus, cfg, tiny_encoder());
  const auto b = train(corpus, cfg, tiny_encoder());
  REQUIRE(a.report.epochs.size() == b.report.epochs.size());
  for (std::size_t e = 0; e < a.report.epochs.size(); ++e) CHECK(a.report.epochs[e].mean_loss == b.report.epochs[e].mean_loss);
  for (const auto& [name, p] : a.model.params) CHECK(b.model.params.at(name).value() == p.value());

  cfg.patience = 2;
  cfg.epochs = 50;
  const auto c = train(corpus, cfg, tiny_encoder());
  CHECK(static_cast<int>(c.report.epochs.size()) <= std::max(c.report.best_epoch + 2, 2));
}

TEST_CASE("loss on one repeated batch decreases over the first epochs") {
  const auto corpus = chains(1, 12);
  auto cfg = tiny_rop();
  cfg.epochs = 10;
  cfg.batch_size = 1;
  cfg.learning_rate = 1e-3;
  const auto r = train(corpus, cfg, tiny_encoder());
  REQUIRE(r.report.epochs.size() == 10);
  for (std::size_t e = 1; e < 10; ++e) {
    INFO(e, " ", r.report.epochs[e].mean_loss);
    CHECK(r.report.epochs[e].mean_loss <= r.report.epochs[e - 1].mean_loss * 1.01);
  }
  CHECK(r.report.epochs.back().mean_loss < r.report.epochs.front().mean_loss);
}

TEST_CASE("training skips oversized documents and rejects empty splits") {
  auto corpus = chains(4, 13);
  auto cfg = tiny_rop();
  cfg.epochs = 2;
  cfg.max_elements = 4;
  const auto r = train(corpus, cfg, tiny_encoder());
  std::size_t big = 0;
  for (const auto& d : corpus.documents) big += d.segments.size() > 4 ? 1 : 0;
  CHECK(r.report.skipped.size() == big);
  CHECK(r.report.train_examples == corpus.documents.size() - big);

  Corpus empty;
  CHECK_THROWS(train(empty, cfg, tiny_encoder()));
  for (auto& [id, split] : corpus.split) split = Split::test;
  CHECK_THROWS(train(corpus, cfg, tiny_encoder()));
}

TEST_CASE("model save and load reproduce predictions") {
  testutil::TempDir dir;
  RopModel model = init_model(tiny_encoder(), tiny_rop());
  save_model(model, dir / "m.json");
  RopModel back = load_model(dir / "m.json");
  const auto doc = chains(1, 14).documents[0];
  const auto ex = make_example(doc, model.config);
  CHECK(predict_scores(model, ex) == predict_scores(back, ex));
  CHECK(nlohmann::json(back.config) == nlohmann::json(model.config));
}

TEST_CASE("rop config json round trip") {
  RopConfig c;
  c.task_level = Level::word;
  c.threshold = 0.25;
  c.enforce_acyclic = true;
  nlohmann::json j = c;
  CHECK(nlohmann::json(j.get<RopConfig>()) == j);
  CHECK_THROWS(nlohmann::json({{"head_size", 0}}).get<RopConfig>());
}
