#include "rorokit/rop.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace rorokit::rop {

std::string to_string(Level level) { return level == Level::word ? "word" : "segment"; }

Level level_from_string(const std::string& s) {
  if (s == "word") return Level::word;
  if (s == "segment") return Level::segment;
  throw std::invalid_argument("unknown level '" + s + "' (expected word or segment)");
}

void to_json(nlohmann::json& j, const RopConfig& c) {
  j = nlohmann::json{{"task_level", to_string(c.task_level)},
                     {"bbox_level", to_string(c.bbox_level)},
                     {"max_elements", c.max_elements},
                     {"max_tokens", c.max_tokens},
                     {"head_size", c.head_size},
                     {"threshold", c.threshold},
                     {"mask_diagonal", c.mask_diagonal},
                     {"enforce_acyclic", c.enforce_acyclic},
                     {"seed", c.seed},
                     {"learning_rate", c.learning_rate},
                     {"weight_decay", c.weight_decay},
                     {"epochs", c.epochs},
                     {"patience", c.patience},
                     {"batch_size", c.batch_size}};
}

void from_json(const nlohmann::json& j, RopConfig& c) {
  if (j.contains("task_level")) c.task_level = level_from_string(j.at("task_level").get<std::string>());
  if (j.contains("bbox_level")) c.bbox_level = level_from_string(j.at("bbox_level").get<std::string>());
  c.max_elements = j.value("max_elements", c.max_elements);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.head_size = j.value("head_size", c.head_size);
  c.threshold = j.value("threshold", c.threshold);
  c.mask_diagonal = j.value("mask_diagonal", c.mask_diagonal);
  c.enforce_acyclic = j.value("enforce_acyclic", c.enforce_acyclic);
  c.seed = j.value("seed", c.seed);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.epochs = j.value("epochs", c.epochs);
  c.patience = j.value("patience", c.patience);
  c.batch_size = j.value("batch_size", c.batch_size);
  if (c.max_tokens <= 0 || c.head_size <= 0 || c.epochs < 0 || c.patience <= 0 || c.batch_size <= 0 ||
      c.max_elements < 0 || c.learning_rate <= 0)
    throw std::invalid_argument("rop config: limits, sizes and learning rate must be positive");
}

// ---------------------------------------------------------------------------
// Head

void init_head(nn::ParameterStore& store, int model_dim, int head_size, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x676c6f62616cULL);
  const double a = std::sqrt(6.0 / static_cast<double>(model_dim + head_size));
  std::uniform_real_distribution<double> u(-a, a);
  auto dense = [&] {
    Matrix m(model_dim, head_size);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = u(rng);
    return m;
  };
  store.add(kHeadWq, dense());
  store.add(kHeadWk, dense());
  store.add(kHeadBq, Matrix::Zero(1, head_size));
  store.add(kHeadBk, Matrix::Zero(1, head_size));
}

GlobalPointerHead head_from(const nn::ParameterStore& store) {
  return {store.at(kHeadWq).value(), store.at(kHeadWk).value(), store.at(kHeadBq).value(), store.at(kHeadBk).value()};
}

// ---------------------------------------------------------------------------
// Forward pieces

void check_spans(std::span<const Span> spans, Eigen::Index tokens) {
  Eigen::Index next = 0;
  for (const auto& [first, last] : spans) {
    if (first != next) throw std::invalid_argument("spans must partition the tokens in order");
    if (last <= first) throw std::invalid_argument("element span is empty");
    next = last;
  }
  if (next != tokens) throw std::invalid_argument("spans do not cover every token");
}

Matrix pool_elements(const Matrix& token_embeddings, std::span<const Span> spans) {
  check_spans(spans, token_embeddings.rows());
  Matrix out(static_cast<Eigen::Index>(spans.size()), token_embeddings.cols());
  for (std::size_t i = 0; i < spans.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) =
        token_embeddings.middleRows(spans[i].first, spans[i].second - spans[i].first).colwise().mean();
  return out;
}

nn::Var pool_elements(nn::Var token_embeddings, std::span<const Span> spans) {
  check_spans(spans, token_embeddings.rows());
  return nn::mean_rows(token_embeddings, spans);
}

Matrix score_pairs(const Matrix& elements, const GlobalPointerHead& head) {
  if (elements.cols() != head.wq.rows() || head.wq.rows() != head.wk.rows() || head.wq.cols() != head.wk.cols() ||
      head.bq.cols() != head.wq.cols() || head.bk.cols() != head.wk.cols())
    throw std::invalid_argument("score_pairs: head shapes do not match element width");
  return nn::pair_scores(elements, head.wq, head.bq, head.wk, head.bk);
}

nn::Var score_pairs(nn::Tape& tape, nn::Var elements, nn::ParameterStore& store) {
  nn::Var q = nn::add_row(nn::matmul(elements, tape.param(store.at(kHeadWq))), tape.param(store.at(kHeadBq)));
  nn::Var k = nn::add_row(nn::matmul(elements, tape.param(store.at(kHeadWk))), tape.param(store.at(kHeadBk)));
  return nn::matmul_transposed(q, k);
}

namespace {

using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

void check_scores(const Matrix& scores, const Relation& label) {
  if (scores.rows() != scores.cols()) throw std::invalid_argument("score matrix must be square");
  if (static_cast<Index>(scores.rows()) != label.element_count())
    throw std::invalid_argument("label element count does not match the score matrix");
  if (!scores.allFinite()) throw std::domain_error("score matrix has non-finite entries");
}

std::pair<Mask, Mask> loss_masks(const Relation& label, Eigen::Index n, bool mask_diagonal) {
  Mask positive = Mask::Constant(n, n, false);
  for (const auto& [a, b] : label.pairs()) positive(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = true;
  Mask negative = positive.unaryExpr([](bool p) { return !p; });
  if (mask_diagonal)
    for (Eigen::Index i = 0; i < n; ++i) negative(i, i) = false;
  return {positive, negative};
}

}  // namespace

double gp_loss(const Matrix& scores, const Relation& label, bool mask_diagonal) {
  check_scores(scores, label);
  const auto [positive, negative] = loss_masks(label, scores.rows(), mask_diagonal);
  return nn::log1p_sum_exp(scores, negative) + nn::log1p_sum_exp(Matrix(-scores), positive);
}

Matrix gp_loss_gradient(const Matrix& scores, const Relation& label, bool mask_diagonal) {
  check_scores(scores, label);
  const auto [positive, negative] = loss_masks(label, scores.rows(), mask_diagonal);
  const double neg_lse = nn::log1p_sum_exp(scores, negative);
  const double pos_lse = nn::log1p_sum_exp(Matrix(-scores), positive);
  Matrix grad = Matrix::Zero(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i)
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      if (negative(i, j)) grad(i, j) += std::exp(scores(i, j) - neg_lse);
      if (positive(i, j)) grad(i, j) -= std::exp(-scores(i, j) - pos_lse);
    }
  return grad;
}

nn::Var gp_loss(nn::Var scores, const Relation& label, bool mask_diagonal) {
  Matrix value(1, 1);
  value(0, 0) = gp_loss(scores.value(), label, mask_diagonal);
  return scores.tape->push(std::move(value), {scores.id},
                           [s = scores.id, label, mask_diagonal](nn::Tape& t, std::size_t self) {
                             if (!t.needs_grad(s)) return;
                             t.grad_of(s) += t.grad_of(self)(0, 0) * gp_loss_gradient(t.value_of(s), label, mask_diagonal);
                           });
}

Relation decode(const Matrix& scores, double threshold, bool enforce_acyclic) {
  if (scores.rows() != scores.cols()) throw std::invalid_argument("score matrix must be square");
  const auto n = static_cast<Index>(scores.rows());
  Relation out(n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > threshold) out.insert(i, j);
  if (!enforce_acyclic) return out;

  for (auto check = is_acyclic(out); !check; check = is_acyclic(out)) {
    const auto& walk = check.violation->witness;
    Pair weakest{walk[0], walk[1]};
    for (std::size_t k = 0; k + 1 < walk.size(); ++k) {
      const Pair edge{walk[k], walk[k + 1]};
      if (scores(static_cast<Eigen::Index>(edge.first), static_cast<Eigen::Index>(edge.second)) <
          scores(static_cast<Eigen::Index>(weakest.first), static_cast<Eigen::Index>(weakest.second)))
        weakest = edge;
    }
    out.erase(weakest.first, weakest.second);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Examples and model

Example make_example(const Document& doc, const RopConfig& config) {
  Example ex;
  ex.doc_id = doc.id;
  for (const auto& seg : doc.segments)
    for (const auto& w : seg.words) {
      ex.tokens.texts.push_back(w.text);
      ex.tokens.boxes.push_back(config.bbox_level == Level::word ? w.box : seg.box);
    }
  if (config.task_level == Level::segment) {
    for (const auto& [first, last] : doc.word_spans())
      ex.spans.emplace_back(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(last));
    if (doc.isdr) ex.label = *doc.isdr;
  } else {
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(ex.tokens.size()); ++t) ex.spans.emplace_back(t, t + 1);
    if (doc.isdr) ex.label = derive_word_level(doc);
  }
  return ex;
}

RopModel init_model(const nn::EncoderConfig& encoder, const RopConfig& config) {
  RopModel model{encoder, config, {}};
  nn::init_encoder(encoder, model.params, config.seed);
  init_head(model.params, encoder.model_dim, config.head_size, config.seed);
  return model;
}

namespace {

void check_limits(const RopModel& model, const Example& ex) {
  if (ex.spans.size() > static_cast<std::size_t>(model.config.element_limit()))
    throw SizeLimitError("document '" + ex.doc_id + "' has " + std::to_string(ex.spans.size()) +
                         " elements, limit is " + std::to_string(model.config.element_limit()));
  if (ex.tokens.size() > static_cast<std::size_t>(std::min(model.config.max_tokens, model.encoder.max_tokens)))
    throw nn::TokenOverflow("document '" + ex.doc_id + "' has " + std::to_string(ex.tokens.size()) + " tokens");
}

bool within_limits(const RopModel& model, const Example& ex) {
  return ex.spans.size() <= static_cast<std::size_t>(model.config.element_limit()) &&
         ex.tokens.size() <= static_cast<std::size_t>(std::min(model.config.max_tokens, model.encoder.max_tokens));
}

nn::Var forward_scores(nn::Tape& tape, RopModel& model, const Example& ex) {
  check_limits(model, ex);
  const Matrix* rho = ex.rho && model.encoder.biased_layer_count() > 0 ? &*ex.rho : nullptr;
  nn::Var tokens = nn::encoder_forward(tape, model.encoder, model.params, ex.tokens, rho);
  return score_pairs(tape, pool_elements(tokens, ex.spans), model.params);
}

}  // namespace

Matrix predict_scores(RopModel& model, const Example& example) {
  nn::Tape tape(false);
  return forward_scores(tape, model, example).value();
}

Relation predict(RopModel& model, const Document& doc) {
  return decode(predict_scores(model, make_example(doc, model.config)), model.config.threshold, model.config.enforce_acyclic);
}

nn::Var example_loss(nn::Tape& tape, RopModel& model, const Example& example) {
  if (!example.label) throw std::invalid_argument("document '" + example.doc_id + "' has no label");
  return gp_loss(forward_scores(tape, model, example), *example.label, model.config.mask_diagonal);
}

nlohmann::json model_config_json(const RopModel& model) {
  return {{"encoder", model.encoder}, {"rop", model.config}};
}

void save_model(const RopModel& model, const std::filesystem::path& path) {
  nn::save_checkpoint(path, model.params, model_config_json(model));
}

RopModel model_from_checkpoint(nn::Checkpoint checkpoint) {
  RopModel model;
  model.encoder = checkpoint.config.at("encoder").get<nn::EncoderConfig>();
  model.config = checkpoint.config.at("rop").get<RopConfig>();
  model.params = std::move(checkpoint.params);
  nn::apply_training_flags(model.encoder, model.params);
  for (const char* name : {kHeadWq, kHeadWk, kHeadBq, kHeadBk}) model.params.at(name);
  return model;
}

RopModel load_model(const std::filesystem::path& path) { return model_from_checkpoint(nn::load_checkpoint(path)); }

// ---------------------------------------------------------------------------
// Training

nlohmann::json to_json(const TrainReport& report) {
  auto epochs = nlohmann::json::array();
  for (const auto& e : report.epochs)
    epochs.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"validation_f1", e.validation_f1}});
  return {{"epochs", std::move(epochs)},
          {"best_epoch", report.best_epoch},
          {"best_validation_f1", report.best_validation_f1},
          {"train_examples", report.train_examples},
          {"validation_examples", report.validation_examples},
          {"validation_is_train", report.validation_is_train},
          {"skipped", report.skipped}};
}

PairMetrics evaluate_examples(RopModel& model, std::span<const Example> examples) {
  PairMetrics total;
  for (const auto& ex : examples) {
    const auto pred = decode(predict_scores(model, ex), model.config.threshold, model.config.enforce_acyclic);
    total += pair_f1(*ex.label, pred);
  }
  return total;
}

TrainReport fit(RopModel& model, std::span<const Example> train_set, const std::function<double()>& evaluate,
                const EpochCallback& on_epoch) {
  if (train_set.empty()) throw std::invalid_argument("training split is empty");
  const auto& cfg = model.config;
  TrainReport report;
  report.train_examples = train_set.size();

  std::mt19937_64 rng(cfg.seed ^ 0x73687566666c65ULL);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::map<std::string, Matrix> best;
  int since_best = 0;
  const nn::AdamWConfig adam{.weight_decay = cfg.weight_decay};

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      model.params.zero_grad();
      for (std::size_t b = start; b < stop; ++b) {
        nn::Tape tape;
        nn::Var loss = example_loss(tape, model, train_set[order[b]]);
        total += loss.value()(0, 0);
        tape.backward(nn::scale(loss, 1.0 / static_cast<double>(stop - start)));
      }
      model.params.mark_grads_ready();
      nn::adamw_step(model.params, cfg.learning_rate, adam);
    }
    EpochRecord record{epoch, total / static_cast<double>(order.size()), evaluate()};
    report.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
    if (report.best_epoch < 0 || record.validation_f1 > report.best_validation_f1) {
      report.best_epoch = epoch;
      report.best_validation_f1 = record.validation_f1;
      for (const auto& [name, p] : model.params) best[name] = p.value();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  for (const auto& [name, values] : best) model.params.at(name).value() = values;
  return report;
}

TrainResult train(const Corpus& corpus, const RopConfig& config, const nn::EncoderConfig& encoder,
                  const EpochCallback& on_epoch) {
  RopModel model = init_model(encoder, config);
  std::vector<Example> train_set, validation_set;
  std::vector<std::string> skipped;

  auto collect = [&](Split split, std::vector<Example>& into) {
    for (const Document* doc : corpus.select(split)) {
      if (!doc->isdr) throw std::invalid_argument("training document '" + doc->id + "' has no isdr");
      Example ex = make_example(*doc, config);
      if (!within_limits(model, ex)) {
        skipped.push_back(doc->id);
        continue;
      }
      into.push_back(std::move(ex));
    }
  };
  collect(Split::train, train_set);
  collect(Split::validation, validation_set);
  if (train_set.empty()) throw std::invalid_argument("training split is empty");

  const bool validation_is_train = validation_set.empty();
  std::span<const Example> validation = validation_is_train ? std::span<const Example>(train_set) : validation_set;
  TrainReport report =
      fit(model, train_set, [&] { return evaluate_examples(model, validation).f1(); }, on_epoch);
  report.skipped = std::move(skipped);
  report.validation_examples = validation.size();
  report.validation_is_train = validation_is_train;
  return {std::move(model), std::move(report)};
}

// ---------------------------------------------------------------------------
// Pseudo labels

double PseudoLabelReport::acyclic_rate() const {
  if (documents.empty()) return 1.0;
  std::size_t acyclic = 0;
  for (const auto& [id, e] : documents) acyclic += e.acyclic ? 1 : 0;
  return static_cast<double>(acyclic) / static_cast<double>(documents.size());
}

nlohmann::json to_json(const PseudoLabelReport& report) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, e] : report.documents) j[id] = {{"acyclic", e.acyclic}, {"num_pairs", e.num_pairs}};
  return j;
}

Corpus predict_pseudo_labels(RopModel& model, const Corpus& corpus, PseudoLabelReport* report) {
  if (model.config.task_level != Level::segment)
    throw std::invalid_argument("pseudo segment labels need a segment-level model");
  Corpus out = corpus;
  for (auto& doc : out.documents) {
    Example ex = make_example(doc, model.config);
    if (!within_limits(model, ex)) {
      doc.isdr.reset();
      if (report) report->skipped.push_back(doc.id);
      continue;
    }
    doc.isdr = decode(predict_scores(model, ex), model.config.threshold, model.config.enforce_acyclic);
    if (report) report->documents[doc.id] = {static_cast<bool>(is_acyclic(*doc.isdr)), doc.isdr->size()};
  }
  return out;
}

}  // namespace rorokit::rop
