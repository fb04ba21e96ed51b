#include "rorokit/rore.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>

namespace rorokit::rore {

std::string to_string(RelationKind kind) { return kind == RelationKind::isdr ? "isdr" : "gsdr"; }

RelationKind relation_kind_from_string(const std::string& s) {
  if (s == "isdr") return RelationKind::isdr;
  if (s == "gsdr") return RelationKind::gsdr;
  throw std::invalid_argument("unknown relation kind '" + s + "'");
}

std::string to_string(BiasPreset preset) { return preset == BiasPreset::all_layers ? "all_layers" : "first_four"; }

BiasPreset bias_preset_from_string(const std::string& s) {
  if (s == "all_layers") return BiasPreset::all_layers;
  if (s == "first_four") return BiasPreset::first_four;
  throw std::invalid_argument("unknown bias preset '" + s + "'");
}

std::string to_string(LabelSource source) { return source == LabelSource::ground_truth ? "ground_truth" : "pseudo"; }

LabelSource label_source_from_string(const std::string& s) {
  if (s == "ground_truth") return LabelSource::ground_truth;
  if (s == "pseudo") return LabelSource::pseudo;
  throw std::invalid_argument("unknown label source '" + s + "'");
}

// ---------------------------------------------------------------------------
// Relation matrix

std::size_t RelationMatrix::count() const {
  return static_cast<std::size_t>((bits.array() != 0.0).count());
}

RelationMatrix build_relation_matrix(const Relation& rel, std::span<const rop::Span> spans, RelationKind kind) {
  if (spans.size() != rel.element_count())
    throw std::invalid_argument("relation has " + std::to_string(rel.element_count()) + " elements but " +
                                std::to_string(spans.size()) + " spans were given");
  const Eigen::Index n = spans.empty() ? 0 : spans.back().second;
  rop::check_spans(spans, n);
  if (auto check = is_acyclic(rel); !check)
    throw CycleError("relation matrix needs an acyclic relation", check.violation->witness);

  const Relation source = kind == RelationKind::gsdr ? transitive_closure(rel) : rel;
  RelationMatrix m{n, Matrix::Zero(n, n), kind};
  for (const auto& [i, j] : source.pairs()) {
    const auto& [a0, a1] = spans[i];
    const auto& [b0, b1] = spans[j];
    m.bits.block(a0, b0, a1 - a0, b1 - b0).setOnes();
  }
  return m;
}

nlohmann::json to_json(const RelationMatrix& m) {
  auto ones = nlohmann::json::array();
  for (Eigen::Index a = 0; a < m.n; ++a)
    for (Eigen::Index b = 0; b < m.n; ++b)
      if (m.bits(a, b) != 0.0) ones.push_back({a, b});
  return {{"n", m.n}, {"ones", std::move(ones)}};
}

RelationMatrix relation_matrix_from_json(const nlohmann::json& j, RelationKind kind) {
  const auto n = j.at("n").get<Eigen::Index>();
  if (n < 0) throw std::invalid_argument("relation matrix size must be non-negative");
  RelationMatrix m{n, Matrix::Zero(n, n), kind};
  for (const auto& p : j.at("ones")) {
    const auto a = p.at(0).get<Eigen::Index>(), b = p.at(1).get<Eigen::Index>();
    if (a < 0 || b < 0 || a >= n || b >= n) throw std::invalid_argument("relation matrix entry out of range");
    m.bits(a, b) = 1.0;
  }
  return m;
}

nn::EncoderConfig with_relation_bias(nn::EncoderConfig config, BiasPreset preset) {
  config.relation_aware = true;
  if (preset == BiasPreset::first_four) {
    config.bias_layers = 4;
    config.lambda_init = 0.1;
  } else {
    config.bias_layers = -1;
  }
  return config;
}

Matrix enhanced_encode(const nn::TokenInput& tokens, const RelationMatrix& matrix, const nn::EncoderConfig& config,
                       nn::ParameterStore& params) {
  if (matrix.n != static_cast<Eigen::Index>(tokens.size()))
    throw std::invalid_argument("relation matrix is " + std::to_string(matrix.n) + " x " + std::to_string(matrix.n) +
                                " but there are " + std::to_string(tokens.size()) + " tokens");
  if (config.biased_layer_count() == 0) throw std::invalid_argument("encoder config is not relation-aware");
  return nn::encode(config, params, tokens, &matrix.bits);
}

// ---------------------------------------------------------------------------
// Forms

void to_json(nlohmann::json& j, const FormConfig& c) {
  j = {{"n_docs", c.n_docs},
       {"fields_min", c.fields_min},
       {"fields_max", c.fields_max},
       {"notes_max", c.notes_max},
       {"two_column", c.two_column},
       {"stacked", c.stacked},
       {"value_words_min", c.value_words_min},
       {"value_words_max", c.value_words_max},
       {"train_fraction", c.train_fraction},
       {"validation_fraction", c.validation_fraction}};
}

void from_json(const nlohmann::json& j, FormConfig& c) {
  c.n_docs = j.value("n_docs", c.n_docs);
  c.fields_min = j.value("fields_min", c.fields_min);
  c.fields_max = j.value("fields_max", c.fields_max);
  c.notes_max = j.value("notes_max", c.notes_max);
  c.two_column = j.value("two_column", c.two_column);
  c.stacked = j.value("stacked", c.stacked);
  c.value_words_min = j.value("value_words_min", c.value_words_min);
  c.value_words_max = j.value("value_words_max", c.value_words_max);
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
}

namespace {

constexpr std::array kKeys = {"name:",    "date:",  "total:", "phone:",   "email:", "address:", "amount:", "invoice:",
                              "account:", "due:",   "tax:",   "company:", "ref:",   "code:",    "country:", "city:"};
constexpr std::array kTitles = {"INVOICE", "RECEIPT", "ORDER", "APPLICATION", "REGISTRATION", "STATEMENT"};

constexpr int kLeft = 40;
constexpr int kRight = 960;
constexpr int kColumnGap = 40;

int uniform(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
bool coin(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

template <std::size_t N>
std::string pick(Rng& rng, const std::array<const char*, N>& from) {
  return from[std::uniform_int_distribution<std::size_t>(0, N - 1)(rng)];
}

// Box hugs the placed words.
Segment tight_segment(Index id, const std::vector<std::string>& texts, int x0, int y0, int max_width) {
  Segment seg;
  seg.id = id;
  int bottom = y0;
  seg.words = place_words(texts, x0 + kSegmentPadding, y0 + kSegmentPadding, max_width - 2 * kSegmentPadding, bottom);
  int right = x0;
  for (const auto& w : seg.words) right = std::max(right, w.box.x1);
  seg.box = {x0, y0, right + kSegmentPadding, bottom + kSegmentPadding};
  return seg;
}

std::vector<std::string> value_texts(const FormConfig& cfg, Rng& rng) {
  std::vector<std::string> texts(static_cast<std::size_t>(uniform(rng, cfg.value_words_min, cfg.value_words_max)));
  for (auto& t : texts) t = coin(rng, 0.5) ? std::to_string(uniform(rng, 10, 99999)) : random_word(rng);
  return texts;
}

}  // namespace

Document synth_form(const FormConfig& cfg, Rng& rng, std::string id) {
  if (cfg.fields_min < 1 || cfg.fields_max < cfg.fields_min || cfg.notes_max < 0 || cfg.value_words_min < 1 ||
      cfg.value_words_max < cfg.value_words_min)
    throw std::invalid_argument("form config needs positive, ordered ranges");
  Document doc;
  doc.id = std::move(id);
  auto& segs = doc.segments;
  std::vector<Pair> order, links;

  const int fields = uniform(rng, cfg.fields_min, cfg.fields_max);
  const int notes = uniform(rng, 0, cfg.notes_max);
  std::vector<bool> is_field(static_cast<std::size_t>(fields), true);
  for (int k = 0; k < notes; ++k) {
    const auto at = static_cast<std::ptrdiff_t>(uniform(rng, 0, static_cast<int>(is_field.size())));
    is_field.insert(is_field.begin() + at, false);
  }
  const bool two = coin(rng, cfg.two_column);
  const int gap = uniform(rng, 10, 18);

  std::vector<std::string> title(static_cast<std::size_t>(uniform(rng, 1, 2)));
  for (auto& t : title) t = pick(rng, kTitles);
  segs.push_back(tight_segment(0, title, kLeft, 30, kRight - kLeft));
  const int top = segs[0].box.y1 + gap;

  const std::size_t split = two ? (is_field.size() + 1) / 2 : is_field.size();
  const int width = two ? (kRight - kLeft - kColumnGap) / 2 : kRight - kLeft;
  for (int col = 0; col < (two ? 2 : 1); ++col) {
    const int x0 = kLeft + col * (width + kColumnGap);
    int y = top;
    Index prev = 0;
    const std::size_t first = col == 0 ? 0 : split;
    const std::size_t last = col == 0 ? split : is_field.size();
    for (std::size_t item = first; item < last; ++item) {
      const Index next = segs.size();
      if (!is_field[item]) {
        std::vector<std::string> words(static_cast<std::size_t>(uniform(rng, 3, 6)));
        for (auto& w : words) w = random_word(rng);
        segs.push_back(tight_segment(next, words, x0, y, width));
        order.emplace_back(prev, next);
        prev = next;
        y = segs.back().box.y1 + gap;
        continue;
      }
      Segment key = tight_segment(next, {pick(rng, kKeys)}, x0, y, width);
      const auto texts = value_texts(cfg, rng);
      bool stacked = coin(rng, cfg.stacked);
      Segment value;
      if (!stacked) {
        const int vx = key.box.x1 + uniform(rng, 12, 40);
        value = tight_segment(next + 1, texts, vx, y, x0 + width - vx);
        stacked = value.box.x1 > x0 + width || value.box.y1 > key.box.y1 + kLineHeight;
      }
      if (stacked) {
        const int indent = uniform(rng, 0, 24);
        value = tight_segment(next + 1, texts, x0 + indent, key.box.y1 + 4, width - indent);
      }
      y = std::max(key.box.y1, value.box.y1) + gap;
      segs.push_back(std::move(key));
      segs.push_back(std::move(value));
      order.emplace_back(prev, next);
      order.emplace_back(next, next + 1);
      links.emplace_back(next, next + 1);
      prev = next + 1;
    }
  }
  for (const auto& seg : segs)
    if (!seg.box.valid() || seg.box.x1 > doc.page_width || seg.box.y1 > doc.page_height)
      throw GenerationError("document '" + doc.id + "': form does not fit on the page");
  doc.isdr = Relation(segs.size(), order);
  doc.links = Relation(segs.size(), links);
  return doc;
}

Corpus synth_forms(const FormConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  Corpus corpus;
  const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * cfg.n_docs));
  const auto n_val = std::min(cfg.n_docs - std::min(n_train, cfg.n_docs),
                              static_cast<std::size_t>(std::llround(cfg.validation_fraction * cfg.n_docs)));
  for (std::size_t i = 0; i < cfg.n_docs; ++i) {
    char serial[16];
    std::snprintf(serial, sizeof serial, "%05zu", i);
    const std::string id = "form-" + std::string(serial);
    corpus.documents.push_back(synth_form(cfg, rng, id));
    corpus.split[id] = i < n_train ? Split::train : (i < n_train + n_val ? Split::validation : Split::test);
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Demo

std::vector<ArmSpec> standard_arms() {
  return {{"vanilla", false, RelationKind::isdr, LabelSource::ground_truth},
          {"isdr-ground_truth", true, RelationKind::isdr, LabelSource::ground_truth},
          {"isdr-pseudo", true, RelationKind::isdr, LabelSource::pseudo},
          {"gsdr-ground_truth", true, RelationKind::gsdr, LabelSource::ground_truth}};
}

DemoConfig::DemoConfig() {
  for (auto* rop : {&linker, &pseudo_rop}) {
    rop->head_size = 64;
    rop->epochs = 60;
    rop->patience = 15;
    rop->weight_decay = 0.1;
  }
  encoder.freeze_coordinates = true;
  pseudo_encoder.freeze_coordinates = true;
}

void to_json(nlohmann::json& j, const DemoConfig& c) {
  j = {{"encoder", c.encoder},
       {"linker", c.linker},
       {"preset", to_string(c.preset)},
       {"pseudo_model", c.pseudo_model ? nlohmann::json(*c.pseudo_model) : nlohmann::json(nullptr)},
       {"pseudo_encoder", c.pseudo_encoder},
       {"pseudo_rop", c.pseudo_rop}};
}

void from_json(const nlohmann::json& j, DemoConfig& c) {
  if (j.contains("encoder")) nn::from_json(j.at("encoder"), c.encoder);
  if (j.contains("linker")) rop::from_json(j.at("linker"), c.linker);
  if (j.contains("preset")) c.preset = bias_preset_from_string(j.at("preset").get<std::string>());
  if (auto it = j.find("pseudo_model"); it != j.end() && !it->is_null()) c.pseudo_model = it->get<std::string>();
  if (j.contains("pseudo_encoder")) nn::from_json(j.at("pseudo_encoder"), c.pseudo_encoder);
  if (j.contains("pseudo_rop")) rop::from_json(j.at("pseudo_rop"), c.pseudo_rop);
}

double DemoResult::f1(const std::string& arm) const {
  for (const auto& a : arms)
    if (a.spec.name == arm) return a.test.f1();
  throw std::out_of_range("no demo arm named '" + arm + "'");
}

namespace {

nlohmann::json metrics_json(const PairMetrics& m) {
  return {{"f1", m.f1()},
          {"precision", m.precision()},
          {"recall", m.recall()},
          {"tp", m.true_positives},
          {"fp", m.false_positives},
          {"fn", m.false_negatives}};
}

}  // namespace

nlohmann::json to_json(const DemoResult& r) {
  auto arms = nlohmann::json::array();
  for (const auto& a : r.arms) {
    auto j = metrics_json(a.test);
    j["name"] = a.spec.name;
    j["use_rore"] = a.spec.use_rore;
    j["kind"] = to_string(a.spec.kind);
    j["source"] = to_string(a.spec.source);
    j["best_epoch"] = a.report.best_epoch;
    arms.push_back(std::move(j));
  }
  nlohmann::json j = {{"arms", std::move(arms)},
                      {"train_documents", r.train_documents},
                      {"test_documents", r.test_documents}};
  j["pseudo_order"] = r.pseudo_order ? metrics_json(*r.pseudo_order) : nlohmann::json(nullptr);
  j["pseudo_acyclic_rate"] = r.pseudo_acyclic_rate ? nlohmann::json(*r.pseudo_acyclic_rate) : nlohmann::json(nullptr);
  return j;
}

rop::Example linking_example(const Document& doc, const rop::RopConfig& config, const std::optional<Relation>& order,
                             RelationKind kind) {
  if (!doc.links) throw std::invalid_argument("document '" + doc.id + "' has no links");
  rop::Example ex = rop::make_example(doc, config);
  ex.label = *doc.links;
  if (order) ex.rho = build_relation_matrix(*order, ex.spans, kind).bits;
  return ex;
}

DemoResult rore_demo_entity_linking(const Corpus& corpus, const DemoConfig& config, std::span<const ArmSpec> arms,
                                    const rop::EpochCallback& on_epoch) {
  rop::RopConfig linker = config.linker;
  linker.task_level = rop::Level::segment;
  bool need_gold = false, need_pseudo = false;
  for (const auto& arm : arms) {
    need_gold |= arm.use_rore && arm.source == LabelSource::ground_truth;
    need_pseudo |= arm.use_rore && arm.source == LabelSource::pseudo;
  }
  for (const auto& doc : corpus.documents) {
    if (!doc.links) throw std::invalid_argument("document '" + doc.id + "' has no links");
    if (need_gold && !doc.isdr) throw std::invalid_argument("document '" + doc.id + "' has no reading order");
  }

  DemoResult result;
  result.train_documents = corpus.select(Split::train).size();
  result.test_documents = corpus.select(Split::test).size();

  std::map<std::string, std::optional<Relation>> pseudo;
  if (need_pseudo) {
    rop::RopModel order_model = config.pseudo_model ? rop::load_model(*config.pseudo_model)
                                                    : rop::train(corpus, config.pseudo_rop, config.pseudo_encoder).model;
    rop::PseudoLabelReport report;
    Corpus predicted = rop::predict_pseudo_labels(order_model, corpus, &report);
    result.pseudo_acyclic_rate = report.acyclic_rate();
    PairMetrics quality;
    for (const auto& doc : predicted.documents) {
      auto& rel = doc.isdr;
      if (rel && !is_acyclic(*rel)) {
        // Cyclic predictions cannot feed the matrix; repair them like a decode with cycle removal.
        const auto ex = rop::make_example(doc, order_model.config);
        pseudo[doc.id] = rop::decode(rop::predict_scores(order_model, ex), order_model.config.threshold, true);
      } else {
        pseudo[doc.id] = rel;
      }
    }
    for (const auto* doc : corpus.select(Split::test))
      if (doc->isdr && pseudo[doc->id]) quality += pair_f1(*doc->isdr, *pseudo[doc->id]);
    result.pseudo_order = quality;
  }

  for (const auto& arm : arms) {
    const nn::EncoderConfig encoder = arm.use_rore ? with_relation_bias(config.encoder, config.preset) : [&] {
      auto e = config.encoder;
      e.relation_aware = false;
      return e;
    }();
    rop::RopModel model = rop::init_model(encoder, linker);
    auto order_of = [&](const Document& doc) -> std::optional<Relation> {
      if (!arm.use_rore) return std::nullopt;
      return arm.source == LabelSource::ground_truth ? doc.isdr : pseudo.at(doc.id);
    };
    auto collect = [&](Split split) {
      std::vector<rop::Example> out;
      for (const Document* doc : corpus.select(split)) out.push_back(linking_example(*doc, linker, order_of(*doc), arm.kind));
      return out;
    };
    const auto train_set = collect(Split::train);
    const auto validation_set = collect(Split::validation);
    const auto test_set = collect(Split::test);
    const auto& validation = validation_set.empty() ? train_set : validation_set;

    ArmOutcome outcome{arm, {}, {}};
    outcome.report = rop::fit(
        model, train_set, [&] { return rop::evaluate_examples(model, validation).f1(); }, on_epoch);
    outcome.report.train_examples = train_set.size();
    outcome.report.validation_examples = validation.size();
    outcome.report.validation_is_train = validation_set.empty();
    outcome.test = rop::evaluate_examples(model, test_set);
    result.arms.push_back(std::move(outcome));
  }
  return result;
}

}  // namespace rorokit::rore
