#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rorokit/rop.hpp"

namespace rorokit::rore {

using nn::Matrix;

enum class RelationKind { isdr, gsdr };
std::string to_string(RelationKind kind);
RelationKind relation_kind_from_string(const std::string& s);

/// Element index -> half-open token range. Ranges are ordered, disjoint and
/// cover [0, n).
using SpanMap = std::vector<rop::Span>;

/// Token-level successor matrix. bits(a, b) = 1 iff token a's element
/// precedes token b's element in the (closed, for GSDR) element relation.
struct RelationMatrix {
  Eigen::Index n = 0;
  Matrix bits;
  RelationKind kind = RelationKind::isdr;

  std::size_t count() const;
};

/// Throws CycleError for cyclic input and std::invalid_argument when the
/// spans do not match the relation.
RelationMatrix build_relation_matrix(const Relation& rel, std::span<const rop::Span> spans, RelationKind kind);

/// {"n": n, "ones": [[a, b], ...]} in lexicographic order.
nlohmann::json to_json(const RelationMatrix& m);
RelationMatrix relation_matrix_from_json(const nlohmann::json& j, RelationKind kind = RelationKind::isdr);

enum class BiasPreset {
  all_layers,  // every layer, lambda_init unchanged
  first_four,  // first four layers, lambda starts at 0.1
};
std::string to_string(BiasPreset preset);
BiasPreset bias_preset_from_string(const std::string& s);

/// Turns on relation-aware attention according to the preset.
nn::EncoderConfig with_relation_bias(nn::EncoderConfig config, BiasPreset preset = BiasPreset::all_layers);

/// Encoder output with the relation bias applied. `config` must be
/// relation-aware and matrix.n must equal the token count.
Matrix enhanced_encode(const nn::TokenInput& tokens, const RelationMatrix& matrix, const nn::EncoderConfig& config,
                       nn::ParameterStore& params);

// ---------------------------------------------------------------------------
// Form-like linking corpus

struct FormConfig {
  std::size_t n_docs = 300;
  int fields_min = 3;
  int fields_max = 7;
  int notes_max = 2;
  double two_column = 0.5;  // probability of a two-column page
  double stacked = 0.5;     // probability that a value sits below its key
  int value_words_min = 1;
  int value_words_max = 3;
  double train_fraction = 0.7;
  double validation_fraction = 0.1;
};

void to_json(nlohmann::json& j, const FormConfig& c);
void from_json(const nlohmann::json& j, FormConfig& c);

/// One form page: an optional title, key/value fields and free-text notes.
/// Every key is immediately followed by its value in the reading order, and
/// links hold exactly those key -> value pairs.
Document synth_form(const FormConfig& config, Rng& rng, std::string id);
Corpus synth_forms(const FormConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Entity-linking demo

enum class LabelSource { ground_truth, pseudo };
std::string to_string(LabelSource source);
LabelSource label_source_from_string(const std::string& s);

struct ArmSpec {
  std::string name;
  bool use_rore = false;
  RelationKind kind = RelationKind::isdr;
  LabelSource source = LabelSource::ground_truth;
};

/// vanilla, isdr/ground_truth, isdr/pseudo, gsdr/ground_truth.
std::vector<ArmSpec> standard_arms();

struct DemoConfig {
  nn::EncoderConfig encoder;  // shared by every arm; relation-aware arms get the preset on top
  rop::RopConfig linker;      // head and optimizer settings of the linking model
  BiasPreset preset = BiasPreset::all_layers;
  // Source of pseudo reading orders: a saved segment-level model, or one
  // trained on the corpus's train split with the settings below.
  std::optional<std::string> pseudo_model;
  nn::EncoderConfig pseudo_encoder;
  rop::RopConfig pseudo_rop;

  DemoConfig();
};

void to_json(nlohmann::json& j, const DemoConfig& c);
void from_json(const nlohmann::json& j, DemoConfig& c);

struct ArmOutcome {
  ArmSpec spec;
  PairMetrics test;
  rop::TrainReport report;
};

struct DemoResult {
  std::vector<ArmOutcome> arms;
  // Present when a pseudo arm ran: pseudo reading order quality on the test split.
  std::optional<PairMetrics> pseudo_order;
  std::optional<double> pseudo_acyclic_rate;
  std::size_t train_documents = 0;
  std::size_t test_documents = 0;

  /// Test F1 of the named arm; throws std::out_of_range if absent.
  double f1(const std::string& arm) const;
};

nlohmann::json to_json(const DemoResult& result);

/// One linking example per document: elements are segments, the label is the
/// document's links, and relation-aware arms get a token matrix built from
/// `order` (the gold or pseudo reading order of the same document).
rop::Example linking_example(const Document& doc, const rop::RopConfig& config, const std::optional<Relation>& order,
                             RelationKind kind);

/// Trains one linking model per arm (same seed and initial values for every
/// arm) on the train split and reports pair-F1 on the test split. Throws
/// std::invalid_argument if a document has no links.
DemoResult rore_demo_entity_linking(const Corpus& corpus, const DemoConfig& config,
                                    std::span<const ArmSpec> arms, const rop::EpochCallback& on_epoch = {});

}  // namespace rorokit::rore
