#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rorokit/layout.hpp"
#include "rorokit/metrics.hpp"
#include "rorokit/nn/encoder.hpp"
#include "rorokit/nn/optim.hpp"

namespace rorokit::rop {

using nn::Matrix;
using Span = std::pair<Eigen::Index, Eigen::Index>;

enum class Level { word, segment };
std::string to_string(Level level);
Level level_from_string(const std::string& s);

struct RopConfig {
  Level task_level = Level::segment;
  Level bbox_level = Level::segment;
  int max_elements = 0;  // 0: 512 for word level, 256 for segment level
  int max_tokens = 2048;
  int head_size = 128;
  double threshold = 0.0;
  bool mask_diagonal = false;   // drop i == j from the negative sum of the loss
  bool enforce_acyclic = false; // post-hoc cycle repair at decode time
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  int epochs = 200;
  int patience = 20;
  int batch_size = 8;

  int element_limit() const { return max_elements > 0 ? max_elements : (task_level == Level::word ? 512 : 256); }
};

void to_json(nlohmann::json& j, const RopConfig& c);
void from_json(const nlohmann::json& j, RopConfig& c);

/// W_q, W_k are d x head_size; b_q, b_k are 1 x head_size.
struct GlobalPointerHead {
  Matrix wq, wk, bq, bk;
};

inline constexpr const char* kHeadWq = "gp.Wq";
inline constexpr const char* kHeadWk = "gp.Wk";
inline constexpr const char* kHeadBq = "gp.bq";
inline constexpr const char* kHeadBk = "gp.bk";

void init_head(nn::ParameterStore& store, int model_dim, int head_size, std::uint64_t seed);
GlobalPointerHead head_from(const nn::ParameterStore& store);

// ---------------------------------------------------------------------------
// Forward pieces

/// Row i is the mean of token rows in spans[i]. Spans must partition
/// [0, n) in order with no empty span.
Matrix pool_elements(const Matrix& token_embeddings, std::span<const Span> spans);
nn::Var pool_elements(nn::Var token_embeddings, std::span<const Span> spans);
void check_spans(std::span<const Span> spans, Eigen::Index tokens);

/// s_ij = (W_q h_i + b_q)^T (W_k h_j + b_k), diagonal included.
Matrix score_pairs(const Matrix& elements, const GlobalPointerHead& head);
nn::Var score_pairs(nn::Tape& tape, nn::Var elements, nn::ParameterStore& store);

/// log(1 + sum_{(i,j) not in L} e^{s_ij}) + log(1 + sum_{(i,j) in L} e^{-s_ij})
/// over all ordered pairs; with mask_diagonal the i == j entries leave the
/// negative sum.
double gp_loss(const Matrix& scores, const Relation& label, bool mask_diagonal = false);
/// Closed-form d loss / d s.
Matrix gp_loss_gradient(const Matrix& scores, const Relation& label, bool mask_diagonal = false);
nn::Var gp_loss(nn::Var scores, const Relation& label, bool mask_diagonal = false);

/// {(i, j) | s_ij > threshold}. With enforce_acyclic, the lowest-scoring
/// edge of the first cycle found is removed until none remain.
Relation decode(const Matrix& scores, double threshold = 0.0, bool enforce_acyclic = false);

// ---------------------------------------------------------------------------
// Examples and model

struct Example {
  std::string doc_id;
  nn::TokenInput tokens;
  std::vector<Span> spans;  // element -> token range
  std::optional<Relation> label;
  std::optional<Matrix> rho;  // token relation matrix for relation-aware encoders
};

/// Tokens are the document's words; boxes come from the word or its segment
/// per bbox_level; elements are words or segments per task_level. Labels are
/// the segment isdr or its word-level derivation.
Example make_example(const Document& doc, const RopConfig& config);

struct RopModel {
  nn::EncoderConfig encoder;
  RopConfig config;
  nn::ParameterStore params;
};

RopModel init_model(const nn::EncoderConfig& encoder, const RopConfig& config);

/// Element score matrix for one example.
Matrix predict_scores(RopModel& model, const Example& example);
Relation predict(RopModel& model, const Document& doc);

/// Scalar training loss of one example on an existing tape.
nn::Var example_loss(nn::Tape& tape, RopModel& model, const Example& example);

nlohmann::json model_config_json(const RopModel& model);
void save_model(const RopModel& model, const std::filesystem::path& path);
RopModel load_model(const std::filesystem::path& path);
RopModel model_from_checkpoint(nn::Checkpoint checkpoint);

// ---------------------------------------------------------------------------
// Training

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double validation_f1 = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_validation_f1 = 0.0;
  std::size_t train_examples = 0;
  std::size_t validation_examples = 0;
  std::vector<std::string> skipped;  // documents over the element or token limit
  bool validation_is_train = false;
};

nlohmann::json to_json(const TrainReport& report);

struct TrainResult {
  RopModel model;
  TrainReport report;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains on the corpus's train split with early stopping on validation
/// pair-F1 (the train split stands in when there is no validation split)
/// and returns the best-validation parameters.
TrainResult train(const Corpus& corpus, const RopConfig& config, const nn::EncoderConfig& encoder,
                  const EpochCallback& on_epoch = {});

/// Shared loop: trains `model` on prepared examples; `evaluate` returns the
/// validation score used for early stopping.
TrainReport fit(RopModel& model, std::span<const Example> train_set, const std::function<double()>& evaluate,
                const EpochCallback& on_epoch = {});

PairMetrics evaluate_examples(RopModel& model, std::span<const Example> examples);

struct PseudoLabelReport {
  struct Entry {
    bool acyclic = true;
    std::size_t num_pairs = 0;
  };
  std::map<std::string, Entry> documents;
  std::vector<std::string> skipped;
  double acyclic_rate() const;
};

nlohmann::json to_json(const PseudoLabelReport& report);

/// Fills every document's isdr with the model's decoded segment relation.
Corpus predict_pseudo_labels(RopModel& model, const Corpus& corpus, PseudoLabelReport* report = nullptr);

}  // namespace rorokit::rop
