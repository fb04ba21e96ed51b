#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rorokit/order.hpp"

namespace rorokit {

inline constexpr int kCoordMax = 1000;

/// Axis-aligned box in normalized page coordinates [0, 1000], top-left
/// origin, y growing downward.
struct BBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool valid() const {
    return 0 <= x0 && x0 <= x1 && x1 <= kCoordMax && 0 <= y0 && y0 <= y1 && y1 <= kCoordMax;
  }
  bool contains(const BBox& o) const { return x0 <= o.x0 && y0 <= o.y0 && o.x1 <= x1 && o.y1 <= y1; }
  bool overlaps(const BBox& o) const { return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1; }
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  double center_x() const { return 0.5 * (x0 + x1); }
  double center_y() const { return 0.5 * (y0 + y1); }

  friend bool operator==(const BBox&, const BBox&) = default;
};

BBox union_of(const BBox& a, const BBox& b);

struct Word {
  std::string text;
  BBox box;
  friend bool operator==(const Word&, const Word&) = default;
};

struct Segment {
  Index id = 0;
  std::vector<Word> words;  // within-segment reading order
  BBox box;
  friend bool operator==(const Segment&, const Segment&) = default;
};

enum class Split { train, validation, test };
std::string to_string(Split split);
Split split_from_string(const std::string& s);

struct Document {
  std::string id;
  int page_width = kCoordMax;
  int page_height = kCoordMax;
  std::vector<Segment> segments;
  std::optional<Relation> isdr;   // over segments
  std::optional<Relation> links;  // entity links (key -> value) over segments

  Index word_count() const;
  /// Half-open global word range [first, last) of every segment.
  std::vector<std::pair<Index, Index>> word_spans() const;
  std::vector<const Word*> words() const;

  friend bool operator==(const Document&, const Document&) = default;
};

struct Corpus {
  std::vector<Document> documents;
  std::map<std::string, Split> split;

  std::vector<const Document*> select(Split s) const;
  friend bool operator==(const Corpus&, const Corpus&) = default;
};

class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

class ValidationError : public std::runtime_error {
public:
  ValidationError(const std::string& document_id, const std::string& what)
      : std::runtime_error("document '" + document_id + "': " + what), document_id_(document_id) {}
  const std::string& document_id() const { return document_id_; }

private:
  std::string document_id_;
};

/// A signed pair exactly as written in the file, before range checks.
struct RawPair {
  long long from = 0;
  long long to = 0;
  friend bool operator==(const RawPair&, const RawPair&) = default;
};

/// What a lenient read of one corpus line produced. `document.isdr` holds
/// only the in-range pairs; the original list is kept for diagnostics.
struct LoadedDocument {
  Document document;
  std::optional<std::vector<RawPair>> raw_isdr;
  std::vector<std::string> structure_errors;
  std::size_t line = 0;
};

struct AnnotationReport {
  std::string document_id;
  std::vector<std::string> structure_errors;
  std::optional<std::vector<Index>> cycle;
  std::vector<RawPair> out_of_range;
  std::vector<RawPair> duplicates;
  std::vector<Index> self_pairs;

  bool ok() const {
    return structure_errors.empty() && !cycle && out_of_range.empty() && duplicates.empty() && self_pairs.empty();
  }
};

AnnotationReport validate_annotation(const Document& doc);
AnnotationReport validate_annotation(const LoadedDocument& loaded);
nlohmann::json to_json(const AnnotationReport& report);

/// Parses one JSON line. Throws ParseError on malformed JSON or schema type
/// errors; geometry and annotation problems are collected, not thrown.
LoadedDocument parse_document_line(const std::string& text, std::size_t line);
std::vector<LoadedDocument> load_corpus_lenient(const std::filesystem::path& path);

/// Strict load: every document must pass validate_annotation.
Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

nlohmann::ordered_json document_to_json(const Document& doc, std::optional<Split> split = std::nullopt);
std::string document_to_line(const Document& doc, std::optional<Split> split = std::nullopt);

/// Word-level reading order: consecutive words inside each segment, plus
/// (last word of A, first word of B) for every segment pair (A, B).
Relation derive_word_level(const Document& doc);

enum class NonlinearDefinition {
  degree,   // in-degree >= 2 or out-degree >= 2
  literal,  // exactly one predecessor and exactly one successor
};

struct DocumentNonlinearity {
  std::string id;
  Index segments = 0;
  Index nonlinear = 0;
};

struct NonlinearStats {
  std::optional<double> fraction;  // empty when the corpus has no segments
  Index segments = 0;
  Index nonlinear = 0;
  std::vector<DocumentNonlinearity> per_document;
};

NonlinearStats nonlinear_stats(const Corpus& corpus, NonlinearDefinition def = NonlinearDefinition::degree);

struct CorpusStats {
  Index documents = 0;
  Index segments = 0;
  Index words = 0;
  Index pairs = 0;
};

CorpusStats corpus_stats(const Corpus& corpus);

// ---------------------------------------------------------------------------
// Synthetic layouts

enum class LayoutKind { chain, two_column, grid, header_footer };
std::string to_string(LayoutKind kind);

struct LayoutMix {
  double chain = 1.0;
  double two_column = 1.0;
  double grid = 1.0;
  double header_footer = 0.0;
};

struct SynthConfig {
  std::size_t n_docs = 100;
  LayoutMix mix;
  int grid_min = 2;  // rows and columns drawn from [grid_min, grid_max]
  int grid_max = 4;
  int chain_min = 3;
  int chain_max = 8;
  int column_min = 2;  // segments per column
  int column_max = 5;
  int words_min = 1;
  int words_max = 3;
  double train_fraction = 0.8;
  double validation_fraction = 0.0;
};

void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);

class GenerationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

/// Shape parameters of one synthetic page.
struct LayoutSpec {
  LayoutKind kind = LayoutKind::chain;
  int rows = 1;   // grid rows, or chain length
  int cols = 1;   // grid columns; for two_column the right column length
  int words_min = 1;
  int words_max = 3;
};

Document synth_document(const LayoutSpec& spec, Rng& rng, std::string id);
Corpus synth_generate(const SynthConfig& config, std::uint64_t seed);

/// Lays out word texts left to right from (x0, y0), wrapping at max_width.
/// Returns the placed words; `bottom` receives the last line's bottom edge.
std::vector<Word> place_words(const std::vector<std::string>& texts, int x0, int y0, int max_width, int& bottom);
int text_width(const std::string& text);
std::string random_word(Rng& rng);

inline constexpr int kLineHeight = 20;
inline constexpr int kGlyphHeight = 16;
inline constexpr int kSegmentPadding = 4;

}  // namespace rorokit
