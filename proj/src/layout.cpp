#include "rorokit/layout.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace rorokit {

BBox union_of(const BBox& a, const BBox& b) {
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1), std::max(a.y1, b.y1)};
}

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + s + "'");
}

Index Document::word_count() const {
  Index n = 0;
  for (const auto& seg : segments) n += seg.words.size();
  return n;
}

std::vector<std::pair<Index, Index>> Document::word_spans() const {
  std::vector<std::pair<Index, Index>> spans;
  spans.reserve(segments.size());
  Index next = 0;
  for (const auto& seg : segments) {
    spans.emplace_back(next, next + seg.words.size());
    next += seg.words.size();
  }
  return spans;
}

std::vector<const Word*> Document::words() const {
  std::vector<const Word*> out;
  for (const auto& seg : segments)
    for (const auto& w : seg.words) out.push_back(&w);
  return out;
}

std::vector<const Document*> Corpus::select(Split s) const {
  std::vector<const Document*> out;
  for (const auto& doc : documents) {
    auto it = split.find(doc.id);
    if (it != split.end() && it->second == s) out.push_back(&doc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::ordered_json box_json(const BBox& b) { return nlohmann::ordered_json::array({b.x0, b.y0, b.x1, b.y1}); }

BBox parse_box(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("box must be [x0, y0, x1, y1]");
  for (const auto& v : j)
    if (!v.is_number_integer()) throw std::invalid_argument("box coordinates must be integers");
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

std::string box_text(const BBox& b) {
  std::ostringstream os;
  os << '[' << b.x0 << ", " << b.y0 << ", " << b.x1 << ", " << b.y1 << ']';
  return os.str();
}

std::vector<std::string> structure_errors(const Document& doc) {
  std::vector<std::string> errors;
  if (doc.page_width <= 0 || doc.page_height <= 0) errors.push_back("page size must be positive");
  for (Index s = 0; s < doc.segments.size(); ++s) {
    const auto& seg = doc.segments[s];
    const std::string where = "segment " + std::to_string(s);
    if (seg.id != s) errors.push_back(where + ": id " + std::to_string(seg.id) + " is not its position");
    if (!seg.box.valid()) errors.push_back(where + ": invalid box " + box_text(seg.box));
    if (seg.words.empty()) errors.push_back(where + ": has no words");
    for (Index w = 0; w < seg.words.size(); ++w) {
      const auto& word = seg.words[w];
      if (word.text.empty()) errors.push_back(where + " word " + std::to_string(w) + ": empty text");
      if (!word.box.valid()) errors.push_back(where + " word " + std::to_string(w) + ": invalid box " + box_text(word.box));
      else if (seg.box.valid() && !seg.box.contains(word.box))
        errors.push_back(where + " word " + std::to_string(w) + ": box outside its segment");
    }
  }
  return errors;
}

void check_relation(const Relation& rel, AnnotationReport& report) {
  Relation without_self(rel.element_count());
  for (const auto& [a, b] : rel.pairs()) {
    if (a == b) report.self_pairs.push_back(a);
    else without_self.insert(a, b);
  }
  if (auto acyclic = is_acyclic(without_self); !acyclic) report.cycle = acyclic.violation->witness;
}

}  // namespace

AnnotationReport validate_annotation(const Document& doc) {
  AnnotationReport report;
  report.document_id = doc.id;
  report.structure_errors = structure_errors(doc);
  if (doc.isdr) {
    if (doc.isdr->element_count() != doc.segments.size())
      report.structure_errors.push_back("isdr element count does not match segment count");
    check_relation(*doc.isdr, report);
  }
  if (doc.links && doc.links->element_count() != doc.segments.size())
    report.structure_errors.push_back("links element count does not match segment count");
  return report;
}

AnnotationReport validate_annotation(const LoadedDocument& loaded) {
  AnnotationReport report = validate_annotation(loaded.document);
  report.structure_errors.insert(report.structure_errors.begin(), loaded.structure_errors.begin(),
                                 loaded.structure_errors.end());
  if (loaded.raw_isdr) {
    const auto n = static_cast<long long>(loaded.document.segments.size());
    std::set<std::pair<long long, long long>> seen;
    for (const auto& p : *loaded.raw_isdr) {
      if (p.from < 0 || p.to < 0 || p.from >= n || p.to >= n) {
        report.out_of_range.push_back(p);
        continue;
      }
      if (!seen.emplace(p.from, p.to).second) report.duplicates.push_back(p);
    }
  }
  return report;
}

nlohmann::json to_json(const AnnotationReport& report) {
  auto pairs = [](const std::vector<RawPair>& v) {
    auto arr = nlohmann::json::array();
    for (const auto& p : v) arr.push_back({p.from, p.to});
    return arr;
  };
  nlohmann::json j;
  j["id"] = report.document_id;
  j["ok"] = report.ok();
  j["structure_errors"] = report.structure_errors;
  j["cycle"] = report.cycle ? nlohmann::json(*report.cycle) : nlohmann::json(nullptr);
  j["out_of_range"] = pairs(report.out_of_range);
  j["duplicates"] = pairs(report.duplicates);
  j["self_pairs"] = report.self_pairs;
  return j;
}

LoadedDocument parse_document_line(const std::string& text, std::size_t line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), line);
  }

  LoadedDocument out;
  out.line = line;
  auto& doc = out.document;
  try {
    if (!j.is_object()) throw std::invalid_argument("document must be a JSON object");
    doc.id = j.at("id").get<std::string>();
    const auto& page = j.at("page");
    if (!page.is_array() || page.size() != 2) throw std::invalid_argument("page must be [width, height]");
    doc.page_width = page[0].get<int>();
    doc.page_height = page[1].get<int>();
    for (const auto& sj : j.at("segments")) {
      Segment seg;
      const auto id = sj.at("id").get<long long>();
      if (id < 0) throw std::invalid_argument("segment id must be non-negative");
      seg.id = static_cast<Index>(id);
      seg.box = parse_box(sj.at("box"));
      for (const auto& wj : sj.at("words")) seg.words.push_back({wj.at("text").get<std::string>(), parse_box(wj.at("box"))});
      doc.segments.push_back(std::move(seg));
    }
    if (auto it = j.find("isdr"); it != j.end() && !it->is_null()) {
      std::vector<RawPair> raw;
      for (const auto& p : *it) {
        if (!p.is_array() || p.size() != 2) throw std::invalid_argument("isdr pair must be [i, j]");
        raw.push_back({p[0].get<long long>(), p[1].get<long long>()});
      }
      Relation rel(doc.segments.size());
      const auto n = static_cast<long long>(doc.segments.size());
      for (const auto& p : raw)
        if (p.from >= 0 && p.to >= 0 && p.from < n && p.to < n)
          rel.insert(static_cast<Index>(p.from), static_cast<Index>(p.to));
      doc.isdr = std::move(rel);
      out.raw_isdr = std::move(raw);
    }
    if (auto it = j.find("links"); it != j.end() && !it->is_null()) {
      Relation links(doc.segments.size());
      const auto n = static_cast<long long>(doc.segments.size());
      for (const auto& p : *it) {
        if (!p.is_array() || p.size() != 2) throw std::invalid_argument("links pair must be [i, j]");
        const auto a = p[0].get<long long>(), b = p[1].get<long long>();
        if (a < 0 || b < 0 || a >= n || b >= n || a == b)
          out.structure_errors.push_back("links pair [" + std::to_string(a) + ", " + std::to_string(b) + "] is invalid");
        else
          links.insert(static_cast<Index>(a), static_cast<Index>(b));
      }
      doc.links = std::move(links);
    }
    if (auto it = j.find("split"); it != j.end()) split_from_string(it->get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("schema error: ") + e.what(), line);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("schema error: ") + e.what(), line);
  }
  return out;
}

namespace {

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw std::filesystem::filesystem_error("cannot open corpus", path, std::make_error_code(std::errc::io_error));
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    fn(text, line);
  }
}

std::optional<Split> line_split(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  if (auto it = j.find("split"); it != j.end()) return split_from_string(it->get<std::string>());
  return std::nullopt;
}

}  // namespace

std::vector<LoadedDocument> load_corpus_lenient(const std::filesystem::path& path) {
  std::vector<LoadedDocument> docs;
  for_each_line(path, [&](const std::string& text, std::size_t line) { docs.push_back(parse_document_line(text, line)); });
  return docs;
}

Corpus load_corpus(const std::filesystem::path& path) {
  Corpus corpus;
  for_each_line(path, [&](const std::string& text, std::size_t line) {
    auto loaded = parse_document_line(text, line);
    auto report = validate_annotation(loaded);
    if (!report.ok()) {
      std::string why = to_json(report).dump();
      throw ValidationError(loaded.document.id, "invalid document at line " + std::to_string(line) + ": " + why);
    }
    if (corpus.split.count(loaded.document.id))
      throw ValidationError(loaded.document.id, "duplicate document id at line " + std::to_string(line));
    corpus.split[loaded.document.id] = line_split(text).value_or(Split::train);
    corpus.documents.push_back(std::move(loaded.document));
  });
  return corpus;
}

nlohmann::ordered_json document_to_json(const Document& doc, std::optional<Split> split) {
  nlohmann::ordered_json j;
  j["id"] = doc.id;
  j["page"] = {doc.page_width, doc.page_height};
  auto segments = nlohmann::ordered_json::array();
  for (const auto& seg : doc.segments) {
    nlohmann::ordered_json sj;
    sj["id"] = seg.id;
    sj["box"] = box_json(seg.box);
    auto words = nlohmann::ordered_json::array();
    for (const auto& w : seg.words) {
      nlohmann::ordered_json wj;
      wj["text"] = w.text;
      wj["box"] = box_json(w.box);
      words.push_back(std::move(wj));
    }
    sj["words"] = std::move(words);
    segments.push_back(std::move(sj));
  }
  j["segments"] = std::move(segments);
  if (doc.isdr) {
    auto pairs = nlohmann::ordered_json::array();
    for (const auto& [a, b] : doc.isdr->pairs()) pairs.push_back({a, b});
    j["isdr"] = std::move(pairs);
  }
  if (doc.links) {
    auto pairs = nlohmann::ordered_json::array();
    for (const auto& [a, b] : doc.links->pairs()) pairs.push_back({a, b});
    j["links"] = std::move(pairs);
  }
  if (split) j["split"] = to_string(*split);
  return j;
}

std::string document_to_line(const Document& doc, std::optional<Split> split) {
  return document_to_json(doc, split).dump();
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::filesystem::filesystem_error("cannot write corpus", path, std::make_error_code(std::errc::io_error));
  for (const auto& doc : corpus.documents) {
    auto it = corpus.split.find(doc.id);
    out << document_to_line(doc, it == corpus.split.end() ? std::nullopt : std::optional<Split>(it->second)) << '\n';
  }
  if (!out) throw std::filesystem::filesystem_error("write failed", path, std::make_error_code(std::errc::io_error));
}

// ---------------------------------------------------------------------------
// Label derivation and statistics

Relation derive_word_level(const Document& doc) {
  if (!doc.isdr) throw std::invalid_argument("document '" + doc.id + "' has no isdr annotation");
  if (auto acyclic = is_acyclic(*doc.isdr); !acyclic)
    throw CycleError("document '" + doc.id + "' has a cyclic isdr", acyclic.violation->witness);

  const auto spans = doc.word_spans();
  Relation words(doc.word_count());
  for (const auto& [first, last] : spans)
    for (Index w = first; w + 1 < last; ++w) words.insert(w, w + 1);
  for (const auto& [a, b] : doc.isdr->pairs()) words.insert(spans[a].second - 1, spans[b].first);
  return words;
}

NonlinearStats nonlinear_stats(const Corpus& corpus, NonlinearDefinition def) {
  std::vector<std::string> missing;
  for (const auto& doc : corpus.documents)
    if (!doc.isdr) missing.push_back(doc.id);
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw std::invalid_argument("documents without isdr: " + list);
  }

  NonlinearStats stats;
  for (const auto& doc : corpus.documents) {
    const Index n = doc.segments.size();
    std::vector<Index> in(n, 0), out(n, 0);
    for (const auto& [a, b] : doc.isdr->pairs()) {
      ++out[a];
      ++in[b];
    }
    DocumentNonlinearity d{doc.id, n, 0};
    for (Index s = 0; s < n; ++s) {
      const bool flagged = def == NonlinearDefinition::degree ? (in[s] >= 2 || out[s] >= 2) : (in[s] == 1 && out[s] == 1);
      d.nonlinear += flagged ? 1 : 0;
    }
    stats.segments += d.segments;
    stats.nonlinear += d.nonlinear;
    stats.per_document.push_back(std::move(d));
  }
  if (stats.segments > 0) stats.fraction = static_cast<double>(stats.nonlinear) / static_cast<double>(stats.segments);
  return stats;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats s;
  s.documents = corpus.documents.size();
  for (const auto& doc : corpus.documents) {
    s.segments += doc.segments.size();
    s.words += doc.word_count();
    s.pairs += doc.isdr ? doc.isdr->size() : 0;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Synthetic generation

std::string to_string(LayoutKind kind) {
  switch (kind) {
    case LayoutKind::chain: return "chain";
    case LayoutKind::two_column: return "two-column";
    case LayoutKind::grid: return "grid";
    case LayoutKind::header_footer: return "header-footer";
  }
  return "chain";
}

void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = nlohmann::json{{"n_docs", c.n_docs},
                     {"mix",
                      {{"chain", c.mix.chain},
                       {"two_column", c.mix.two_column},
                       {"grid", c.mix.grid},
                       {"header_footer", c.mix.header_footer}}},
                     {"grid_min", c.grid_min},
                     {"grid_max", c.grid_max},
                     {"chain_min", c.chain_min},
                     {"chain_max", c.chain_max},
                     {"column_min", c.column_min},
                     {"column_max", c.column_max},
                     {"words_min", c.words_min},
                     {"words_max", c.words_max},
                     {"train_fraction", c.train_fraction},
                     {"validation_fraction", c.validation_fraction}};
}

void from_json(const nlohmann::json& j, SynthConfig& c) {
  c.n_docs = j.value("n_docs", c.n_docs);
  if (auto it = j.find("mix"); it != j.end()) {
    c.mix.chain = it->value("chain", c.mix.chain);
    c.mix.two_column = it->value("two_column", c.mix.two_column);
    c.mix.grid = it->value("grid", c.mix.grid);
    c.mix.header_footer = it->value("header_footer", c.mix.header_footer);
  }
  c.grid_min = j.value("grid_min", c.grid_min);
  c.grid_max = j.value("grid_max", c.grid_max);
  c.chain_min = j.value("chain_min", c.chain_min);
  c.chain_max = j.value("chain_max", c.chain_max);
  c.column_min = j.value("column_min", c.column_min);
  c.column_max = j.value("column_max", c.column_max);
  c.words_min = j.value("words_min", c.words_min);
  c.words_max = j.value("words_max", c.words_max);
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
}

namespace {

constexpr std::array kVocabulary = {
    "lorem", "ipsum", "dolor", "sit",    "amet",  "porta",  "nulla", "vitae", "magna", "fusce", "donec",
    "augue", "morbi", "risus", "purus",  "felis", "metus",  "netus", "orci",  "quam",  "urna",  "velit",
    "eros",  "odio",  "justo", "lectus", "mauris", "tellus", "turpis", "varius", "semper", "dictum",
};

int uniform(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

std::vector<std::string> random_texts(Rng& rng, int lo, int hi) {
  std::vector<std::string> texts(static_cast<std::size_t>(uniform(rng, lo, hi)));
  for (auto& t : texts) t = random_word(rng);
  return texts;
}

// A segment spanning [x0, x0 + width) whose height follows its wrapped text.
Segment text_segment(Index id, std::vector<std::string> texts, int x0, int y0, int width) {
  Segment seg;
  seg.id = id;
  int bottom = y0;
  seg.words = place_words(texts, x0 + kSegmentPadding, y0 + kSegmentPadding, width - 2 * kSegmentPadding, bottom);
  seg.box = {x0, y0, x0 + width, bottom + kSegmentPadding};
  return seg;
}

void add_chain(Relation& rel, Index first, Index count) {
  for (Index k = 0; k + 1 < count; ++k) rel.insert(first + k, first + k + 1);
}

void check_fits(const Document& doc) {
  for (const auto& seg : doc.segments)
    if (!seg.box.valid() || seg.box.x1 > doc.page_width || seg.box.y1 > doc.page_height)
      throw GenerationError("document '" + doc.id + "': segments do not fit on the page");
}

}  // namespace

int text_width(const std::string& text) { return 8 * static_cast<int>(text.size()); }

std::string random_word(Rng& rng) {
  return kVocabulary[std::uniform_int_distribution<std::size_t>(0, kVocabulary.size() - 1)(rng)];
}

std::vector<Word> place_words(const std::vector<std::string>& texts, int x0, int y0, int max_width, int& bottom) {
  constexpr int kWordGap = 6;
  std::vector<Word> words;
  int x = x0;
  int y = y0;
  for (const auto& t : texts) {
    const int w = text_width(t);
    if (x > x0 && x + w > x0 + max_width) {
      x = x0;
      y += kLineHeight;
    }
    words.push_back({t, {x, y, x + w, y + kGlyphHeight}});
    x += w + kWordGap;
  }
  bottom = y + kGlyphHeight;
  return words;
}

Document synth_document(const LayoutSpec& spec, Rng& rng, std::string id) {
  if (spec.rows < 1 || spec.cols < 1 || spec.words_min < 1 || spec.words_max < spec.words_min)
    throw std::invalid_argument("layout spec needs positive counts");
  Document doc;
  doc.id = std::move(id);
  auto& segs = doc.segments;
  auto texts = [&] { return random_texts(rng, spec.words_min, spec.words_max); };
  const int gap = uniform(rng, 8, 16);

  auto column = [&](int x0, int y, int width, int count) {
    for (int k = 0; k < count; ++k) {
      segs.push_back(text_segment(segs.size(), texts(), x0, y, width));
      y = segs.back().box.y1 + gap;
    }
  };

  switch (spec.kind) {
    case LayoutKind::chain: {
      const int x0 = uniform(rng, 40, 120);
      column(x0, uniform(rng, 30, 150), uniform(rng, 400, std::min(800, 960 - x0)), spec.rows);
      doc.isdr = Relation(segs.size());
      add_chain(*doc.isdr, 0, segs.size());
      break;
    }
    case LayoutKind::two_column: {
      const int left = uniform(rng, 30, 60);
      const int width = uniform(rng, 340, 400);
      const int gutter = uniform(rng, 40, 80);
      const int top = uniform(rng, 30, 120);
      column(left, top, width, spec.rows);
      column(left + width + gutter, top + uniform(rng, 0, 40), width, spec.cols);
      doc.isdr = Relation(segs.size());
      add_chain(*doc.isdr, 0, spec.rows);
      add_chain(*doc.isdr, spec.rows, spec.cols);
      break;
    }
    case LayoutKind::grid: {
      const int left = uniform(rng, 40, 100);
      const int total = uniform(rng, 600, std::min(880, 960 - left));
      const int cell = (total - (spec.cols - 1) * gap) / spec.cols;
      int y = uniform(rng, 30, 200);
      for (int r = 0; r < spec.rows; ++r) {
        int bottom = y;
        const Index row_start = segs.size();
        for (int c = 0; c < spec.cols; ++c) {
          const int x0 = left + c * (cell + gap);
          int text_bottom = y;
          Segment seg;
          seg.id = segs.size();
          seg.words = place_words(texts(), x0 + kSegmentPadding, y + kSegmentPadding, cell - 2 * kSegmentPadding, text_bottom);
          seg.box = {x0, y, x0 + cell, 0};
          bottom = std::max(bottom, text_bottom + kSegmentPadding);
          segs.push_back(std::move(seg));
        }
        for (Index s = row_start; s < segs.size(); ++s) segs[s].box.y1 = bottom;
        y = bottom + gap;
      }
      doc.isdr = Relation(segs.size());
      const auto at = [&](int r, int c) { return static_cast<Index>(r * spec.cols + c); };
      for (int r = 0; r < spec.rows; ++r)
        for (int c = 0; c < spec.cols; ++c) {
          if (c + 1 < spec.cols) doc.isdr->insert(at(r, c), at(r, c + 1));
          if (r + 1 < spec.rows) doc.isdr->insert(at(r, c), at(r + 1, c));
        }
      break;
    }
    case LayoutKind::header_footer: {
      const int x0 = uniform(rng, 40, 120);
      const int width = uniform(rng, 400, std::min(800, 960 - x0));
      segs.push_back(text_segment(0, texts(), x0, uniform(rng, 15, 40), width));
      column(x0, segs.back().box.y1 + uniform(rng, 40, 80), width, spec.rows);
      const int body_bottom = segs.back().box.y1;
      auto footer = text_segment(segs.size(), texts(), x0, uniform(rng, 920, 940), width);
      if (footer.box.y0 < body_bottom + 20) throw GenerationError("document '" + doc.id + "': body runs into the footer");
      segs.push_back(std::move(footer));
      doc.isdr = Relation(segs.size());
      add_chain(*doc.isdr, 1, spec.rows);
      break;
    }
  }
  check_fits(doc);
  return doc;
}

Corpus synth_generate(const SynthConfig& config, std::uint64_t seed) {
  if (config.grid_min < 1 || config.grid_max < config.grid_min || config.chain_min < 1 ||
      config.chain_max < config.chain_min || config.column_min < 1 || config.column_max < config.column_min ||
      config.words_min < 1 || config.words_max < config.words_min)
    throw std::invalid_argument("synth config needs positive, ordered ranges");
  const std::array weights = {config.mix.chain, config.mix.two_column, config.mix.grid, config.mix.header_footer};
  if (std::any_of(weights.begin(), weights.end(), [](double w) { return w < 0; }) ||
      std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0; }))
    throw std::invalid_argument("layout mix needs non-negative weights with a positive sum");

  Rng rng(seed);
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  Corpus corpus;
  const auto n_train = static_cast<std::size_t>(std::llround(config.train_fraction * config.n_docs));
  const auto n_val = std::min(config.n_docs - std::min(n_train, config.n_docs),
                              static_cast<std::size_t>(std::llround(config.validation_fraction * config.n_docs)));
  for (std::size_t i = 0; i < config.n_docs; ++i) {
    LayoutSpec spec;
    spec.kind = static_cast<LayoutKind>(pick(rng));
    spec.words_min = config.words_min;
    spec.words_max = config.words_max;
    switch (spec.kind) {
      case LayoutKind::chain:
      case LayoutKind::header_footer: spec.rows = uniform(rng, config.chain_min, config.chain_max); break;
      case LayoutKind::two_column:
        spec.rows = uniform(rng, config.column_min, config.column_max);
        spec.cols = uniform(rng, config.column_min, config.column_max);
        break;
      case LayoutKind::grid:
        spec.rows = uniform(rng, config.grid_min, config.grid_max);
        spec.cols = uniform(rng, config.grid_min, config.grid_max);
        break;
    }
    char serial[16];
    std::snprintf(serial, sizeof serial, "%05zu", i);
    const std::string id = "synth-" + std::string(serial) + "-" + to_string(spec.kind);
    corpus.documents.push_back(synth_document(spec, rng, id));
    corpus.split[id] = i < n_train ? Split::train : (i < n_train + n_val ? Split::validation : Split::test);
  }
  return corpus;
}

}  // namespace rorokit
