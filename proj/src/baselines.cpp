#include "rorokit/baselines.hpp"

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

namespace rorokit::eval {

Permutation heuristic_reading_order(const Document& doc) {
  const auto n = static_cast<Index>(doc.segments.size());
  Permutation order(n);
  std::iota(order.begin(), order.end(), Index{0});
  if (n == 0) return order;

  std::vector<int> heights;
  heights.reserve(n);
  for (const auto& s : doc.segments) heights.push_back(s.box.height());
  std::nth_element(heights.begin(), heights.begin() + n / 2, heights.end());
  double median = heights[n / 2];
  if (n % 2 == 0) {
    const int lower = *std::max_element(heights.begin(), heights.begin() + n / 2);
    median = 0.5 * (median + lower);
  }
  const double threshold = 0.5 * median;

  auto cy = [&](Index i) { return doc.segments[i].box.center_y(); };
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return cy(a) < cy(b); });

  std::vector<std::vector<Index>> bands{{order[0]}};
  for (Index k = 1; k < n; ++k) {
    if (cy(order[k]) - cy(order[k - 1]) > threshold) bands.emplace_back();
    bands.back().push_back(order[k]);
  }
  Permutation out;
  out.reserve(n);
  for (auto& band : bands) {
    std::stable_sort(band.begin(), band.end(),
                     [&](Index a, Index b) { return doc.segments[a].box.x0 < doc.segments[b].box.x0; });
    out.insert(out.end(), band.begin(), band.end());
  }
  return out;
}

std::vector<Index> expand_segment_order(std::span<const Index> segment_order, const Document& doc) {
  validate_permutation(segment_order, doc.segments.size());
  const auto spans = doc.word_spans();
  std::vector<Index> words;
  words.reserve(doc.word_count());
  for (Index s : segment_order)
    for (Index w = spans[s].first; w < spans[s].second; ++w) words.push_back(w);
  return words;
}

Relation sequence_to_relation(std::span<const Index> word_sequence, const Document& doc, rop::Level level) {
  validate_permutation(word_sequence, doc.word_count());
  if (level == rop::Level::word) return permutation_to_relation(word_sequence);

  std::vector<Index> owner;
  owner.reserve(doc.word_count());
  for (const auto& seg : doc.segments)
    for (std::size_t k = 0; k < seg.words.size(); ++k) owner.push_back(seg.id);
  std::vector<bool> seen(doc.segments.size(), false);
  Permutation segments;
  for (Index w : word_sequence)
    if (!seen[owner[w]]) {
      seen[owner[w]] = true;
      segments.push_back(owner[w]);
    }
  // Segments without words never appear; they keep their index order at the end.
  for (Index s = 0; s < doc.segments.size(); ++s)
    if (!seen[s]) segments.push_back(s);
  return permutation_to_relation(segments);
}

Relation gold_relation(const Document& doc, rop::Level level) {
  if (!doc.isdr) throw std::invalid_argument("document '" + doc.id + "' has no isdr");
  return level == rop::Level::segment ? *doc.isdr : derive_word_level(doc);
}

PermutationRecall permutation_ceiling(const Relation& gold) {
  return gold.element_count() <= kBruteForceLimit ? best_permutation_recall(gold) : max_adjacency_cover(gold);
}

std::string to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::model: return "model";
    case SystemKind::heuristic: return "heuristic";
    case SystemKind::permutation_oracle: return "permutation_oracle";
  }
  return "heuristic";
}

unsigned threads_from_env() {
  const char* raw = std::getenv("ROROKIT_THREADS");
  if (!raw || !*raw) return 1;
  char* end = nullptr;
  const long v = std::strtol(raw, &end, 10);
  if (*end != '\0' || v < 1) throw std::invalid_argument("ROROKIT_THREADS must be a positive integer");
  return static_cast<unsigned>(v);
}

namespace {

struct DocResult {
  std::vector<PairMetrics> per_system;
  std::vector<bool> skipped;
  double best_recall = 1.0;
};

DocResult score_document(const Document& doc, std::span<const System> systems, std::vector<rop::RopModel>& models,
                         rop::Level level) {
  const Relation gold = gold_relation(doc, level);
  DocResult r;
  r.best_recall = permutation_ceiling(gold).recall;
  std::size_t model_slot = 0;
  for (const auto& sys : systems) {
    Relation pred(gold.element_count());
    bool skipped = false;
    switch (sys.kind) {
      case SystemKind::heuristic: {
        const auto words = expand_segment_order(heuristic_reading_order(doc), doc);
        pred = sequence_to_relation(words, doc, level);
        break;
      }
      case SystemKind::permutation_oracle:
        pred = permutation_to_relation(permutation_ceiling(gold).permutation);
        break;
      case SystemKind::model:
        try {
          pred = rop::predict(models[model_slot], doc);
        } catch (const SizeLimitError&) {
          skipped = true;
        } catch (const nn::TokenOverflow&) {
          skipped = true;
        }
        ++model_slot;
        break;
    }
    r.per_system.push_back(pair_f1(gold, pred));
    r.skipped.push_back(skipped);
  }
  return r;
}

}  // namespace

BenchmarkReport benchmark_report(const Corpus& corpus, std::span<const System> systems, const BenchmarkOptions& options) {
  for (const auto& sys : systems) {
    if (sys.kind != SystemKind::model) continue;
    if (!sys.model) throw std::invalid_argument("system '" + sys.name + "' needs a model");
    if (sys.model->config.task_level != options.level)
      throw std::invalid_argument("system '" + sys.name + "' predicts at " + rop::to_string(sys.model->config.task_level) +
                                  " level, benchmark is at " + rop::to_string(options.level) + " level");
  }
  std::vector<const Document*> docs;
  for (const auto& d : corpus.documents) {
    if (options.split) {
      auto it = corpus.split.find(d.id);
      if (it == corpus.split.end() || it->second != *options.split) continue;
    }
    docs.push_back(&d);
  }

  std::vector<DocResult> results(docs.size());
  const unsigned workers = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(docs.size())));
  auto run = [&](unsigned worker) {
    std::vector<rop::RopModel> models;
    for (const auto& sys : systems)
      if (sys.kind == SystemKind::model) models.push_back(*sys.model);
    for (std::size_t i = worker; i < docs.size(); i += workers) results[i] = score_document(*docs[i], systems, models, options.level);
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }

  BenchmarkReport report;
  for (const auto& sys : systems) report.systems.push_back({sys.name, sys.kind, {}, docs.size(), {}});
  double recall_sum = 0.0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    recall_sum += results[i].best_recall;
    for (std::size_t s = 0; s < systems.size(); ++s) {
      report.systems[s].metrics += results[i].per_system[s];
      if (results[i].skipped[s]) report.systems[s].skipped.push_back(docs[i]->id);
    }
  }
  report.ceiling_docs = docs.size();
  report.mean_best_recall = docs.empty() ? 1.0 : recall_sum / static_cast<double>(docs.size());
  return report;
}

nlohmann::json to_json(const BenchmarkReport& report) {
  auto systems = nlohmann::json::array();
  for (const auto& s : report.systems) {
    nlohmann::json j = {{"name", s.name},
                        {"precision", s.metrics.precision()},
                        {"recall", s.metrics.recall()},
                        {"f1", s.metrics.f1()},
                        {"docs", s.docs}};
    if (!s.skipped.empty()) j["skipped"] = s.skipped;
    systems.push_back(std::move(j));
  }
  return {{"systems", std::move(systems)}, {"ceiling", {{"mean_best_recall", report.mean_best_recall}}}};
}

std::string format_table(const BenchmarkReport& report) {
  std::size_t width = std::string("system").size();
  for (const auto& s : report.systems) width = std::max(width, s.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "system" << std::right << std::setw(11) << "precision"
     << std::setw(9) << "recall" << std::setw(9) << "f1" << std::setw(7) << "docs" << '\n';
  os << std::fixed << std::setprecision(4);
  for (const auto& s : report.systems)
    os << std::left << std::setw(static_cast<int>(width)) << s.name << std::right << std::setw(11) << s.metrics.precision()
       << std::setw(9) << s.metrics.recall() << std::setw(9) << s.metrics.f1() << std::setw(7) << s.docs << '\n';
  os << "permutation ceiling (mean best recall): " << report.mean_best_recall << " over " << report.ceiling_docs
     << " documents\n";
  return os.str();
}

}  // namespace rorokit::eval
