#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rorokit/baselines.hpp"
#include "rorokit/rore.hpp"

namespace rorokit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// Writes to the file if given, otherwise to the stream.
void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty())
    out << text;
  else
    write_text(path, text);
}

void emit_json(const json& j, const std::string& path, std::ostream& out) { emit(j.dump(2) + "\n", path, out); }

json read_json(const std::string& path) {
  if (path.empty()) return json::object();
  return json::parse(read_text(path));
}

template <class T>
T section(const json& config, const char* key) {
  T value{};
  if (config.contains(key)) from_json(config.at(key), value);
  return value;
}

json fraction_json(const std::optional<double>& f) { return f ? json(*f) : json("n/a"); }

std::string fraction_text(const std::optional<double>& f) {
  if (!f) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * *f << "%";
  return os.str();
}

struct Options {
  int verbosity = 0;
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string output;
  std::string report;
  std::string input;
  std::string model;
  std::vector<std::string> models;
  std::string predictions;
  std::string doc_id;
  std::string corpus;
};

// ---------------------------------------------------------------------------

int cmd_validate(const Options& o, std::ostream& out, std::ostream& err) {
  const auto loaded = load_corpus_lenient(o.input);
  json invalid = json::array();
  std::size_t acyclic = 0;
  for (const auto& doc : loaded) {
    const auto report = validate_annotation(doc);
    if (!report.cycle && doc.document.isdr) ++acyclic;
    if (!report.ok()) {
      invalid.push_back(to_json(report));
      err << "invalid: " << doc.document.id << " (line " << doc.line << ")\n";
    }
  }
  const json j = {{"documents", loaded.size()},
                  {"valid", loaded.size() - invalid.size()},
                  {"acyclic_rate", loaded.empty() ? 1.0 : static_cast<double>(acyclic) / static_cast<double>(loaded.size())},
                  {"invalid", invalid}};
  emit_json(j, o.output, out);
  return invalid.empty() ? kExitOk : kExitDomain;
}

int cmd_stats(const Options& o, std::ostream& out, std::ostream& err) {
  const Corpus corpus = load_corpus(o.input);
  const auto s = corpus_stats(corpus);
  const auto degree = nonlinear_stats(corpus, NonlinearDefinition::degree);
  const auto literal = nonlinear_stats(corpus, NonlinearDefinition::literal);
  const json j = {{"documents", s.documents},
                  {"segments", s.segments},
                  {"words", s.words},
                  {"pairs", s.pairs},
                  {"nonlinear_fraction", {{"degree", fraction_json(degree.fraction)}, {"literal", fraction_json(literal.fraction)}}},
                  {"nonlinear_segments", {{"degree", degree.nonlinear}, {"literal", literal.nonlinear}}}};
  emit_json(j, o.output, out);
  err << "documents  " << s.documents << "\nsegments   " << s.segments << "\nwords      " << s.words << "\npairs      "
      << s.pairs << "\nnon-linear " << fraction_text(degree.fraction) << " (degree), " << fraction_text(literal.fraction)
      << " (literal)\n";
  return kExitOk;
}

int cmd_closure(const Options& o, std::ostream& out, std::ostream&) {
  const Relation rel = json::parse(read_text(o.input)).get<Relation>();
  emit(json(transitive_closure(rel)).dump() + "\n", o.output, out);
  return kExitOk;
}

int cmd_convert(const Options& o, std::ostream& out, std::ostream&) {
  const Corpus corpus = load_corpus(o.input);
  std::string text;
  for (const auto& doc : corpus.documents) {
    json line = derive_word_level(doc);
    line["id"] = doc.id;
    line["level"] = "word";
    text += line.dump() + "\n";
  }
  emit(text, o.output, out);
  return kExitOk;
}

int cmd_synth(const Options& o, std::ostream& out, std::ostream& err) {
  const json config = read_json(o.config);
  const std::uint64_t seed = o.seed.value_or(0);
  Corpus corpus;
  if (config.contains("forms"))
    corpus = rore::synth_forms(section<rore::FormConfig>(config, "forms"), seed);
  else
    corpus = synth_generate(section<SynthConfig>(config, "synth"), seed);
  if (o.output.empty()) {
    for (const auto& d : corpus.documents) {
      auto it = corpus.split.find(d.id);
      out << document_to_line(d, it == corpus.split.end() ? std::nullopt : std::optional<Split>(it->second)) << "\n";
    }
  } else {
    save_corpus(corpus, o.output);
  }
  if (o.verbosity > 0) err << "generated " << corpus.documents.size() << " documents\n";
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const json config = read_json(o.config);
  const Corpus corpus = load_corpus(o.input);
  auto rc = section<rop::RopConfig>(config, "rop");
  const auto ec = section<nn::EncoderConfig>(config, "encoder");
  if (o.seed) rc.seed = *o.seed;
  rop::EpochCallback progress;
  if (o.verbosity > 0)
    progress = [&err](const rop::EpochRecord& e) {
      err << "epoch " << e.epoch << " loss " << e.mean_loss << " val_f1 " << e.validation_f1 << "\n";
    };
  const auto result = rop::train(corpus, rc, ec, progress);
  rop::save_model(result.model, o.output);
  emit_json(to_json(result.report), o.report, out);
  err << "best epoch " << result.report.best_epoch << ", validation F1 " << result.report.best_validation_f1 << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  const json config = read_json(o.config);
  const Corpus corpus = load_corpus(o.input);
  const json ev = config.value("eval", json::object());

  eval::BenchmarkOptions opt;
  opt.threads = eval::threads_from_env();
  if (ev.contains("split")) opt.split = split_from_string(ev.at("split").get<std::string>());

  std::vector<rop::RopModel> models;
  for (const auto& path : o.models) models.push_back(rop::load_model(path));
  if (ev.contains("level"))
    opt.level = rop::level_from_string(ev.at("level").get<std::string>());
  else if (!models.empty())
    opt.level = models.front().config.task_level;

  std::vector<eval::System> systems;
  for (std::size_t i = 0; i < models.size(); ++i)
    systems.push_back({fs::path(o.models[i]).stem().string(), eval::SystemKind::model, &models[i]});
  systems.push_back({"row-major heuristic", eval::SystemKind::heuristic, nullptr});
  if (ev.value("permutation_oracle", false))
    systems.push_back({"permutation oracle", eval::SystemKind::permutation_oracle, nullptr});

  auto report = eval::benchmark_report(corpus, systems, opt);

  if (!o.predictions.empty()) {
    // Scores a corpus of stored predictions against the gold corpus by id.
    std::map<std::string, Relation> predicted;
    for (const auto& loaded : load_corpus_lenient(o.predictions))
      if (loaded.document.isdr) predicted.emplace(loaded.document.id, *loaded.document.isdr);
    eval::SystemScore score{fs::path(o.predictions).stem().string(), eval::SystemKind::model, {}, 0, {}};
    for (const auto& doc : corpus.documents) {
      if (opt.split) {
        auto it = corpus.split.find(doc.id);
        if (it == corpus.split.end() || it->second != *opt.split) continue;
      }
      const Relation gold = eval::gold_relation(doc, opt.level);
      auto it = predicted.find(doc.id);
      Relation pred(gold.element_count());
      if (it == predicted.end()) {
        score.skipped.push_back(doc.id);
      } else if (opt.level == rop::Level::segment) {
        pred = it->second;
      } else {
        Document copy = doc;
        copy.isdr = it->second;
        pred = derive_word_level(copy);
      }
      score.metrics += pair_f1(gold, pred);
      ++score.docs;
    }
    report.systems.insert(report.systems.begin(), std::move(score));
  }

  emit_json(eval::to_json(report), o.output, out);
  err << eval::format_table(report);
  return kExitOk;
}

int cmd_predict(const Options& o, std::ostream& out, std::ostream& err) {
  const Corpus corpus = load_corpus(o.input);
  auto model = rop::load_model(o.model);
  rop::PseudoLabelReport report;
  const Corpus predicted = rop::predict_pseudo_labels(model, corpus, &report);
  save_corpus(predicted, o.output);
  emit_json(to_json(report), o.report, out);
  err << "acyclic rate " << report.acyclic_rate() << " over " << report.documents.size() << " documents";
  if (!report.skipped.empty()) err << ", " << report.skipped.size() << " skipped";
  err << "\n";
  return kExitOk;
}

int cmd_demo(const Options& o, std::ostream& out, std::ostream& err) {
  const json config = read_json(o.config);
  auto dc = section<rore::DemoConfig>(config, "demo");
  if (o.seed) {
    dc.linker.seed = *o.seed;
    dc.pseudo_rop.seed = *o.seed;
  }
  Corpus corpus;
  if (!o.corpus.empty())
    corpus = load_corpus(o.corpus);
  else
    corpus = rore::synth_forms(section<rore::FormConfig>(config, "forms"), o.seed.value_or(0));
  rop::EpochCallback progress;
  if (o.verbosity > 0)
    progress = [&err](const rop::EpochRecord& e) { err << "epoch " << e.epoch << " loss " << e.mean_loss << "\n"; };
  const auto result = rore::rore_demo_entity_linking(corpus, dc, rore::standard_arms(), progress);
  emit_json(rore::to_json(result), o.output, out);
  for (const auto& arm : result.arms)
    err << std::left << std::setw(22) << arm.spec.name << std::fixed << std::setprecision(4) << arm.test.f1() << "\n";
  return kExitOk;
}

int cmd_render(const Options& o, std::ostream& out, std::ostream&) {
  const auto loaded = load_corpus_lenient(o.input);
  if (loaded.empty()) throw std::invalid_argument("corpus is empty");
  const Document* doc = &loaded.front().document;
  if (!o.doc_id.empty()) {
    auto it = std::find_if(loaded.begin(), loaded.end(), [&](const LoadedDocument& d) { return d.document.id == o.doc_id; });
    if (it == loaded.end()) throw std::invalid_argument("no document '" + o.doc_id + "'");
    doc = &it->document;
  }
  if (!doc->isdr) throw std::invalid_argument("document '" + doc->id + "' has no isdr");
  emit(render_svg(*doc), o.output, out);
  return kExitOk;
}

std::string xml_escape(const std::string& s) {
  std::string r;
  for (char c : s) {
    switch (c) {
      case '&': r += "&amp;"; break;
      case '<': r += "&lt;"; break;
      case '>': r += "&gt;"; break;
      case '"': r += "&quot;"; break;
      default: r += c;
    }
  }
  return r;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

// Fraction of the way from the center of `box` toward `dx, dy` where the ray leaves the box.
double exit_fraction(const BBox& box, double dx, double dy) {
  double t = 1.0;
  if (dx != 0.0) t = std::min(t, 0.5 * box.width() / std::abs(dx));
  if (dy != 0.0) t = std::min(t, 0.5 * box.height() / std::abs(dy));
  return t;
}

}  // namespace

std::string render_svg(const Document& doc) {
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << doc.page_width << "\" height=\""
     << doc.page_height << "\" viewBox=\"0 0 " << doc.page_width << " " << doc.page_height << "\">\n"
     << "<title>" << xml_escape(doc.id) << "</title>\n"
     << "<defs><marker id=\"head\" viewBox=\"0 0 10 10\" refX=\"10\" refY=\"5\" markerWidth=\"6\" markerHeight=\"6\" "
        "orient=\"auto\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\"#b03a2e\"/></marker></defs>\n"
     << "<g fill=\"#eef3f8\" stroke=\"#34495e\" stroke-width=\"1\">\n";
  for (const auto& s : doc.segments)
    os << "<rect x=\"" << s.box.x0 << "\" y=\"" << s.box.y0 << "\" width=\"" << s.box.width() << "\" height=\""
       << s.box.height() << "\"/>\n";
  os << "</g>\n<g font-family=\"sans-serif\" font-size=\"9\" fill=\"#34495e\">\n";
  for (const auto& s : doc.segments)
    os << "<text x=\"" << s.box.x0 + 2 << "\" y=\"" << s.box.y0 + 9 << "\">" << s.id << "</text>\n";
  os << "</g>\n<g stroke=\"#b03a2e\" stroke-width=\"1.5\" marker-end=\"url(#head)\">\n";
  if (doc.isdr)
    for (const auto& [a, b] : doc.isdr->pairs()) {
      const BBox& from = doc.segments[a].box;
      const BBox& to = doc.segments[b].box;
      const double dx = to.center_x() - from.center_x();
      const double dy = to.center_y() - from.center_y();
      const double ts = exit_fraction(from, dx, dy);
      const double te = exit_fraction(to, -dx, -dy);
      os << "<line x1=\"" << num(from.center_x() + ts * dx) << "\" y1=\"" << num(from.center_y() + ts * dy) << "\" x2=\""
         << num(to.center_x() - te * dx) << "\" y2=\"" << num(to.center_y() - te * dy) << "\"/>\n";
    }
  os << "</g>\n</svg>\n";
  return os.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reading-order relations for visually-rich documents", "rorokit"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_flag("-v,--verbose", o.verbosity, "Progress on standard error (repeat for more)");
  app.add_option("--seed", o.seed, "Random seed");

  auto input = [&](CLI::App* c, const char* what) { c->add_option("input", o.input, what)->required()->check(CLI::ExistingFile); };
  auto output = [&](CLI::App* c, bool required) {
    auto* opt = c->add_option("-o,--output", o.output, "Output path (standard output when absent)");
    if (required) opt->required();
  };
  auto config = [&](CLI::App* c) { c->add_option("-c,--config", o.config, "JSON config file")->check(CLI::ExistingFile); };

  auto* validate = app.add_subcommand("validate", "Check every document's reading order annotation");
  input(validate, "Corpus (JSONL)");
  output(validate, false);

  auto* stats = app.add_subcommand("stats", "Corpus statistics");
  input(stats, "Corpus (JSONL)");
  output(stats, false);

  auto* closure = app.add_subcommand("closure", "Transitive closure of a relation {\"n\", \"pairs\"}");
  input(closure, "Relation JSON");
  output(closure, false);

  auto* convert = app.add_subcommand("convert", "Word-level reading order relations");
  input(convert, "Corpus (JSONL)");
  output(convert, false);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus (\"synth\" or \"forms\" config section)");
  config(synth);
  output(synth, false);

  auto* train = app.add_subcommand("train", "Train a reading order model");
  input(train, "Corpus (JSONL)");
  config(train);
  output(train, true);
  train->add_option("--report", o.report, "Training report path (standard output when absent)");

  auto* evaluate = app.add_subcommand("eval", "Pair-F1 of models and baselines");
  input(evaluate, "Gold corpus (JSONL)");
  config(evaluate);
  output(evaluate, false);
  evaluate->add_option("-m,--model", o.models, "Model checkpoint (repeatable)")->check(CLI::ExistingFile);
  evaluate->add_option("--predictions", o.predictions, "Corpus of stored predictions")->check(CLI::ExistingFile);

  auto* predict = app.add_subcommand("predict", "Write predicted reading orders into a corpus");
  input(predict, "Corpus (JSONL)");
  predict->add_option("-m,--model", o.model, "Model checkpoint")->required()->check(CLI::ExistingFile);
  output(predict, true);
  predict->add_option("--report", o.report, "Prediction report path (standard output when absent)");

  auto* demo = app.add_subcommand("demo-rore", "Entity linking with and without reading order relations");
  config(demo);
  output(demo, false);
  demo->add_option("--corpus", o.corpus, "Linking corpus (generated from the \"forms\" section when absent)")
      ->check(CLI::ExistingFile);

  auto* render = app.add_subcommand("render", "Draw a document and its reading order as SVG");
  input(render, "Corpus (JSONL)");
  render->add_option("--doc", o.doc_id, "Document id (first document when absent)");
  output(render, false);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }

  try {
    if (validate->parsed()) return cmd_validate(o, out, err);
    if (stats->parsed()) return cmd_stats(o, out, err);
    if (closure->parsed()) return cmd_closure(o, out, err);
    if (convert->parsed()) return cmd_convert(o, out, err);
    if (synth->parsed()) return cmd_synth(o, out, err);
    if (train->parsed()) return cmd_train(o, out, err);
    if (evaluate->parsed()) return cmd_eval(o, out, err);
    if (predict->parsed()) return cmd_predict(o, out, err);
    if (demo->parsed()) return cmd_demo(o, out, err);
    if (render->parsed()) return cmd_render(o, out, err);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitIo;
}

}  // namespace rorokit::cli
