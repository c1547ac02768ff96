#ifndef MMC_CORPUS_HPP
#define MMC_CORPUS_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmc/hash.hpp"
#include "mmc/qa.hpp"
#include "mmc/taxonomy.hpp"
#include "mmc/text_backend.hpp"
#include "mmc/types.hpp"

namespace mmc {

/// One corpus record: per-component QA transcript plus the compressed
/// fine-grained description for a single (model, view) pair.
struct CorpusEntry {
  std::string model_id;
  std::string category;
  int view_id = 0;
  std::vector<QAAnswer> answers;
  std::string description;
  int word_count = 0;
  std::vector<std::string> flags;  // e.g. "too-short"
};

inline nlohmann::json qa_answer_to_json(const QAAnswer& a) {
  nlohmann::json j;
  j["kind"] = qa_kind_name(a.kind);
  j["component"] = a.component;
  j["raw_text"] = a.raw_text;
  switch (a.kind) {
    case QAKind::kCategory:
    case QAKind::kAppearance: j["parsed"] = a.sentence; break;
    case QAKind::kExistence: j["parsed"] = a.exists; break;
    case QAKind::kQuantity:
      if (a.count >= 0)
        j["parsed"] = a.count;
      else
        j["parsed"] = "unknown";
      break;
  }
  if (a.parse_error) j["parse_error"] = true;
  return j;
}

inline QAAnswer qa_answer_from_json(const nlohmann::json& j) {
  QAAnswer a;
  a.kind = qa_kind_from_name(j.at("kind").get<std::string>());
  a.component = j.at("component").get<std::string>();
  a.raw_text = j.at("raw_text").get<std::string>();
  a.parse_error = j.value("parse_error", false);
  const auto& parsed = j.at("parsed");
  switch (a.kind) {
    case QAKind::kCategory:
    case QAKind::kAppearance: a.sentence = parsed.get<std::string>(); break;
    case QAKind::kExistence: a.exists = parsed.get<bool>(); break;
    case QAKind::kQuantity: a.count = parsed.is_number() ? parsed.get<int>() : -1; break;
  }
  return a;
}

inline nlohmann::json corpus_entry_to_json(const CorpusEntry& e) {
  nlohmann::json j;
  j["model_id"] = e.model_id;
  j["category"] = e.category;
  j["view_id"] = e.view_id;
  j["answers"] = nlohmann::json::array();
  for (const auto& a : e.answers) j["answers"].push_back(qa_answer_to_json(a));
  j["description"] = e.description;
  j["word_count"] = e.word_count;
  j["flags"] = e.flags;
  return j;
}

inline CorpusEntry corpus_entry_from_json(const nlohmann::json& j) {
  CorpusEntry e;
  e.model_id = j.at("model_id").get<std::string>();
  e.category = j.at("category").get<std::string>();
  e.view_id = j.at("view_id").get<int>();
  for (const auto& aj : j.at("answers")) e.answers.push_back(qa_answer_from_json(aj));
  e.description = j.at("description").get<std::string>();
  e.word_count = j.at("word_count").get<int>();
  e.flags = j.at("flags").get<std::vector<std::string>>();
  return e;
}

inline std::vector<CorpusEntry> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus: " + path);
  std::vector<CorpusEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(corpus_entry_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": bad corpus line: " + e.what());
    }
  }
  return out;
}

/// model_id -> description map used by the dataset loader's text join.
inline std::map<std::string, std::string> load_corpus_index(const std::string& path) {
  std::map<std::string, std::string> out;
  for (const auto& e : read_corpus(path)) out[e.model_id] = e.description;
  return out;
}

/// Deterministic per-model view choice for corpus generation.
inline int corpus_view_for(std::uint64_t seed, const std::string& model_id) {
  std::mt19937_64 rng(mix_u64(seed, fnv1a(model_id)));
  return static_cast<int>(bounded_u64(rng, 24));
}

/// Runs the full QA pipeline for one model and composes the entry. The image
/// reference is embedded in prompts, so replies (and therefore the corpus)
/// are a pure function of (taxonomy, backend, image_ref, category).
inline CorpusEntry build_corpus_entry(const std::string& model_id, const std::string& category,
                                      int view_id, const std::string& image_ref,
                                      const ComponentTaxonomy& taxonomy, TextBackend& backend) {
  CorpusEntry e;
  e.model_id = model_id;
  e.category = category;
  e.view_id = view_id;

  e.answers.push_back(ask_category(image_ref, category, taxonomy, backend));
  for (const auto& comp : taxonomy.components(category)) {
    QAAnswer ex = ask_existence(image_ref, category, comp, taxonomy, backend);
    const bool present = ex.exists;
    e.answers.push_back(std::move(ex));
    if (!present) continue;  // quantity/appearance asked only for present parts
    e.answers.push_back(ask_quantity(image_ref, category, comp, taxonomy, backend));
    e.answers.push_back(ask_appearance(image_ref, category, comp, taxonomy, backend));
  }

  const std::string composed = compose_description(category, e.answers);
  try {
    e.description = compress(composed, backend);
  } catch (const TooShortText&) {
    e.description = composed;
    e.flags.push_back("too-short");
  }
  e.word_count = word_count(e.description);
  return e;
}

struct CorpusBuildStats {
  int written = 0;
  int reused = 0;            // entries taken from an existing output (resume)
  int skipped_no_renders = 0;
  int skipped_backend = 0;
  std::vector<std::string> log;
};

/// Walks root/{category}/{model_id}/, asks the QA battery per model, and
/// writes one JSON line per model sorted by model_id. With `resume`, entries
/// already present in the output file are kept verbatim, so an interrupted
/// run finishes to a byte-identical file. The output is written atomically
/// via a temp file.
inline CorpusBuildStats build_corpus(const std::string& root, const std::string& out_path,
                                     const ComponentTaxonomy& taxonomy, TextBackend& backend,
                                     std::uint64_t seed, bool resume) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError("dataset root not found: " + root);

  struct ModelRef {
    std::string model_id, category;
  };
  std::vector<ModelRef> models;
  for (const auto& cat_dir : fs::directory_iterator(root)) {
    if (!cat_dir.is_directory()) continue;
    const std::string category = cat_dir.path().filename().string();
    if (category == "splits") continue;
    if (!taxonomy.has(category))
      throw TaxonomyError("dataset category not in taxonomy: " + category);
    for (const auto& model_dir : fs::directory_iterator(cat_dir.path())) {
      if (!model_dir.is_directory()) continue;
      models.push_back({model_dir.path().filename().string(), category});
    }
  }
  std::sort(models.begin(), models.end(),
            [](const ModelRef& a, const ModelRef& b) { return a.model_id < b.model_id; });

  std::map<std::string, std::string> done;  // model_id -> raw output line
  if (resume && fs::exists(out_path)) {
    std::ifstream in(out_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        done[nlohmann::json::parse(line).at("model_id").get<std::string>()] = line;
      } catch (const nlohmann::json::exception&) {
        break;  // a torn final line from the interrupted run is regenerated
      }
    }
  }

  CorpusBuildStats stats;
  std::vector<std::string> lines;
  for (const auto& m : models) {
    const auto it = done.find(m.model_id);
    if (it != done.end()) {
      lines.push_back(it->second);
      ++stats.reused;
      continue;
    }
    const int view = corpus_view_for(seed, m.model_id);
    char render_name[32];
    std::snprintf(render_name, sizeof(render_name), "render_%02d.img", view);
    const std::string rel = m.category + "/" + m.model_id + "/" + render_name;
    if (!fs::exists(fs::path(root) / rel)) {
      stats.log.push_back("skip " + m.model_id + ": missing render " + rel);
      ++stats.skipped_no_renders;
      continue;
    }
    try {
      const CorpusEntry e =
          build_corpus_entry(m.model_id, m.category, view, rel, taxonomy, backend);
      lines.push_back(corpus_entry_to_json(e).dump());
      ++stats.written;
    } catch (const BackendError& err) {
      stats.log.push_back("skip " + m.model_id + ": backend failure: " + err.what());
      ++stats.skipped_backend;
    }
  }

  const std::string tmp = out_path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write corpus: " + tmp);
    for (const auto& l : lines) out << l << "\n";
  }
  fs::rename(tmp, out_path);
  return stats;
}

}  // namespace mmc

#endif  // MMC_CORPUS_HPP
