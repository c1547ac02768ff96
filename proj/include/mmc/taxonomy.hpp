#ifndef MMC_TAXONOMY_HPP
#define MMC_TAXONOMY_HPP

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mmc/types.hpp"

namespace mmc {

/// The eight categories used for training.
inline const std::vector<std::string>& train_categories() {
  static const std::vector<std::string> v = {"airplane", "cabinet", "car",  "chair",
                                             "lamp",     "sofa",    "table", "watercraft"};
  return v;
}

/// The five categories reserved for held-out evaluation.
inline const std::vector<std::string>& heldout_categories() {
  static const std::vector<std::string> v = {"bench", "cellphone", "firearm", "monitor",
                                             "speaker"};
  return v;
}

/// Held-out categories evaluated by default; firearm is excluded.
inline const std::vector<std::string>& default_heldout_eval() {
  static const std::vector<std::string> v = {"bench", "cellphone", "monitor", "speaker"};
  return v;
}

inline std::string canonical_category(std::string name) {
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (name == "phone") return "cellphone";
  if (name == "boat" || name == "vessel") return "watercraft";
  return name;
}

/// Ordered list of nameable components per category. Order drives both the
/// question sequence and the clause order of composed descriptions.
class ComponentTaxonomy {
 public:
  static ComponentTaxonomy default_taxonomy() {
    ComponentTaxonomy t;
    t.map_ = {
        {"airplane", {"fuselage", "wing", "tail", "engine"}},
        {"cabinet", {"door", "shelf", "drawer", "handle"}},
        {"car", {"body", "wheel", "window", "door"}},
        {"chair", {"back", "seat", "leg", "arm"}},
        {"lamp", {"base", "stem", "shade"}},
        {"sofa", {"back", "seat", "arm", "cushion", "leg"}},
        {"table", {"top", "leg", "drawer"}},
        {"watercraft", {"hull", "deck", "mast", "sail"}},
        {"bench", {"seat", "leg", "back"}},
        {"cellphone", {"screen", "button", "camera", "body"}},
        {"firearm", {"barrel", "trigger", "stock", "grip"}},
        {"monitor", {"screen", "stand", "base"}},
        {"speaker", {"driver", "grille", "cabinet"}},
    };
    return t;
  }

  /// File format: one `category = comp1, comp2, ...` per line; '#' comments.
  static ComponentTaxonomy from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open taxonomy file: " + path);
    ComponentTaxonomy t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string s = line;
      const auto hash = s.find('#');
      if (hash != std::string::npos) s.resize(hash);
      bool blank = true;
      for (const char c : s)
        if (c != ' ' && c != '\t' && c != '\r') blank = false;
      if (blank) continue;
      const auto eq = s.find('=');
      if (eq == std::string::npos)
        throw TaxonomyError(path + ":" + std::to_string(lineno) +
                            ": expected `category = components`");
      const std::string cat = trim_word(s.substr(0, eq));
      std::vector<std::string> comps;
      std::istringstream rest(s.substr(eq + 1));
      std::string item;
      while (std::getline(rest, item, ',')) {
        const std::string w = trim_word(item);
        if (!w.empty()) comps.push_back(w);
      }
      if (cat.empty() || comps.empty())
        throw TaxonomyError(path + ":" + std::to_string(lineno) + ": empty category or list");
      t.map_[cat] = comps;
    }
    if (t.map_.empty()) throw TaxonomyError(path + ": empty taxonomy");
    return t;
  }

  bool has(const std::string& category) const { return map_.count(category) != 0; }

  const std::vector<std::string>& components(const std::string& category) const {
    const auto it = map_.find(category);
    if (it == map_.end()) throw TaxonomyError("unknown category: " + category);
    return it->second;
  }

  std::vector<std::string> categories() const {
    std::vector<std::string> out;
    out.reserve(map_.size());
    for (const auto& [k, v] : map_) out.push_back(k);
    return out;
  }

 private:
  static std::string trim_word(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
  }

  std::map<std::string, std::vector<std::string>> map_;
};

}  // namespace mmc

#endif  // MMC_TAXONOMY_HPP
