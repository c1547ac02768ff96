#ifndef MMC_QA_HPP
#define MMC_QA_HPP

#include <algorithm>
#include <cctype>
#include <map>
#include <string>
#include <vector>

#include "mmc/taxonomy.hpp"
#include "mmc/text_backend.hpp"
#include "mmc/types.hpp"

namespace mmc {

enum class QAKind { kCategory, kExistence, kQuantity, kAppearance };

inline std::string qa_kind_name(QAKind k) {
  switch (k) {
    case QAKind::kCategory: return "category";
    case QAKind::kExistence: return "existence";
    case QAKind::kQuantity: return "quantity";
    case QAKind::kAppearance: return "appearance";
  }
  return "?";
}

inline QAKind qa_kind_from_name(const std::string& s) {
  if (s == "category") return QAKind::kCategory;
  if (s == "existence") return QAKind::kExistence;
  if (s == "quantity") return QAKind::kQuantity;
  if (s == "appearance") return QAKind::kAppearance;
  throw InvalidArgument("unknown answer kind: " + s);
}

/// One question/answer exchange. `raw_text` is the backend reply verbatim;
/// the parsed field for the answer's kind is authoritative downstream.
struct QAAnswer {
  QAKind kind = QAKind::kCategory;
  std::string component;    // empty for category questions
  std::string raw_text;
  std::string sentence;     // category/appearance payload
  bool exists = false;      // existence payload
  int count = -1;           // quantity payload; -1 means unknown
  bool parse_error = false;
};

// The four question templates. The quantity question carries no trailing
// question mark; consumers must treat the string as canonical.
inline std::string category_question(const std::string& category) {
  return "Please describe the geometric appearance of the " + category + "?";
}
inline std::string existence_question(const std::string& category, const std::string& component) {
  return "Does the " + category + " have " + component + "?";
}
inline std::string quantity_question(const std::string& category, const std::string& component) {
  return "How many " + component + " does the " + category + " have";
}
inline std::string appearance_question(const std::string& category, const std::string& component) {
  return "Please provide some rich geometric structure descriptors for " + component +
         " of the " + category + "?";
}

namespace detail {

inline std::string with_image(const std::string& image_ref, const std::string& question) {
  return image_ref.empty() ? question : "[image:" + image_ref + "] " + question;
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

/// Lowercased alphabetic/numeric words of a reply.
inline std::vector<std::string> reply_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (const char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline const std::map<std::string, int>& number_words() {
  static const std::map<std::string, int> m = {
      {"zero", 0}, {"one", 1}, {"two", 2},   {"three", 3}, {"four", 4},
      {"five", 5}, {"six", 6}, {"seven", 7}, {"eight", 8}, {"nine", 9},
      {"ten", 10}, {"eleven", 11}, {"twelve", 12}};
  return m;
}

inline std::string number_to_words(int n) {
  static const char* const small[] = {"zero", "one", "two",   "three", "four",
                                      "five", "six", "seven", "eight", "nine",
                                      "ten",  "eleven", "twelve"};
  if (n >= 0 && n <= 12) return small[n];
  return std::to_string(n);
}

}  // namespace detail

inline QAAnswer ask_category(const std::string& image_ref, const std::string& category,
                             const ComponentTaxonomy& taxonomy, TextBackend& backend) {
  if (!taxonomy.has(category)) throw TaxonomyError("unknown category: " + category);
  QAAnswer a;
  a.kind = QAKind::kCategory;
  a.raw_text = backend.complete(detail::with_image(image_ref, category_question(category)));
  a.sentence = a.raw_text;
  return a;
}

/// Boolean parse: any standalone "yes" wins, else any standalone "no", else a
/// recorded parse error with the conservative value false.
inline QAAnswer ask_existence(const std::string& image_ref, const std::string& category,
                              const std::string& component, const ComponentTaxonomy& taxonomy,
                              TextBackend& backend) {
  if (!taxonomy.has(category)) throw TaxonomyError("unknown category: " + category);
  QAAnswer a;
  a.kind = QAKind::kExistence;
  a.component = component;
  a.raw_text =
      backend.complete(detail::with_image(image_ref, existence_question(category, component)));
  const auto words = detail::reply_words(a.raw_text);
  if (std::find(words.begin(), words.end(), "yes") != words.end()) {
    a.exists = true;
  } else if (std::find(words.begin(), words.end(), "no") != words.end()) {
    a.exists = false;
  } else {
    a.exists = false;
    a.parse_error = true;
  }
  return a;
}

/// Extracts the first digit string or number word; none present leaves the
/// count unknown (-1) without flagging an error.
inline QAAnswer ask_quantity(const std::string& image_ref, const std::string& category,
                             const std::string& component, const ComponentTaxonomy& taxonomy,
                             TextBackend& backend) {
  if (!taxonomy.has(category)) throw TaxonomyError("unknown category: " + category);
  QAAnswer a;
  a.kind = QAKind::kQuantity;
  a.component = component;
  a.raw_text =
      backend.complete(detail::with_image(image_ref, quantity_question(category, component)));
  for (const auto& w : detail::reply_words(a.raw_text)) {
    if (std::isdigit(static_cast<unsigned char>(w[0]))) {
      a.count = std::stoi(w);
      break;
    }
    const auto it = detail::number_words().find(w);
    if (it != detail::number_words().end()) {
      a.count = it->second;
      break;
    }
  }
  return a;
}

inline QAAnswer ask_appearance(const std::string& image_ref, const std::string& category,
                               const std::string& component, const ComponentTaxonomy& taxonomy,
                               TextBackend& backend) {
  if (!taxonomy.has(category)) throw TaxonomyError("unknown category: " + category);
  QAAnswer a;
  a.kind = QAKind::kAppearance;
  a.component = component;
  a.raw_text =
      backend.complete(detail::with_image(image_ref, appearance_question(category, component)));
  a.sentence = a.raw_text;
  return a;
}

namespace detail {

inline std::string ensure_period(std::string s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\n')) s.pop_back();
  if (!s.empty() && s.back() != '.' && s.back() != '!' && s.back() != '?') s.push_back('.');
  return s;
}

/// Removes whole-word occurrences of `word` and its naive plural,
/// case-insensitively, then collapses the spacing around the hole.
inline std::string scrub_word(const std::string& text, const std::string& word) {
  const std::string lw = lower(word);
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isalnum(static_cast<unsigned char>(text[i]))) {
      out.push_back(text[i]);
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) ++j;
    const std::string token = lower(text.substr(i, j - i));
    if (token == lw || token == lw + "s") {
      while (!out.empty() && out.back() == ' ') out.pop_back();  // drop one leading space
    } else {
      out.append(text, i, j - i);
    }
    i = j;
  }
  // collapse doubled spaces introduced by removals
  std::string tidy;
  for (const char c : out) {
    if (c == ' ' && !tidy.empty() && tidy.back() == ' ') continue;
    tidy.push_back(c);
  }
  return tidy;
}

}  // namespace detail

/// Number of words: whitespace tokens that still contain an alphanumeric
/// character after punctuation stripping.
inline int word_count(const std::string& text) {
  return static_cast<int>(detail::reply_words(text).size());
}

/// Builds the per-model description: the category sentence first, then for
/// every component with a true existence answer (first-appearance order,
/// which follows the taxonomy when questions were asked in taxonomy order) a
/// synthesized quantity clause and the appearance sentence. Components whose
/// existence answer is false are filtered out, and any stray mention of them
/// in kept sentences is scrubbed so the filter is airtight.
inline std::string compose_description(const std::string& category,
                                       const std::vector<QAAnswer>& answers) {
  const QAAnswer* cat = nullptr;
  for (const auto& a : answers) {
    if (a.kind != QAKind::kCategory) continue;
    if (cat) throw CompositionError("compose: multiple category answers");
    cat = &a;
  }
  if (!cat) throw CompositionError("compose: missing category answer");

  std::vector<std::string> order;
  std::map<std::string, bool> exists;
  std::map<std::string, int> counts;
  std::map<std::string, std::string> looks;
  for (const auto& a : answers) {
    if (a.kind == QAKind::kCategory) continue;
    if (a.component.empty()) throw CompositionError("compose: component answer without name");
    if (std::find(order.begin(), order.end(), a.component) == order.end())
      order.push_back(a.component);
    switch (a.kind) {
      case QAKind::kExistence: exists[a.component] = a.exists; break;
      case QAKind::kQuantity: counts[a.component] = a.count; break;
      case QAKind::kAppearance: looks[a.component] = a.sentence; break;
      default: break;
    }
  }

  std::string text = detail::ensure_period(cat->sentence);
  for (const auto& comp : order) {
    const auto it = exists.find(comp);
    if (it == exists.end() || !it->second) continue;
    const auto qc = counts.find(comp);
    if (qc != counts.end() && qc->second >= 0) {
      text += " The " + category + " has " + detail::number_to_words(qc->second) + " " + comp +
              (qc->second == 1 ? "." : "s.");
    }
    const auto la = looks.find(comp);
    if (la != looks.end() && !la->second.empty())
      text += " " + detail::ensure_period(la->second);
  }

  for (const auto& comp : order) {
    const auto it = exists.find(comp);
    if (it != exists.end() && !it->second) text = detail::scrub_word(text, comp);
  }
  return text;
}

/// Clause-extractive length clamp: keep whole sentences while they fit in 58
/// words, then pad word-by-word (cycling over the unkept tail, falling back
/// to the kept text) until at least 50. A first sentence longer than 58
/// words is hard-truncated.
inline std::string clamp_words_50_58(const std::string& text) {
  const int total = word_count(text);
  if (total >= 50 && total <= 58) return text;

  // split into clauses at sentence punctuation
  std::vector<std::string> clauses;
  std::string cur;
  for (const char c : text) {
    cur.push_back(c);
    if (c == '.' || c == '!' || c == '?' || c == ';') {
      clauses.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) clauses.push_back(cur);

  std::string kept;
  std::size_t used = 0;
  for (; used < clauses.size(); ++used) {
    const std::string candidate = kept + clauses[used];
    if (word_count(candidate) > 58) break;
    kept = candidate;
  }

  if (used == 0) {
    // single over-long clause: hard cut after the 58th word
    std::string out;
    int count = 0;
    std::string token;
    for (std::size_t i = 0; i <= text.size(); ++i) {
      const bool boundary = i == text.size() || text[i] == ' ' || text[i] == '\t' ||
                            text[i] == '\n' || text[i] == '\r';
      if (!boundary) {
        token.push_back(text[i]);
        continue;
      }
      if (!token.empty()) {
        bool has_alnum = false;
        for (const char c : token)
          if (std::isalnum(static_cast<unsigned char>(c))) has_alnum = true;
        if (has_alnum) ++count;
        out += (out.empty() ? "" : " ") + token;
        token.clear();
        if (count == 58) break;
      }
    }
    return out;
  }

  // pad up to 50 with single parsed words from the cut tail, cycling; each
  // append adds exactly one counted word, so the result stays within 58
  std::vector<std::string> pool;
  for (std::size_t i = used; i < clauses.size(); ++i)
    for (const auto& w : detail::reply_words(clauses[i])) pool.push_back(w);
  if (pool.empty()) pool = detail::reply_words(kept);
  if (pool.empty()) return kept;

  std::string out = kept;
  int have = word_count(out);
  std::size_t at = 0;
  while (have < 50) {
    out += " " + pool[at % pool.size()];
    ++at;
    ++have;
  }
  return out;
}

/// Requests a compressed rewrite from the backend and clamps the reply into
/// the 50-58 word contract. Inputs under 10 words are rejected so callers
/// can flag and keep them unchanged.
inline std::string compress(const std::string& text, TextBackend& backend) {
  if (text.empty()) throw InvalidArgument("compress: empty text");
  if (word_count(text) < 10)
    throw TooShortText("compress: input under 10 words");
  const std::string reply =
      backend.complete(std::string(StubTextBackend::kCompressPrefix) + text);
  return clamp_words_50_58(reply.empty() ? text : reply);
}

}  // namespace mmc

#endif  // MMC_QA_HPP
