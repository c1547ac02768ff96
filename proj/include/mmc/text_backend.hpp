#ifndef MMC_TEXT_BACKEND_HPP
#define MMC_TEXT_BACKEND_HPP

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmc/hash.hpp"
#include "mmc/types.hpp"

namespace mmc {

/// Prompt-in, text-out interface shared by the question-answering and
/// compression steps of the corpus pipeline. Image context is carried inside
/// the prompt as an "[image:<ref>] " prefix.
class TextBackend {
 public:
  virtual ~TextBackend() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

namespace detail {

inline std::vector<std::string> words_of(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!cur.empty()) out.push_back(cur), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::string strip_tail_punct(std::string w) {
  while (!w.empty() && (w.back() == '?' || w.back() == '.' || w.back() == ',')) w.pop_back();
  return w;
}

/// Word following the first occurrence of `marker`.
inline std::string word_after(const std::vector<std::string>& words, const std::string& marker) {
  for (std::size_t i = 0; i + 1 < words.size(); ++i)
    if (words[i] == marker) return strip_tail_punct(words[i + 1]);
  return "";
}

/// Word following the LAST occurrence of the pair `m1 m2`; the question
/// templates put the category at the end, after possibly repeated pairs.
inline std::string word_after_pair(const std::vector<std::string>& words,
                                   const std::string& m1, const std::string& m2) {
  std::string found;
  for (std::size_t i = 0; i + 2 < words.size(); ++i)
    if (words[i] == m1 && words[i + 1] == m2) found = strip_tail_punct(words[i + 2]);
  return found;
}

}  // namespace detail

/// Deterministic stand-in for the vision-language answering service. It
/// recognizes the four question templates plus the compression request and
/// fabricates parseable answers from a hash of (seed, prompt). The same
/// (seed, prompt) pair yields the same reply in every process.
class StubTextBackend : public TextBackend {
 public:
  explicit StubTextBackend(std::uint64_t seed = 0) : seed_(seed) {}

  std::string complete(const std::string& prompt) override {
    // the image prefix influences the answer hash but not the parse
    std::string stripped = prompt;
    if (stripped.rfind("[image:", 0) == 0) {
      const auto close = stripped.find("] ");
      if (close != std::string::npos) stripped = stripped.substr(close + 2);
    }
    std::mt19937_64 rng(mix_u64(seed_, fnv1a(prompt)));
    const auto words = detail::words_of(stripped);

    if (stripped.rfind("Please describe the geometric appearance of the ", 0) == 0) {
      const std::string category = detail::word_after_pair(words, "of", "the");
      return "This is a " + pick(kColors, rng) + " " + pick(kStyles, rng) + " " + category + ".";
    }
    if (stripped.rfind("Does the ", 0) == 0) {
      // ~3 of 4 components exist so composed descriptions keep some content
      return bounded_u64(rng, 4) == 0 ? "no" : "yes";
    }
    if (stripped.rfind("How many ", 0) == 0) {
      const std::string component = detail::word_after(words, "many");
      const std::string category = detail::word_after_pair(words, "does", "the");
      const std::uint64_t n = 1 + bounded_u64(rng, 6);
      return "The " + category + " has " + kCountWords[n] + " " + component +
             (n == 1 ? "." : "s.");
    }
    if (stripped.rfind("Please provide some rich geometric structure descriptors for ", 0) ==
        0) {
      const std::string component = detail::word_after(words, "for");
      const std::string category = detail::word_after_pair(words, "of", "the");
      return "The " + component + " of this " + category + " has a " + pick(kShapes, rng) +
             " appearance";
    }
    if (stripped.rfind(kCompressPrefix, 0) == 0) {
      // echo the payload; the caller's extractive clamp enforces the bound
      return stripped.substr(std::string(kCompressPrefix).size());
    }
    return "This is an object.";
  }

  static constexpr const char* kCompressPrefix =
      "Compress the following description to 50-58 words: ";

 private:
  template <std::size_t N>
  static std::string pick(const char* const (&list)[N], std::mt19937_64& rng) {
    return list[bounded_u64(rng, N)];
  }

  static constexpr const char* kColors[6] = {"brown", "gray", "white", "black", "red", "blue"};
  static constexpr const char* kStyles[5] = {"office", "classic", "modern", "simple",
                                             "rounded"};
  static constexpr const char* kShapes[6] = {"rectangular", "curved",   "cylindrical",
                                             "tapered",     "slender",  "boxy"};
  static constexpr const char* kCountWords[8] = {"zero", "one", "two",  "three",
                                                 "four", "five", "six", "seven"};

  std::uint64_t seed_;
};

/// Replays recorded prompt/reply transcripts (JSONL with keys "prompt" and
/// "reply"). An unknown prompt is a hard error: replay runs must be exact.
class ReplayTextBackend : public TextBackend {
 public:
  explicit ReplayTextBackend(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open transcript: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ":" + std::to_string(lineno) + ": bad transcript line: " +
                      e.what());
      }
      replies_[j.at("prompt").get<std::string>()] = j.at("reply").get<std::string>();
    }
  }

  static ReplayTextBackend from_entries(
      const std::vector<std::pair<std::string, std::string>>& entries) {
    ReplayTextBackend b;
    for (const auto& [p, r] : entries) b.replies_[p] = r;
    return b;
  }

  std::string complete(const std::string& prompt) override {
    const auto it = replies_.find(prompt);
    if (it == replies_.end())
      throw BackendError("replay transcript has no reply for prompt: " + prompt, 1, 1);
    return it->second;
  }

 private:
  ReplayTextBackend() = default;
  std::map<std::string, std::string> replies_;
};

}  // namespace mmc

#endif  // MMC_TEXT_BACKEND_HPP
