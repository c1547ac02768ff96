#ifndef MMC_PROMPT_HPP
#define MMC_PROMPT_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmc/types.hpp"

namespace mmc {

inline constexpr int kMaxPromptTokens = 77;

namespace tok {

inline bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_alnum(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

}  // namespace tok

/// Half-open [begin, end) byte span of one token inside the source string.
struct TokenSpan {
  std::size_t begin;
  std::size_t end;
};

/// Whitespace-and-punctuation tokenizer: a token is either a maximal run of
/// ASCII alphanumerics or a single other non-space byte. Locale independent.
inline std::vector<TokenSpan> tokenize_spans(std::string_view text) {
  std::vector<TokenSpan> spans;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (tok::is_space(c)) {
      ++i;
      continue;
    }
    if (tok::is_alnum(c)) {
      std::size_t j = i + 1;
      while (j < text.size() && tok::is_alnum(static_cast<unsigned char>(text[j]))) ++j;
      spans.push_back({i, j});
      i = j;
    } else {
      spans.push_back({i, i + 1});
      ++i;
    }
  }
  return spans;
}

inline int count_tokens(std::string_view text) {
  return static_cast<int>(tokenize_spans(text).size());
}

/// Prompt for the frozen text embedder: fixed category template plus an
/// optional rich description, bounded at 77 tokens.
struct TextPrompt {
  std::string category;
  std::optional<std::string> rich_description;
  std::string rendered;
  int token_count = 0;
};

/// Renders "This is a {category}", optionally followed by ". " and the rich
/// description, then truncates trailing tokens until the prompt fits in 77.
/// The template survives truncation whenever it fits the bound on its own;
/// the 77-token cap always wins.
inline TextPrompt build_prompt(const std::string& category,
                               const std::optional<std::string>& rich_description =
                                   std::nullopt) {
  if (category.empty()) throw InvalidArgument("build_prompt: category must be non-empty");

  TextPrompt prompt;
  prompt.category = category;
  prompt.rendered = "This is a " + category;
  if (rich_description && !rich_description->empty()) {
    prompt.rich_description = rich_description;
    prompt.rendered += ". " + *rich_description;
  }

  const auto spans = tokenize_spans(prompt.rendered);
  if (static_cast<int>(spans.size()) > kMaxPromptTokens) {
    prompt.rendered.resize(spans[kMaxPromptTokens - 1].end);
  }
  prompt.token_count =
      std::min<int>(static_cast<int>(spans.size()), kMaxPromptTokens);
  return prompt;
}

/// Wraps caller-supplied prompt text (no template) under the same 77-token
/// cap.
inline TextPrompt prompt_from_text(const std::string& text) {
  if (text.empty()) throw InvalidArgument("prompt_from_text: text must be non-empty");
  TextPrompt prompt;
  prompt.rendered = text;
  const auto spans = tokenize_spans(prompt.rendered);
  if (static_cast<int>(spans.size()) > kMaxPromptTokens) {
    prompt.rendered.resize(spans[kMaxPromptTokens - 1].end);
  }
  prompt.token_count =
      std::min<int>(static_cast<int>(spans.size()), kMaxPromptTokens);
  return prompt;
}

}  // namespace mmc

#endif  // MMC_PROMPT_HPP
