#ifndef MMC_BACKENDS_HTTP_HPP
#define MMC_BACKENDS_HTTP_HPP

#include <chrono>
#include <cstring>
#include <string>
#include <thread>

#include "mmc/embedder.hpp"
#include "mmc/text_backend.hpp"
#include "mmc/types.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

// glibc's resolv.h (pulled in by httplib) defines _res as a macro that
// breaks any later Eigen include, so Eigen-dependent headers come first and
// the macro is dropped here.
#ifdef _res
#undef _res
#endif

namespace mmc {

struct HttpBackendOptions {
  std::string endpoint;          // "http://host:port"
  int max_attempts = 3;          // total tries per request
  int timeout_seconds = 10;      // per-attempt connect/read timeout
  int backoff_initial_ms = 100;  // doubles after each failed attempt
};

namespace detail {

/// POSTs with retry and exponential backoff; throws BackendError carrying the
/// attempt count after the last failure.
inline std::string http_post_with_retry(const HttpBackendOptions& opt, const std::string& path,
                                        const std::string& body,
                                        const std::string& content_type) {
  std::string last_error;
  int delay_ms = opt.backoff_initial_ms;
  for (int attempt = 1; attempt <= opt.max_attempts; ++attempt) {
    httplib::Client client(opt.endpoint);
    client.set_connection_timeout(opt.timeout_seconds, 0);
    client.set_read_timeout(opt.timeout_seconds, 0);
    client.set_write_timeout(opt.timeout_seconds, 0);
    auto res = client.Post(path, body, content_type);
    if (res && res->status == 200) return res->body;
    if (res)
      last_error = "http status " + std::to_string(res->status);
    else
      last_error = "transport error (" + httplib::to_string(res.error()) + ")";
    if (attempt < opt.max_attempts) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      delay_ms *= 2;
    }
  }
  throw BackendError("backend " + opt.endpoint + path + " failed after " +
                         std::to_string(opt.max_attempts) + " attempts: " + last_error,
                     opt.max_attempts, opt.max_attempts);
}

}  // namespace detail

/// Client for an out-of-process frozen dual-encoder service.
///   POST /embed/image  body: 3*224*224 little-endian float32, channel-major
///   POST /embed/text   body: UTF-8 prompt text
/// Responses carry 512 little-endian float32 values.
class ExternalEmbedder : public EmbedderBackend {
 public:
  explicit ExternalEmbedder(HttpBackendOptions options) : opt_(std::move(options)) {
    if (opt_.endpoint.empty()) throw ConfigError("external embedder: endpoint required");
  }

  GlobalFeature embed_image(const RenderedImage& image) override {
    image.validate();
    std::string body;
    body.reserve(3 * kImageSize * kImageSize * 4);
    for (const auto& c : image.channels)
      for (int y = 0; y < kImageSize; ++y)
        for (int x = 0; x < kImageSize; ++x) {
          const float v = c(y, x);
          std::uint32_t bits;
          std::memcpy(&bits, &v, 4);
          for (int i = 0; i < 4; ++i)
            body.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
        }
    return parse(detail::http_post_with_retry(opt_, "/embed/image", body,
                                              "application/octet-stream"),
                 FeatureSource::kVision);
  }

  GlobalFeature embed_text(const TextPrompt& prompt) override {
    if (prompt.token_count > kMaxPromptTokens)
      throw InvalidInput("embed_text: prompt exceeds 77 tokens");
    return parse(detail::http_post_with_retry(opt_, "/embed/text", prompt.rendered,
                                              "text/plain"),
                 FeatureSource::kText);
  }

 private:
  GlobalFeature parse(const std::string& body, FeatureSource source) const {
    if (body.size() != kGlobalDim * 4)
      throw BackendError("embedder returned " + std::to_string(body.size()) +
                             " bytes, expected 2048",
                         1, opt_.max_attempts);
    GlobalFeature g;
    g.source = source;
    for (int i = 0; i < kGlobalDim; ++i) {
      std::uint32_t bits = 0;
      for (int k = 0; k < 4; ++k)
        bits |= static_cast<std::uint32_t>(
                    static_cast<unsigned char>(body[static_cast<std::size_t>(i) * 4 + k]))
                << (8 * k);
      float v;
      std::memcpy(&v, &bits, 4);
      g.values[i] = static_cast<double>(v);
    }
    g.validate();
    return g;
  }

  HttpBackendOptions opt_;
};

/// Client for an out-of-process answering/summarization service.
///   POST /complete  body: {"prompt": "..."}  ->  {"text": "..."}
class ExternalTextBackend : public TextBackend {
 public:
  explicit ExternalTextBackend(HttpBackendOptions options) : opt_(std::move(options)) {
    if (opt_.endpoint.empty()) throw ConfigError("external text backend: endpoint required");
  }

  std::string complete(const std::string& prompt) override {
    nlohmann::json req;
    req["prompt"] = prompt;
    const std::string body =
        detail::http_post_with_retry(opt_, "/complete", req.dump(), "application/json");
    try {
      return nlohmann::json::parse(body).at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("text backend returned malformed reply: ") + e.what(), 1,
                         opt_.max_attempts);
    }
  }

 private:
  HttpBackendOptions opt_;
};

}  // namespace mmc

#endif  // MMC_BACKENDS_HTTP_HPP
