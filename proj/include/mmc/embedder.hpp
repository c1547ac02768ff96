#ifndef MMC_EMBEDDER_HPP
#define MMC_EMBEDDER_HPP

#include <cstdint>
#include <string>

#include "mmc/hash.hpp"
#include "mmc/image.hpp"
#include "mmc/prompt.hpp"
#include "mmc/types.hpp"

namespace mmc {

enum class FeatureSource { kVision, kText };

/// 512-dim frozen global embedding of an image or a text prompt.
struct GlobalFeature {
  Eigen::Matrix<double, kGlobalDim, 1> values;
  FeatureSource source = FeatureSource::kVision;

  void validate() const {
    if (!values.allFinite()) throw InvalidInput("global feature: non-finite values");
  }
};

/// Frozen dual-encoder adapter. Implementations must be deterministic per
/// input: the embedding of a fixed image or prompt never changes within or
/// across training runs.
class EmbedderBackend {
 public:
  virtual ~EmbedderBackend() = default;
  virtual GlobalFeature embed_image(const RenderedImage& image) = 0;
  virtual GlobalFeature embed_text(const TextPrompt& prompt) = 0;
};

/// Deterministic stand-in for the pretrained dual encoder: the input content
/// is hashed, the hash seeds a fully-specified generator, and the resulting
/// gaussian vector is L2-normalized. Identical (input, seed) gives bitwise
/// identical vectors in any process on any platform.
class StubEmbedder : public EmbedderBackend {
 public:
  explicit StubEmbedder(std::uint64_t seed = 0) : seed_(seed) {}

  GlobalFeature embed_image(const RenderedImage& image) override {
    image.validate();
    Fnv1a h;
    h.update("img");
    h.update_u64(image.content_hash());
    return from_hash(h.digest(), FeatureSource::kVision);
  }

  GlobalFeature embed_text(const TextPrompt& prompt) override {
    if (prompt.token_count > kMaxPromptTokens)
      throw InvalidInput("embed_text: prompt exceeds 77 tokens");
    Fnv1a h;
    h.update("txt");
    h.update(prompt.rendered);
    return from_hash(h.digest(), FeatureSource::kText);
  }

 private:
  GlobalFeature from_hash(std::uint64_t content, FeatureSource source) const {
    GlobalFeature g;
    g.source = source;
    DeterministicNormal normal(mix_u64(seed_, content));
    for (int i = 0; i < kGlobalDim; ++i) g.values[i] = normal();
    const double norm = g.values.norm();
    if (norm > 0.0) g.values /= norm;
    return g;
  }

  std::uint64_t seed_;
};

inline GlobalFeature embed_image_global(const RenderedImage& image,
                                        EmbedderBackend& backend) {
  image.validate();
  GlobalFeature g = backend.embed_image(image);
  g.source = FeatureSource::kVision;
  g.validate();
  return g;
}

inline GlobalFeature embed_text_global(const TextPrompt& prompt,
                                       EmbedderBackend& backend) {
  if (prompt.token_count > kMaxPromptTokens)
    throw InvalidInput("embed_text_global: prompt exceeds 77 tokens");
  GlobalFeature g = backend.embed_text(prompt);
  g.source = FeatureSource::kText;
  g.validate();
  return g;
}

}  // namespace mmc

// The HTTP-backed external embedder lives in mmc/backends_http.hpp so that
// only translation units selecting it pay for the header-only HTTP library.

#endif  // MMC_EMBEDDER_HPP
