#ifndef MMC_IMAGE_ENCODER_HPP
#define MMC_IMAGE_ENCODER_HPP

#include <algorithm>
#include <string>
#include <vector>

#include "mmc/image.hpp"
#include "mmc/layers.hpp"
#include "mmc/types.hpp"

namespace mmc {

/// Four-stage strided convolutional pyramid over the 3x224x224 input. Each
/// stage halves the spatial extent (224 -> 112 -> 56 -> 28 -> 14) and applies
/// tanh; stage widths grow to the configured channel count. The final 14x14
/// grid is flattened to 196 cells and mean-pooled over contiguous groups to
/// exactly `tokens` columns.
template <typename Scalar>
struct ImageEncoder {
  Index channels = 0, tokens = 0;
  Conv3x3s2<Scalar> conv1, conv2, conv3, conv4;
  Tanh<Scalar> act1, act2, act3, act4;

  static constexpr int kGrid = 14;                  // 224 / 2^4
  static constexpr int kCells = kGrid * kGrid;      // 196

  // group g covers cells [bounds[g], bounds[g+1])
  std::vector<Index> group_bounds;

  void init(const std::string& name, Index channel_count, Index token_count,
            std::mt19937_64& rng) {
    if (channel_count <= 0 || token_count <= 0)
      throw ConfigError(name + ": sizes must be positive");
    if (token_count > kCells)
      throw ConfigError(name + ": tokens must not exceed the final grid size (196)");
    channels = channel_count;
    tokens = token_count;

    const Index w1 = std::max<Index>(1, channels / 8);
    const Index w2 = std::max<Index>(1, channels / 4);
    const Index w3 = std::max<Index>(1, channels / 2);
    conv1.init(name + ".conv1", 3, w1, rng);
    conv2.init(name + ".conv2", w1, w2, rng);
    conv3.init(name + ".conv3", w2, w3, rng);
    conv4.init(name + ".conv4", w3, channels, rng);

    group_bounds.resize(static_cast<std::size_t>(tokens) + 1);
    for (Index g = 0; g <= tokens; ++g)
      group_bounds[static_cast<std::size_t>(g)] = g * kCells / tokens;
  }

  static Matrix<Scalar> to_feature_map(const RenderedImage& image) {
    Matrix<Scalar> x(3, static_cast<Index>(kImageSize) * kImageSize);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < kImageSize; ++y)
        for (int xpix = 0; xpix < kImageSize; ++xpix)
          x(c, static_cast<Index>(y) * kImageSize + xpix) =
              static_cast<Scalar>(image.channels[static_cast<std::size_t>(c)](y, xpix));
    return x;
  }

  Matrix<Scalar> forward(const RenderedImage& image) {
    image.validate();
    const Matrix<Scalar> x0 = to_feature_map(image);
    const auto& x1 = act1.forward(conv1.forward(x0, 224, 224));
    const auto& x2 = act2.forward(conv2.forward(x1, 112, 112));
    const auto& x3 = act3.forward(conv3.forward(x2, 56, 56));
    const auto& x4 = act4.forward(conv4.forward(x3, 28, 28));  // channels x 196

    Matrix<Scalar> out(channels, tokens);
    for (Index g = 0; g < tokens; ++g) {
      const Index b = group_bounds[static_cast<std::size_t>(g)];
      const Index e = group_bounds[static_cast<std::size_t>(g) + 1];
      out.col(g) = x4.middleCols(b, e - b).rowwise().sum() / static_cast<Scalar>(e - b);
    }
    return out;
  }

  void backward(const Matrix<Scalar>& d_tokens) {
    Matrix<Scalar> d4 = Matrix<Scalar>::Zero(channels, kCells);
    for (Index g = 0; g < tokens; ++g) {
      const Index b = group_bounds[static_cast<std::size_t>(g)];
      const Index e = group_bounds[static_cast<std::size_t>(g) + 1];
      for (Index cell = b; cell < e; ++cell)
        d4.col(cell) = d_tokens.col(g) / static_cast<Scalar>(e - b);
    }
    const Matrix<Scalar> d3 = conv4.backward(act4.backward(d4));
    const Matrix<Scalar> d2 = conv3.backward(act3.backward(d3));
    const Matrix<Scalar> d1 = conv2.backward(act2.backward(d2));
    conv1.backward(act1.backward(d1));
  }

  void collect(std::vector<ParamRef<Scalar>>& out) {
    conv1.collect(out);
    conv2.collect(out);
    conv3.collect(out);
    conv4.collect(out);
  }
};

}  // namespace mmc

#endif  // MMC_IMAGE_ENCODER_HPP
