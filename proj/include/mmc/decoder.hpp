#ifndef MMC_DECODER_HPP
#define MMC_DECODER_HPP

#include <string>
#include <vector>

#include "mmc/attention.hpp"
#include "mmc/layers.hpp"
#include "mmc/types.hpp"

namespace mmc {

/// Token decoder: one self-attention block over the fused tokens, then two
/// pointwise heads. The center head predicts one 3D anchor per token; the
/// offset head predicts output_points/tokens displacements per token. Output
/// point t*m+j is center_t + offset_{t,j}; with all-zero head weights every
/// point lands at the origin.
template <typename Scalar>
struct Decoder {
  Index channels = 0, tokens = 0, per_token = 0;
  AttentionBlock<Scalar> self_attn;
  Dense<Scalar> center_head, offset_head;

  Matrix<Scalar> attended;  // forward cache

  void init(const std::string& name, Index channel_count, Index token_count,
            Index output_points, int heads, std::mt19937_64& rng) {
    if (output_points <= 0) throw ConfigError(name + ": output_points must be positive");
    if (output_points % token_count != 0)
      throw ConfigError(name + ": output_points must be divisible by tokens");
    channels = channel_count;
    tokens = token_count;
    per_token = output_points / token_count;
    self_attn.init(name + ".attn", channels, heads, rng);
    center_head.init(name + ".center", channels, 3, rng);
    offset_head.init(name + ".offset", channels, 3 * per_token, rng);
  }

  PointMatrix<Scalar> forward(const Matrix<Scalar>& fused) {
    if (fused.rows() != channels || fused.cols() != tokens)
      throw InvalidInput("decoder: fused feature shape mismatch");
    attended = self_attn.forward(fused, fused);
    const Matrix<Scalar> centers = center_head.forward(attended);   // 3 x tokens
    const Matrix<Scalar> offsets = offset_head.forward(attended);   // 3m x tokens

    PointMatrix<Scalar> points(tokens * per_token, 3);
    for (Index t = 0; t < tokens; ++t)
      for (Index j = 0; j < per_token; ++j)
        for (int d = 0; d < 3; ++d)
          points(t * per_token + j, d) = centers(d, t) + offsets(j * 3 + d, t);
    return points;
  }

  /// Gradient w.r.t. the fused token features.
  Matrix<Scalar> backward(const PointMatrix<Scalar>& d_points) {
    Matrix<Scalar> d_centers = Matrix<Scalar>::Zero(3, tokens);
    Matrix<Scalar> d_offsets = Matrix<Scalar>::Zero(3 * per_token, tokens);
    for (Index t = 0; t < tokens; ++t)
      for (Index j = 0; j < per_token; ++j)
        for (int d = 0; d < 3; ++d) {
          const Scalar g = d_points(t * per_token + j, d);
          d_centers(d, t) += g;
          d_offsets(j * 3 + d, t) += g;
        }
    Matrix<Scalar> d_attended = center_head.backward(d_centers);
    d_attended += offset_head.backward(d_offsets);
    // self-attention: queries and keys/values are the same tensor
    Matrix<Scalar> d_fused = Matrix<Scalar>::Zero(channels, tokens);
    d_fused += self_attn.backward(d_attended, &d_fused);
    return d_fused;
  }

  void collect(std::vector<ParamRef<Scalar>>& out) {
    self_attn.collect(out);
    center_head.collect(out);
    offset_head.collect(out);
  }
};

}  // namespace mmc

#endif  // MMC_DECODER_HPP
