#ifndef MMC_POINT_ENCODER_HPP
#define MMC_POINT_ENCODER_HPP

#include <algorithm>
#include <string>
#include <vector>

#include "mmc/geometry.hpp"
#include "mmc/layers.hpp"
#include "mmc/types.hpp"

namespace mmc {

/// Edge-convolution style point feature extractor. Token centers are chosen
/// by farthest-point sampling started at the lexicographically smallest
/// point; each center gathers its k nearest neighbors, every edge is encoded
/// as [center; neighbor - center] through a shared two-layer MLP, and the
/// token feature is the per-channel max over the center's edges.
///
/// Both the token sequence and each token's neighbor set are functions of
/// point values, never of input order, so a permuted input cloud yields
/// bitwise-identical token features.
template <typename Scalar>
struct PointEncoder {
  Index channels = 0, tokens = 0;
  int knn = 16;
  Dense<Scalar> mlp1, mlp2;
  Tanh<Scalar> act;

  // forward caches
  Index k_eff = 0;
  Matrix<Scalar> edges;                 // 6 x tokens*k_eff
  Matrix<Scalar> hidden2;               // channels x tokens*k_eff, pre-pool
  std::vector<Index> argmax;            // channels*tokens entries into [0, k_eff)

  void init(const std::string& name, Index channel_count, Index token_count, int k,
            Index hidden, std::mt19937_64& rng) {
    if (channel_count <= 0 || token_count <= 0 || k <= 0 || hidden <= 0)
      throw ConfigError(name + ": sizes must be positive");
    channels = channel_count;
    tokens = token_count;
    knn = k;
    mlp1.init(name + ".mlp1", 6, hidden, rng);
    mlp2.init(name + ".mlp2", hidden, channels, rng);
  }

  /// k nearest points of `cloud` to cloud.row(center) including the center
  /// itself, ordered by (distance, lexicographic point value) so the chosen
  /// set is independent of input ordering.
  static std::vector<Index> neighbor_indices(const PointMatrix<Scalar>& cloud, Index center,
                                             Index k) {
    struct Cand {
      Scalar d2;
      Index idx;
    };
    const Index n = cloud.rows();
    std::vector<Cand> cands(static_cast<std::size_t>(n));
    const Eigen::Matrix<Scalar, 1, 3> c = cloud.row(center);
    for (Index i = 0; i < n; ++i) cands[static_cast<std::size_t>(i)] = {sq_dist3<Scalar>(c, cloud.row(i)), i};
    const Index take = std::min(k, n);
    const auto less = [&cloud](const Cand& a, const Cand& b) {
      if (a.d2 != b.d2) return a.d2 < b.d2;
      const Eigen::Matrix<Scalar, 1, 3> pa = cloud.row(a.idx), pb = cloud.row(b.idx);
      if (pa[0] != pb[0]) return pa[0] < pb[0];
      if (pa[1] != pb[1]) return pa[1] < pb[1];
      return pa[2] < pb[2];
    };
    std::partial_sort(cands.begin(), cands.begin() + take, cands.end(), less);
    std::vector<Index> out(static_cast<std::size_t>(take));
    for (Index i = 0; i < take; ++i) out[static_cast<std::size_t>(i)] = cands[static_cast<std::size_t>(i)].idx;
    return out;
  }

  Matrix<Scalar> forward(const PointMatrix<Scalar>& cloud) {
    validate_cloud(cloud);
    if (cloud.rows() < tokens)
      throw InvalidInput("point encoder: cloud must have at least `tokens` points");

    const Index start = lex_min_index(cloud);
    const std::vector<Index> centers = farthest_point_indices(cloud, tokens, start);

    k_eff = std::min<Index>(knn, cloud.rows());
    edges.resize(6, tokens * k_eff);
    for (Index t = 0; t < tokens; ++t) {
      const Eigen::Matrix<Scalar, 1, 3> c = cloud.row(centers[static_cast<std::size_t>(t)]);
      const auto nbrs = neighbor_indices(cloud, centers[static_cast<std::size_t>(t)], k_eff);
      for (Index j = 0; j < k_eff; ++j) {
        const Eigen::Matrix<Scalar, 1, 3> p = cloud.row(nbrs[static_cast<std::size_t>(j)]);
        const Index col = t * k_eff + j;
        edges(0, col) = c[0];
        edges(1, col) = c[1];
        edges(2, col) = c[2];
        edges(3, col) = p[0] - c[0];
        edges(4, col) = p[1] - c[1];
        edges(5, col) = p[2] - c[2];
      }
    }

    hidden2 = mlp2.forward(act.forward(mlp1.forward(edges)));

    Matrix<Scalar> out(channels, tokens);
    argmax.assign(static_cast<std::size_t>(channels * tokens), 0);
    for (Index t = 0; t < tokens; ++t) {
      for (Index c = 0; c < channels; ++c) {
        Index best = 0;
        Scalar best_v = hidden2(c, t * k_eff);
        for (Index j = 1; j < k_eff; ++j) {
          const Scalar v = hidden2(c, t * k_eff + j);
          if (v > best_v) {
            best_v = v;
            best = j;
          }
        }
        out(c, t) = best_v;
        argmax[static_cast<std::size_t>(c * tokens + t)] = best;
      }
    }
    return out;
  }

  /// Accumulates weight gradients; the input cloud is data, so no gradient
  /// w.r.t. coordinates is produced.
  void backward(const Matrix<Scalar>& d_tokens) {
    Matrix<Scalar> d_hidden2 = Matrix<Scalar>::Zero(channels, tokens * k_eff);
    for (Index t = 0; t < tokens; ++t)
      for (Index c = 0; c < channels; ++c)
        d_hidden2(c, t * k_eff + argmax[static_cast<std::size_t>(c * tokens + t)]) +=
            d_tokens(c, t);
    mlp1.backward(act.backward(mlp2.backward(d_hidden2)));
  }

  void collect(std::vector<ParamRef<Scalar>>& out) {
    mlp1.collect(out);
    mlp2.collect(out);
  }
};

}  // namespace mmc

#endif  // MMC_POINT_ENCODER_HPP
