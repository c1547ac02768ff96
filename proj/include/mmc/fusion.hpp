#ifndef MMC_FUSION_HPP
#define MMC_FUSION_HPP

#include <string>
#include <vector>

#include "mmc/embedder.hpp"
#include "mmc/layers.hpp"
#include "mmc/types.hpp"

namespace mmc {

/// Concatenation of the enabled global features, text first. Returns an
/// empty vector when both sources are disabled.
inline Vector<double> concat_globals(const GlobalFeature* g_txt, const GlobalFeature* g_vis) {
  const int dim = (g_txt ? kGlobalDim : 0) + (g_vis ? kGlobalDim : 0);
  Vector<double> g(dim);
  int at = 0;
  if (g_txt) {
    g.segment(at, kGlobalDim) = g_txt->values;
    at += kGlobalDim;
  }
  if (g_vis) g.segment(at, kGlobalDim) = g_vis->values;
  return g;
}

/// Global-feature injection stage: the concatenated global vector is
/// broadcast to every token, stacked under the token's channel vector, and
/// passed through a shared pointwise MLP back down to `channels`:
///   y_t = W2 . tanh(W1 . [x_t; g] + b1) + b2
/// Every column is processed by an independent matrix-vector product, so
/// permuting input columns permutes output columns bitwise.
template <typename Scalar>
struct StageFuse {
  Index channels = 0, global_dim = 0;
  Dense<Scalar> mlp1, mlp2;
  Tanh<Scalar> act;

  void init(const std::string& name, Index channel_count, Index g_dim, Index hidden,
            std::mt19937_64& rng) {
    if (g_dim <= 0)
      throw FusionDisabled(name + ": no global feature enabled");
    channels = channel_count;
    global_dim = g_dim;
    mlp1.init(name + ".mlp1", channels + g_dim, hidden, rng);
    mlp2.init(name + ".mlp2", hidden, channels, rng);
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& tokens_in, const Vector<double>& g) {
    if (g.size() != global_dim)
      throw InvalidInput("stage fuse: global feature dimension mismatch");
    if (tokens_in.rows() != channels)
      throw InvalidInput("stage fuse: channel dimension mismatch");
    if (!tokens_in.allFinite()) throw InvalidInput("stage fuse: non-finite token features");

    Matrix<Scalar> stacked(channels + global_dim, tokens_in.cols());
    const Vector<Scalar> gs = g.cast<Scalar>();
    for (Index t = 0; t < tokens_in.cols(); ++t) {
      stacked.col(t).head(channels) = tokens_in.col(t);
      stacked.col(t).tail(global_dim) = gs;
    }
    return mlp2.forward(act.forward(mlp1.forward(stacked)));
  }

  /// Gradient w.r.t. the token input; the frozen global feature gets none.
  Matrix<Scalar> backward(const Matrix<Scalar>& dy) {
    const Matrix<Scalar> d_stacked = mlp1.backward(act.backward(mlp2.backward(dy)));
    return d_stacked.topRows(channels);
  }

  void collect(std::vector<ParamRef<Scalar>>& out) {
    mlp1.collect(out);
    mlp2.collect(out);
  }
};

}  // namespace mmc

#endif  // MMC_FUSION_HPP
