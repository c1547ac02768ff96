#ifndef MMC_ATTENTION_HPP
#define MMC_ATTENTION_HPP

#include <cmath>
#include <string>
#include <vector>

#include "mmc/layers.hpp"
#include "mmc/types.hpp"

namespace mmc {

/// Multi-head scaled dot-product attention with a residual connection,
/// followed by a pointwise feed-forward sublayer with its own residual:
///   y1 = q_in + Wo . concat_heads(softmax(Qh^T Kh / sqrt(dh)) applied to Vh)
///   y  = y1 + W2 . tanh(W1 . y1 + b1) + b2
/// Queries may come from a different token set than keys/values, so the same
/// block serves both cross-attention and decoder self-attention. The output
/// is invariant to permutations of the key/value columns.
template <typename Scalar>
struct AttentionBlock {
  Index channels = 0;
  int heads = 1;
  Dense<Scalar> wq, wk, wv, wo;
  Dense<Scalar> ff1, ff2;
  Tanh<Scalar> ff_act;

  // forward caches
  Matrix<Scalar> q_in_cache, kv_cache;
  Matrix<Scalar> q_proj, k_proj, v_proj;
  std::vector<Matrix<Scalar>> attn;  // per head: queries x keys, rows sum to 1
  Matrix<Scalar> heads_out, y1_cache;

  void init(const std::string& name, Index channel_count, int head_count,
            std::mt19937_64& rng) {
    if (channel_count <= 0 || head_count <= 0 || channel_count % head_count != 0)
      throw ConfigError(name + ": channels must be a positive multiple of heads");
    channels = channel_count;
    heads = head_count;
    wq.init(name + ".wq", channels, channels, rng);
    wk.init(name + ".wk", channels, channels, rng);
    wv.init(name + ".wv", channels, channels, rng);
    wo.init(name + ".wo", channels, channels, rng);
    ff1.init(name + ".ff1", channels, 2 * channels, rng);
    ff2.init(name + ".ff2", 2 * channels, channels, rng);
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& q_in, const Matrix<Scalar>& kv) {
    if (q_in.rows() != channels || kv.rows() != channels)
      throw InvalidInput("attention: channel dimension mismatch");
    q_in_cache = q_in;
    kv_cache = kv;
    q_proj = wq.forward(q_in);
    k_proj = wk.forward(kv);
    v_proj = wv.forward(kv);

    const Index dh = channels / heads;
    const Scalar scale = Scalar(1) / static_cast<Scalar>(std::sqrt(static_cast<double>(dh)));
    const Index tq = q_in.cols(), tk = kv.cols();

    attn.assign(static_cast<std::size_t>(heads), Matrix<Scalar>());
    heads_out.resize(channels, tq);
    for (int h = 0; h < heads; ++h) {
      const auto qh = q_proj.middleRows(h * dh, dh);
      const auto kh = k_proj.middleRows(h * dh, dh);
      const auto vh = v_proj.middleRows(h * dh, dh);

      Matrix<Scalar> scores = (qh.transpose() * kh) * scale;  // tq x tk
      Matrix<Scalar>& a = attn[static_cast<std::size_t>(h)];
      a.resize(tq, tk);
      for (Index t = 0; t < tq; ++t) {
        const Scalar row_max = scores.row(t).maxCoeff();
        const Matrix<Scalar> e =
            exp_matrix<Scalar>((scores.row(t).array() - row_max).matrix());
        a.row(t) = e / e.sum();
      }
      heads_out.middleRows(h * dh, dh).noalias() = vh * a.transpose();
    }

    y1_cache = q_in + wo.forward(heads_out);
    const Matrix<Scalar> f = ff2.forward(ff_act.forward(ff1.forward(y1_cache)));
    return y1_cache + f;
  }

  /// Gradient w.r.t. the query input; the key/value input gradient is
  /// accumulated into *d_kv when non-null.
  Matrix<Scalar> backward(const Matrix<Scalar>& dy, Matrix<Scalar>* d_kv = nullptr) {
    Matrix<Scalar> dy1 = dy;
    dy1 += ff1.backward(ff_act.backward(ff2.backward(dy)));

    Matrix<Scalar> d_heads = wo.backward(dy1);
    Matrix<Scalar> dq_in = dy1;  // residual

    const Index dh = channels / heads;
    const Scalar scale = Scalar(1) / static_cast<Scalar>(std::sqrt(static_cast<double>(dh)));

    Matrix<Scalar> dq_proj = Matrix<Scalar>::Zero(channels, q_proj.cols());
    Matrix<Scalar> dk_proj = Matrix<Scalar>::Zero(channels, k_proj.cols());
    Matrix<Scalar> dv_proj = Matrix<Scalar>::Zero(channels, v_proj.cols());

    for (int h = 0; h < heads; ++h) {
      const auto qh = q_proj.middleRows(h * dh, dh);
      const auto kh = k_proj.middleRows(h * dh, dh);
      const auto vh = v_proj.middleRows(h * dh, dh);
      const Matrix<Scalar>& a = attn[static_cast<std::size_t>(h)];
      const auto d_oh = d_heads.middleRows(h * dh, dh);

      dv_proj.middleRows(h * dh, dh).noalias() = d_oh * a;
      Matrix<Scalar> da = d_oh.transpose() * vh;  // tq x tk

      // softmax backward per query row: ds = a .* (da - rowsum(da .* a))
      Matrix<Scalar> ds(a.rows(), a.cols());
      for (Index t = 0; t < a.rows(); ++t) {
        const Scalar dot = (da.row(t).cwiseProduct(a.row(t))).sum();
        ds.row(t) = a.row(t).cwiseProduct((da.row(t).array() - dot).matrix());
      }
      ds *= scale;

      dq_proj.middleRows(h * dh, dh).noalias() = kh * ds.transpose();
      dk_proj.middleRows(h * dh, dh).noalias() = qh * ds;
    }

    dq_in += wq.backward(dq_proj);
    const Matrix<Scalar> dkv = wk.backward(dk_proj) + wv.backward(dv_proj);
    if (d_kv) *d_kv += dkv;
    return dq_in;
  }

  void collect(std::vector<ParamRef<Scalar>>& out) {
    wq.collect(out);
    wk.collect(out);
    wv.collect(out);
    wo.collect(out);
    ff1.collect(out);
    ff2.collect(out);
  }
};

}  // namespace mmc

#endif  // MMC_ATTENTION_HPP
