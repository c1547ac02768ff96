#ifndef MMC_LAYERS_HPP
#define MMC_LAYERS_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mmc/hash.hpp"
#include "mmc/types.hpp"

namespace mmc {

/// Named view of one trainable tensor and its gradient accumulator. The
/// pointed-to matrices are owned by the layer; the collection order defines
/// the canonical parameter order used by the optimizer and checkpoints.
template <typename Scalar>
struct ParamRef {
  std::string name;
  Matrix<Scalar>* value;
  Matrix<Scalar>* grad;
};

template <typename Scalar>
std::int64_t parameter_count(const std::vector<ParamRef<Scalar>>& params) {
  std::int64_t total = 0;
  for (const auto& p : params) total += static_cast<std::int64_t>(p.value->size());
  return total;
}

/// Fan-in scaled uniform init in (-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename Scalar>
void init_uniform(Matrix<Scalar>& m, Index fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      m(i, j) = static_cast<Scalar>((2.0 * unit_open_double(rng) - 1.0) * bound);
}

/// Element-wise tanh via scalar calls; unaryExpr keeps results independent of
/// SIMD packet boundaries, so permuting columns permutes outputs bitwise.
template <typename Scalar>
Matrix<Scalar> tanh_matrix(const Matrix<Scalar>& x) {
  return x.unaryExpr([](Scalar v) { return static_cast<Scalar>(std::tanh(v)); });
}

template <typename Scalar>
Matrix<Scalar> exp_matrix(const Matrix<Scalar>& x) {
  return x.unaryExpr([](Scalar v) { return static_cast<Scalar>(std::exp(v)); });
}

template <typename Scalar>
struct Tanh {
  Matrix<Scalar> y;

  const Matrix<Scalar>& forward(const Matrix<Scalar>& x) {
    y = tanh_matrix(x);
    return y;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy) const {
    return dy.cwiseProduct(Matrix<Scalar>::Ones(y.rows(), y.cols()) - y.cwiseProduct(y));
  }
};

/// Affine map y = W x + b applied column-wise. The forward pass multiplies
/// one column at a time: each output column then depends only on its own
/// input column, which makes column-permutation equivariance exact at the
/// floating-point level, not merely up to reassociation.
template <typename Scalar>
struct Dense {
  std::string name;
  Matrix<Scalar> w, b;    // w: out x in, b: out x 1
  Matrix<Scalar> gw, gb;
  Matrix<Scalar> x_cache;

  void init(const std::string& layer_name, Index in, Index out, std::mt19937_64& rng) {
    name = layer_name;
    w.resize(out, in);
    b = Matrix<Scalar>::Zero(out, 1);
    init_uniform(w, in, rng);
    init_uniform(b, in, rng);
    gw = Matrix<Scalar>::Zero(out, in);
    gb = Matrix<Scalar>::Zero(out, 1);
  }

  Index in_dim() const { return w.cols(); }
  Index out_dim() const { return w.rows(); }

  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    x_cache = x;
    Matrix<Scalar> y(w.rows(), x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
      y.col(j).noalias() = w * x.col(j);
      y.col(j) += b.col(0);
    }
    return y;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy) {
    gw.noalias() += dy * x_cache.transpose();
    gb.col(0) += dy.rowwise().sum();
    return w.transpose() * dy;
  }

  void collect(std::vector<ParamRef<Scalar>>& out) {
    out.push_back({name + ".w", &w, &gw});
    out.push_back({name + ".b", &b, &gb});
  }
};

/// 3x3 convolution, stride 2, zero padding 1, as im2col + matrix product.
/// Feature maps are stored as (channels x height*width) with row-major pixel
/// order inside each channel row.
template <typename Scalar>
struct Conv3x3s2 {
  std::string name;
  Index in_ch = 0, out_ch = 0;
  Matrix<Scalar> w, b;    // w: out_ch x in_ch*9
  Matrix<Scalar> gw, gb;
  Matrix<Scalar> cols_cache;
  int h_in = 0, w_in = 0, h_out = 0, w_out = 0;

  void init(const std::string& layer_name, Index in_channels, Index out_channels,
            std::mt19937_64& rng) {
    name = layer_name;
    in_ch = in_channels;
    out_ch = out_channels;
    w.resize(out_ch, in_ch * 9);
    b = Matrix<Scalar>::Zero(out_ch, 1);
    init_uniform(w, in_ch * 9, rng);
    init_uniform(b, in_ch * 9, rng);
    gw = Matrix<Scalar>::Zero(out_ch, in_ch * 9);
    gb = Matrix<Scalar>::Zero(out_ch, 1);
  }

  static int out_extent(int in_extent) { return (in_extent + 1) / 2; }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, int height, int width) {
    if (x.rows() != in_ch || x.cols() != static_cast<Index>(height) * width)
      throw InvalidInput(name + ": bad feature map shape");
    h_in = height;
    w_in = width;
    h_out = out_extent(height);
    w_out = out_extent(width);

    cols_cache.resize(in_ch * 9, static_cast<Index>(h_out) * w_out);
    for (int oy = 0; oy < h_out; ++oy) {
      for (int ox = 0; ox < w_out; ++ox) {
        const Index col = static_cast<Index>(oy) * w_out + ox;
        for (Index c = 0; c < in_ch; ++c) {
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = 2 * oy - 1 + ky;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = 2 * ox - 1 + kx;
              const Index row = c * 9 + ky * 3 + kx;
              cols_cache(row, col) =
                  (iy < 0 || iy >= h_in || ix < 0 || ix >= w_in)
                      ? Scalar(0)
                      : x(c, static_cast<Index>(iy) * w_in + ix);
            }
          }
        }
      }
    }

    Matrix<Scalar> y = w * cols_cache;
    y.colwise() += b.col(0);
    return y;
  }

  /// Returns the gradient w.r.t. the input feature map.
  Matrix<Scalar> backward(const Matrix<Scalar>& dy) {
    gw.noalias() += dy * cols_cache.transpose();
    gb.col(0) += dy.rowwise().sum();

    const Matrix<Scalar> dcols = w.transpose() * dy;
    Matrix<Scalar> dx = Matrix<Scalar>::Zero(in_ch, static_cast<Index>(h_in) * w_in);
    for (int oy = 0; oy < h_out; ++oy) {
      for (int ox = 0; ox < w_out; ++ox) {
        const Index col = static_cast<Index>(oy) * w_out + ox;
        for (Index c = 0; c < in_ch; ++c) {
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = 2 * oy - 1 + ky;
            if (iy < 0 || iy >= h_in) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = 2 * ox - 1 + kx;
              if (ix < 0 || ix >= w_in) continue;
              dx(c, static_cast<Index>(iy) * w_in + ix) += dcols(c * 9 + ky * 3 + kx, col);
            }
          }
        }
      }
    }
    return dx;
  }

  void collect(std::vector<ParamRef<Scalar>>& out) {
    out.push_back({name + ".w", &w, &gw});
    out.push_back({name + ".b", &b, &gb});
  }
};

}  // namespace mmc

#endif  // MMC_LAYERS_HPP
