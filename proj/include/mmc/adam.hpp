#ifndef MMC_ADAM_HPP
#define MMC_ADAM_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "mmc/layers.hpp"
#include "mmc/types.hpp"

namespace mmc {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a fixed parameter list. First/second moment estimates live per
/// parameter tensor; all update arithmetic is element-wise, so results do not
/// depend on evaluation order.
template <typename Scalar>
class Adam {
 public:
  Adam(std::vector<ParamRef<Scalar>> params, AdamHyper hyper)
      : params_(std::move(params)), hp_(hyper) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.push_back(Matrix<Scalar>::Zero(p.value->rows(), p.value->cols()));
      v_.push_back(Matrix<Scalar>::Zero(p.value->rows(), p.value->cols()));
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(hp_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(hp_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const Matrix<Scalar>& g = *params_[i].grad;
      Matrix<Scalar>& m = m_[i];
      Matrix<Scalar>& v = v_[i];
      m = Scalar(hp_.beta1) * m + Scalar(1.0 - hp_.beta1) * g;
      v = Scalar(hp_.beta2) * v + Scalar(1.0 - hp_.beta2) * g.cwiseProduct(g);
      const Matrix<Scalar> m_hat = m / Scalar(bc1);
      const Matrix<Scalar> v_hat = v / Scalar(bc2);
      params_[i].value->array() -=
          Scalar(hp_.lr) * m_hat.array() / (v_hat.array().sqrt() + Scalar(hp_.eps));
    }
  }

  const AdamHyper& hyper() const { return hp_; }
  std::int64_t t() const { return t_; }
  void set_t(std::int64_t t) { t_ = t; }

  const std::vector<ParamRef<Scalar>>& params() const { return params_; }
  Matrix<Scalar>& moment1(std::size_t i) { return m_[i]; }
  Matrix<Scalar>& moment2(std::size_t i) { return v_[i]; }

 private:
  std::vector<ParamRef<Scalar>> params_;
  AdamHyper hp_;
  std::vector<Matrix<Scalar>> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace mmc

#endif  // MMC_ADAM_HPP
