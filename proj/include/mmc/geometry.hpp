#ifndef MMC_GEOMETRY_HPP
#define MMC_GEOMETRY_HPP

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "mmc/hash.hpp"
#include "mmc/kdtree.hpp"
#include "mmc/types.hpp"

namespace mmc {

template <typename Scalar>
void validate_cloud(const PointMatrix<Scalar>& cloud) {
  if (cloud.rows() == 0) throw EmptyInput("point cloud is empty");
  if (!cloud.allFinite()) throw InvalidInput("point cloud has non-finite coordinates");
}

/// Similarity transform that maps a cloud onto the unit convention:
/// bounding box centered at the origin, maximum half-extent 1.
template <typename Scalar>
struct UnitTransform {
  Eigen::Matrix<Scalar, 1, 3> center;
  Scalar scale;  // half-extent before normalization

  PointMatrix<Scalar> apply(const PointMatrix<Scalar>& cloud) const {
    return (cloud.rowwise() - center) / scale;
  }
};

template <typename Scalar>
UnitTransform<Scalar> unit_transform(const PointMatrix<Scalar>& cloud) {
  validate_cloud(cloud);
  const Eigen::Matrix<Scalar, 1, 3> lo = cloud.colwise().minCoeff();
  const Eigen::Matrix<Scalar, 1, 3> hi = cloud.colwise().maxCoeff();
  const Scalar half = ((hi - lo) / Scalar(2)).maxCoeff();
  if (half <= Scalar(0))
    throw DegenerateGeometry("cloud has zero extent on every axis");
  return {(lo + hi) / Scalar(2), half};
}

template <typename Scalar>
PointMatrix<Scalar> normalize_unit(const PointMatrix<Scalar>& cloud) {
  return unit_transform(cloud).apply(cloud);
}

/// Nearest neighbor in `b` for every point of `a`, lowest index on ties.
/// Small/moderate `b` uses the linear reference scan; larger sets go through
/// the kd-tree, which reproduces the scan bitwise.
template <typename Scalar>
std::vector<Neighbor<Scalar>> nearest_neighbors(const PointMatrix<Scalar>& a,
                                                const PointMatrix<Scalar>& b) {
  validate_cloud(a);
  validate_cloud(b);
  std::vector<Neighbor<Scalar>> out(static_cast<std::size_t>(a.rows()));
  if (b.rows() <= 64) {
    for (Index i = 0; i < a.rows(); ++i) {
      Neighbor<Scalar> best{std::numeric_limits<Scalar>::infinity(), -1};
      const Eigen::Matrix<Scalar, 1, 3> q = a.row(i);
      for (Index j = 0; j < b.rows(); ++j) {
        const Scalar d2 = sq_dist3<Scalar>(q, b.row(j));
        if (d2 < best.sq_dist) {
          best.sq_dist = d2;
          best.index = j;
        }
      }
      out[static_cast<std::size_t>(i)] = best;
    }
    return out;
  }
  KdTree3<Scalar> tree(b);
  for (Index i = 0; i < a.rows(); ++i)
    out[static_cast<std::size_t>(i)] = tree.nearest(a.row(i));
  return out;
}

/// Squared distance from each point of `a` to its nearest point of `b`.
template <typename Scalar>
Vector<Scalar> nn_sq_dists(const PointMatrix<Scalar>& a, const PointMatrix<Scalar>& b) {
  const auto nn = nearest_neighbors(a, b);
  Vector<Scalar> d(a.rows());
  for (Index i = 0; i < a.rows(); ++i) d[i] = nn[static_cast<std::size_t>(i)].sq_dist;
  return d;
}

/// Symmetric Chamfer distance: mean of squared nearest-neighbor distances
/// from pred to gt plus the same from gt to pred. Always evaluated in double.
template <typename Scalar>
double chamfer_distance(const PointMatrix<Scalar>& pred, const PointMatrix<Scalar>& gt) {
  const PointMatrix<double> p = pred.template cast<double>();
  const PointMatrix<double> g = gt.template cast<double>();
  const double term_pred = nn_sq_dists(p, g).mean();
  const double term_gt = nn_sq_dists(g, p).mean();
  return term_pred + term_gt;
}

template <typename Scalar>
struct ChamferResult {
  double value;
  PointMatrix<double> grad_pred;  // d value / d pred coordinates
};

/// Chamfer distance plus its analytic gradient with respect to pred. Where
/// the nearest-neighbor assignment is unique the loss is differentiable and
/// this is exact; on ties it returns the lowest-index subgradient.
template <typename Scalar>
ChamferResult<Scalar> chamfer_with_gradient(const PointMatrix<Scalar>& pred,
                                            const PointMatrix<Scalar>& gt) {
  const PointMatrix<double> p = pred.template cast<double>();
  const PointMatrix<double> g = gt.template cast<double>();
  const auto nn_pg = nearest_neighbors(p, g);
  const auto nn_gp = nearest_neighbors(g, p);

  const double inv_np = 1.0 / static_cast<double>(p.rows());
  const double inv_ng = 1.0 / static_cast<double>(g.rows());

  double value = 0.0;
  PointMatrix<double> grad = PointMatrix<double>::Zero(p.rows(), 3);
  for (Index i = 0; i < p.rows(); ++i) {
    const auto& nb = nn_pg[static_cast<std::size_t>(i)];
    value += nb.sq_dist * inv_np;
    grad.row(i) += 2.0 * inv_np * (p.row(i) - g.row(nb.index));
  }
  for (Index j = 0; j < g.rows(); ++j) {
    const auto& nb = nn_gp[static_cast<std::size_t>(j)];
    value += nb.sq_dist * inv_ng;
    grad.row(nb.index) += 2.0 * inv_ng * (p.row(nb.index) - g.row(j));
  }
  return {value, std::move(grad)};
}

/// F-Score at Euclidean threshold tau on matched nearest neighbors.
template <typename Scalar>
double fscore(const PointMatrix<Scalar>& pred, const PointMatrix<Scalar>& gt,
              double tau = 0.001) {
  if (!(tau > 0.0)) throw InvalidArgument("fscore: tau must be positive");
  const PointMatrix<double> p = pred.template cast<double>();
  const PointMatrix<double> g = gt.template cast<double>();
  const double tau2 = tau * tau;
  const Vector<double> dp = nn_sq_dists(p, g);
  const Vector<double> dg = nn_sq_dists(g, p);
  const double precision =
      static_cast<double>((dp.array() <= tau2).count()) / static_cast<double>(p.rows());
  const double recall =
      static_cast<double>((dg.array() <= tau2).count()) / static_cast<double>(g.rows());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

template <typename Scalar>
bool lex_less_point(const Eigen::Matrix<Scalar, 1, 3>& a,
                    const Eigen::Matrix<Scalar, 1, 3>& b) {
  if (a[0] != b[0]) return a[0] < b[0];
  if (a[1] != b[1]) return a[1] < b[1];
  return a[2] < b[2];
}

template <typename Scalar>
Index lex_min_index(const PointMatrix<Scalar>& cloud) {
  Index best = 0;
  for (Index i = 1; i < cloud.rows(); ++i)
    if (lex_less_point<Scalar>(cloud.row(i), cloud.row(best))) best = i;
  return best;
}

/// Greedy farthest-point selection. Ties on the max-min distance resolve to
/// the lexicographically smallest point, then the lowest index, so the
/// selected point sequence does not depend on the input ordering.
template <typename Scalar>
std::vector<Index> farthest_point_indices(const PointMatrix<Scalar>& cloud, Index count,
                                          Index start) {
  validate_cloud(cloud);
  const Index n = cloud.rows();
  if (count <= 0) throw InvalidArgument("farthest-point sampling: count must be positive");
  if (start < 0 || start >= n) throw InvalidArgument("farthest-point sampling: bad start");
  count = std::min(count, n);

  std::vector<Index> picked;
  picked.reserve(static_cast<std::size_t>(count));
  picked.push_back(start);
  Vector<Scalar> min_d2(n);
  for (Index i = 0; i < n; ++i) min_d2[i] = sq_dist3<Scalar>(cloud.row(i), cloud.row(start));

  while (static_cast<Index>(picked.size()) < count) {
    Index next = 0;
    for (Index i = 1; i < n; ++i) {
      if (min_d2[i] > min_d2[next] ||
          (min_d2[i] == min_d2[next] &&
           lex_less_point<Scalar>(cloud.row(i), cloud.row(next)))) {
        next = i;
      }
    }
    picked.push_back(next);
    for (Index i = 0; i < n; ++i)
      min_d2[i] = std::min(min_d2[i], sq_dist3<Scalar>(cloud.row(i), cloud.row(next)));
  }
  return picked;
}

enum class ResampleMethod { kRandom, kFarthestPoint };

/// Resample to exactly `target` points. Shrinking keeps a subset (seeded
/// random choice or farthest-point from a seeded start); growing keeps every
/// input point and appends seeded draws with replacement.
template <typename Scalar>
PointMatrix<Scalar> resample(const PointMatrix<Scalar>& cloud, Index target,
                             ResampleMethod method, std::uint64_t seed = 0) {
  validate_cloud(cloud);
  if (target <= 0) throw InvalidArgument("resample: target must be positive");
  const Index n = cloud.rows();

  std::vector<Index> keep;
  std::mt19937_64 rng(mix_u64(seed, 0x7e5a));
  if (method == ResampleMethod::kRandom) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    const Index take = std::min(target, n);
    for (Index i = 0; i < take; ++i) {
      const Index j = i + static_cast<Index>(bounded_u64(rng, static_cast<std::uint64_t>(n - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    keep.assign(idx.begin(), idx.begin() + take);
  } else {
    const Index start = static_cast<Index>(seed % static_cast<std::uint64_t>(n));
    keep = farthest_point_indices(cloud, std::min(target, n), start);
  }
  while (static_cast<Index>(keep.size()) < target)
    keep.push_back(static_cast<Index>(bounded_u64(rng, static_cast<std::uint64_t>(n))));

  PointMatrix<Scalar> out(target, 3);
  for (Index i = 0; i < target; ++i) out.row(i) = cloud.row(keep[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace mmc

#endif  // MMC_GEOMETRY_HPP
