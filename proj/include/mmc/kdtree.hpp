#ifndef MMC_KDTREE_HPP
#define MMC_KDTREE_HPP

#include <algorithm>
#include <numeric>
#include <vector>

#include "mmc/types.hpp"

namespace mmc {

/// Exact squared distance between two 3D points. Every nearest-neighbor path
/// (brute force and tree) must use this same expression so accelerated
/// results are bitwise equal to the reference.
template <typename Scalar>
inline Scalar sq_dist3(const Eigen::Matrix<Scalar, 1, 3>& a,
                       const Eigen::Matrix<Scalar, 1, 3>& b) {
  const Scalar dx = a[0] - b[0];
  const Scalar dy = a[1] - b[1];
  const Scalar dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

template <typename Scalar>
struct Neighbor {
  Scalar sq_dist;
  Index index;
};

/// Static 3D kd-tree over a point set. Queries return the same (distance,
/// index) pair as an ascending-index linear scan: ties on distance resolve
/// to the lowest point index.
template <typename Scalar>
class KdTree3 {
 public:
  explicit KdTree3(const PointMatrix<Scalar>& pts) : pts_(pts) {
    if (pts_.rows() == 0) throw EmptyInput("kd-tree: empty point set");
    order_.resize(static_cast<std::size_t>(pts_.rows()));
    std::iota(order_.begin(), order_.end(), Index{0});
    nodes_.reserve(order_.size() / kLeafSize * 2 + 2);
    root_ = build(0, static_cast<Index>(order_.size()));
  }

  Neighbor<Scalar> nearest(const Eigen::Matrix<Scalar, 1, 3>& q) const {
    Neighbor<Scalar> best{std::numeric_limits<Scalar>::infinity(), -1};
    search(root_, q, best);
    return best;
  }

 private:
  static constexpr Index kLeafSize = 12;

  struct Node {
    Scalar split = 0;
    int axis = -1;     // -1 marks a leaf
    Index left = -1;   // child node or, for leaves, begin offset in order_
    Index right = -1;  // child node or, for leaves, end offset in order_
  };

  Index build(Index begin, Index end) {
    Node node;
    if (end - begin <= kLeafSize) {
      node.axis = -1;
      node.left = begin;
      node.right = end;
      // Ascending index order inside the leaf keeps tie handling trivial.
      std::sort(order_.begin() + begin, order_.begin() + end);
      nodes_.push_back(node);
      return static_cast<Index>(nodes_.size() - 1);
    }
    Eigen::Matrix<Scalar, 1, 3> lo = pts_.row(order_[begin]);
    Eigen::Matrix<Scalar, 1, 3> hi = lo;
    for (Index i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(pts_.row(order_[i]));
      hi = hi.cwiseMax(pts_.row(order_[i]));
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const Index mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](Index a, Index b) {
                       const Scalar pa = pts_(a, axis), pb = pts_(b, axis);
                       return pa < pb || (pa == pb && a < b);
                     });
    node.axis = axis;
    node.split = pts_(order_[mid], axis);
    const Index self = static_cast<Index>(nodes_.size());
    nodes_.push_back(node);
    const Index left = build(begin, mid);
    const Index right = build(mid, end);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
  }

  void search(Index node_id, const Eigen::Matrix<Scalar, 1, 3>& q,
              Neighbor<Scalar>& best) const {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (Index i = node.left; i < node.right; ++i) {
        const Index idx = order_[i];
        const Scalar d2 = sq_dist3<Scalar>(q, pts_.row(idx));
        if (d2 < best.sq_dist || (d2 == best.sq_dist && idx < best.index)) {
          best.sq_dist = d2;
          best.index = idx;
        }
      }
      return;
    }
    const Scalar delta = q[node.axis] - node.split;
    const Index near = delta < 0 ? node.left : node.right;
    const Index far = delta < 0 ? node.right : node.left;
    search(near, q, best);
    // The far half can still hold an equal-distance, lower-index point, so
    // it is visited on exact ties as well.
    if (delta * delta <= best.sq_dist) search(far, q, best);
  }

  PointMatrix<Scalar> pts_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
  Index root_ = 0;
};

}  // namespace mmc

#endif  // MMC_KDTREE_HPP
