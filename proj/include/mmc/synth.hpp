#ifndef MMC_SYNTH_HPP
#define MMC_SYNTH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mmc/geometry.hpp"
#include "mmc/hash.hpp"
#include "mmc/image.hpp"
#include "mmc/taxonomy.hpp"
#include "mmc/types.hpp"
#include "mmc/xyz.hpp"

namespace mmc {
namespace synth {

/// Axis-aligned box, sampled uniformly over its six faces.
struct Box {
  std::array<double, 3> center;
  std::array<double, 3> half;

  double area() const {
    const double a = half[1] * half[2], b = half[0] * half[2], c = half[0] * half[1];
    return 8.0 * (a + b + c);
  }
};

/// Axis-aligned cylinder (axis 0=x, 1=y, 2=z), lateral surface plus caps.
struct Cylinder {
  std::array<double, 3> center;
  double radius;
  double half_height;
  int axis;

  double area() const {
    const double two_pi = 2.0 * M_PI;
    return two_pi * radius * (2.0 * half_height) + 2.0 * M_PI * radius * radius;
  }
};

struct Assembly {
  std::vector<Box> boxes;
  std::vector<Cylinder> cylinders;
};

namespace detail {

inline double jitter(std::mt19937_64& rng, double v) {
  // +-15% size variation per dimension keeps shapes recognizable.
  return v * (0.85 + 0.30 * unit_open_double(rng));
}

inline void sample_box(std::mt19937_64& rng, const Box& b, double* out) {
  const double ax = b.half[1] * b.half[2];
  const double ay = b.half[0] * b.half[2];
  const double az = b.half[0] * b.half[1];
  const double total = ax + ay + az;
  const double pick = unit_open_double(rng) * total;
  int face;  // axis whose +- planes host the point
  if (pick <= ax)
    face = 0;
  else if (pick <= ax + ay)
    face = 1;
  else
    face = 2;
  const double sign = unit_open_double(rng) <= 0.5 ? -1.0 : 1.0;
  const int u = (face + 1) % 3, v = (face + 2) % 3;
  out[face] = b.center[face] + sign * b.half[face];
  out[u] = b.center[u] + (2.0 * unit_open_double(rng) - 1.0) * b.half[u];
  out[v] = b.center[v] + (2.0 * unit_open_double(rng) - 1.0) * b.half[v];
}

inline void sample_cylinder(std::mt19937_64& rng, const Cylinder& c, double* out) {
  const double lateral = 2.0 * M_PI * c.radius * (2.0 * c.half_height);
  const double caps = 2.0 * M_PI * c.radius * c.radius;
  const double pick = unit_open_double(rng) * (lateral + caps);
  const int u = (c.axis + 1) % 3, v = (c.axis + 2) % 3;
  const double theta = 2.0 * M_PI * unit_open_double(rng);
  if (pick <= lateral) {
    out[c.axis] = c.center[c.axis] + (2.0 * unit_open_double(rng) - 1.0) * c.half_height;
    out[u] = c.center[u] + c.radius * std::cos(theta);
    out[v] = c.center[v] + c.radius * std::sin(theta);
  } else {
    const double sign = unit_open_double(rng) <= 0.5 ? -1.0 : 1.0;
    const double r = c.radius * std::sqrt(unit_open_double(rng));
    out[c.axis] = c.center[c.axis] + sign * c.half_height;
    out[u] = c.center[u] + r * std::cos(theta);
    out[v] = c.center[v] + r * std::sin(theta);
  }
}

}  // namespace detail

/// Seeded parametric assembly for one model of the given category.
/// Dimensions carry mild per-model jitter; layout is fixed per category.
inline Assembly make_assembly(const std::string& category, std::mt19937_64& rng) {
  using detail::jitter;
  Assembly a;
  auto box = [&](double cx, double cy, double cz, double hx, double hy, double hz) {
    a.boxes.push_back({{cx, cy, cz}, {jitter(rng, hx), jitter(rng, hy), jitter(rng, hz)}});
  };
  auto cyl = [&](double cx, double cy, double cz, double r, double hh, int axis) {
    a.cylinders.push_back({{cx, cy, cz}, jitter(rng, r), jitter(rng, hh), axis});
  };

  if (category == "chair") {
    box(0.0, 0.50, 0.0, 0.40, 0.05, 0.40);    // seat
    box(0.0, 0.95, -0.36, 0.40, 0.40, 0.05);  // back
    for (const double sx : {-0.33, 0.33})
      for (const double sz : {-0.33, 0.33}) box(sx, 0.25, sz, 0.04, 0.25, 0.04);  // legs
  } else if (category == "table") {
    box(0.0, 0.70, 0.0, 0.60, 0.04, 0.40);  // top
    for (const double sx : {-0.52, 0.52})
      for (const double sz : {-0.32, 0.32}) box(sx, 0.33, sz, 0.04, 0.33, 0.04);
  } else if (category == "lamp") {
    cyl(0.0, 0.03, 0.0, 0.28, 0.03, 1);  // base
    cyl(0.0, 0.45, 0.0, 0.04, 0.40, 1);  // stem
    cyl(0.0, 0.95, 0.0, 0.30, 0.15, 1);  // shade
  } else if (category == "airplane") {
    cyl(0.0, 0.0, 0.0, 0.14, 0.90, 0);       // fuselage along x
    box(0.0, 0.0, 0.0, 0.18, 0.03, 1.00);    // wings
    box(-0.80, 0.02, 0.0, 0.12, 0.03, 0.35); // tail plane
    box(-0.82, 0.18, 0.0, 0.10, 0.16, 0.02); // fin
  } else if (category == "car") {
    box(0.0, 0.28, 0.0, 0.55, 0.12, 0.24);   // body
    box(0.02, 0.48, 0.0, 0.28, 0.09, 0.20);  // cabin
    for (const double sx : {-0.34, 0.34})
      for (const double sz : {-0.24, 0.24}) cyl(sx, 0.12, sz, 0.12, 0.05, 2);  // wheels
  } else if (category == "cabinet") {
    box(0.0, 0.55, 0.0, 0.40, 0.55, 0.22);     // carcass
    box(0.30, 0.60, 0.24, 0.015, 0.10, 0.015); // handle
    box(-0.30, 0.60, 0.24, 0.015, 0.10, 0.015);
  } else if (category == "sofa") {
    box(0.0, 0.28, 0.05, 0.60, 0.14, 0.30);   // seat
    box(0.0, 0.55, -0.28, 0.60, 0.28, 0.08);  // back
    box(-0.62, 0.45, 0.0, 0.08, 0.22, 0.32);  // arms
    box(0.62, 0.45, 0.0, 0.08, 0.22, 0.32);
  } else if (category == "watercraft") {
    box(0.0, 0.14, 0.0, 0.62, 0.12, 0.18);   // hull
    box(0.0, 0.28, 0.0, 0.50, 0.03, 0.15);   // deck
    cyl(0.05, 0.65, 0.0, 0.025, 0.36, 1);    // mast
  } else if (category == "bench") {
    box(0.0, 0.45, 0.0, 0.60, 0.04, 0.20);    // seat
    box(0.0, 0.72, -0.17, 0.60, 0.22, 0.03);  // back
    for (const double sx : {-0.50, 0.50})
      for (const double sz : {-0.14, 0.14}) box(sx, 0.22, sz, 0.035, 0.22, 0.035);
  } else if (category == "cellphone") {
    box(0.0, 0.0, 0.0, 0.18, 0.36, 0.02);     // body
    box(0.0, 0.02, 0.022, 0.16, 0.30, 0.004); // screen proud of the face
    cyl(0.0, -0.31, 0.024, 0.02, 0.004, 2);   // button
  } else if (category == "firearm") {
    cyl(0.30, 0.10, 0.0, 0.035, 0.45, 0);     // barrel
    box(-0.35, 0.06, 0.0, 0.22, 0.07, 0.03);  // stock
    box(0.05, -0.08, 0.0, 0.04, 0.11, 0.025); // grip
  } else if (category == "monitor") {
    box(0.0, 0.55, 0.0, 0.45, 0.28, 0.03);    // screen
    cyl(0.0, 0.18, 0.02, 0.04, 0.10, 1);      // stand
    box(0.0, 0.03, 0.03, 0.20, 0.03, 0.14);   // base
  } else if (category == "speaker") {
    box(0.0, 0.45, 0.0, 0.20, 0.45, 0.18);    // cabinet
    cyl(0.0, 0.62, 0.19, 0.11, 0.015, 2);     // woofer
    cyl(0.0, 0.25, 0.19, 0.055, 0.015, 2);    // tweeter
  } else {
    throw TaxonomyError("no synthetic assembly for category: " + category);
  }
  return a;
}

/// 2048 area-weighted surface samples from the assembly, in draw order.
inline PointMatrix<double> sample_surface(const Assembly& a, std::mt19937_64& rng, Index count) {
  std::vector<double> cum;
  cum.reserve(a.boxes.size() + a.cylinders.size());
  double total = 0.0;
  for (const auto& b : a.boxes) cum.push_back(total += b.area());
  for (const auto& c : a.cylinders) cum.push_back(total += c.area());
  if (cum.empty() || total <= 0.0) throw DegenerateGeometry("assembly has no surface area");

  PointMatrix<double> cloud(count, 3);
  for (Index i = 0; i < count; ++i) {
    const double pick = unit_open_double(rng) * total;
    const std::size_t k = static_cast<std::size_t>(
        std::lower_bound(cum.begin(), cum.end(), pick) - cum.begin());
    double p[3];
    if (k < a.boxes.size())
      detail::sample_box(rng, a.boxes[k], p);
    else
      detail::sample_cylinder(rng, a.cylinders[std::min(k - a.boxes.size(),
                                                        a.cylinders.size() - 1)], p);
    cloud(i, 0) = p[0];
    cloud(i, 1) = p[1];
    cloud(i, 2) = p[2];
  }
  return cloud;
}

/// Removes the points falling deepest inside a seeded random half-space
/// (25-50% of the cloud); the survivors keep their original row order, so
/// the result is a strict subset of the input rows.
inline PointMatrix<double> halfspace_crop(const PointMatrix<double>& gt, std::mt19937_64& rng) {
  const Index n = gt.rows();
  double dir[3];
  double norm = 0.0;
  do {
    DeterministicNormal normal(rng());
    norm = 0.0;
    for (int d = 0; d < 3; ++d) {
      dir[d] = normal();
      norm += dir[d] * dir[d];
    }
  } while (norm <= 1e-12);
  norm = std::sqrt(norm);
  for (double& d : dir) d /= norm;

  const double frac = 0.25 + 0.25 * unit_open_double(rng);
  const Index removed = static_cast<Index>(std::lround(frac * static_cast<double>(n)));
  const Index kept = n - removed;

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::vector<double> proj(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    proj[static_cast<std::size_t>(i)] = gt(i, 0) * dir[0] + gt(i, 1) * dir[1] + gt(i, 2) * dir[2];
  std::sort(order.begin(), order.end(), [&](Index lhs, Index rhs) {
    const double a = proj[static_cast<std::size_t>(lhs)], b = proj[static_cast<std::size_t>(rhs)];
    if (a != b) return a < b;
    return lhs < rhs;
  });
  order.resize(static_cast<std::size_t>(kept));  // drop the `removed` largest projections
  std::sort(order.begin(), order.end());

  PointMatrix<double> partial(kept, 3);
  for (Index i = 0; i < kept; ++i) partial.row(i) = gt.row(order[static_cast<std::size_t>(i)]);
  return partial;
}

/// Orthographic depth splat of a unit-normalized cloud: azimuth 2*pi*v/24
/// about +y, then a fixed 30 degree elevation tilt. Brightness rises toward
/// the camera; overlapping splats resolve by max, so point order is
/// irrelevant.
inline Eigen::MatrixXf render_view(const PointMatrix<double>& cloud, int view_id) {
  Eigen::MatrixXf img = Eigen::MatrixXf::Zero(kImageSize, kImageSize);
  const double az = 2.0 * M_PI * static_cast<double>(view_id) / static_cast<double>(kViewCount);
  const double el = M_PI / 6.0;
  const double ca = std::cos(az), sa = std::sin(az);
  const double ce = std::cos(el), se = std::sin(el);
  const double span = 1.25;  // normalized coords may leave [-1,1] after rotation
  for (Index i = 0; i < cloud.rows(); ++i) {
    const double x0 = cloud(i, 0), y0 = cloud(i, 1), z0 = cloud(i, 2);
    const double x1 = ca * x0 + sa * z0;
    const double z1 = -sa * x0 + ca * z0;
    const double y2 = ce * y0 - se * z1;
    const double z2 = se * y0 + ce * z1;
    int px = static_cast<int>(std::lround((x1 / span + 1.0) * 0.5 * (kImageSize - 1)));
    int py = static_cast<int>(std::lround((1.0 - (y2 / span + 1.0) * 0.5) * (kImageSize - 1)));
    px = std::clamp(px, 0, kImageSize - 1);
    py = std::clamp(py, 0, kImageSize - 1);
    const double depth01 = std::clamp((z2 / span + 1.0) * 0.5, 0.0, 1.0);
    const float bright = static_cast<float>(0.25 + 0.75 * (1.0 - depth01));
    if (bright > img(py, px)) img(py, px) = bright;
  }
  return img;
}

struct SynthStats {
  int models = 0;
  int files = 0;
};

/// Generates n_models per category under out_root, with gt.xyz (2048 points,
/// unit-normalized), partial.xyz (strict row subset, 1024-1536 points), 24
/// depth renders, and split files (one model_id per line). Byte-identical
/// across runs with the same arguments.
inline SynthStats synth_generate(const std::string& out_root, int n_models,
                                 const std::vector<std::string>& categories,
                                 std::uint64_t seed) {
  namespace fs = std::filesystem;
  if (n_models <= 0) throw InvalidArgument("synth: n_models must be positive");
  if (categories.empty()) throw InvalidArgument("synth: no categories given");

  SynthStats stats;
  fs::create_directories(fs::path(out_root) / "splits");
  std::ofstream all_split(fs::path(out_root) / "splits" / "all.txt",
                          std::ios::binary | std::ios::trunc);
  if (!all_split) throw IoError("synth: cannot write split file under " + out_root);

  for (const auto& raw : categories) {
    const std::string category = canonical_category(raw);
    std::ofstream cat_split(fs::path(out_root) / "splits" / (category + ".txt"),
                            std::ios::binary | std::ios::trunc);
    for (int m = 0; m < n_models; ++m) {
      char id_buf[64];
      std::snprintf(id_buf, sizeof(id_buf), "%s_%04d", category.c_str(), m);
      const std::string model_id = id_buf;
      std::mt19937_64 rng(mix_u64(seed, fnv1a(model_id)));

      const Assembly assembly = make_assembly(category, rng);
      PointMatrix<double> gt = sample_surface(assembly, rng, Index{2048});
      gt = normalize_unit(gt);
      const PointMatrix<double> partial = halfspace_crop(gt, rng);

      const fs::path dir = fs::path(out_root) / category / model_id;
      fs::create_directories(dir);
      write_xyz((dir / "gt.xyz").string(), gt);
      write_xyz((dir / "partial.xyz").string(), partial);
      stats.files += 2;
      for (int v = 0; v < kViewCount; ++v) {
        char name[32];
        std::snprintf(name, sizeof(name), "render_%02d.img", v);
        write_depth_img((dir / name).string(), render_view(gt, v));
        ++stats.files;
      }
      all_split << model_id << "\n";
      cat_split << model_id << "\n";
      ++stats.models;
    }
  }
  return stats;
}

}  // namespace synth

using synth::synth_generate;
using synth::SynthStats;

}  // namespace mmc

#endif  // MMC_SYNTH_HPP
