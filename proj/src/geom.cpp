#include "shapediff/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "shapediff/error.hpp"
#include "shapediff/rng.hpp"

namespace shapediff {

namespace {

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

double norm2(const Vec3& a) { return a[0] * a[0] + a[1] * a[1] + a[2] * a[2]; }

double dist2(const Vec3& a, const Vec3& b) { return norm2(sub(a, b)); }

}  // namespace

void TriangleMesh::validate() const {
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (auto idx : faces[f]) {
      if (idx >= vertices.size()) {
        throw ValidationError("face " + std::to_string(f) + " references vertex " +
                              std::to_string(idx) + " of " + std::to_string(vertices.size()));
      }
    }
  }
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 u = sub(b, a);
  const Vec3 v = sub(c, a);
  const Vec3 x{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
  return 0.5 * std::sqrt(norm2(x));
}

PointCloud sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed,
                          std::vector<std::size_t>* face_of_sample) {
  mesh.validate();
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& tri = mesh.faces[f];
    total += triangle_area(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
    cumulative[f] = total;
  }
  if (!(total > 0.0)) throw ValidationError("sample_surface: mesh has zero total area");

  Rng rng(seed);
  PointCloud out;
  out.points.reserve(n);
  if (face_of_sample) face_of_sample->assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    // upper_bound skips zero-area faces: their cumulative value equals the
    // previous face's, so no draw lands strictly inside them.
    const double r = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    if (it == cumulative.end()) --it;
    const auto f = static_cast<std::size_t>(it - cumulative.begin());
    const auto& tri = mesh.faces[f];
    const Vec3& a = mesh.vertices[tri[0]];
    const Vec3& b = mesh.vertices[tri[1]];
    const Vec3& c = mesh.vertices[tri[2]];
    const double s = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const double wa = 1.0 - s;
    const double wb = s * (1.0 - r2);
    const double wc = s * r2;
    out.points.push_back({wa * a[0] + wb * b[0] + wc * c[0], wa * a[1] + wb * b[1] + wc * c[1],
                          wa * a[2] + wb * b[2] + wc * c[2]});
    if (face_of_sample) (*face_of_sample)[i] = f;
  }
  return out;
}

PointCloud normalize(const PointCloud& pc) {
  if (pc.empty()) throw ValidationError("normalize: empty point cloud");
  Vec3 centroid{0.0, 0.0, 0.0};
  for (const auto& p : pc.points) {
    for (int k = 0; k < 3; ++k) centroid[k] += p[k];
  }
  for (auto& c : centroid) c /= static_cast<double>(pc.size());

  PointCloud out;
  out.points.reserve(pc.size());
  double max_norm2 = 0.0;
  for (const auto& p : pc.points) {
    out.points.push_back(sub(p, centroid));
    max_norm2 = std::max(max_norm2, norm2(out.points.back()));
  }
  const double max_norm = std::sqrt(max_norm2);
  if (max_norm <= std::numeric_limits<double>::min()) return out;

  // A few ulps of slack keep the recomputed max norm <= 1 after rounding.
  const double scale = 1.0 / (max_norm * (1.0 + 8.0 * std::numeric_limits<double>::epsilon()));
  for (auto& p : out.points) {
    for (auto& x : p) x *= scale;
  }
  return out;
}

std::vector<std::size_t> farthest_point_indices(const PointCloud& pc, std::size_t k,
                                                std::size_t start) {
  if (k == 0) throw ValidationError("farthest_point_sample: k must be >= 1");
  if (k > pc.size()) {
    throw ValidationError("farthest_point_sample: k=" + std::to_string(k) + " exceeds n=" +
                          std::to_string(pc.size()));
  }
  if (start >= pc.size()) throw ValidationError("farthest_point_sample: start out of range");

  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  chosen.push_back(start);
  std::vector<double> min_d2(pc.size(), std::numeric_limits<double>::infinity());
  std::size_t last = start;
  while (chosen.size() < k) {
    std::size_t best = 0;
    double best_d2 = -1.0;
    for (std::size_t i = 0; i < pc.size(); ++i) {
      min_d2[i] = std::min(min_d2[i], dist2(pc.points[i], pc.points[last]));
      if (min_d2[i] > best_d2) {
        best_d2 = min_d2[i];
        best = i;
      }
    }
    chosen.push_back(best);
    last = best;
  }
  return chosen;
}

PointCloud farthest_point_sample(const PointCloud& pc, std::size_t k, std::uint64_t seed) {
  if (pc.empty()) throw ValidationError("farthest_point_sample: empty point cloud");
  Rng rng(seed);
  const auto start = static_cast<std::size_t>(rng.below(pc.size()));
  PointCloud out;
  for (auto i : farthest_point_indices(pc, k, start)) out.points.push_back(pc.points[i]);
  return out;
}

}  // namespace shapediff
