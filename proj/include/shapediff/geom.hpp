#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace shapediff {

using Vec3 = std::array<double, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;

  // Throws ValidationError if a face references a missing vertex.
  void validate() const;
  friend bool operator==(const TriangleMesh&, const TriangleMesh&) = default;
};

struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

// Area-weighted surface sampling with barycentric placement inside each face.
// `face_of_sample`, when given, receives the face index each point came from.
PointCloud sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed,
                          std::vector<std::size_t>* face_of_sample = nullptr);

// Center on the centroid and scale into the unit ball. A cloud whose points
// all coincide is only translated.
PointCloud normalize(const PointCloud& pc);

// Greedy farthest point sampling. The first index is drawn from `seed`; each
// next pick maximizes the distance to the chosen set, ties to the lowest index.
PointCloud farthest_point_sample(const PointCloud& pc, std::size_t k, std::uint64_t seed);
std::vector<std::size_t> farthest_point_indices(const PointCloud& pc, std::size_t k,
                                                std::size_t start);

// Procedural shape families standing in for real object categories.
enum class ShapeFamily : int {
  kSlab = 0,   // wide low box
  kChair = 1,  // seat, backrest and four legs
  kCross = 2,  // fuselage crossed by a wing
};

inline constexpr int kNumShapeFamilies = 3;

// Generator contract for the slab family: every normalized slab satisfies
// |z| <= kSlabMaxAbsZ (height-to-width ratio bound plus centroid slack).
inline constexpr double kSlabMaxAbsZ = 0.33;

const char* shape_family_name(int label);

// Axis-aligned box given by center and half extents.
struct Box {
  Vec3 center;
  Vec3 half;
};

std::vector<Box> shape_boxes(int label, std::uint64_t seed);
TriangleMesh boxes_to_mesh(const std::vector<Box>& boxes);

// Normalized cloud with exactly `n` points; deterministic in (label, seed, n).
PointCloud gen_shape(int label, std::uint64_t seed, std::size_t n);

}  // namespace shapediff
