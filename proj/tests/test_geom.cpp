#include <doctest.h>

#include <cmath>
#include <set>

#include "shapediff/error.hpp"
#include "shapediff/geom.hpp"
#include "support.hpp"

using namespace shapediff;

namespace {

TriangleMesh unit_square() {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

Vec3 centroid(const PointCloud& pc) {
  Vec3 c{0, 0, 0};
  for (const auto& p : pc.points)
    for (int a = 0; a < 3; ++a) c[a] += p[a];
  for (auto& v : c) v /= static_cast<double>(pc.size());
  return c;
}

double max_norm(const PointCloud& pc) {
  double m = 0.0;
  for (const auto& p : pc.points) m = std::max(m, std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]));
  return m;
}

bool on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // barycentric solve in the plane, coordinates must be in [0,1]
  const double area = triangle_area(a, b, c);
  const double s = triangle_area(p, b, c) + triangle_area(a, p, c) + triangle_area(a, b, p);
  return std::abs(s - area) < 1e-9;
}

}  // namespace

TEST_CASE("sample_surface: unit square centroid") {
  const auto pc = sample_surface(unit_square(), 100000, 7);
  REQUIRE(pc.size() == 100000);
  const auto c = centroid(pc);
  CHECK(std::abs(c[0] - 0.5) < 0.01);
  CHECK(std::abs(c[1] - 0.5) < 0.01);
  CHECK(c[2] == 0.0);
}

TEST_CASE("sample_surface: n = 0 gives an empty cloud") {
  CHECK(sample_surface(unit_square(), 0, 1).empty());
}

TEST_CASE("sample_surface: zero-area face is never hit") {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 2}, {3, 4, 5}};
  std::vector<std::size_t> faces;
  const auto pc = sample_surface(m, 20000, 3, &faces);
  std::size_t on_degenerate = 0;
  for (auto f : faces) on_degenerate += f == 0 ? 1 : 0;
  CHECK(on_degenerate == 0);
  for (std::size_t i = 0; i < pc.size(); i += 97) {
    CHECK(on_triangle(pc.points[i], m.vertices[3], m.vertices[4], m.vertices[5]));
  }
}

TEST_CASE("sample_surface: all faces degenerate is an error") {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 1, 1}, {2, 2, 2}};
  m.faces = {{0, 1, 2}};
  CHECK_THROWS_AS(sample_surface(m, 10, 1), ValidationError);
}

TEST_CASE("sample_surface: face frequencies within 4 sigma of area weights") {
  // Faces of very different areas.
  TriangleMesh m;
  const double sizes[] = {1.0, 0.5, 2.0, 0.1, 1.3};
  for (double s : sizes) {
    const auto base = static_cast<std::uint32_t>(m.vertices.size());
    const double off = static_cast<double>(base);
    m.vertices.push_back({off, 0, 0});
    m.vertices.push_back({off + s, 0, 0});
    m.vertices.push_back({off, s, 1});
    m.faces.push_back({base, base + 1, base + 2});
  }
  std::vector<double> area;
  double total = 0.0;
  for (const auto& f : m.faces) {
    area.push_back(triangle_area(m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]));
    total += area.back();
  }
  const std::size_t n = 100000;
  std::vector<std::size_t> faces;
  const auto pc = sample_surface(m, n, 11, &faces);
  std::vector<double> hits(m.faces.size(), 0.0);
  for (auto f : faces) hits[f] += 1.0;
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    const double p = area[f] / total;
    const double sd = std::sqrt(static_cast<double>(n) * p * (1.0 - p));
    CHECK(std::abs(hits[f] - static_cast<double>(n) * p) <= 4.0 * sd);
  }
  // and every point lies on the face it was attributed to
  for (std::size_t i = 0; i < pc.size(); i += 101) {
    const auto& f = m.faces[faces[i]];
    CHECK(on_triangle(pc.points[i], m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]));
  }
}

TEST_CASE("sample_surface: deterministic for a fixed seed") {
  CHECK(sample_surface(unit_square(), 500, 9) == sample_surface(unit_square(), 500, 9));
  CHECK_FALSE(sample_surface(unit_square(), 500, 9) == sample_surface(unit_square(), 500, 10));
}

TEST_CASE("normalize: two opposite points") {
  PointCloud pc{{{1, 1, 1}, {-1, -1, -1}}};
  const auto n = normalize(pc);
  const double s = 1.0 / std::sqrt(3.0);
  for (int a = 0; a < 3; ++a) {
    CHECK(n.points[0][a] == doctest::Approx(s).epsilon(1e-12));
    CHECK(n.points[1][a] == doctest::Approx(-s).epsilon(1e-12));
  }
}

TEST_CASE("normalize: single point is translated only") {
  const auto n = normalize(PointCloud{{{5, 0, 0}}});
  CHECK(n.points[0] == Vec3{0, 0, 0});
}

TEST_CASE("normalize: empty cloud is an error") {
  CHECK_THROWS_AS(normalize(PointCloud{}), ValidationError);
}

TEST_CASE("normalize: unit ball, centered, idempotent") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto pc = testing::random_cloud(50 + seed, seed, 10.0 * static_cast<double>(seed + 1));
    const auto n = normalize(pc);
    const auto c = centroid(n);
    for (double v : c) CHECK(std::abs(v) <= 1e-6);
    const double m = max_norm(n);
    CHECK(m <= 1.0);
    CHECK(m >= 1.0 - 1e-6);
    const auto nn = normalize(n);
    for (std::size_t i = 0; i < n.size(); ++i)
      for (int a = 0; a < 3; ++a) CHECK(std::abs(nn.points[i][a] - n.points[i][a]) <= 1e-6);
  }
}

TEST_CASE("farthest_point_sample: square corners pick the diagonal") {
  PointCloud sq{{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}}};
  const auto idx = farthest_point_indices(sq, 2, 0);
  CHECK(idx == std::vector<std::size_t>{0, 2});
}

TEST_CASE("farthest_point_sample: k = n returns every point in visitation order") {
  const auto pc = testing::random_cloud(9, 4);
  const auto out = farthest_point_sample(pc, pc.size(), 17);
  REQUIRE(out.size() == pc.size());
  std::multiset<Vec3> a(pc.points.begin(), pc.points.end()), b(out.points.begin(), out.points.end());
  CHECK(a == b);
}

TEST_CASE("farthest_point_sample: errors") {
  const auto pc = testing::random_cloud(5, 1);
  CHECK_THROWS_AS(farthest_point_sample(pc, 0, 1), ValidationError);
  CHECK_THROWS_AS(farthest_point_sample(pc, 6, 1), ValidationError);
}

TEST_CASE("farthest_point_sample: matches the exhaustive greedy oracle for n <= 12") {
  for (std::size_t n = 1; n <= 12; ++n) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      const auto pc = testing::random_cloud(n, 1000 * n + seed);
      for (std::size_t k = 1; k <= n; ++k) {
        for (std::size_t start = 0; start < n; ++start) {
          CHECK(farthest_point_indices(pc, k, start) == testing::greedy_fps_oracle(pc, k, start));
        }
      }
    }
  }
  // grid points produce many exact ties
  PointCloud grid;
  for (int x = 0; x < 3; ++x)
    for (int y = 0; y < 3; ++y) grid.points.push_back({double(x), double(y), 0});
  for (std::size_t start = 0; start < grid.size(); ++start) {
    CHECK(farthest_point_indices(grid, 9, start) == testing::greedy_fps_oracle(grid, 9, start));
  }
}

TEST_CASE("farthest_point_sample: k = 3 on 5 random points") {
  const auto pc = testing::random_cloud(5, 77);
  const auto out = farthest_point_sample(pc, 3, 5);
  bool matched = false;
  for (std::size_t start = 0; start < 5; ++start) {
    const auto ref = testing::greedy_fps_oracle(pc, 3, start);
    PointCloud expect;
    for (auto i : ref) expect.points.push_back(pc.points[i]);
    matched = matched || expect == out;
  }
  CHECK(matched);
}

TEST_CASE("gen_shape: deterministic, exact size, normalized") {
  for (int label = 0; label < kNumShapeFamilies; ++label) {
    const auto a = gen_shape(label, 42, 777);
    CHECK(a == gen_shape(label, 42, 777));
    CHECK(a.size() == 777);
    CHECK(max_norm(a) <= 1.0);
    CHECK(max_norm(a) >= 1.0 - 1e-6);
    for (double v : centroid(a)) CHECK(std::abs(v) <= 1e-6);
  }
}

TEST_CASE("gen_shape: slabs respect the height bound") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto pc = gen_shape(0, seed, 512);
    double zmax = 0.0;
    for (const auto& p : pc.points) zmax = std::max(zmax, std::abs(p[2]));
    CHECK(zmax <= kSlabMaxAbsZ);
  }
}

TEST_CASE("gen_shape: unknown label") {
  CHECK_THROWS_AS(gen_shape(99, 1, 10), ValidationError);
  CHECK_THROWS_AS(gen_shape(-1, 1, 10), ValidationError);
}

TEST_CASE("gen_shape: seeds vary the shape") {
  CHECK_FALSE(gen_shape(1, 1, 256) == gen_shape(1, 2, 256));
}

TEST_CASE("mesh validate catches out-of-range faces") {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 3}};
  CHECK_THROWS_AS(m.validate(), ValidationError);
}
