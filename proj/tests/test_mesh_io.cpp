#include <doctest.h>

#include <filesystem>

#include "shapediff/error.hpp"
#include "shapediff/mesh_io.hpp"
#include "support.hpp"

using namespace shapediff;
using testing::data_path;

namespace {

std::size_t parse_error_line(auto&& fn) {
  try {
    fn();
  } catch (const ParseError& e) {
    return e.line();
  }
  return static_cast<std::size_t>(-1);
}

}  // namespace

TEST_CASE("parse_off: minimal triangle") {
  const auto m = parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2");
  CHECK(m.vertices.size() == 3);
  REQUIRE(m.faces.size() == 1);
  CHECK(m.faces[0] == std::array<std::uint32_t, 3>{0, 1, 2});
}

TEST_CASE("parse_off: bad header names line 1") {
  CHECK(parse_error_line([] { parse_off("OFX\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2"); }) == 1);
}

TEST_CASE("parse_off: quad is fan-triangulated") {
  const auto m = parse_off("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n");
  REQUIRE(m.faces.size() == 2);
  CHECK(m.faces[0] == std::array<std::uint32_t, 3>{0, 1, 2});
  CHECK(m.faces[1] == std::array<std::uint32_t, 3>{0, 2, 3});
}

TEST_CASE("parse_off: errors carry line numbers") {
  CHECK(parse_error_line([] { parse_off(read_file(data_path("bad_index.off"))); }) == 6);
  CHECK(parse_error_line([] { parse_off(read_file(data_path("bad_token.off"))); }) == 4);
  CHECK(parse_error_line([] { parse_off(read_file(data_path("short_count.off"))); }) > 0);
  CHECK_THROWS_AS(parse_off(""), ParseError);
}

TEST_CASE("parse_off: counts on the header line and comments") {
  const auto cube = parse_off(read_file(data_path("cube.off")));
  CHECK(cube.vertices.size() == 8);
  CHECK(cube.faces.size() == 12);
  const auto quad = parse_off(read_file(data_path("quad_comments.off")));
  CHECK(quad.vertices.size() == 4);
  CHECK(quad.faces.size() == 2);
}

TEST_CASE("parse_ply_ascii: two vertices in file order") {
  const auto pc = parse_ply_ascii(read_file(data_path("two_points.ply")));
  REQUIRE(pc.size() == 2);
  CHECK(pc.points[0] == Vec3{1.5, -2, 3});
  CHECK(pc.points[1] == Vec3{0.25, 0, -1e-3});
}

TEST_CASE("parse_ply_ascii: extra properties and elements are skipped") {
  const auto pc = parse_ply_ascii(read_file(data_path("colored.ply")));
  REQUIRE(pc.size() == 3);
  CHECK(pc.points[2] == Vec3{0, 1, 0});
}

TEST_CASE("parse_ply_ascii: binary is unsupported") {
  CHECK_THROWS_AS(parse_ply_ascii(read_file(data_path("binary.ply"))), UnsupportedFormatError);
}

TEST_CASE("parse_ply_ascii: count mismatch and bad tokens") {
  const std::string head = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
                           "property float z\nend_header\n";
  CHECK_THROWS_AS(parse_ply_ascii(head + "0 0 0\n1 1 1\n"), ParseError);
  CHECK(parse_error_line([&] { parse_ply_ascii(head + "0 0 0\n1 x 1\n2 2 2\n"); }) == 9);
}

TEST_CASE("parse_xyz: empty file and ordering") {
  CHECK(parse_xyz(read_file(data_path("empty.xyz"))).empty());
  const auto pc = parse_xyz(read_file(data_path("points.xyz")));
  REQUIRE(pc.size() == 4);
  CHECK(pc.points[1] == Vec3{1, 2, 3});
  CHECK(pc.points[3] == Vec3{4, 5, 6});
  CHECK(parse_error_line([] { parse_xyz("0 0 0\n1 1\n"); }) == 2);
  CHECK(parse_error_line([] { parse_xyz("0 0 0\n1 1 nan_\n"); }) == 2);
}

TEST_CASE("parsers round-trip over the corpus") {
  for (const auto& entry : std::filesystem::directory_iterator(SHAPEDIFF_TEST_DATA)) {
    const auto path = entry.path();
    const auto ext = path.extension().string();
    const auto text = read_file(path);
    CAPTURE(path.string());
    if (ext == ".off") {
      TriangleMesh m;
      try {
        m = parse_off(text);
      } catch (const ParseError&) {
        continue;  // malformed fixtures
      }
      CHECK(parse_off(to_off(m)) == m);
    } else if (ext == ".ply") {
      PointCloud pc;
      try {
        pc = parse_ply_ascii(text);
      } catch (const ParseError&) {
        continue;
      }
      CHECK(parse_ply_ascii(to_ply_ascii(pc)) == pc);
    } else if (ext == ".xyz") {
      const auto pc = parse_xyz(text);
      const auto again = parse_xyz(to_xyz(pc));
      CHECK(again == pc);  // corpus values need at most 9 significant digits
      CHECK(to_xyz(again) == to_xyz(pc));
    }
  }
}

TEST_CASE("xyz writer keeps 9 significant digits") {
  PointCloud pc{{{1.0 / 3.0, -2e-7, 123456.789}}};
  CHECK(to_xyz(pc) == "0.333333333 -2e-07 123456.789\n");
}

TEST_CASE("generated clouds survive an xyz round trip to 1e-8") {
  const auto pc = gen_shape(2, 5, 300);
  const auto back = parse_xyz(to_xyz(pc));
  REQUIRE(back.size() == pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i)
    for (int a = 0; a < 3; ++a) CHECK(std::abs(back.points[i][a] - pc.points[i][a]) <= 1e-8);
}

TEST_CASE("load_point_cloud dispatches on extension and names the path") {
  CHECK(load_point_cloud(data_path("points.xyz"), 10, 1).size() == 4);
  CHECK(load_point_cloud(data_path("cube.off"), 64, 1).size() == 64);
  try {
    load_point_cloud(data_path("bad_header.off"), 10, 1);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("bad_header.off") != std::string::npos);
  }
  CHECK_THROWS_AS(load_point_cloud(data_path("missing.xyz"), 10, 1), RuntimeError);
}
