#include <string>

#include "shapediff/error.hpp"
#include "shapediff/geom.hpp"
#include "shapediff/rng.hpp"

namespace shapediff {

// Jitter ranges per family (full extents, z is up):
//   slab:  width 1.8-2.4 (x), depth 0.8-1.1 (y), height 0.30-0.45
//   chair: seat 0.9-1.1 square, 0.10-0.15 thick, legs 0.08-0.12 square and
//          0.8-1.1 tall, backrest 0.08-0.12 thick and 0.8-1.2 tall
//   cross: fuselage 2.4-3.0 long, 0.25-0.35 square section; wing span
//          2.0-2.8, chord 0.4-0.6, thickness 0.06-0.10, shifted along the
//          fuselage by up to 10% of its length
const char* shape_family_name(int label) {
  switch (label) {
    case 0: return "slab";
    case 1: return "chair";
    case 2: return "cross";
    default: return "unknown";
  }
}

std::vector<Box> shape_boxes(int label, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "shape-proportions", static_cast<std::uint64_t>(label)));
  std::vector<Box> boxes;
  switch (label) {
    case 0: {
      const double w = rng.uniform(1.8, 2.4);
      const double d = rng.uniform(0.8, 1.1);
      const double h = rng.uniform(0.30, 0.45);
      boxes.push_back({{0.0, 0.0, 0.0}, {w / 2, d / 2, h / 2}});
      break;
    }
    case 1: {
      const double seat = rng.uniform(0.9, 1.1);
      const double seat_t = rng.uniform(0.10, 0.15);
      const double leg = rng.uniform(0.08, 0.12);
      const double leg_h = rng.uniform(0.8, 1.1);
      const double back_t = rng.uniform(0.08, 0.12);
      const double back_h = rng.uniform(0.8, 1.2);
      const double s2 = seat / 2;
      boxes.push_back({{0.0, 0.0, leg_h + seat_t / 2}, {s2, s2, seat_t / 2}});
      for (double sx : {-1.0, 1.0}) {
        for (double sy : {-1.0, 1.0}) {
          boxes.push_back(
              {{sx * (s2 - leg / 2), sy * (s2 - leg / 2), leg_h / 2}, {leg / 2, leg / 2, leg_h / 2}});
        }
      }
      boxes.push_back(
          {{0.0, -s2 + back_t / 2, leg_h + seat_t + back_h / 2}, {s2, back_t / 2, back_h / 2}});
      break;
    }
    case 2: {
      const double len = rng.uniform(2.4, 3.0);
      const double body = rng.uniform(0.25, 0.35);
      const double span = rng.uniform(2.0, 2.8);
      const double chord = rng.uniform(0.4, 0.6);
      const double wing_t = rng.uniform(0.06, 0.10);
      const double shift = rng.uniform(-0.1, 0.1) * len;
      boxes.push_back({{0.0, 0.0, 0.0}, {len / 2, body / 2, body / 2}});
      boxes.push_back({{shift, 0.0, 0.0}, {chord / 2, span / 2, wing_t / 2}});
      break;
    }
    default:
      throw ValidationError("unknown shape label " + std::to_string(label));
  }
  return boxes;
}

TriangleMesh boxes_to_mesh(const std::vector<Box>& boxes) {
  // Corner i has coordinate sign bits (x: bit 0, y: bit 1, z: bit 2).
  static constexpr std::uint32_t kQuads[6][4] = {
      {0, 2, 3, 1}, {4, 5, 7, 6},  // z-, z+
      {0, 1, 5, 4}, {2, 6, 7, 3},  // y-, y+
      {0, 4, 6, 2}, {1, 3, 7, 5},  // x-, x+
  };
  TriangleMesh mesh;
  for (const auto& box : boxes) {
    const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
    for (int i = 0; i < 8; ++i) {
      Vec3 v;
      for (int k = 0; k < 3; ++k) {
        v[k] = box.center[k] + ((i >> k) & 1 ? box.half[k] : -box.half[k]);
      }
      mesh.vertices.push_back(v);
    }
    for (const auto& q : kQuads) {
      mesh.faces.push_back({base + q[0], base + q[1], base + q[2]});
      mesh.faces.push_back({base + q[0], base + q[2], base + q[3]});
    }
  }
  return mesh;
}

PointCloud gen_shape(int label, std::uint64_t seed, std::size_t n) {
  const auto mesh = boxes_to_mesh(shape_boxes(label, seed));
  auto pc = sample_surface(mesh, n, derive_seed(seed, "shape-surface", static_cast<std::uint64_t>(label)));
  if (pc.empty()) return pc;
  return normalize(pc);
}

}  // namespace shapediff
