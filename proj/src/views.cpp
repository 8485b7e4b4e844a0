#include "shapediff/views.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "shapediff/error.hpp"
#include "shapediff/mesh_io.hpp"

namespace shapediff {

double normalize_azimuth(double deg) {
  double a = std::fmod(deg, 360.0);
  if (a < 0.0) a += 360.0;
  if (a >= 360.0) a -= 360.0;
  return a;
}

std::vector<Camera> camera_ring(std::size_t n_views, double elevation_deg) {
  if (n_views == 0) throw ValidationError("camera_ring: n_views must be >= 1");
  std::vector<Camera> ring;
  ring.reserve(n_views);
  const double step = 360.0 / static_cast<double>(n_views);
  for (std::size_t i = 1; i <= n_views; ++i) {
    ring.push_back({normalize_azimuth(static_cast<double>(i) * step), elevation_deg});
  }
  return ring;
}

std::vector<Camera> frontal_subset(const std::vector<Camera>& ring) {
  std::vector<Camera> out;
  for (const auto& cam : ring) {
    const double signed_az = cam.azimuth_deg > 180.0 ? cam.azimuth_deg - 360.0 : cam.azimuth_deg;
    if (signed_az > -30.0 + 1e-9 && signed_az <= 30.0 + 1e-9) out.push_back(cam);
  }
  return out;
}

double default_point_radius(std::size_t image_size) {
  return static_cast<double>(image_size) / 64.0;
}

PixelCoord project_to_pixel(double image_x, double image_y, std::size_t image_size) {
  const double s = static_cast<double>(image_size);
  return {static_cast<long>(std::floor((1.0 - image_y) * 0.5 * s)),
          static_cast<long>(std::floor((image_x + 1.0) * 0.5 * s))};
}

DepthImage render_depth(const PointCloud& pc, const Camera& cam, std::size_t image_size,
                        double point_radius) {
  if (image_size < kMinImageSize) {
    throw ValidationError("render_depth: image size " + std::to_string(image_size) + " < " +
                          std::to_string(kMinImageSize));
  }
  if (!(point_radius >= 0.0)) throw ValidationError("render_depth: negative point radius");

  DepthImage img;
  img.size = image_size;
  img.camera = cam;
  img.pixels.assign(image_size * image_size, 0.0);

  const double az = cam.azimuth_deg * std::numbers::pi / 180.0;
  const double el = cam.elevation_deg * std::numbers::pi / 180.0;
  const double ca = std::cos(az), sa = std::sin(az), ce = std::cos(el), se = std::sin(el);
  // Toward-camera direction, image right and image up.
  const Vec3 toward{ce * ca, ce * sa, se};
  const Vec3 right{-sa, ca, 0.0};
  const Vec3 up{-se * ca, -se * sa, ce};

  const long reach = static_cast<long>(std::floor(point_radius));
  const double r2 = point_radius * point_radius;
  const long s = static_cast<long>(image_size);
  for (const auto& p : pc.points) {
    const double x = p[0] * right[0] + p[1] * right[1] + p[2] * right[2];
    const double y = p[0] * up[0] + p[1] * up[1] + p[2] * up[2];
    const double d = p[0] * toward[0] + p[1] * toward[1] + p[2] * toward[2];
    const double value = std::clamp(
        kMinForegroundDepth + (1.0 - kMinForegroundDepth) * 0.5 * (d + 1.0), kMinForegroundDepth, 1.0);
    const auto [row, col] = project_to_pixel(x, y, image_size);
    for (long dr = -reach; dr <= reach; ++dr) {
      for (long dc = -reach; dc <= reach; ++dc) {
        if (static_cast<double>(dr * dr + dc * dc) > r2) continue;
        const long rr = row + dr, cc = col + dc;
        if (rr < 0 || cc < 0 || rr >= s || cc >= s) continue;
        double& px = img.pixels[static_cast<std::size_t>(rr * s + cc)];
        px = std::max(px, value);
      }
    }
  }
  return img;
}

std::string to_pgm(const DepthImage& img) {
  std::string out = "P5\n" + std::to_string(img.size) + " " + std::to_string(img.size) + "\n255\n";
  out.reserve(out.size() + img.pixels.size());
  for (double v : img.pixels) {
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)))));
  }
  return out;
}

void write_pgm(const DepthImage& img, const std::filesystem::path& path) {
  write_file(path, to_pgm(img));
}

}  // namespace shapediff
