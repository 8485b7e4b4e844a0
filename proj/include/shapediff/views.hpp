#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "shapediff/geom.hpp"

namespace shapediff {

// Orthographic camera on a ring around the z (up) axis, looking at the origin.
struct Camera {
  double azimuth_deg = 0.0;    // normalized to [0, 360)
  double elevation_deg = 20.0;
};

inline constexpr double kDefaultElevationDeg = 20.0;

double normalize_azimuth(double deg);

// Azimuths i * 360 / n_views for i = 1..n_views.
std::vector<Camera> camera_ring(std::size_t n_views, double elevation_deg = kDefaultElevationDeg);

// Cameras whose signed azimuth lies in (-30, 30] degrees. On a 36-camera ring
// these are 10, 20, 30, 340, 350 and 360 (== 0) degrees.
std::vector<Camera> frontal_subset(const std::vector<Camera>& ring);

// Nearer surface maps to a larger value; background pixels are exactly 0.
struct DepthImage {
  std::size_t size = 0;
  std::vector<double> pixels;  // row-major, row 0 at the top
  Camera camera;

  double at(std::size_t row, std::size_t col) const { return pixels[row * size + col]; }
};

inline constexpr std::size_t kMinImageSize = 8;
// Depth values of foreground pixels lie in [kMinForegroundDepth, 1].
inline constexpr double kMinForegroundDepth = 0.05;

// 1 pixel at S = 64, proportional to S.
double default_point_radius(std::size_t image_size);

// Pixel (row, col) a camera-space position falls into.
struct PixelCoord {
  long row;
  long col;
};
PixelCoord project_to_pixel(double image_x, double image_y, std::size_t image_size);

// Splats every point as a disc of `point_radius` pixels around its pixel and
// keeps the nearest depth per pixel. The view covers [-1, 1]^2.
DepthImage render_depth(const PointCloud& pc, const Camera& cam, std::size_t image_size,
                        double point_radius);

// Binary PGM (P5, 8-bit); pixel value round(255 * depth).
std::string to_pgm(const DepthImage& img);
void write_pgm(const DepthImage& img, const std::filesystem::path& path);

}  // namespace shapediff
