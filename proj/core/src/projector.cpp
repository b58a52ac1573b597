#include "spectral_ct/projector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sct {

namespace {

constexpr double kMmToCm = 0.1;

// Parametric crossings α ∈ (lo, hi) of the ray with the planes origin + k·step.
void plane_crossings(double start, double delta, double origin, double step, std::size_t planes, double lo,
                     double hi, std::vector<double>& out) {
  out.clear();
  if (delta == 0.0) return;
  for (std::size_t k = 0; k <= planes; ++k) {
    const double a = (origin + static_cast<double>(k) * step - start) / delta;
    if (a > lo && a < hi) out.push_back(a);
  }
  if (delta < 0.0) std::reverse(out.begin(), out.end());
}

}  // namespace

void trace_ray(const ScanGeometry& g, std::size_t view, std::size_t det, std::vector<RayHit>& hits) {
  const double theta = g.view_angles.at(view);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double R = g.source_to_center_mm;
  const double D = g.source_to_detector_mm;
  const double t = g.detector_position(det);

  const double sx = R * c;
  const double sy = R * s;
  const double px = (R - D) * c - t * s;
  const double py = (R - D) * s + t * c;
  const double dx = px - sx;
  const double dy = py - sy;
  const double ray_length = std::hypot(dx, dy);

  const double delta = g.pixel_size_mm;
  const double x0 = -0.5 * static_cast<double>(g.image_nx) * delta;
  const double y0 = -0.5 * static_cast<double>(g.image_ny) * delta;
  const double x1 = -x0;
  const double y1 = -y0;

  // Clip the segment [0, 1] against the image box.
  double lo = 0.0;
  double hi = 1.0;
  auto clip = [&](double start, double d, double a, double b) {
    if (d == 0.0) {
      if (start <= a || start >= b) hi = -1.0;
      return;
    }
    double ta = (a - start) / d;
    double tb = (b - start) / d;
    if (ta > tb) std::swap(ta, tb);
    lo = std::max(lo, ta);
    hi = std::min(hi, tb);
  };
  clip(sx, dx, x0, x1);
  clip(sy, dy, y0, y1);
  if (!(hi > lo)) return;

  thread_local std::vector<double> ax;
  thread_local std::vector<double> ay;
  thread_local std::vector<double> merged;
  plane_crossings(sx, dx, x0, delta, g.image_nx, lo, hi, ax);
  plane_crossings(sy, dy, y0, delta, g.image_ny, lo, hi, ay);
  merged.resize(ax.size() + ay.size() + 2);
  merged[0] = lo;
  auto tail = std::merge(ax.begin(), ax.end(), ay.begin(), ay.end(), merged.begin() + 1);
  *tail = hi;
  merged.resize(static_cast<std::size_t>(tail - merged.begin()) + 1);

  for (std::size_t m = 0; m + 1 < merged.size(); ++m) {
    const double seg = merged[m + 1] - merged[m];
    if (!(seg > 0.0)) continue;
    const double mid = 0.5 * (merged[m] + merged[m + 1]);
    const double xm = sx + mid * dx;
    const double ym = sy + mid * dy;
    auto i1 = static_cast<long>(std::floor((xm - x0) / delta));
    auto i2 = static_cast<long>(std::floor((ym - y0) / delta));
    i1 = std::clamp(i1, 0L, static_cast<long>(g.image_nx) - 1);
    i2 = std::clamp(i2, 0L, static_cast<long>(g.image_ny) - 1);
    const auto pixel = static_cast<std::uint32_t>(static_cast<std::size_t>(i1) +
                                                  g.image_nx * static_cast<std::size_t>(i2));
    hits.push_back({pixel, seg * ray_length * kMmToCm});
  }
}

Projector::Projector(ScanGeometry geometry) : geometry_(std::move(geometry)) {
  geometry_.validate();
  all_views_.resize(geometry_.view_count());
  std::iota(all_views_.begin(), all_views_.end(), std::size_t{0});

  const std::size_t rays = geometry_.view_count() * geometry_.detector_count;
  row_start_.reserve(rays + 1);
  row_start_.push_back(0);
  const std::size_t estimate = rays * std::max(geometry_.image_nx, geometry_.image_ny);
  pixels_.reserve(estimate);
  weights_.reserve(estimate);
  std::vector<RayHit> hits;
  for (std::size_t v = 0; v < geometry_.view_count(); ++v) {
    for (std::size_t j = 0; j < geometry_.detector_count; ++j) {
      hits.clear();
      trace_ray(geometry_, v, j, hits);
      for (const auto& h : hits) {
        pixels_.push_back(h.pixel);
        weights_.push_back(h.length_cm);
      }
      row_start_.push_back(pixels_.size());
    }
  }
  pixels_.shrink_to_fit();
  weights_.shrink_to_fit();
}

void Projector::check_views(std::span<const std::size_t> views) const {
  if (views.empty()) throw std::invalid_argument("projection needs a non-empty view subset");
  for (std::size_t v : views) {
    if (v >= geometry_.view_count()) {
      throw std::out_of_range("view " + std::to_string(v) + " outside " + std::to_string(geometry_.view_count()));
    }
  }
}

std::span<const std::uint32_t> Projector::row_pixels(std::size_t view, std::size_t det) const {
  const std::size_t r = row(view, det);
  return std::span<const std::uint32_t>(pixels_).subspan(row_start_[r], row_start_[r + 1] - row_start_[r]);
}

std::span<const double> Projector::row_weights(std::size_t view, std::size_t det) const {
  const std::size_t r = row(view, det);
  return std::span<const double>(weights_).subspan(row_start_[r], row_start_[r + 1] - row_start_[r]);
}

std::vector<double> Projector::forward(std::span<const double> image, std::span<const std::size_t> views) const {
  check_views(views);
  if (image.size() != pixel_count()) {
    throw std::invalid_argument("forward: image has " + std::to_string(image.size()) + " pixels, geometry expects " +
                                std::to_string(pixel_count()));
  }
  const std::size_t J = geometry_.detector_count;
  std::vector<double> sino(J * views.size());
  for (std::size_t vi = 0; vi < views.size(); ++vi) {
    for (std::size_t j = 0; j < J; ++j) {
      const std::size_t r = row(views[vi], j);
      double acc = 0.0;
      for (std::size_t k = row_start_[r]; k < row_start_[r + 1]; ++k) acc += weights_[k] * image[pixels_[k]];
      sino[vi * J + j] = acc;
    }
  }
  return sino;
}

std::vector<double> Projector::back(std::span<const double> sinogram, std::span<const std::size_t> views) const {
  check_views(views);
  const std::size_t J = geometry_.detector_count;
  if (sinogram.size() != J * views.size()) {
    throw std::invalid_argument("back: sinogram has " + std::to_string(sinogram.size()) + " values, expected " +
                                std::to_string(J * views.size()));
  }
  std::vector<double> image(pixel_count(), 0.0);
  for (std::size_t vi = 0; vi < views.size(); ++vi) {
    for (std::size_t j = 0; j < J; ++j) {
      const double val = sinogram[vi * J + j];
      if (val == 0.0) continue;
      const std::size_t r = row(views[vi], j);
      for (std::size_t k = row_start_[r]; k < row_start_[r + 1]; ++k) image[pixels_[k]] += weights_[k] * val;
    }
  }
  return image;
}

std::vector<double> Projector::sqs_denominator(std::span<const std::size_t> views) const {
  const std::vector<double> ones(pixel_count(), 1.0);
  return back(forward(ones, views), views);
}

}  // namespace sct
