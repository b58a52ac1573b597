#include "spectral_ct/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sct {

double rmse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("rmse: sizes differ");
  if (a.empty()) throw std::invalid_argument("rmse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(a.size()));
}

double rmse(const Tensor2& a, const Tensor2& b) {
  if (a.dims() != b.dims()) throw std::invalid_argument("rmse: image dims differ");
  return rmse(a.data(), b.data());
}

double ssim(const Tensor2& a, const Tensor2& b, double dynamic_range) {
  if (a.dims() != b.dims()) throw std::invalid_argument("ssim: image dims differ");
  if (!(dynamic_range > 0.0)) throw std::invalid_argument("ssim: dynamic range must be positive");
  const std::size_t nx = a.dim(0);
  const std::size_t ny = a.dim(1);
  const std::size_t wx = std::min<std::size_t>(8, nx);
  const std::size_t wy = std::min<std::size_t>(8, ny);
  const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
  const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
  const double n = static_cast<double>(wx * wy);
  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t j0 = 0; j0 + wy <= ny; ++j0) {
    for (std::size_t i0 = 0; i0 + wx <= nx; ++i0) {
      double sa = 0.0, sb = 0.0;
      for (std::size_t j = j0; j < j0 + wy; ++j) {
        for (std::size_t i = i0; i < i0 + wx; ++i) {
          sa += a(i, j);
          sb += b(i, j);
        }
      }
      const double ma = sa / n;
      const double mb = sb / n;
      double vaa = 0.0, vbb = 0.0, vab = 0.0;
      for (std::size_t j = j0; j < j0 + wy; ++j) {
        for (std::size_t i = i0; i < i0 + wx; ++i) {
          const double da = a(i, j) - ma;
          const double db = b(i, j) - mb;
          vaa += da * da;
          vbb += db * db;
          vab += da * db;
        }
      }
      vaa /= n;
      vbb /= n;
      vab /= n;
      total += ((2.0 * ma * mb + c1) * (2.0 * vab + c2)) / ((ma * ma + mb * mb + c1) * (vaa + vbb + c2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

std::vector<ChannelMetrics> evaluate_channels(const Tensor3& reference, const Tensor3& image) {
  if (reference.dims() != image.dims()) throw std::invalid_argument("evaluate: image dims differ from reference");
  std::vector<ChannelMetrics> out;
  for (std::size_t s = 0; s < reference.dim(2); ++s) {
    const Tensor2 r = channel(reference, s);
    const Tensor2 x = channel(image, s);
    double range = 0.0;
    for (double v : r.data()) range = std::max(range, v);
    if (!(range > 0.0)) range = 1.0;
    out.push_back({s, rmse(r, x), ssim(r, x, range), fsim(r, x, range)});
  }
  return out;
}

RoiStats roi_mean_bias(const Tensor3& image, const Tensor3& reference, std::span<const unsigned char> mask) {
  if (image.dims() != reference.dims()) throw std::invalid_argument("roi_mean_bias: image dims differ");
  const std::size_t len = image.slab_size();
  if (mask.size() != len) throw std::invalid_argument("roi_mean_bias: mask size does not match the image");
  std::size_t count = 0;
  for (unsigned char m : mask) count += m != 0;
  if (count == 0) throw std::invalid_argument("roi_mean_bias: empty ROI mask");
  RoiStats st;
  for (std::size_t s = 0; s < image.dim(2); ++s) {
    const auto x = image.slab(s);
    const auto r = reference.slab(s);
    double sx = 0.0, sr = 0.0;
    for (std::size_t p = 0; p < len; ++p) {
      if (mask[p]) {
        sx += x[p];
        sr += r[p];
      }
    }
    const double mx = sx / static_cast<double>(count);
    const double mr = sr / static_cast<double>(count);
    st.mean.push_back(mx);
    st.reference_mean.push_back(mr);
    st.bias.push_back(mr != 0.0 ? std::optional<double>(std::abs(mx - mr) / std::abs(mr)) : std::nullopt);
  }
  return st;
}

}  // namespace sct
