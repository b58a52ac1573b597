#pragma once

#include "spectral_ct/tensor.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace sct {

double rmse(std::span<const double> a, std::span<const double> b);
double rmse(const Tensor2& a, const Tensor2& b);

/// Mean local SSIM over all 8×8 windows (uniform weights, population
/// statistics) with C1 = (0.01·R)², C2 = (0.03·R)².
double ssim(const Tensor2& a, const Tensor2& b, double dynamic_range);

struct FsimConfig {
  std::size_t scales = 4;
  std::size_t orientations = 4;
  double min_wavelength = 6.0;
  double mult = 2.0;
  double sigma_on_f = 0.55;
  double d_theta_on_sigma = 1.2;
  double noise_k = 2.0;
  double epsilon = 1e-4;
  double lowpass_cutoff = 0.45;
  int lowpass_order = 15;
  double t1 = 0.85;
  double t2 = 160.0;
};

/// Phase congruency of an image (log-Gabor bank with noise compensation).
Tensor2 phase_congruency(const Tensor2& img, const FsimConfig& cfg = {});

/// Feature similarity of b against reference a. Both images are mapped to
/// [0, 255] through 255/dynamic_range before comparison. When neither image
/// has phase congruency anywhere the index is the mean of the
/// phase-congruency similarity term, which is 1.
double fsim(const Tensor2& a, const Tensor2& b, double dynamic_range, const FsimConfig& cfg = {});

struct ChannelMetrics {
  std::size_t channel;
  double rmse;
  double ssim;
  double fsim;
};

/// RMSE, SSIM, FSIM per channel with R = max of the reference channel
/// (1 when that is not positive).
std::vector<ChannelMetrics> evaluate_channels(const Tensor3& reference, const Tensor3& image);

struct RoiStats {
  std::vector<double> mean;                ///< per channel, image
  std::vector<double> reference_mean;      ///< per channel, reference
  std::vector<std::optional<double>> bias; ///< |mean − ref| / |ref|; empty when ref mean is 0
};

/// Per-channel ROI means and relative biases. mask is i1-fastest, one entry
/// per pixel; nonzero entries select the ROI.
RoiStats roi_mean_bias(const Tensor3& image, const Tensor3& reference, std::span<const unsigned char> mask);

}  // namespace sct
