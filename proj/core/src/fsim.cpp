#include "spectral_ct/metrics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

// Phase congruency and FSIM following the reference MATLAB implementation
// (phasecong2 / FeatureSIM). Images are treated as rows = i2, columns = i1,
// so the i1-fastest storage is the row-major array FFTW expects.

namespace sct {

namespace {

using cplx = std::complex<double>;

class Fft2 {
 public:
  Fft2(std::size_t rows, std::size_t cols) : n_(rows * cols) {
    buf_ = reinterpret_cast<cplx*>(fftw_alloc_complex(n_));
    if (!buf_) throw std::bad_alloc();
    auto* b = reinterpret_cast<fftw_complex*>(buf_);
    fwd_ = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), b, b, FFTW_FORWARD, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), b, b, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~Fft2() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(buf_);
  }
  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;

  std::vector<cplx> forward(const std::vector<cplx>& in) { return run(in, fwd_, 1.0); }
  std::vector<cplx> inverse(const std::vector<cplx>& in) { return run(in, inv_, 1.0 / static_cast<double>(n_)); }

 private:
  std::vector<cplx> run(const std::vector<cplx>& in, fftw_plan plan, double scale) {
    std::copy(in.begin(), in.end(), buf_);
    fftw_execute(plan);
    std::vector<cplx> out(buf_, buf_ + n_);
    if (scale != 1.0) {
      for (cplx& c : out) c *= scale;
    }
    return out;
  }

  std::size_t n_;
  cplx* buf_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

// Normalized frequency of FFT bin k along an axis of length n, matching the
// ifftshift of the centred ranges used by the reference code.
double bin_frequency(std::size_t k, std::size_t n) {
  const double kk = static_cast<double>(k);
  const double nn = static_cast<double>(n);
  if (n % 2 == 0) return k < n / 2 ? kk / nn : (kk - nn) / nn;
  if (n == 1) return 0.0;
  return k <= (n - 1) / 2 ? kk / (nn - 1.0) : (kk - nn) / (nn - 1.0);
}

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2), v.end());
  const double hi = v[n / 2];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2));
  return 0.5 * (lo + hi);
}

// conv2(img, ones(f)/f², 'same') then keep every f-th sample from the first.
Tensor2 average_downsample(const Tensor2& img, std::size_t f) {
  const std::size_t cols = img.dim(0);
  const std::size_t rows = img.dim(1);
  const auto h = static_cast<std::ptrdiff_t>(f / 2);
  const double w = 1.0 / static_cast<double>(f * f);
  const std::size_t oc = (cols + f - 1) / f;
  const std::size_t orows = (rows + f - 1) / f;
  Tensor2 out({oc, orows});
  for (std::size_t r = 0; r < orows; ++r) {
    for (std::size_t c = 0; c < oc; ++c) {
      double s = 0.0;
      for (std::size_t a = 0; a < f; ++a) {
        const std::ptrdiff_t rr = static_cast<std::ptrdiff_t>(r * f) + h - static_cast<std::ptrdiff_t>(a);
        if (rr < 0 || rr >= static_cast<std::ptrdiff_t>(rows)) continue;
        for (std::size_t b = 0; b < f; ++b) {
          const std::ptrdiff_t cc = static_cast<std::ptrdiff_t>(c * f) + h - static_cast<std::ptrdiff_t>(b);
          if (cc < 0 || cc >= static_cast<std::ptrdiff_t>(cols)) continue;
          s += img(static_cast<std::size_t>(cc), static_cast<std::size_t>(rr));
        }
      }
      out(c, r) = s * w;
    }
  }
  return out;
}

// Scharr gradient magnitude with zero padding.
Tensor2 gradient_magnitude(const Tensor2& img) {
  const auto cols = static_cast<std::ptrdiff_t>(img.dim(0));
  const auto rows = static_cast<std::ptrdiff_t>(img.dim(1));
  const auto at = [&](std::ptrdiff_t c, std::ptrdiff_t r) {
    if (c < 0 || r < 0 || c >= cols || r >= rows) return 0.0;
    return img(static_cast<std::size_t>(c), static_cast<std::size_t>(r));
  };
  constexpr double w[3] = {3.0 / 16.0, 10.0 / 16.0, 3.0 / 16.0};
  Tensor2 out(img.dims());
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    for (std::ptrdiff_t c = 0; c < cols; ++c) {
      double gx = 0.0, gy = 0.0;
      for (int k = -1; k <= 1; ++k) {
        gx += w[k + 1] * (at(c + 1, r + k) - at(c - 1, r + k));
        gy += w[k + 1] * (at(c + k, r + 1) - at(c + k, r - 1));
      }
      out(static_cast<std::size_t>(c), static_cast<std::size_t>(r)) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

}  // namespace

Tensor2 phase_congruency(const Tensor2& img, const FsimConfig& cfg) {
  const std::size_t cols = img.dim(0);
  const std::size_t rows = img.dim(1);
  const std::size_t n = rows * cols;
  const double pi = std::numbers::pi;
  Fft2 fft(rows, cols);

  std::vector<cplx> spatial(n);
  for (std::size_t i = 0; i < n; ++i) spatial[i] = img.data()[i];
  const std::vector<cplx> image_fft = fft.forward(spatial);

  std::vector<double> radius(n), sin_t(n), cos_t(n), lowpass(n);
  for (std::size_t r = 0; r < rows; ++r) {
    const double y = bin_frequency(r, rows);
    for (std::size_t c = 0; c < cols; ++c) {
      const double x = bin_frequency(c, cols);
      const std::size_t i = r * cols + c;
      radius[i] = std::sqrt(x * x + y * y);
      lowpass[i] = 1.0 / (1.0 + std::pow(radius[i] / cfg.lowpass_cutoff, 2 * cfg.lowpass_order));
      const double theta = std::atan2(-y, x);
      sin_t[i] = std::sin(theta);
      cos_t[i] = std::cos(theta);
    }
  }
  radius[0] = 1.0;

  const double log_sigma2 = 2.0 * std::log(cfg.sigma_on_f) * std::log(cfg.sigma_on_f);
  std::vector<std::vector<double>> log_gabor(cfg.scales, std::vector<double>(n));
  for (std::size_t s = 0; s < cfg.scales; ++s) {
    const double fo = 1.0 / (cfg.min_wavelength * std::pow(cfg.mult, static_cast<double>(s)));
    for (std::size_t i = 0; i < n; ++i) {
      const double l = std::log(radius[i] / fo);
      log_gabor[s][i] = std::exp(-(l * l) / log_sigma2) * lowpass[i];
    }
    log_gabor[s][0] = 0.0;
  }

  const double theta_sigma = pi / static_cast<double>(cfg.orientations) / cfg.d_theta_on_sigma;
  std::vector<double> energy_all(n, 0.0), an_all(n, 0.0);
  std::vector<std::vector<double>> ifft_filters(cfg.scales);
  std::vector<std::vector<cplx>> eo(cfg.scales);
  std::vector<cplx> work(n);

  for (std::size_t o = 0; o < cfg.orientations; ++o) {
    const double angl = static_cast<double>(o) * pi / static_cast<double>(cfg.orientations);
    std::vector<double> spread(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double ds = sin_t[i] * std::cos(angl) - cos_t[i] * std::sin(angl);
      const double dc = cos_t[i] * std::cos(angl) + sin_t[i] * std::sin(angl);
      const double dtheta = std::abs(std::atan2(ds, dc));
      spread[i] = std::exp(-(dtheta * dtheta) / (2.0 * theta_sigma * theta_sigma));
    }

    std::vector<double> sum_e(n, 0.0), sum_o(n, 0.0), sum_an(n, 0.0);
    double em_n = 0.0;
    for (std::size_t s = 0; s < cfg.scales; ++s) {
      std::vector<double> filter(n);
      for (std::size_t i = 0; i < n; ++i) filter[i] = log_gabor[s][i] * spread[i];
      for (std::size_t i = 0; i < n; ++i) work[i] = filter[i];
      const std::vector<cplx> f_spatial = fft.inverse(work);
      ifft_filters[s].resize(n);
      const double root_n = std::sqrt(static_cast<double>(n));
      for (std::size_t i = 0; i < n; ++i) ifft_filters[s][i] = f_spatial[i].real() * root_n;
      for (std::size_t i = 0; i < n; ++i) work[i] = image_fft[i] * filter[i];
      eo[s] = fft.inverse(work);
      for (std::size_t i = 0; i < n; ++i) {
        sum_an[i] += std::abs(eo[s][i]);
        sum_e[i] += eo[s][i].real();
        sum_o[i] += eo[s][i].imag();
      }
      if (s == 0) {
        for (double f : filter) em_n += f * f;
      }
    }

    std::vector<double> energy(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double x_energy = std::sqrt(sum_e[i] * sum_e[i] + sum_o[i] * sum_o[i]) + cfg.epsilon;
      const double mean_e = sum_e[i] / x_energy;
      const double mean_o = sum_o[i] / x_energy;
      for (std::size_t s = 0; s < cfg.scales; ++s) {
        const double e = eo[s][i].real();
        const double od = eo[s][i].imag();
        energy[i] += e * mean_e + od * mean_o - std::abs(e * mean_o - od * mean_e);
      }
    }

    std::vector<double> e2(n);
    for (std::size_t i = 0; i < n; ++i) e2[i] = std::norm(eo[0][i]);
    const double mean_e2n = -median_of(std::move(e2)) / std::log(0.5);
    const double noise_power = em_n > 0.0 ? mean_e2n / em_n : 0.0;

    double sum_an2 = 0.0, sum_aiaj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t s = 0; s < cfg.scales; ++s) sum_an2 += ifft_filters[s][i] * ifft_filters[s][i];
      for (std::size_t si = 0; si + 1 < cfg.scales; ++si) {
        for (std::size_t sj = si + 1; sj < cfg.scales; ++sj) sum_aiaj += ifft_filters[si][i] * ifft_filters[sj][i];
      }
    }
    const double est_noise_energy2 = 2.0 * noise_power * sum_an2 + 4.0 * noise_power * sum_aiaj;
    const double tau = std::sqrt(std::max(0.0, est_noise_energy2) / 2.0);
    const double est_noise = tau * std::sqrt(pi / 2.0);
    const double est_sigma = std::sqrt((2.0 - pi / 2.0) * tau * tau);
    const double t = (est_noise + cfg.noise_k * est_sigma) / 1.7;

    for (std::size_t i = 0; i < n; ++i) {
      energy_all[i] += std::max(energy[i] - t, 0.0);
      an_all[i] += sum_an[i];
    }
  }

  Tensor2 pc(img.dims());
  for (std::size_t i = 0; i < n; ++i) pc.data()[i] = an_all[i] > 0.0 ? energy_all[i] / an_all[i] : 0.0;
  return pc;
}

double fsim(const Tensor2& a, const Tensor2& b, double dynamic_range, const FsimConfig& cfg) {
  if (a.dims() != b.dims()) throw std::invalid_argument("fsim: image dims differ");
  if (!(dynamic_range > 0.0)) throw std::invalid_argument("fsim: dynamic range must be positive");
  const double k = 255.0 / dynamic_range;
  Tensor2 y1 = a;
  Tensor2 y2 = b;
  for (double& v : y1.data()) v *= k;
  for (double& v : y2.data()) v *= k;
  const std::size_t min_dim = std::min(a.dim(0), a.dim(1));
  const auto f = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(min_dim) / 256.0)));
  if (f > 1) {
    y1 = average_downsample(y1, f);
    y2 = average_downsample(y2, f);
  }
  const Tensor2 pc1 = phase_congruency(y1, cfg);
  const Tensor2 pc2 = phase_congruency(y2, cfg);
  const Tensor2 g1 = gradient_magnitude(y1);
  const Tensor2 g2 = gradient_magnitude(y2);

  double num = 0.0, den = 0.0, pc_sim_sum = 0.0;
  for (std::size_t i = 0; i < y1.size(); ++i) {
    const double p1 = pc1.data()[i];
    const double p2 = pc2.data()[i];
    const double q1 = g1.data()[i];
    const double q2 = g2.data()[i];
    const double s_pc = (2.0 * p1 * p2 + cfg.t1) / (p1 * p1 + p2 * p2 + cfg.t1);
    const double s_g = (2.0 * q1 * q2 + cfg.t2) / (q1 * q1 + q2 * q2 + cfg.t2);
    const double pcm = std::max(p1, p2);
    num += s_g * s_pc * pcm;
    den += pcm;
    pc_sim_sum += s_pc;
  }
  if (den > 0.0) return num / den;
  return pc_sim_sum / static_cast<double>(y1.size());
}

}  // namespace sct
