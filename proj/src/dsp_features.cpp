// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0

#include "faultear/dsp_features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "faultear/errors.hpp"

namespace faultear {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kStdFloor = 1e-12;
constexpr double kLogFloor = 1e-10;

std::vector<std::size_t> factor_235(std::size_t n) {
  std::vector<std::size_t> radices;
  for (std::size_t radix : {2ul, 3ul, 5ul}) {
    while (n % radix == 0) {
      radices.push_back(radix);
      n /= radix;
    }
  }
  if (n != 1) radices.clear();  // not smooth, caller falls back to direct DFT
  return radices;
}

}  // namespace

FftPlan::FftPlan(std::size_t n) : n_(n) {
  if (n == 0) throw Error(Errc::EmptyInput, "FFT length must be at least 1");
  radices_ = factor_235(n);
  twiddle_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double angle = -kTwoPi * static_cast<double>(j) / static_cast<double>(n);
    twiddle_[j] = cplx(std::cos(angle), std::sin(angle));
  }
}

// Decimation in time over the radix list. Sub-transforms of size m sit in
// out[j*m .. (j+1)*m); the butterfly combines them through the shared
// N-point twiddle table (exp(-2*pi*i*j*k/n) == twiddle[(j*k % n) * (N/n)]).
void FftPlan::recurse(const cplx* in, std::size_t in_stride, cplx* out,
                      cplx* scratch, std::size_t n, std::size_t radix_pos) const {
  if (n == 1) {
    out[0] = in[0];
    return;
  }
  const std::size_t radix = radices_[radix_pos];
  const std::size_t m = n / radix;
  for (std::size_t j = 0; j < radix; ++j) {
    recurse(in + j * in_stride, in_stride * radix, out + j * m, scratch, m,
            radix_pos + 1);
  }
  const std::size_t root_stride = n_ / n;
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc = out[k % m];
    for (std::size_t j = 1; j < radix; ++j) {
      acc += twiddle_[((j * k) % n) * root_stride] * out[j * m + k % m];
    }
    scratch[k] = acc;
  }
  std::copy(scratch, scratch + n, out);
}

std::vector<cplx> FftPlan::transform(std::span<const cplx> input) const {
  if (input.size() != n_) {
    throw Error(Errc::ShapeMismatch, "FFT plan length " + std::to_string(n_) +
                                         " vs input " + std::to_string(input.size()));
  }
  std::vector<cplx> out(n_);
  if (smooth()) {
    std::vector<cplx> scratch(n_);
    recurse(input.data(), 1, out.data(), scratch.data(), n_, 0);
    return out;
  }
  // Direct evaluation for lengths with factors other than 2, 3, 5.
  for (std::size_t k = 0; k < n_; ++k) {
    cplx acc(0.0, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      acc += input[j] * twiddle_[(j * k) % n_];
    }
    out[k] = acc;
  }
  return out;
}

namespace {

const FftPlan& plan_for(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::unique_ptr<FftPlan>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<FftPlan>(n);
  return *slot;
}

}  // namespace

std::vector<cplx> fft(std::span<const cplx> input) {
  if (input.empty()) throw Error(Errc::EmptyInput, "FFT of empty sequence");
  return plan_for(input.size()).transform(input);
}

std::vector<double> magnitude_spectrum(std::span<const double> samples) {
  if (samples.empty()) throw Error(Errc::EmptyInput, "spectrum of empty frame");
  std::vector<cplx> buf(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) buf[i] = cplx(samples[i], 0.0);
  const std::vector<cplx> spectrum = plan_for(samples.size()).transform(buf);
  std::vector<double> magnitude(samples.size());
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    magnitude[k] = std::abs(spectrum[k]) * inv_n;
  }
  return magnitude;
}

std::vector<double> magnitude_spectrum(const Frame& frame) {
  return magnitude_spectrum(std::span<const double>(frame.samples));
}

namespace {

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;
};

// Two-pass population statistics over a sequence of rows.
template <typename RowAt>
MeanVar mean_var(std::size_t rows, RowAt row_at) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (double v : row_at(r)) {
      sum += v;
      ++count;
    }
  }
  MeanVar mv;
  mv.mean = sum / static_cast<double>(count);
  double sq = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (double v : row_at(r)) {
      const double d = v - mv.mean;
      sq += d * d;
    }
  }
  mv.var = sq / static_cast<double>(count);
  return mv;
}

}  // namespace

StandardizationStats compute_standardization(
    const std::vector<Frame>& frames,
    const std::vector<std::vector<double>>& spectra,
    std::span<const std::size_t> indices) {
  if (indices.empty()) throw Error(Errc::EmptySet, "no frames for standardization");
  const MeanVar time_mv = mean_var(indices.size(), [&](std::size_t r) -> const std::vector<double>& {
    return frames[indices[r]].samples;
  });
  const MeanVar freq_mv = mean_var(indices.size(), [&](std::size_t r) -> const std::vector<double>& {
    return spectra[indices[r]];
  });
  StandardizationStats stats;
  stats.mean_time = time_mv.mean;
  stats.std_time = std::max(std::sqrt(time_mv.var), kStdFloor);
  stats.mean_freq = freq_mv.mean;
  stats.std_freq = std::max(std::sqrt(freq_mv.var), kStdFloor);
  return stats;
}

StandardizationStats compute_standardization(const std::vector<Frame>& frames) {
  if (frames.empty()) throw Error(Errc::EmptySet, "no frames for standardization");
  std::vector<std::vector<double>> spectra(frames.size());
  std::vector<std::size_t> indices(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    spectra[i] = magnitude_spectrum(frames[i]);
    indices[i] = i;
  }
  return compute_standardization(frames, spectra, indices);
}

TimeFreqFeature build_feature(const Frame& frame, std::span<const double> spectrum,
                              const StandardizationStats& stats) {
  const std::size_t n = frame.samples.size();
  TimeFreqFeature feature;
  feature.width = n;
  feature.matrix.resize(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    feature.matrix[i] = (frame.samples[i] - stats.mean_time) / stats.std_time;
    feature.matrix[n + i] = (spectrum[i] - stats.mean_freq) / stats.std_freq;
  }
  feature.label = frame.label;
  feature.source_id = frame.source_id;
  feature.frame_index = frame.frame_index;
  return feature;
}

TimeFreqFeature build_feature(const Frame& frame, const StandardizationStats& stats) {
  return build_feature(frame, magnitude_spectrum(frame), stats);
}

// --- MFCC -----------------------------------------------------------------

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<std::vector<double>> mel_filterbank(const MfccConfig& cfg,
                                                int sample_rate_hz) {
  const double nyquist = sample_rate_hz / 2.0;
  const double fmax = cfg.fmax_hz > 0.0 ? cfg.fmax_hz : nyquist;
  if (cfg.fmin_hz < 0.0 || cfg.fmin_hz >= fmax || fmax > nyquist) {
    throw Error(Errc::BadRange, "mel filterbank frequency range invalid");
  }
  if (cfg.n_fft % 2 != 0) throw Error(Errc::BadRange, "n_fft must be even");

  const std::size_t n_bins = cfg.n_fft / 2 + 1;
  const double bin_hz = static_cast<double>(sample_rate_hz) / static_cast<double>(cfg.n_fft);

  // n_mels + 2 points equally spaced in mel, snapped to integer FFT bins.
  const double mel_lo = hz_to_mel(cfg.fmin_hz);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<std::size_t> bin(cfg.n_mels + 2);
  for (std::size_t m = 0; m < bin.size(); ++m) {
    const double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(m) /
                                    static_cast<double>(cfg.n_mels + 1);
    const double hz = mel_to_hz(mel);
    bin[m] = std::min<std::size_t>(n_bins - 1,
                                   static_cast<std::size_t>(std::lround(hz / bin_hz)));
  }

  std::vector<std::vector<double>> bank(cfg.n_mels, std::vector<double>(n_bins, 0.0));
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const std::size_t left = bin[m];
    const std::size_t center = std::max(bin[m + 1], left + 1);
    const std::size_t right = std::max(bin[m + 2], center + 1);
    for (std::size_t k = left + 1; k <= center && k < n_bins; ++k) {
      bank[m][k] = static_cast<double>(k - left) / static_cast<double>(center - left);
    }
    for (std::size_t k = center + 1; k < right && k < n_bins; ++k) {
      bank[m][k] = static_cast<double>(right - k) / static_cast<double>(right - center);
    }
  }
  return bank;
}

std::vector<double> dct2_orthonormal(std::span<const double> input) {
  const std::size_t n = input.size();
  std::vector<double> out(n, 0.0);
  const double scale0 = std::sqrt(1.0 / static_cast<double>(n));
  const double scale = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += input[i] * std::cos(std::numbers::pi * (static_cast<double>(i) + 0.5) *
                                 static_cast<double>(k) / static_cast<double>(n));
    }
    out[k] = acc * (k == 0 ? scale0 : scale);
  }
  return out;
}

std::vector<double> idct2_orthonormal(std::span<const double> input) {
  const std::size_t n = input.size();
  std::vector<double> out(n, 0.0);
  const double scale0 = std::sqrt(1.0 / static_cast<double>(n));
  const double scale = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    double acc = input[0] * scale0;
    for (std::size_t k = 1; k < n; ++k) {
      acc += input[k] * scale *
             std::cos(std::numbers::pi * (static_cast<double>(i) + 0.5) *
                      static_cast<double>(k) / static_cast<double>(n));
    }
    out[i] = acc;
  }
  return out;
}

std::vector<double> mfcc(const Frame& frame, const MfccConfig& cfg,
                         int sample_rate_hz) {
  if (cfg.n_coeffs > cfg.n_mels) {
    throw Error(Errc::BadRange, "n_coeffs must not exceed n_mels");
  }
  const std::size_t len = frame.samples.size();
  if (len > cfg.n_fft) {
    throw Error(Errc::BadRange, "frame longer than n_fft");
  }

  // Hamming window over the frame, zero-padded to n_fft.
  std::vector<cplx> buf(cfg.n_fft, cplx(0.0, 0.0));
  for (std::size_t i = 0; i < len; ++i) {
    const double w = len > 1 ? 0.54 - 0.46 * std::cos(kTwoPi * static_cast<double>(i) /
                                                      static_cast<double>(len - 1))
                             : 1.0;
    buf[i] = cplx(frame.samples[i] * w, 0.0);
  }
  const std::vector<cplx> spectrum = plan_for(cfg.n_fft).transform(buf);

  const std::size_t n_bins = cfg.n_fft / 2 + 1;
  std::vector<double> power(n_bins);
  const double inv_n = 1.0 / static_cast<double>(cfg.n_fft);
  for (std::size_t k = 0; k < n_bins; ++k) {
    power[k] = std::norm(spectrum[k]) * inv_n;
  }

  const auto bank = mel_filterbank(cfg, sample_rate_hz);
  std::vector<double> mel_log(cfg.n_mels);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n_bins; ++k) acc += bank[m][k] * power[k];
    mel_log[m] = std::log(acc + kLogFloor);
  }

  std::vector<double> coeffs = dct2_orthonormal(mel_log);
  coeffs.resize(cfg.n_coeffs);
  return coeffs;
}

}  // namespace faultear
