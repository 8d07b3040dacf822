// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0
//
// Frame-level feature extraction: a mixed-radix FFT, the 2xN time/frequency
// feature built from it, global standardization statistics, and an MFCC
// baseline path (Hamming window -> power spectrum -> mel filterbank ->
// log -> DCT-II).

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "faultear/audio_io.hpp"
#include "faultear/fault_label.hpp"

namespace faultear {

using cplx = std::complex<double>;

// DFT plan for a fixed length. Lengths whose factors are all in {2, 3, 5}
// take the mixed-radix Cooley-Tukey path; any other length falls back to
// direct O(N^2) evaluation. The twiddle table is immutable after
// construction, so a plan may be shared across threads.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);

  std::size_t size() const { return n_; }
  bool smooth() const { return !radices_.empty() || n_ == 1; }

  // Unnormalized forward DFT: X[k] = sum_n x[n] * exp(-2*pi*i*k*n/N).
  std::vector<cplx> transform(std::span<const cplx> input) const;

 private:
  void recurse(const cplx* in, std::size_t in_stride, cplx* out, cplx* scratch,
               std::size_t n, std::size_t radix_pos) const;

  std::size_t n_;
  std::vector<std::size_t> radices_;  // empty when not 2-3-5 smooth
  std::vector<cplx> twiddle_;         // exp(-2*pi*i*j/N) for j < N
};

// One-shot DFT. Plans are cached per length behind a mutex, so repeated
// calls at the same N reuse the twiddle table.
std::vector<cplx> fft(std::span<const cplx> input);

// |FFT(frame)|/N for all N bins. Real input, so the result is
// Hermitian-symmetric; no window is applied.
std::vector<double> magnitude_spectrum(std::span<const double> samples);
std::vector<double> magnitude_spectrum(const Frame& frame);

// Global scalar standardization: one mean/std over every time sample of the
// given frames, one over every magnitude-spectrum value. Standard
// deviations are population ones, floored at 1e-12.
struct StandardizationStats {
  double mean_time = 0.0;
  double std_time = 1.0;
  double mean_freq = 0.0;
  double std_freq = 1.0;
};

StandardizationStats compute_standardization(const std::vector<Frame>& frames);

// Same statistics, but over frames paired with precomputed spectra. Used by
// the dataset builder to avoid transforming every frame twice.
StandardizationStats compute_standardization(
    const std::vector<Frame>& frames,
    const std::vector<std::vector<double>>& spectra,
    std::span<const std::size_t> indices);

// The 2xN input sample: row 0 standardized time samples, row 1 standardized
// magnitude spectrum.
struct TimeFreqFeature {
  std::size_t width = 0;            // N
  std::vector<double> matrix;       // 2*N values, row-major
  FaultLabel label = FaultLabel::Normal;
  std::string source_id;
  std::size_t frame_index = 0;

  double* time_row() { return matrix.data(); }
  const double* time_row() const { return matrix.data(); }
  double* freq_row() { return matrix.data() + width; }
  const double* freq_row() const { return matrix.data() + width; }
};

TimeFreqFeature build_feature(const Frame& frame, const StandardizationStats& stats);
// Variant reusing a precomputed magnitude spectrum (must match the frame).
TimeFreqFeature build_feature(const Frame& frame, std::span<const double> spectrum,
                              const StandardizationStats& stats);

// --- MFCC baseline -------------------------------------------------------

struct MfccConfig {
  std::size_t n_fft = 8192;
  std::size_t n_mels = 26;
  std::size_t n_coeffs = 13;
  double fmin_hz = 0.0;
  double fmax_hz = 0.0;  // 0 means sample_rate/2
};

// mel(f) = 2595 * log10(1 + f/700)
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filterbank, n_mels rows by n_fft/2+1 columns, each filter
// peaking at exactly 1 on its center bin.
std::vector<std::vector<double>> mel_filterbank(const MfccConfig& cfg,
                                                int sample_rate_hz);

// Orthonormal DCT-II and its inverse (DCT-III with matching scaling).
std::vector<double> dct2_orthonormal(std::span<const double> input);
std::vector<double> idct2_orthonormal(std::span<const double> input);

// Hamming window -> zero-pad to n_fft -> |FFT|^2/n_fft on n_fft/2+1 bins ->
// mel filterbank -> log(x + 1e-10) -> DCT-II -> first n_coeffs coefficients.
std::vector<double> mfcc(const Frame& frame, const MfccConfig& cfg,
                         int sample_rate_hz);

}  // namespace faultear
