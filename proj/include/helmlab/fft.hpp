// Copyright (c) 2026 the helmlab authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "helmlab/util.hpp"

namespace helmlab {

namespace detail {
inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }
}  // namespace detail

// In-place iterative radix-2 FFT, sign = -1 forward / +1 inverse (inverse is
// unnormalized; divide by N yourself). Grids in this project are powers of two
// by construction, so no general-length fallback is provided.
inline void fft_pow2(std::vector<cplx>& a, int sign) {
  const std::size_t n = a.size();
  if (!detail::is_pow2(n)) throw NumericalError("fft_pow2: length must be a power of two");
  // bit reversal
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * kPi / static_cast<double>(len);
    const cplx wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const cplx u = a[i + k];
        const cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

inline void fft_forward(std::vector<cplx>& a) { fft_pow2(a, -1); }

inline void fft_inverse(std::vector<cplx>& a) {
  fft_pow2(a, +1);
  const double inv = 1.0 / static_cast<double>(a.size());
  for (auto& v : a) v *= inv;
}

// Row-major 2D transform (ny rows of length nx).
inline void fft2_forward(std::vector<cplx>& a, std::size_t nx, std::size_t ny) {
  if (a.size() != nx * ny) throw NumericalError("fft2_forward: size mismatch");
  std::vector<cplx> tmp;
  for (std::size_t r = 0; r < ny; ++r) {
    tmp.assign(a.begin() + r * nx, a.begin() + (r + 1) * nx);
    fft_forward(tmp);
    std::copy(tmp.begin(), tmp.end(), a.begin() + r * nx);
  }
  tmp.resize(ny);
  for (std::size_t c = 0; c < nx; ++c) {
    for (std::size_t r = 0; r < ny; ++r) tmp[r] = a[r * nx + c];
    fft_forward(tmp);
    for (std::size_t r = 0; r < ny; ++r) a[r * nx + c] = tmp[r];
  }
}

inline void fft2_inverse(std::vector<cplx>& a, std::size_t nx, std::size_t ny) {
  if (a.size() != nx * ny) throw NumericalError("fft2_inverse: size mismatch");
  std::vector<cplx> tmp;
  for (std::size_t r = 0; r < ny; ++r) {
    tmp.assign(a.begin() + r * nx, a.begin() + (r + 1) * nx);
    fft_inverse(tmp);
    std::copy(tmp.begin(), tmp.end(), a.begin() + r * nx);
  }
  tmp.resize(ny);
  for (std::size_t c = 0; c < nx; ++c) {
    for (std::size_t r = 0; r < ny; ++r) tmp[r] = a[r * nx + c];
    fft_inverse(tmp);
    for (std::size_t r = 0; r < ny; ++r) a[r * nx + c] = tmp[r];
  }
}

}  // namespace helmlab
