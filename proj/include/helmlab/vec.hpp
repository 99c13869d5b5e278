// Copyright (c) 2026 the helmlab authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>

namespace helmlab {

// Small dynamic-dimension vector for points of R^n, n in {1,2,3}.
// Value semantics, no allocation; dimension fixed at construction.
class Vec {
public:
  static constexpr int kMaxDim = 3;

  Vec() = default;
  explicit Vec(int n) : n_(n) { check_dim(n); }
  Vec(std::initializer_list<double> vals) : n_(static_cast<int>(vals.size())) {
    check_dim(n_);
    int i = 0;
    for (double v : vals) d_[i++] = v;
  }
  static Vec zero(int n) { return Vec(n); }

  int dim() const { return n_; }
  double& operator[](int i) { return d_[i]; }
  double operator[](int i) const { return d_[i]; }

  Vec& operator+=(const Vec& o) {
    for (int i = 0; i < n_; ++i) d_[i] += o.d_[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (int i = 0; i < n_; ++i) d_[i] -= o.d_[i];
    return *this;
  }
  Vec& operator*=(double s) {
    for (int i = 0; i < n_; ++i) d_[i] *= s;
    return *this;
  }

  friend Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
  friend Vec operator*(double s, Vec a) { return a *= s; }
  friend Vec operator*(Vec a, double s) { return a *= s; }
  friend Vec operator-(Vec a) { return a *= -1.0; }

  friend double dot(const Vec& a, const Vec& b) {
    double s = 0;
    for (int i = 0; i < a.n_; ++i) s += a.d_[i] * b.d_[i];
    return s;
  }

  double norm2() const { return dot(*this, *this); }
  double norm() const { return std::sqrt(norm2()); }

  bool finite() const {
    for (int i = 0; i < n_; ++i)
      if (!std::isfinite(d_[i])) return false;
    return true;
  }

private:
  static void check_dim(int n) {
    if (n < 0 || n > kMaxDim) throw std::out_of_range("Vec: dimension out of range");
  }
  std::array<double, kMaxDim> d_{};
  int n_ = 0;
};

inline Vec normalized(const Vec& v) {
  const double r = v.norm();
  Vec out = v;
  if (r > 0) out *= 1.0 / r;
  return out;
}

}  // namespace helmlab
