#pragma once

// Thin RAII layer over FFTW. Planning and plan destruction are serialized
// through one mutex (FFTW's planner is not re-entrant); executing an existing
// plan on fresh arrays via the new-array interface is thread-safe.

#include <fftw3.h>

#include <algorithm>
#include <cstddef>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "bifrac/error.hpp"

namespace bifrac::fft {

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealBuffer {
 public:
  explicit RealBuffer(std::size_t n) : size_(n), data_(fftw_alloc_real(n)) {
    if (!data_) throw Error("FFTW allocation of " + std::to_string(n * sizeof(double)) + " bytes failed");
  }
  RealBuffer(const RealBuffer&) = delete;
  RealBuffer& operator=(const RealBuffer&) = delete;
  RealBuffer(RealBuffer&& o) noexcept : size_(o.size_), data_(std::exchange(o.data_, nullptr)) {}
  ~RealBuffer() {
    if (data_) fftw_free(data_);
  }

  double* data() { return data_; }
  const double* data() const { return data_; }
  std::size_t size() const { return size_; }
  fftw_complex* complex() { return reinterpret_cast<fftw_complex*>(data_); }
  const fftw_complex* complex() const { return reinterpret_cast<const fftw_complex*>(data_); }

 private:
  std::size_t size_;
  double* data_;
};

class Plan {
 public:
  Plan() = default;
  explicit Plan(fftw_plan p) : plan_(p) {
    if (!plan_) throw Error("FFTW failed to create a plan");
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  Plan(Plan&& o) noexcept : plan_(std::exchange(o.plan_, nullptr)) {}
  Plan& operator=(Plan&& o) noexcept {
    std::swap(plan_, o.plan_);
    return *this;
  }
  ~Plan() {
    if (plan_) {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
  }
  fftw_plan get() const { return plan_; }

 private:
  fftw_plan plan_ = nullptr;
};

/// Smallest n' >= n whose only prime factors are 2, 3, 5, 7.
inline std::size_t good_size(std::size_t n) {
  for (std::size_t m = std::max<std::size_t>(n, 1);; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2u, 3u, 5u, 7u})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

/// In-place real <-> complex transform pair of a given shape. The last axis
/// is padded to 2 (P/2 + 1) reals as FFTW's in-place layout requires.
class InPlaceR2C {
 public:
  InPlaceR2C(std::vector<int> shape, RealBuffer& scratch) : shape_(std::move(shape)) {
    std::lock_guard lock(planner_mutex());
    const int rank = static_cast<int>(shape_.size());
    forward_ = Plan(fftw_plan_dft_r2c(rank, shape_.data(), scratch.data(), scratch.complex(), FFTW_ESTIMATE));
    backward_ = Plan(fftw_plan_dft_c2r(rank, shape_.data(), scratch.complex(), scratch.data(), FFTW_ESTIMATE));
  }

  static std::size_t padded_size(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (std::size_t k = 0; k + 1 < shape.size(); ++k) n *= static_cast<std::size_t>(shape[k]);
    return n * padded_last(shape);
  }
  static std::size_t padded_last(const std::vector<int>& shape) {
    return 2 * (static_cast<std::size_t>(shape.back()) / 2 + 1);
  }

  void forward(RealBuffer& buf) const { fftw_execute_dft_r2c(forward_.get(), buf.data(), buf.complex()); }
  void backward(RealBuffer& buf) const { fftw_execute_dft_c2r(backward_.get(), buf.complex(), buf.data()); }

  const std::vector<int>& shape() const { return shape_; }

 private:
  std::vector<int> shape_;
  Plan forward_;
  Plan backward_;
};

}  // namespace bifrac::fft
