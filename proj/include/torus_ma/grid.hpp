#pragma once

// Uniform periodic grids on the unit torus [0,1)^d and spectral calculus on
// them. Fields are stored as point values in row-major axis order (axis 0
// slowest). Transforms go through FFTW; plans are created once per grid
// shape and shared.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "torus_ma/parallel.hpp"

namespace torus_ma {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

class GridError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TorusGrid {
 public:
  static constexpr int kMaxDim = 5;
  static inline std::size_t point_budget = std::size_t{1} << 22;

  TorusGrid() = default;

  explicit TorusGrid(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.empty() || static_cast<int>(sizes_.size()) > kMaxDim)
      throw GridError("grid dimension must be in 1.." + std::to_string(kMaxDim));
    std::size_t total = 1;
    for (int n : sizes_) {
      if (n < 8 || n % 2 != 0)
        throw GridError("grid sizes must be even and >= 8, got " + std::to_string(n));
      total *= static_cast<std::size_t>(n);
    }
    if (total > point_budget) throw GridError("grid exceeds point budget");
    total_ = total;
  }

  static TorusGrid cube(int dim, int n) { return TorusGrid(std::vector<int>(dim, n)); }

  int dim() const { return static_cast<int>(sizes_.size()); }
  int size(int axis) const { return sizes_.at(axis); }
  const std::vector<int>& sizes() const { return sizes_; }
  std::size_t total() const { return total_; }

  std::size_t stride(int axis) const {
    std::size_t s = 1;
    for (int a = dim() - 1; a > axis; --a) s *= static_cast<std::size_t>(sizes_[a]);
    return s;
  }

  int index_along(std::size_t flat, int axis) const {
    return static_cast<int>((flat / stride(axis)) % static_cast<std::size_t>(sizes_[axis]));
  }

  double coordinate(std::size_t flat, int axis) const {
    return static_cast<double>(index_along(flat, axis)) / sizes_[axis];
  }

  bool operator==(const TorusGrid& o) const { return sizes_ == o.sizes_; }

 private:
  std::vector<int> sizes_;
  std::size_t total_ = 0;
};

/// Real periodic function sampled on a TorusGrid.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(TorusGrid grid, double value = 0.0)
      : grid_(std::move(grid)), values_(grid_.total(), value) {}
  ScalarField(TorusGrid grid, std::vector<double> values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_.total()) throw GridError("value count does not match grid");
  }

  /// Samples fn(coords) at every grid point; coords[a] in [0,1).
  static ScalarField sample(const TorusGrid& grid,
                            const std::function<double(std::span<const double>)>& fn) {
    ScalarField f(grid);
    std::vector<double> x(grid.dim());
    for (std::size_t i = 0; i < grid.total(); ++i) {
      for (int a = 0; a < grid.dim(); ++a) x[a] = grid.coordinate(i, a);
      f.values_[i] = fn(x);
    }
    return f;
  }

  const TorusGrid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  bool same_grid(const ScalarField& o) const { return grid_ == o.grid_; }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }
  double min() const { return *std::min_element(values_.begin(), values_.end()); }
  double max() const { return *std::max_element(values_.begin(), values_.end()); }
  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  template <class Fn>
  ScalarField map(Fn&& fn) const {
    ScalarField r(grid_);
    for (std::size_t i = 0; i < values_.size(); ++i) r.values_[i] = fn(values_[i]);
    return r;
  }

  ScalarField& operator+=(const ScalarField& o) {
    check(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    check(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  ScalarField& operator*=(const ScalarField& o) {
    check(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] *= o.values_[i];
    return *this;
  }
  ScalarField& operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
  }
  ScalarField& operator+=(double s) {
    for (double& v : values_) v += s;
    return *this;
  }
  /// this += s * o
  ScalarField& axpy(double s, const ScalarField& o) {
    check(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += s * o.values_[i];
    return *this;
  }

 private:
  void check(const ScalarField& o) const {
    if (!same_grid(o)) throw GridError("field grids differ");
  }

  TorusGrid grid_;
  std::vector<double> values_;
};

inline ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
inline ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
inline ScalarField operator*(ScalarField a, const ScalarField& b) { return a *= b; }
inline ScalarField operator*(double s, ScalarField a) { return a *= s; }
inline ScalarField operator*(ScalarField a, double s) { return a *= s; }
inline ScalarField operator+(ScalarField a, double s) { return a += s; }
inline ScalarField operator+(double s, ScalarField a) { return a += s; }
inline ScalarField operator-(ScalarField a) { return a *= -1.0; }
inline ScalarField operator-(ScalarField a, double s) { return a += -s; }
inline ScalarField operator-(double s, ScalarField a) { return (a *= -1.0) += s; }
inline ScalarField exp(const ScalarField& f) { return f.map([](double v) { return std::exp(v); }); }
inline ScalarField log(const ScalarField& f) { return f.map([](double v) { return std::log(v); }); }

inline double max_abs_diff(const ScalarField& a, const ScalarField& b) { return (a - b).max_abs(); }

namespace detail {

struct FftwFree {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

inline ComplexBuffer alloc_complex(std::size_t n) {
  auto* p = fftw_alloc_complex(n);
  if (!p) throw std::bad_alloc();
  return ComplexBuffer(p);
}

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class FftPlan {
 public:
  explicit FftPlan(const TorusGrid& grid) {
    std::lock_guard lock(planner_mutex());
    auto in = alloc_complex(grid.total());
    auto out = alloc_complex(grid.total());
    forward_ = fftw_plan_dft(grid.dim(), grid.sizes().data(), in.get(), out.get(), FFTW_FORWARD,
                             FFTW_ESTIMATE);
    backward_ = fftw_plan_dft(grid.dim(), grid.sizes().data(), in.get(), out.get(),
                              FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!forward_ || !backward_) throw std::runtime_error("FFTW planning failed");
  }
  ~FftPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  // New-array execution is thread-safe; buffers come from fftw_alloc so the
  // alignment matches the planning arrays.
  void forward(fftw_complex* in, fftw_complex* out) const { fftw_execute_dft(forward_, in, out); }
  void backward(fftw_complex* in, fftw_complex* out) const {
    fftw_execute_dft(backward_, in, out);
  }

 private:
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

inline const FftPlan& plan_for(const TorusGrid& grid) {
  static std::mutex m;
  static std::map<std::vector<int>, std::unique_ptr<FftPlan>> cache;
  std::lock_guard lock(m);
  auto& slot = cache[grid.sizes()];
  if (!slot) slot = std::make_unique<FftPlan>(grid);
  return *slot;
}

/// Signed integer wavenumber for DFT index j on an axis of n points. The
/// Nyquist index n/2 maps to +n/2.
inline int wavenumber(int j, int n) { return j <= n / 2 ? j : j - n; }

}  // namespace detail

/// Normalized discrete Fourier coefficients of a field. One forward
/// transform serves any number of derivative evaluations.
class Spectrum {
 public:
  explicit Spectrum(const ScalarField& f) : grid_(f.grid()), coeffs_(detail::alloc_complex(grid_.total())) {
    auto in = detail::alloc_complex(grid_.total());
    for (std::size_t i = 0; i < grid_.total(); ++i) {
      in[i][0] = f[i];
      in[i][1] = 0.0;
    }
    detail::plan_for(grid_).forward(in.get(), coeffs_.get());
    const double inv = 1.0 / static_cast<double>(grid_.total());
    for (std::size_t i = 0; i < grid_.total(); ++i) {
      coeffs_[i][0] *= inv;
      coeffs_[i][1] *= inv;
    }
  }

  const TorusGrid& grid() const { return grid_; }

  /// Mixed partial derivative with orders[a] derivatives along axis a.
  /// Along an axis with odd order the Nyquist mode is dropped.
  ScalarField derivative(std::span<const int> orders) const {
    if (static_cast<int>(orders.size()) != grid_.dim())
      throw GridError("derivative order vector has wrong length");
    return apply_multiplier([&](std::size_t flat) {
      std::complex<double> m(1.0, 0.0);
      for (int a = 0; a < grid_.dim(); ++a) {
        const int ord = orders[a];
        if (ord == 0) continue;
        const int n = grid_.size(a);
        const int j = grid_.index_along(flat, a);
        if (ord % 2 == 1 && j == n / 2) return std::complex<double>(0.0, 0.0);
        const std::complex<double> ik(0.0, kTwoPi * detail::wavenumber(j, n));
        for (int k = 0; k < ord; ++k) m *= ik;
      }
      return m;
    });
  }

  ScalarField derivative(int axis, int order) const {
    std::vector<int> orders(grid_.dim(), 0);
    orders.at(axis) = order;
    return derivative(orders);
  }

  ScalarField mixed(int axis_a, int axis_b) const {
    std::vector<int> orders(grid_.dim(), 0);
    orders.at(axis_a) += 1;
    orders.at(axis_b) += 1;
    return derivative(orders);
  }

  /// Inverse transform with a pointwise multiplier on the coefficients.
  template <class Multiplier>
  ScalarField apply_multiplier(Multiplier&& mult) const {
    auto work = detail::alloc_complex(grid_.total());
    auto out = detail::alloc_complex(grid_.total());
    for (std::size_t i = 0; i < grid_.total(); ++i) {
      const std::complex<double> c(coeffs_[i][0], coeffs_[i][1]);
      const std::complex<double> r = c * std::complex<double>(mult(i));
      work[i][0] = r.real();
      work[i][1] = r.imag();
    }
    detail::plan_for(grid_).backward(work.get(), out.get());
    ScalarField f(grid_);
    for (std::size_t i = 0; i < grid_.total(); ++i) f[i] = out[i][0];
    return f;
  }

  std::complex<double> coefficient(std::size_t flat) const {
    return {coeffs_[flat][0], coeffs_[flat][1]};
  }

 private:
  TorusGrid grid_;
  detail::ComplexBuffer coeffs_;
};

inline ScalarField derivative(const ScalarField& f, int axis, int order) {
  if (axis < 0 || axis >= f.grid().dim()) throw GridError("derivative axis out of range");
  if (order != 1 && order != 2) throw GridError("derivative order must be 1 or 2");
  return Spectrum(f).derivative(axis, order);
}

/// Mean value times the unit volume; spectrally exact for periodic data.
inline double integrate(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values()) s += v;
  return s / static_cast<double>(f.size());
}

inline ScalarField project_mean_zero(const ScalarField& f) { return f + (-integrate(f)); }

/// Solves (sigma I - Laplacian) w = r exactly in spectral space.
inline ScalarField invert_shifted_laplacian(const ScalarField& r, double sigma) {
  if (!(sigma > 0.0)) throw GridError("shift sigma must be positive");
  const TorusGrid& g = r.grid();
  return Spectrum(r).apply_multiplier([&](std::size_t flat) {
    double k2 = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      const double k = kTwoPi * detail::wavenumber(g.index_along(flat, a), g.size(a));
      k2 += k * k;
    }
    return std::complex<double>(1.0 / (sigma + k2), 0.0);
  });
}

inline ScalarField laplacian(const ScalarField& f) {
  Spectrum s(f);
  ScalarField r(f.grid());
  for (int a = 0; a < f.grid().dim(); ++a) r += s.derivative(a, 2);
  return r;
}

}  // namespace torus_ma
