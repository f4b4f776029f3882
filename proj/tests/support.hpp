#pragma once

// Test-only helpers: random trigonometric polynomials with analytically
// computed derivatives. They never go through the spectral code, so they
// serve as an independent oracle for it.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "torus_ma/grid.hpp"

namespace torus_ma::testing {

struct TrigMode {
  std::vector<int> k;
  double a = 0.0;  // cos coefficient
  double b = 0.0;  // sin coefficient
};

class TrigPoly {
 public:
  TrigPoly() = default;
  explicit TrigPoly(int dim) : dim_(dim) {}

  /// Random zero-mean polynomial with wavenumbers |k_a| <= max_k on every
  /// axis and sum of |coefficients| equal to amplitude.
  static TrigPoly random(int dim, int max_k, int modes, double amplitude, std::mt19937_64& rng) {
    TrigPoly p(dim);
    std::uniform_int_distribution<int> kd(-max_k, max_k);
    std::uniform_real_distribution<double> cd(-1.0, 1.0);
    double total = 0.0;
    while (static_cast<int>(p.modes_.size()) < modes) {
      TrigMode m;
      m.k.resize(dim);
      bool zero = true;
      for (int a = 0; a < dim; ++a) {
        m.k[a] = kd(rng);
        zero = zero && m.k[a] == 0;
      }
      if (zero) continue;
      m.a = cd(rng);
      m.b = cd(rng);
      total += std::abs(m.a) + std::abs(m.b);
      p.modes_.push_back(m);
    }
    for (auto& m : p.modes_) {
      m.a *= amplitude / total;
      m.b *= amplitude / total;
    }
    return p;
  }

  void add(TrigMode m) { modes_.push_back(std::move(m)); }

  /// Derivative with orders[a] partials along axis a, evaluated at x.
  double eval(const std::vector<double>& x, const std::vector<int>& orders) const {
    int total_order = 0;
    for (int o : orders) total_order += o;
    double s = 0.0;
    for (const auto& m : modes_) {
      double phase = 0.0, factor = 1.0;
      for (int a = 0; a < dim_; ++a) {
        phase += kTwoPi * m.k[a] * x[a];
        factor *= std::pow(kTwoPi * m.k[a], orders[a]);
      }
      // d^r/dphase^r of a cos + b sin
      double c = std::cos(phase), sn = std::sin(phase);
      double v;
      switch (total_order % 4) {
        case 0: v = m.a * c + m.b * sn; break;
        case 1: v = -m.a * sn + m.b * c; break;
        case 2: v = -m.a * c - m.b * sn; break;
        default: v = m.a * sn - m.b * c; break;
      }
      s += factor * v;
    }
    return s;
  }

  ScalarField field(const TorusGrid& g, std::vector<int> orders = {}) const {
    if (orders.empty()) orders.assign(dim_, 0);
    ScalarField f(g);
    std::vector<double> x(dim_);
    for (std::size_t i = 0; i < g.total(); ++i) {
      for (int a = 0; a < dim_; ++a) x[a] = g.coordinate(i, a);
      f[i] = eval(x, orders);
    }
    return f;
  }

  ScalarField d1(const TorusGrid& g, int a) const {
    std::vector<int> o(dim_, 0);
    o[a] = 1;
    return field(g, o);
  }
  ScalarField d2(const TorusGrid& g, int a, int b) const {
    std::vector<int> o(dim_, 0);
    o[a] += 1;
    o[b] += 1;
    return field(g, o);
  }

  int dim() const { return dim_; }

 private:
  int dim_ = 0;
  std::vector<TrigMode> modes_;
};

/// Max over points of |a - b| / max(1, |b|).
inline double max_rel_error(const ScalarField& a, const ScalarField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  return m;
}

}  // namespace torus_ma::testing
