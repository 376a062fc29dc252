#pragma once

#include <cstdint>
#include <random>

#include "finslerlab/geometry.hpp"

namespace finsler {

// Thin wrapper over mt19937_64. The uniform/normal transforms are written out
// by hand because the std distributions are not pinned across libstdc++
// versions, and report determinism is part of the contract.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double log_uniform(double a, double b) { return std::exp(uniform(std::log(a), std::log(b))); }

  // Marsaglia polar method, deterministic given the stream position.
  double normal() {
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return u * std::sqrt(-2.0 * std::log(s) / s);
  }

  std::size_t below(std::size_t n) { return static_cast<std::size_t>(eng_() % n); }

  cplx unit_complex() {
    double t = uniform(0.0, 2.0 * 3.14159265358979323846);
    return {std::cos(t), std::sin(t)};
  }

  C2 gaussian_c2() { return C2(normal(), normal(), normal(), normal()); }

  C2 unit_c2() {
    C2 v = gaussian_c2();
    double n = norm(v);
    while (n < 1e-12) {
      v = gaussian_c2();
      n = norm(v);
    }
    return v * (1.0 / n);
  }

  // Independent child stream; used so per-check / per-pair work stays
  // deterministic regardless of evaluation order.
  Rng split(std::uint64_t tag) {
    std::uint64_t s = eng_() ^ (tag * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
    return Rng(s);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace finsler
