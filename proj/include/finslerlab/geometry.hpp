#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <string>

namespace finsler {

using cplx = std::complex<double>;

// Point or tangent vector in C^2. The real layout (re z1, im z1, re z2, im z2)
// is the one used by every external interface (CLI, C API, files).
struct C2 {
  cplx z1{0.0, 0.0};
  cplx z2{0.0, 0.0};

  C2() = default;
  C2(cplx a, cplx b) : z1(a), z2(b) {}
  C2(double x1, double y1, double x2, double y2) : z1(x1, y1), z2(x2, y2) {}

  static C2 from_array(const double v[4]) { return C2(v[0], v[1], v[2], v[3]); }
  void to_array(double v[4]) const {
    v[0] = z1.real();
    v[1] = z1.imag();
    v[2] = z2.real();
    v[3] = z2.imag();
  }
  std::array<double, 4> array() const { return {z1.real(), z1.imag(), z2.real(), z2.imag()}; }

  C2 operator+(const C2& o) const { return {z1 + o.z1, z2 + o.z2}; }
  C2 operator-(const C2& o) const { return {z1 - o.z1, z2 - o.z2}; }
  C2 operator*(double s) const { return {z1 * s, z2 * s}; }
  C2 operator*(cplx s) const { return {z1 * s, z2 * s}; }
  C2 operator-() const { return {-z1, -z2}; }
  C2& operator+=(const C2& o) {
    z1 += o.z1;
    z2 += o.z2;
    return *this;
  }
};

inline C2 operator*(double s, const C2& v) { return v * s; }

// Hermitian inner product, antilinear in the second slot.
inline cplx hdot(const C2& a, const C2& b) { return a.z1 * std::conj(b.z1) + a.z2 * std::conj(b.z2); }

inline double norm2(const C2& v) { return std::norm(v.z1) + std::norm(v.z2); }
inline double norm(const C2& v) { return std::sqrt(norm2(v)); }
inline double dist(const C2& a, const C2& b) { return norm(a - b); }

inline bool finite(const C2& v) {
  return std::isfinite(v.z1.real()) && std::isfinite(v.z1.imag()) && std::isfinite(v.z2.real()) &&
         std::isfinite(v.z2.imag());
}

// Deterministic text form used in reports; %.17g round-trips doubles.
inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::string to_string(const C2& p) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g,%.12g", p.z1.real(), p.z1.imag(), p.z2.real(),
                p.z2.imag());
  return buf;
}

}  // namespace finsler
