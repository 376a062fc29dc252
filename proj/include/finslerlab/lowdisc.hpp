#pragma once

#include <array>
#include <cmath>

namespace finsler {

// Generalized-golden-ratio Kronecker sequence in [0,1)^4. Deterministic and
// well spread; used for validity sampling and quasi-uniform boundary shots.
struct R4Seq {
  std::array<double, 4> alpha;
  std::array<double, 4> state;
  R4Seq() {
    double phi = 1.0;
    for (int it = 0; it < 40; ++it) phi = std::pow(1.0 + phi, 1.0 / 5.0);
    double a = 1.0;
    for (int i = 0; i < 4; ++i) {
      a /= phi;
      alpha[i] = a;
      state[i] = 0.5;
    }
  }
  std::array<double, 4> next() {
    for (int i = 0; i < 4; ++i) state[i] = std::fmod(state[i] + alpha[i], 1.0);
    return state;
  }
};

}  // namespace finsler
