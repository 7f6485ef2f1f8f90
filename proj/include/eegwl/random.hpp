#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <string_view>
#include <algorithm>

namespace eegwl {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for a unit of work, so that parallel units draw independent
/// streams regardless of scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(master);
  for (auto t : tags) h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
  return h;
}

inline std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Von Mises draw centered at mu with concentration kappa (Best & Fisher).
/// Returns a value in (-pi, pi].
inline double sample_von_mises(Rng& rng, double mu, double kappa) {
  constexpr double pi = std::numbers::pi;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double theta;
  if (kappa < 1e-8) {
    theta = -pi + 2.0 * pi * unif(rng);
  } else {
    const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
    const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
    const double r = (1.0 + rho * rho) / (2.0 * rho);
    double f;
    for (;;) {
      const double u1 = unif(rng);
      const double u2 = unif(rng);
      const double z = std::cos(pi * u1);
      f = (1.0 + r * z) / (r + z);
      const double c = kappa * (r - f);
      if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) break;
    }
    const double u3 = unif(rng);
    theta = (u3 > 0.5 ? 1.0 : -1.0) * std::acos(std::clamp(f, -1.0, 1.0));
  }
  double x = std::remainder(theta + mu, 2.0 * pi);
  if (x <= -pi) x += 2.0 * pi;
  return x;
}

}  // namespace eegwl
