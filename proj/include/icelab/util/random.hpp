#pragma once

// Deterministic random streams. Every stream is keyed by the run seed plus a
// tuple of integers (purpose tag, replicate, patient, copy, ...), so results
// never depend on execution order or worker count.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace icelab::rng {

using Engine = std::mt19937_64;

enum class Purpose : std::uint64_t {
  Allocation = 0x11,
  Patient = 0x12,
  OraclePatient = 0x13,
  ModelDraw = 0x21,
  CellDraw = 0x22,
  Study = 0x31,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline Engine stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  return Engine(derive_seed(seed, keys));
}

inline Engine stream(std::uint64_t seed, Purpose p, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = derive_seed(seed, {static_cast<std::uint64_t>(p)});
  return Engine(derive_seed(h, keys));
}

inline double uniform(Engine& g) { return std::uniform_real_distribution<double>(0.0, 1.0)(g); }
inline double normal(Engine& g) { return std::normal_distribution<double>(0.0, 1.0)(g); }
inline double chi_squared(Engine& g, double df) { return std::chi_squared_distribution<double>(df)(g); }

}  // namespace icelab::rng
