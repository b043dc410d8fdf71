#pragma once

#include "dlab/core.hpp"

#include <cstdint>
#include <random>

namespace dlab {

/// Reproducible random stream.
///
/// Engine: std::mt19937_64, seeded through std::seed_seq over the four
/// 32-bit words (seed lo, seed hi, stream lo, stream hi). Both algorithms are
/// fully specified by the C++ standard, so a (seed, stream) pair names the
/// same bit sequence on every conforming library. Normal variates come from
/// std::normal_distribution, whose algorithm is library-defined: outputs are
/// bit-reproducible for a fixed standard library build.
///
/// Independent chains/jobs use distinct stream ids under one seed, so results
/// do not depend on how work is split across threads.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream);

  static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
    return Rng(seed, stream_id);
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t bits() { return engine_(); }

  Vector normal_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

inline Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  engine_.seed(seq);
}

}  // namespace dlab
