#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace emo {

// Philox4x32-10 block function (Salmon et al. counter-based generator).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key);

std::uint64_t fnv1a64(std::string_view bytes);

/// Counter-based random stream keyed by (master seed, stream id).
///
/// The key is splitmix64(seed ^ fnv1a64(id)); output block n is
/// philox4x32_10({n_lo, n_hi, 0, 0}, key). Normals use Box-Muller with the
/// cosine branch only, so the complete state is (key, block, lane).
class RngStream {
 public:
  struct State {
    std::uint64_t key = 0;
    std::uint64_t block = 0;
    std::uint32_t lane = 4;
    friend bool operator==(const State&, const State&) = default;
  };

  RngStream() = default;
  RngStream(std::uint64_t master_seed, std::string_view id);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Unbiased integer in [0, n).
  std::size_t uniform_index(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }

  State state() const { return {key_, block_, lane_}; }
  void set_state(const State& s);

 private:
  void refill();

  std::uint64_t key_ = 0;
  std::uint64_t block_ = 0;
  std::uint32_t lane_ = 4;
  std::array<std::uint32_t, 4> buffer_{};
};

inline RngStream derive_stream(std::uint64_t master_seed, std::string_view id) { return {master_seed, id}; }

}  // namespace emo
