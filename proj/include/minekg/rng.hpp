#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace minekg {

std::uint64_t fnv1a64(std::string_view data) noexcept;

/// Seed for one keyed draw, e.g. (run seed, prompt_id).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) noexcept;

/// mt19937_64 with platform-independent index sampling and shuffling.
/// std::uniform_int_distribution and std::shuffle are implementation-defined,
/// which would break cross-platform replay.
class DeterministicRng {
 public:
  explicit DeterministicRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [0, n). n must be > 0.
  std::size_t index(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = index(i);
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

  /// A uniformly random permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace minekg
