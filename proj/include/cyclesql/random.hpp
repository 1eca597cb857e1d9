#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace cyclesql {

/// Derives an independent stream seed from a base seed and a stream id
/// (worker id, attempt index, instance index, ...). splitmix64 finalizer.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// FNV-1a, used to key deterministic decisions on request contents.
std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Seeded random stream. Draw helpers are implemented on top of the raw
/// 64-bit engine output so sample streams are identical across standard
/// library implementations.
class Rng {
   public:
   explicit Rng(std::uint64_t seed) : engine_(seed) {}

   std::uint64_t next() { return engine_(); }
   /// Uniform in [0, n). n must be positive.
   std::size_t index(std::size_t n);
   /// Uniform in [lo, hi].
   std::int64_t integer(std::int64_t lo, std::int64_t hi);
   /// Uniform in [0, 1).
   double unit();
   bool bernoulli(double p) { return unit() < p; }
   /// Index drawn proportionally to weights; weights must have a positive sum.
   std::size_t weighted(std::span<const double> weights);

   template <typename T>
   void shuffle(std::vector<T>& items) {
      for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[index(i)]);
   }

   private:
   std::mt19937_64 engine_;
};

} // namespace cyclesql
