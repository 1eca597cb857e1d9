#include "cyclesql/random.hpp"

#include <numeric>
#include <stdexcept>

namespace cyclesql {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
   std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
   z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
   z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
   return z ^ (z >> 31);
}

std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t basis) {
   std::uint64_t h = basis;
   for (unsigned char c : bytes) {
      h ^= c;
      h *= 0x100000001b3ULL;
   }
   return h;
}

std::size_t Rng::index(std::size_t n) {
   if (n == 0) throw std::invalid_argument("Rng::index on empty range");
   // Rejection sampling removes modulo bias.
   const std::uint64_t bound = static_cast<std::uint64_t>(n);
   const std::uint64_t threshold = (0 - bound) % bound;
   std::uint64_t x = engine_();
   while (x < threshold) x = engine_();
   return static_cast<std::size_t>(x % bound);
}

std::int64_t Rng::integer(std::int64_t lo, std::int64_t hi) {
   if (hi < lo) throw std::invalid_argument("Rng::integer with empty range");
   const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
   return lo + static_cast<std::int64_t>(index(static_cast<std::size_t>(span)));
}

double Rng::unit() {
   return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::weighted(std::span<const double> weights) {
   const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
   if (!(total > 0.0)) throw std::invalid_argument("Rng::weighted with zero total weight");
   const double target = unit() * total;
   double running = 0.0;
   for (std::size_t i = 0; i < weights.size(); ++i) {
      running += weights[i];
      if (target < running) return i;
   }
   // Floating point slack: return the last positive weight.
   for (std::size_t i = weights.size(); i > 0; --i)
      if (weights[i - 1] > 0.0) return i - 1;
   return 0;
}

} // namespace cyclesql
