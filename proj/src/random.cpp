#include "maskanim/random.hpp"

#include <sstream>
#include <stdexcept>

namespace maskanim {

double RandomStream::uniform(double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

int RandomStream::uniform_int(int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(engine_);
}

bool RandomStream::coin_flip() { return std::bernoulli_distribution(0.5)(engine_); }

int RandomStream::poisson(double mean) {
  if (mean <= 0.0) return 0;
  return std::poisson_distribution<int>(mean)(engine_);
}

std::string RandomStream::state() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

void RandomStream::restore(const std::string& state) {
  std::istringstream in(state);
  in >> engine_;
  if (!in) throw std::invalid_argument("RandomStream::restore: malformed state");
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view role) {
  // splitmix64 over the base mixed with an FNV-1a hash of the role name.
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : role) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  std::uint64_t z = base + h + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace maskanim
