#include "uwbcount/common.hpp"

#include <cmath>

namespace uwbcount {

const char* to_string(Stage s) {
  switch (s) {
    case Stage::Raw: return "raw";
    case Stage::Bandpass: return "bandpass";
    case Stage::Refined: return "refined";
    case Stage::Denoised: return "denoised";
  }
  return "unknown";
}

double sum_squares(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

double sum_squares(const Matrix& m) { return sum_squares(std::span<const double>(m.values())); }

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return mix_seed(mix_seed(parent) ^ (index * 0xd1b54a32d192ed03ULL + 1));
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(parent, a), b);
}

}  // namespace uwbcount
