#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>

#include <Eigen/Core>

namespace fbopt::detail {

// Canonical float formatting: 17 significant digits round-trips any double,
// and a fixed format keeps serialized artifacts byte-for-byte reproducible.
inline std::string format_g17(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// FNV-1a over the canonical text of the components; stable across runs and
// platforms that agree on the double values themselves.
inline std::string point_hash(const Eigen::VectorXd& v) {
  std::uint64_t h = 1469598103934665603ULL;
  auto absorb = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    absorb(format_g17(v[i]));
    absorb(",");
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace fbopt::detail
