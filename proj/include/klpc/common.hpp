#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace klpc {

// Invalid or inconsistent inputs: bad hyper-parameters, dimension
// mismatches, malformed configs, unknown study names.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failures: indefinite covariance beyond tolerance, singular
// Sigma^2, degenerate KDE samples, KLD support violations.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Surrogate artifact does not match the config that requests it.
struct StaleArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// FNV-1a, used for config and artifact fingerprints.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a64(s.data(), s.size(), h);
}

}  // namespace klpc
