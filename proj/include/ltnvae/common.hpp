#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ltnvae {

// Error taxonomy. Every failure mode in the library maps onto one of these
// so callers (CLI, bindings) can translate them into exit codes uniformly.

// Operand shapes incompatible with an operation.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Value outside the mathematical domain of an operation (empty aggregate,
// index out of range, k > #points, ...).
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite value produced or consumed where finiteness is required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller violated an API contract (non-scalar loss, missing partition pair).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Invalid or inconsistent configuration / manifest content.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem-level failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// FNV-1a 64-bit, used for stable content digests of manifests and configs.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(s.data(), s.size());
}

std::string to_hex(std::uint64_t v);

}  // namespace ltnvae
