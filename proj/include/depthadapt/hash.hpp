// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>

namespace depthadapt {

inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;

/// 64-bit FNV-1a, chainable through `h`.
inline std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t h = kFnvOffset) {
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = kFnvOffset) {
  return fnv1a64(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(s.data()), s.size()), h);
}

/// Hash of the raw bytes of a float buffer.
template <typename T>
std::uint64_t hash_values(std::span<const T> values, std::uint64_t h = kFnvOffset) {
  return fnv1a64(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(values.data()),
                                                values.size_bytes()),
                 h);
}

}  // namespace depthadapt
