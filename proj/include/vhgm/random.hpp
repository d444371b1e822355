/* Copyright 2026 The VHGM Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef VHGM_RANDOM_HPP_
#define VHGM_RANDOM_HPP_

#include <cstdint>

namespace vhgm {

// SplitMix64 finalizer.
inline uint64_t Mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent seed for a named sub-stream.
inline uint64_t DeriveSeed(uint64_t seed, uint64_t stream) {
  return Mix64(Mix64(seed) ^ Mix64(stream + 0x632be59bd9b4e019ULL));
}

// Counter-based uniform in [0, 1) for cell (a, b) of stream `seed`.
inline double HashUniform(uint64_t seed, uint64_t a, uint64_t b) {
  const uint64_t h = Mix64(DeriveSeed(seed, a) ^ Mix64(b));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace vhgm

#endif  // VHGM_RANDOM_HPP_
