/* Copyright 2026 The prfaas-pd Authors. All Rights Reserved.

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

#pragma once

#include <cstdint>

namespace prfaas::units {

inline constexpr double kBytesPerMiB = 1024.0 * 1024.0;
inline constexpr double kBitsPerGigabit = 1e9;

// Token counts in tables are 1024-multiples: "32K" is 32768 tokens.
inline constexpr int64_t kTokensPerK = 1024;

constexpr double mib_to_gigabits(double mib) {
  return mib * kBytesPerMiB * 8.0 / kBitsPerGigabit;
}

constexpr double gigabits_to_mib(double gigabits) {
  return gigabits * kBitsPerGigabit / 8.0 / kBytesPerMiB;
}

constexpr double mib_per_s_to_gbps(double mib_per_s) {
  return mib_to_gigabits(mib_per_s);
}

constexpr double gbps_to_mib_per_s(double gbps) {
  return gigabits_to_mib(gbps);
}

constexpr double mib_to_bits(double mib) { return mib * kBytesPerMiB * 8.0; }

}  // namespace prfaas::units
