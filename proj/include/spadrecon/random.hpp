// Copyright 2026 The spadrecon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPADRECON_RANDOM_HPP
#define SPADRECON_RANDOM_HPP

#include <array>
#include <cstdint>

namespace spadrecon {

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// Counter-based random stream.
///
/// The key is the 64-bit seed. The counter's upper 64 bits hold the stream id and the
/// lower 64 bits count blocks, so every (seed, stream) pair is an independent sequence
/// and any stream can be regenerated without replaying the others. Samplers below use
/// only this bit stream, so outputs do not depend on the standard library vendor.
class CounterRng {
   public:
    CounterRng(std::uint64_t seed, std::uint64_t stream);

    std::uint32_t next_u32();
    std::uint64_t next_u64();
    /// Uniform on the open interval (0, 1) with 53-bit resolution.
    double uniform();
    double normal();
    double normal(double mean, double sigma) { return mean + sigma * normal(); }
    double exponential();
    std::uint64_t poisson(double lambda);

   private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int used_ = 4;
    bool has_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

/// Mixes a domain tag and an index into a stream id.
constexpr std::uint64_t stream_id(std::uint32_t domain, std::uint64_t index) {
    return (std::uint64_t(domain) << 48) ^ index;
}

}  // namespace spadrecon

#endif  // SPADRECON_RANDOM_HPP
