/*
Copyright 2026 The trilobyte authors
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
you may obtain a copy of the License at

                http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace trlb {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg)
        : std::runtime_error(msg)
    {
    }
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

// Null token id used by transfer-masked byte streams; one past the byte
// vocabulary, so byte models see 256 symbols and transfer models see 257.
constexpr uint32_t kMaskToken = 256;

inline void require(bool cond, const std::string& msg)
{
    if (!cond)
        fail(msg);
}

// ---------------------------------------------------------------------------
// Little-endian scalar I/O on byte buffers.

inline void put_le(std::vector<uint8_t>& out, uint64_t v, int nbytes)
{
    for (int i = 0; i < nbytes; i++)
        out.push_back(uint8_t(v >> (8 * i)));
}

inline uint64_t get_le(const uint8_t* p, int nbytes)
{
    uint64_t v = 0;
    for (int i = 0; i < nbytes; i++)
        v |= uint64_t(p[i]) << (8 * i);
    return v;
}

// ---------------------------------------------------------------------------
// FNV-1a hashing. The 64-bit flavor backs model state digests; the 128-bit
// flavor is the content hash stored in checkpoints and containers.

constexpr uint64_t kFnv64Offset = 0xcbf29ce484222325ULL;
constexpr uint64_t kFnv64Prime = 0x100000001b3ULL;

inline uint64_t fnv1a64(uint64_t h, const void* data, size_t n)
{
    const uint8_t* p = static_cast<const uint8_t*>(data);
    for (size_t i = 0; i < n; i++) {
        h ^= p[i];
        h *= kFnv64Prime;
    }
    return h;
}

inline uint64_t fnv1a64_u32(uint64_t h, uint32_t v)
{
    return fnv1a64(h, &v, sizeof v);
}

class Fnv128 {
public:
    void update(const void* data, size_t n)
    {
        const uint8_t* p = static_cast<const uint8_t*>(data);
        for (size_t i = 0; i < n; i++) {
            state_ ^= p[i];
            state_ *= kPrime;
        }
    }

    // Digest as 16 little-endian bytes.
    std::vector<uint8_t> digest() const
    {
        std::vector<uint8_t> out(16);
        unsigned __int128 s = state_;
        for (int i = 0; i < 16; i++)
            out[i] = uint8_t(s >> (8 * i));
        return out;
    }

private:
    static constexpr unsigned __int128 kPrime = ((unsigned __int128)0x1000000ULL << 64) | 0x13BULL;
    unsigned __int128 state_ = ((unsigned __int128)0x6c62272e07bb0142ULL << 64) | 0x62b821756295c58dULL;
};

inline std::vector<uint8_t> fnv128(const std::vector<uint8_t>& data)
{
    Fnv128 h;
    h.update(data.data(), data.size());
    return h.digest();
}

// ---------------------------------------------------------------------------
// Seeded random generator. mt19937_64 output is pinned by the standard, and
// all derived draws below avoid <random> distributions (whose algorithms are
// implementation-defined), so identical seeds give identical draws on every
// platform.

class Rng {
public:
    explicit Rng(uint64_t seed)
        : gen_(seed)
    {
    }

    uint64_t next() { return gen_(); }

    // Uniform double in [0, 1).
    double unit() { return double(next() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Multiply-high reduction.
    uint64_t below(uint64_t n)
    {
        return uint64_t(((unsigned __int128)next() * n) >> 64);
    }

    // Standard normal via Box-Muller; caches the second draw.
    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = double((next() >> 11) + 1) * 0x1.0p-53; // (0, 1]
        double u2 = unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Deterministic transcendentals. libm exp/tanh vary across implementations;
// the model forward pass uses these so that encoder and decoder produce
// bit-identical probability tables on any IEEE-754 platform.

inline double det_exp(double x)
{
    if (x < -708.0)
        return 0.0;
    if (x > 708.0)
        return std::numeric_limits<double>::infinity();
    // x = k*ln2 + f with |f| <= ln2/2, then e^f by Taylor series.
    constexpr double kInvLn2 = 1.4426950408889634073599246810019;
    constexpr double kLn2Hi = 0.69314718055994530941723212145818;
    double t = x * kInvLn2;
    int k = int(std::floor(t + 0.5));
    double f = x - double(k) * kLn2Hi;
    // degree-11 Taylor; worst-case relative error < 1e-15 on the range
    double s = 1.0 / 39916800.0;
    s = s * f + 1.0 / 3628800.0;
    s = s * f + 1.0 / 362880.0;
    s = s * f + 1.0 / 40320.0;
    s = s * f + 1.0 / 5040.0;
    s = s * f + 1.0 / 720.0;
    s = s * f + 1.0 / 120.0;
    s = s * f + 1.0 / 24.0;
    s = s * f + 1.0 / 6.0;
    s = s * f + 0.5;
    s = s * f + 1.0;
    s = s * f + 1.0;
    return std::ldexp(s, k);
}

inline double det_tanh(double x)
{
    double ax = x < 0.0 ? -x : x;
    double t = det_exp(-2.0 * ax);
    double y = (1.0 - t) / (1.0 + t);
    return x < 0.0 ? -y : y;
}

} // namespace trlb
