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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "bitio.hpp"
#include "common.hpp"
#include "model.hpp"

namespace trlb {

constexpr int kMinPrecision = 10;
constexpr int kMaxPrecision = 30;

// Default probability precision: 16 bits is plenty for byte vocabularies;
// the 65,536-symbol sample-level vocabulary needs headroom above the
// one-count-per-symbol floor.
inline int default_precision(uint32_t vocab)
{
    return vocab <= 257 ? 16 : 20;
}

// Cumulative frequencies over a vocabulary: cumulative[0] = 0,
// cumulative[vocab] = 2^precision, strictly increasing (every symbol keeps a
// frequency of at least 1 so the decoder can resolve anything).
struct QuantizedCdf {
    std::vector<uint32_t> cumulative;
    int precision = 16;

    uint32_t vocab() const { return uint32_t(cumulative.size()) - 1; }
    uint32_t freq(uint32_t s) const { return cumulative[s + 1] - cumulative[s]; }
};

namespace detail {

// Scratch buffers reused across per-symbol quantization calls.
struct QuantizeScratch {
    std::vector<uint32_t> freq;
    std::vector<double> remainder;
    std::vector<uint32_t> order;
};

inline void quantize_into(std::span<const double> probs, int precision, QuantizedCdf& cdf,
                          QuantizeScratch& scratch)
{
    size_t n = probs.size();
    require(n >= 2, "distribution needs at least 2 symbols");
    require(precision >= kMinPrecision && precision <= kMaxPrecision,
            "precision must lie in [10, 30]");
    uint64_t total = uint64_t(1) << precision;
    require(total >= n, "precision too small for the vocabulary");

    double sum = 0.0;
    for (double p : probs) {
        require(p >= 0.0 && std::isfinite(p), "negative or non-finite probability");
        sum += p;
    }
    require(sum > 0.0, "all-zero probability vector");

    auto& freq = scratch.freq;
    auto& rem = scratch.remainder;
    freq.resize(n);
    rem.resize(n);

    // Largest-remainder apportionment of 2^P among the symbols.
    uint64_t assigned = 0;
    for (size_t i = 0; i < n; i++) {
        double ideal = probs[i] / sum * double(total);
        double fl = std::floor(ideal);
        freq[i] = uint32_t(fl);
        rem[i] = ideal - fl;
        assigned += freq[i];
    }
    require(assigned <= total, "internal: apportionment overflow");
    uint64_t deficit = total - assigned;
    if (deficit > 0) {
        auto& order = scratch.order;
        order.resize(n);
        std::iota(order.begin(), order.end(), 0);
        auto better = [&](uint32_t a, uint32_t b) {
            if (rem[a] != rem[b])
                return rem[a] > rem[b];
            return a < b;
        };
        if (deficit < n)
            std::nth_element(order.begin(), order.begin() + long(deficit), order.end(), better);
        for (uint64_t i = 0; i < deficit; i++)
            freq[order[i]]++;
    }

    // Floor every symbol at 1, paying for the lifts out of the largest
    // entries, spread in rounds so no single symbol absorbs the whole cost.
    uint64_t lifted = 0;
    for (size_t i = 0; i < n; i++)
        if (freq[i] == 0) {
            freq[i] = 1;
            lifted++;
        }
    if (lifted > 0) {
        auto& donors = scratch.order;
        donors.clear();
        for (uint32_t i = 0; i < n; i++)
            if (freq[i] > 1)
                donors.push_back(i);
        std::sort(donors.begin(), donors.end(), [&](uint32_t a, uint32_t b) {
            if (freq[a] != freq[b])
                return freq[a] > freq[b];
            return a < b;
        });
        while (lifted > 0) {
            uint64_t before = lifted;
            uint64_t share = std::max<uint64_t>(1, lifted / std::max<size_t>(donors.size(), 1));
            for (uint32_t idx : donors) {
                if (lifted == 0)
                    break;
                uint64_t take = std::min<uint64_t>({uint64_t(freq[idx]) - 1, lifted, share});
                freq[idx] -= uint32_t(take);
                lifted -= take;
            }
            require(lifted < before, "cannot apportion mass: precision too small");
        }
    }

    cdf.precision = precision;
    cdf.cumulative.resize(n + 1);
    cdf.cumulative[0] = 0;
    for (size_t i = 0; i < n; i++)
        cdf.cumulative[i + 1] = cdf.cumulative[i] + freq[i];
}

} // namespace detail

inline QuantizedCdf quantize_distribution(std::span<const double> probs, int precision)
{
    QuantizedCdf cdf;
    detail::QuantizeScratch scratch;
    detail::quantize_into(probs, precision, cdf, scratch);
    return cdf;
}

// ---------------------------------------------------------------------------
// Byte-wise range coder, 64-bit state. The idealized single-fraction coder is
// realized with integer arithmetic: the interval is [low, low+range) modulo
// 2^64, renormalization emits the top byte once it is pinned, and small
// straddling ranges are clipped carrylessly. Termination emits the 24 top
// bits of a 2^40-aligned point inside the final interval, so the tail adds
// at most 24 bits.

class RangeEncoder {
public:
    explicit RangeEncoder(BitSink& sink)
        : sink_(sink)
    {
    }

    void encode(uint32_t cum_low, uint32_t freq, int precision)
    {
        uint64_t r = range_ >> precision;
        low_ += r * cum_low;
        range_ = r * freq;
        while ((low_ ^ (low_ + range_)) < kTop || (range_ < kBot && ((range_ = (0 - low_) & (kBot - 1)), true))) {
            sink_.put_byte(uint8_t(low_ >> 56));
            low_ <<= 8;
            range_ <<= 8;
        }
    }

    void finish()
    {
        uint64_t v = (low_ + (kBot - 1)) & ~(kBot - 1);
        for (int i = 0; i < 3; i++) {
            sink_.put_byte(uint8_t(v >> 56));
            v <<= 8;
        }
    }

private:
    static constexpr uint64_t kTop = uint64_t(1) << 56;
    static constexpr uint64_t kBot = uint64_t(1) << 40;
    BitSink& sink_;
    uint64_t low_ = 0;
    uint64_t range_ = ~uint64_t(0);
};

class RangeDecoder {
public:
    explicit RangeDecoder(BitSource& src)
        : src_(src)
    {
        for (int i = 0; i < 8; i++)
            code_ = (code_ << 8) | src_.get_byte();
    }

    // Returns the scaled target in [0, 2^precision); the caller locates the
    // symbol whose cumulative bucket contains it.
    uint32_t decode_target(int precision)
    {
        r_ = range_ >> precision;
        uint64_t target = (code_ - low_) / r_;
        require(target < (uint64_t(1) << precision), "corrupt payload: decoder target out of range");
        return uint32_t(target);
    }

    void consume(uint32_t cum_low, uint32_t freq)
    {
        low_ += r_ * cum_low;
        range_ = r_ * freq;
        while ((low_ ^ (low_ + range_)) < kTop || (range_ < kBot && ((range_ = (0 - low_) & (kBot - 1)), true))) {
            code_ = (code_ << 8) | src_.get_byte();
            low_ <<= 8;
            range_ <<= 8;
        }
    }

private:
    static constexpr uint64_t kTop = uint64_t(1) << 56;
    static constexpr uint64_t kBot = uint64_t(1) << 40;
    BitSource& src_;
    uint64_t low_ = 0;
    uint64_t range_ = ~uint64_t(0);
    uint64_t code_ = 0;
    uint64_t r_ = 1;
};

// Decoder register preload plus termination tail: the most the decoder may
// read past the payload, all zero fill.
constexpr uint64_t kDecoderPadBits = 64;

// ---------------------------------------------------------------------------
// Model-driven sequence coding. Masked byte positions (transfer mode) cost
// zero bits: both sides know the schedule, so the symbol is injected into the
// model without touching the bitstream.

struct MaskSchedule {
    int bytes_per_sample = 1;
    int coded_bytes = 1; // leading positions of each sample that are coded

    bool is_masked(uint64_t i) const
    {
        return int(i % uint64_t(bytes_per_sample)) >= coded_bytes;
    }
};

inline std::vector<uint8_t> encode_tokens(std::span<const uint32_t> tokens, PredictiveModel& model,
                                          int precision, const MaskSchedule* mask = nullptr)
{
    uint32_t vocab = model.vocab_size();
    std::vector<double> probs(vocab);
    QuantizedCdf cdf;
    detail::QuantizeScratch scratch;

    BitSink sink;
    RangeEncoder enc(sink);
    for (uint64_t i = 0; i < tokens.size(); i++) {
        uint32_t tok = tokens[size_t(i)];
        require(tok < vocab, "token id " + std::to_string(tok) + " outside model vocabulary");
        if (mask != nullptr && mask->is_masked(i)) {
            require(tok == kMaskToken, "mask schedule expects a mask token at position " + std::to_string(i));
            model.update(tok);
            continue;
        }
        model.predict(probs);
        detail::quantize_into(probs, precision, cdf, scratch);
        enc.encode(cdf.cumulative[tok], cdf.freq(tok), precision);
        model.update(tok);
    }
    enc.finish();
    return sink.take_bytes();
}

inline std::vector<uint32_t> decode_tokens(std::span<const uint8_t> payload, uint64_t payload_bits,
                                           PredictiveModel& model, uint64_t n, int precision,
                                           const MaskSchedule* mask = nullptr,
                                           uint64_t* bits_consumed = nullptr)
{
    std::vector<uint32_t> tokens;
    tokens.reserve(size_t(n));
    if (bits_consumed != nullptr)
        *bits_consumed = 0;
    if (n == 0)
        return tokens;

    uint32_t vocab = model.vocab_size();
    std::vector<double> probs(vocab);
    QuantizedCdf cdf;
    detail::QuantizeScratch scratch;

    BitSource src(payload, payload_bits, kDecoderPadBits);
    RangeDecoder dec(src);
    for (uint64_t i = 0; i < n; i++) {
        if (mask != nullptr && mask->is_masked(i)) {
            tokens.push_back(kMaskToken);
            model.update(kMaskToken);
            continue;
        }
        model.predict(probs);
        detail::quantize_into(probs, precision, cdf, scratch);
        uint32_t target = dec.decode_target(precision);
        uint32_t sym = uint32_t(std::upper_bound(cdf.cumulative.begin() + 1, cdf.cumulative.end(), target)
                                - (cdf.cumulative.begin() + 1));
        dec.consume(cdf.cumulative[sym], cdf.freq(sym));
        tokens.push_back(sym);
        model.update(sym);
    }
    if (bits_consumed != nullptr)
        *bits_consumed = src.position();
    return tokens;
}

} // namespace trlb
