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
#include <bit>
#include <cmath>
#include <span>
#include <vector>

#include "bitio.hpp"
#include "common.hpp"
#include "pcm.hpp"

namespace trlb {

enum class Window : uint8_t {
    Welch = 0,
    Rectangular = 1,
};

struct LpcConfig {
    int block_size = 4096;
    int level = 5;            // 0..8; wider order and partition searches as it grows
    int max_order = 0;        // 0 = derive from level
    int coeff_precision = 12; // [4, 15]
    Window window = Window::Welch;

    static constexpr int kLevelMaxOrder[9] = {2, 3, 4, 4, 6, 8, 8, 12, 32};
    static constexpr int kLevelMaxPartition[9] = {2, 2, 3, 4, 4, 5, 6, 6, 6};

    void validate() const
    {
        require(block_size >= 16 && block_size <= 65535, "block size must lie in [16, 65535]");
        require(level >= 0 && level <= 8, "level must lie in [0, 8]");
        require(max_order >= 0 && max_order <= 32, "max order must lie in [0, 32]");
        require(coeff_precision >= 4 && coeff_precision <= 15, "coefficient precision must lie in [4, 15]");
    }

    int effective_max_order() const { return max_order > 0 ? max_order : kLevelMaxOrder[level]; }
    int max_partition_order() const { return kLevelMaxPartition[level]; }
    bool exhaustive_order_search() const { return level >= 4; }
};

// ---------------------------------------------------------------------------
// Analysis front end.

inline std::vector<double> autocorrelate(std::span<const int32_t> block, int max_order,
                                         Window window = Window::Rectangular)
{
    require(!block.empty(), "autocorrelation of an empty block");
    size_t n = block.size();
    std::vector<double> x(n);
    if (window == Window::Rectangular || n == 1) {
        for (size_t i = 0; i < n; i++)
            x[i] = double(block[i]);
    } else {
        double half = double(n - 1) / 2.0;
        for (size_t i = 0; i < n; i++) {
            double t = (double(i) - half) / half;
            x[i] = double(block[i]) * (1.0 - t * t);
        }
    }
    std::vector<double> r(size_t(max_order) + 1, 0.0);
    for (int lag = 0; lag <= max_order; lag++) {
        double acc = 0.0;
        for (size_t i = size_t(lag); i < n; i++)
            acc += x[i] * x[i - size_t(lag)];
        r[size_t(lag)] = acc;
    }
    return r;
}

// Levinson-Durbin recursion over the Toeplitz normal equations. Returns the
// predictor coefficients (x_hat_t = sum a_j x_{t-j}) and the prediction error
// for every order up to max_order; the error sequence is non-increasing.
struct LevinsonSweep {
    std::vector<std::vector<double>> coeffs; // coeffs[m] has m entries, m = 0..top
    std::vector<double> errors;              // errors[m]; errors[0] = R(0)
    bool degenerate = false;                 // R(0) == 0 or numerically singular
    int top_order() const { return int(errors.size()) - 1; }
};

inline LevinsonSweep levinson_sweep(std::span<const double> autocorr, int max_order)
{
    require(int(autocorr.size()) >= max_order + 1, "autocorrelation too short for the requested order");
    LevinsonSweep sweep;
    sweep.coeffs.push_back({});
    double r0 = autocorr[0];
    if (!(r0 > 0.0)) {
        sweep.errors.push_back(r0);
        sweep.degenerate = true;
        return sweep;
    }
    sweep.errors.push_back(r0);
    std::vector<double> a;
    double err = r0;
    for (int m = 1; m <= max_order; m++) {
        double acc = autocorr[size_t(m)];
        for (int j = 1; j < m; j++)
            acc -= a[size_t(j - 1)] * autocorr[size_t(m - j)];
        double k = acc / err;
        if (!std::isfinite(k) || std::fabs(k) >= 1.0)
            break; // numerically singular beyond this order
        std::vector<double> next(size_t(m), 0.0);
        next[size_t(m - 1)] = k;
        for (int j = 1; j < m; j++)
            next[size_t(j - 1)] = a[size_t(j - 1)] - k * a[size_t(m - 1 - j)];
        a = std::move(next);
        err *= (1.0 - k * k);
        if (!(err > 0.0) || !std::isfinite(err)) {
            sweep.coeffs.push_back(a);
            sweep.errors.push_back(std::max(err, 0.0));
            break;
        }
        sweep.coeffs.push_back(a);
        sweep.errors.push_back(err);
    }
    return sweep;
}

struct LevinsonResult {
    std::vector<double> coeffs;
    double error = 0.0;
    bool degenerate = false;
};

inline LevinsonResult levinson_durbin(std::span<const double> autocorr, int order)
{
    LevinsonSweep sweep = levinson_sweep(autocorr, order);
    LevinsonResult res;
    res.degenerate = sweep.degenerate;
    if (sweep.degenerate) {
        res.error = autocorr[0];
        return res;
    }
    int m = std::min(order, sweep.top_order());
    res.coeffs = sweep.coeffs[size_t(m)];
    res.error = sweep.errors[size_t(m)];
    return res;
}

// ---------------------------------------------------------------------------
// Coefficient quantization. The decoder predicts with integers only, so the
// real coefficients are scaled by 2^shift and rounded with error feedback.
// Magnitudes up to 2^(precision-1) inclusive are representable; serialized
// fields are (precision+1)-bit two's complement.

struct QuantizedCoeffs {
    std::vector<int32_t> q;
    int shift = 0;
};

inline QuantizedCoeffs quantize_coeffs(std::span<const double> coeffs, int precision)
{
    require(precision >= 4 && precision <= 15, "coefficient precision must lie in [4, 15]");
    QuantizedCoeffs out;
    out.q.assign(coeffs.size(), 0);
    double cmax = 0.0;
    for (double c : coeffs)
        if (std::isfinite(c))
            cmax = std::max(cmax, std::fabs(c));
    if (cmax == 0.0)
        return out; // degenerate: zero vector, shift 0

    int32_t limit = int32_t(1) << (precision - 1);
    int shift = int(std::floor(std::log2(double(limit) / cmax)));
    shift = std::clamp(shift, 0, 31);
    while (shift > 0 && std::floor(cmax * std::ldexp(1.0, shift) + 0.5) > double(limit))
        shift--;

    double err = 0.0;
    for (size_t i = 0; i < coeffs.size(); i++) {
        double ideal = coeffs[i] * std::ldexp(1.0, shift) + err;
        double rounded = std::floor(ideal + 0.5);
        rounded = std::clamp(rounded, -double(limit), double(limit));
        out.q[i] = int32_t(rounded);
        err = ideal - rounded;
    }
    out.shift = shift;
    return out;
}

// Shared integer predictor: history points one past x_{t-1}, walking back.
inline int64_t lpc_predict(const int32_t* history, std::span<const int32_t> coeffs, int shift)
{
    int64_t acc = 0;
    for (size_t j = 0; j < coeffs.size(); j++)
        acc += int64_t(coeffs[j]) * int64_t(history[-1 - long(j)]);
    return acc >> shift;
}

inline std::vector<int64_t> compute_residuals(std::span<const int32_t> block,
                                              std::span<const int32_t> coeffs, int shift)
{
    size_t m = coeffs.size();
    require(block.size() > m, "block must be longer than the predictor order");
    std::vector<int64_t> res;
    res.reserve(block.size() - m);
    for (size_t t = m; t < block.size(); t++)
        res.push_back(int64_t(block[t]) - lpc_predict(block.data() + t, coeffs, shift));
    return res;
}

inline std::vector<int32_t> reconstruct_block(std::span<const int32_t> warmup,
                                              std::span<const int64_t> residuals,
                                              std::span<const int32_t> coeffs, int shift)
{
    std::vector<int32_t> block(warmup.begin(), warmup.end());
    block.reserve(warmup.size() + residuals.size());
    for (int64_t r : residuals) {
        int64_t pred = lpc_predict(block.data() + block.size(), coeffs, shift);
        block.push_back(int32_t(r + pred));
    }
    return block;
}

// ---------------------------------------------------------------------------
// Rice coding of zigzag-folded residuals.

inline uint64_t zigzag(int64_t r)
{
    return r >= 0 ? uint64_t(r) << 1 : (uint64_t(-(r + 1)) << 1) + 1;
}

inline int64_t unzigzag(uint64_t v)
{
    return (v & 1) ? -int64_t(v >> 1) - 1 : int64_t(v >> 1);
}

constexpr int kMaxRiceK = 30;
constexpr uint64_t kRiceEscapeQuotient = 512;

inline uint64_t rice_cost(std::span<const uint64_t> values, int k)
{
    uint64_t bits = 0;
    for (uint64_t v : values)
        bits += (v >> k) + 1 + uint64_t(k);
    return bits;
}

inline int select_rice_k(std::span<const uint64_t> values)
{
    require(!values.empty(), "cannot pick a Rice parameter for no values");
    int best_k = 0;
    uint64_t best = rice_cost(values, 0);
    for (int k = 1; k <= kMaxRiceK; k++) {
        uint64_t cost = rice_cost(values, k);
        if (cost < best) {
            best = cost;
            best_k = k;
        }
    }
    return best_k;
}

inline void rice_encode(std::span<const uint64_t> values, int k, BitSink& sink)
{
    require(k >= 0 && k <= kMaxRiceK, "Rice parameter out of range");
    for (uint64_t v : values) {
        sink.put_unary(v >> k);
        if (k > 0)
            sink.put_bits(v & ((uint64_t(1) << k) - 1), k);
    }
}

inline std::vector<uint64_t> rice_decode(BitSource& src, size_t count, int k)
{
    require(k >= 0 && k <= kMaxRiceK, "Rice parameter out of range");
    std::vector<uint64_t> values;
    values.reserve(count);
    for (size_t i = 0; i < count; i++) {
        uint64_t q = src.get_unary();
        uint64_t v = (q << k) | src.get_bits(k);
        values.push_back(v);
    }
    return values;
}

// ---------------------------------------------------------------------------
// Partitioned residual coding. A block's residuals are split into 2^p equal
// partitions, each with its own Rice parameter; a partition whose quotients
// would blow up escapes to fixed-width binary behind a 1-bit flag.

namespace detail {

struct PartitionPlan {
    int k = 0;
    bool verbatim = false;
    int width = 0;
    uint64_t cost = 0; // payload bits excluding the plan fields
};

inline PartitionPlan plan_partition(std::span<const uint64_t> values)
{
    PartitionPlan plan;
    plan.k = select_rice_k(values);
    uint64_t maxv = 0;
    for (uint64_t v : values)
        maxv = std::max(maxv, v);
    if ((maxv >> plan.k) > kRiceEscapeQuotient) {
        plan.verbatim = true;
        plan.width = std::max(1, int(std::bit_width(maxv)));
        plan.cost = uint64_t(plan.width) * values.size();
    } else {
        plan.cost = rice_cost(values, plan.k);
    }
    return plan;
}

// flag(1) + parameter field; rice: 5-bit k, verbatim: 6-bit width
inline uint64_t partition_header_bits(const PartitionPlan& plan)
{
    return plan.verbatim ? 7 : 6;
}

} // namespace detail

struct PartitionedCost {
    int partition_order = 0;
    uint64_t bits = 0;
};

inline PartitionedCost best_partitioning(std::span<const uint64_t> values, size_t block_len,
                                         size_t predictor_order, int max_partition_order)
{
    PartitionedCost best;
    best.bits = ~uint64_t(0);
    for (int p = 0; p <= max_partition_order; p++) {
        size_t parts = size_t(1) << p;
        if (block_len % parts != 0)
            continue;
        size_t part_len = block_len / parts;
        if (part_len <= predictor_order)
            continue;
        uint64_t bits = 3; // partition order field
        for (size_t i = 0; i < parts; i++) {
            size_t begin = i == 0 ? 0 : i * part_len - predictor_order;
            size_t end = (i + 1) * part_len - predictor_order;
            auto plan = detail::plan_partition(values.subspan(begin, end - begin));
            bits += detail::partition_header_bits(plan) + plan.cost;
        }
        if (bits < best.bits) {
            best.bits = bits;
            best.partition_order = p;
        }
    }
    require(best.bits != ~uint64_t(0), "no valid partitioning");
    return best;
}

inline void encode_partitions(std::span<const uint64_t> values, size_t block_len,
                              size_t predictor_order, int partition_order, BitSink& sink)
{
    sink.put_bits(uint64_t(partition_order), 3);
    size_t parts = size_t(1) << partition_order;
    size_t part_len = block_len / parts;
    for (size_t i = 0; i < parts; i++) {
        size_t begin = i == 0 ? 0 : i * part_len - predictor_order;
        size_t end = (i + 1) * part_len - predictor_order;
        auto slice = values.subspan(begin, end - begin);
        auto plan = detail::plan_partition(slice);
        sink.put_bit(plan.verbatim ? 1 : 0);
        if (plan.verbatim) {
            sink.put_bits(uint64_t(plan.width), 6);
            for (uint64_t v : slice)
                sink.put_bits(v, plan.width);
        } else {
            sink.put_bits(uint64_t(plan.k), 5);
            rice_encode(slice, plan.k, sink);
        }
    }
}

inline std::vector<uint64_t> decode_partitions(BitSource& src, size_t block_len, size_t predictor_order)
{
    int partition_order = int(src.get_bits(3));
    size_t parts = size_t(1) << partition_order;
    require(block_len % parts == 0, "corrupt frame: partition count does not divide the block");
    size_t part_len = block_len / parts;
    require(part_len > predictor_order, "corrupt frame: partition shorter than the predictor order");
    std::vector<uint64_t> values;
    values.reserve(block_len - predictor_order);
    for (size_t i = 0; i < parts; i++) {
        size_t count = part_len - (i == 0 ? predictor_order : 0);
        if (src.get_bit()) {
            int width = int(src.get_bits(6));
            require(width >= 1 && width <= 63, "corrupt frame: bad verbatim width");
            for (size_t j = 0; j < count; j++)
                values.push_back(src.get_bits(width));
        } else {
            int k = int(src.get_bits(5));
            require(k <= kMaxRiceK, "corrupt frame: bad Rice parameter");
            auto part = rice_decode(src, count, k);
            values.insert(values.end(), part.begin(), part.end());
        }
    }
    return values;
}

// ---------------------------------------------------------------------------
// Frame coding. Every block goes through the LPC path: there are no verbatim,
// constant or fixed frame types, and silent blocks use an order-1 all-zero
// predictor so their samples ride through the residual coder unchanged.

namespace detail {

struct FrameChoice {
    std::vector<int32_t> coeffs;
    int shift = 0;
    int precision = 12;
    std::vector<uint64_t> zz; // zigzag residuals
};

inline uint64_t frame_fixed_bits(size_t order, size_t warmup, int precision, int bit_depth)
{
    return 6 + 5 + 4 + uint64_t(order) * uint64_t(precision + 1) + uint64_t(warmup) * uint64_t(bit_depth);
}

inline FrameChoice degenerate_choice(std::span<const int32_t> block, const LpcConfig& cfg)
{
    FrameChoice ch;
    ch.coeffs = {0};
    ch.shift = 0;
    ch.precision = cfg.coeff_precision;
    if (block.size() > 1) {
        auto res = compute_residuals(block, ch.coeffs, ch.shift);
        ch.zz.reserve(res.size());
        for (int64_t r : res)
            ch.zz.push_back(zigzag(r));
    }
    return ch;
}

inline FrameChoice choose_frame(std::span<const int32_t> block, int bit_depth, const LpcConfig& cfg)
{
    size_t n = block.size();
    int max_order = std::min<int>(cfg.effective_max_order(), int(n) - 1);
    if (max_order < 1)
        return degenerate_choice(block, cfg);

    auto autocorr = autocorrelate(block, max_order, cfg.window);
    auto sweep = levinson_sweep(autocorr, max_order);
    if (sweep.degenerate || sweep.top_order() < 1)
        return degenerate_choice(block, cfg);

    std::vector<int> candidates;
    if (cfg.exhaustive_order_search()) {
        for (int m = 1; m <= sweep.top_order(); m++)
            candidates.push_back(m);
    } else {
        // cheap pick: error-based code-length estimate per order
        double nwin = double(n);
        double best_est = 0.0;
        int best_m = 1;
        for (int m = 1; m <= sweep.top_order(); m++) {
            double var = std::max(sweep.errors[size_t(m)] / nwin, 0.25);
            double est = double(n - size_t(m)) * (0.5 * std::log2(var) + 2.0)
                         + double(frame_fixed_bits(size_t(m), size_t(m), cfg.coeff_precision, bit_depth));
            if (m == 1 || est < best_est) {
                best_est = est;
                best_m = m;
            }
        }
        candidates.push_back(best_m);
    }

    FrameChoice best;
    uint64_t best_bits = ~uint64_t(0);
    for (int m : candidates) {
        QuantizedCoeffs qc = quantize_coeffs(sweep.coeffs[size_t(m)], cfg.coeff_precision);
        auto res = compute_residuals(block, qc.q, qc.shift);
        std::vector<uint64_t> zz;
        zz.reserve(res.size());
        for (int64_t r : res)
            zz.push_back(zigzag(r));
        uint64_t bits = frame_fixed_bits(size_t(m), size_t(m), cfg.coeff_precision, bit_depth)
                        + best_partitioning(zz, n, size_t(m), cfg.max_partition_order()).bits;
        if (bits < best_bits) {
            best_bits = bits;
            best.coeffs = std::move(qc.q);
            best.shift = qc.shift;
            best.precision = cfg.coeff_precision;
            best.zz = std::move(zz);
        }
    }
    if (best.coeffs.empty())
        return degenerate_choice(block, cfg);
    return best;
}

} // namespace detail

inline void encode_lpc_frame(std::span<const int32_t> block, int bit_depth, const LpcConfig& cfg,
                             BitSink& sink)
{
    detail::FrameChoice ch = detail::choose_frame(block, bit_depth, cfg);
    size_t m = ch.coeffs.size();
    size_t warmup = std::min(m, block.size());

    sink.put_bits(uint64_t(m), 6);
    sink.put_bits(uint64_t(ch.shift), 5);
    sink.put_bits(uint64_t(ch.precision), 4);
    for (int32_t c : ch.coeffs)
        sink.put_bits(uint64_t(uint32_t(c)) & ((uint64_t(1) << (ch.precision + 1)) - 1), ch.precision + 1);
    for (size_t i = 0; i < warmup; i++)
        sink.put_bits(uint64_t(uint32_t(block[i])) & ((uint64_t(1) << bit_depth) - 1), bit_depth);
    if (block.size() > m) {
        int p = best_partitioning(ch.zz, block.size(), m, cfg.max_partition_order()).partition_order;
        encode_partitions(ch.zz, block.size(), m, p, sink);
    }
}

inline std::vector<int32_t> decode_lpc_frame(BitSource& src, size_t block_len, int bit_depth)
{
    size_t m = size_t(src.get_bits(6));
    require(m >= 1 && m <= 32, "corrupt frame: predictor order out of range");
    int shift = int(src.get_bits(5));
    int precision = int(src.get_bits(4));
    require(precision >= 4 && precision <= 15, "corrupt frame: bad coefficient precision");

    std::vector<int32_t> coeffs(m);
    for (size_t i = 0; i < m; i++) {
        uint64_t raw = src.get_bits(precision + 1);
        int64_t v = int64_t(raw);
        if (raw & (uint64_t(1) << precision))
            v -= int64_t(1) << (precision + 1); // sign-extend
        coeffs[i] = int32_t(v);
    }

    size_t warmup = std::min(m, block_len);
    std::vector<int32_t> warm(warmup);
    for (size_t i = 0; i < warmup; i++) {
        uint64_t raw = src.get_bits(bit_depth);
        int64_t v = int64_t(raw);
        if (raw & (uint64_t(1) << (bit_depth - 1)))
            v -= int64_t(1) << bit_depth;
        warm[i] = int32_t(v);
    }

    if (block_len <= m)
        return warm;

    auto zz = decode_partitions(src, block_len, m);
    std::vector<int64_t> res;
    res.reserve(zz.size());
    for (uint64_t v : zz)
        res.push_back(unzigzag(v));
    return reconstruct_block(warm, res, coeffs, shift);
}

// ---------------------------------------------------------------------------
// Whole-clip payload: a 16-bit block size, then each channel's frames in
// sequence. The surrounding container records depth, rate and frame count.

inline std::vector<uint8_t> lpc_encode_payload(const PcmClip& clip, const LpcConfig& cfg,
                                               uint64_t& bit_length)
{
    clip.validate();
    cfg.validate();
    BitSink sink;
    sink.put_bits(uint64_t(cfg.block_size), 16);
    for (const auto& ch : clip.channels) {
        for (size_t off = 0; off < ch.size(); off += size_t(cfg.block_size)) {
            size_t len = std::min(ch.size() - off, size_t(cfg.block_size));
            encode_lpc_frame(std::span<const int32_t>(ch.data() + off, len), clip.bit_depth, cfg, sink);
        }
    }
    bit_length = sink.bit_length();
    return sink.take_bytes();
}

inline PcmClip lpc_decode_payload(std::span<const uint8_t> payload, uint64_t payload_bits,
                                  int bit_depth, size_t channels, uint64_t frames, uint32_t sample_rate,
                                  uint64_t* bits_consumed = nullptr)
{
    BitSource src(payload, payload_bits, 0);
    size_t block_size = size_t(src.get_bits(16));
    require(block_size >= 16, "corrupt payload: bad block size");

    PcmClip clip;
    clip.bit_depth = bit_depth;
    clip.sample_rate = sample_rate;
    clip.channels.assign(channels, {});
    for (size_t c = 0; c < channels; c++) {
        clip.channels[c].reserve(size_t(frames));
        uint64_t remaining = frames;
        while (remaining > 0) {
            size_t len = size_t(std::min<uint64_t>(remaining, block_size));
            auto block = decode_lpc_frame(src, len, bit_depth);
            clip.channels[c].insert(clip.channels[c].end(), block.begin(), block.end());
            remaining -= len;
        }
    }
    if (bits_consumed != nullptr)
        *bits_consumed = src.position();
    return clip;
}

} // namespace trlb
