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
#include <map>
#include <span>
#include <sstream>
#include <vector>

#include "common.hpp"
#include "lpc.hpp"
#include "pcm.hpp"

namespace trlb {

// Diagnostics of how reconstruction residuals are distributed, and how well
// Rice coding's geometric assumption matches them. Channels are pooled.
struct ResidualStats {
    double mean_abs = 0.0;
    std::vector<uint64_t> histogram; // bin 0 = {0}, bin j = |r| in [2^(j-1), 2^j)
    double geometric_p = 1.0;        // ML fit on zigzag-folded residuals
    double fit_divergence = 0.0;     // KL(empirical || Geom(p)), bits
    uint64_t n = 0;
};

// Reference mean-absolute-residual magnitudes observed for FLAC and several
// neural codecs; report annotation only, never test oracles.
struct ReferenceResidualMagnitude {
    const char* codec;
    double mean_abs;
};
inline constexpr ReferenceResidualMagnitude kReferenceResidualMagnitudes[] = {
    {"FLAC", 156.34},
    {"DAC", 1603.54},
    {"EnCodec", 18376.66},
    {"Custom DAC", 1245.76},
};

// Elementwise original minus reconstruction, channels concatenated.
inline std::vector<int64_t> residual_diff(const PcmClip& original, const PcmClip& reconstruction)
{
    require(original.bit_depth == reconstruction.bit_depth,
            "bit depth mismatch: " + std::to_string(original.bit_depth) + " vs " + std::to_string(reconstruction.bit_depth));
    require(original.sample_rate == reconstruction.sample_rate, "sample rate mismatch");
    require(original.channel_count() == reconstruction.channel_count(), "channel count mismatch");
    require(original.frames() == reconstruction.frames(), "frame count mismatch");
    std::vector<int64_t> res;
    res.reserve(original.frames() * original.channel_count());
    for (size_t c = 0; c < original.channel_count(); c++)
        for (size_t i = 0; i < original.frames(); i++)
            res.push_back(int64_t(original.channels[c][i]) - int64_t(reconstruction.channels[c][i]));
    return res;
}

namespace detail {

// (value, count) pairs of the zigzag-folded residuals, ascending.
inline std::vector<std::pair<uint64_t, uint64_t>> zigzag_counts(std::span<const int64_t> residuals)
{
    std::vector<uint64_t> zz;
    zz.reserve(residuals.size());
    for (int64_t r : residuals)
        zz.push_back(zigzag(r));
    std::sort(zz.begin(), zz.end());
    std::vector<std::pair<uint64_t, uint64_t>> counts;
    for (size_t i = 0; i < zz.size();) {
        size_t j = i;
        while (j < zz.size() && zz[j] == zz[i])
            j++;
        counts.push_back({zz[i], uint64_t(j - i)});
        i = j;
    }
    return counts;
}

} // namespace detail

inline ResidualStats residual_stats(std::span<const int64_t> residuals)
{
    require(!residuals.empty(), "no residuals to analyze");
    ResidualStats st;
    st.n = residuals.size();

    double abs_sum = 0.0;
    int max_bin = 0;
    std::vector<uint64_t> hist(65, 0);
    for (int64_t r : residuals) {
        uint64_t mag = r >= 0 ? uint64_t(r) : uint64_t(-(r + 1)) + 1;
        abs_sum += double(mag);
        int bin = mag == 0 ? 0 : std::bit_width(mag);
        hist[size_t(bin)]++;
        max_bin = std::max(max_bin, bin);
    }
    st.mean_abs = abs_sum / double(residuals.size());
    st.histogram.assign(hist.begin(), hist.begin() + max_bin + 1);

    // Maximum-likelihood geometric fit on the zigzag values: p = 1/(1+mean).
    auto counts = detail::zigzag_counts(residuals);
    double zz_mean = 0.0;
    for (auto& [v, c] : counts)
        zz_mean += double(v) * double(c);
    zz_mean /= double(residuals.size());
    double p = 1.0 / (1.0 + zz_mean);
    st.geometric_p = p;

    double log2p = std::log2(p);
    double log2q = p < 1.0 ? std::log2(1.0 - p) : 0.0;
    double kl = 0.0;
    for (auto& [v, c] : counts) {
        double emp = double(c) / double(residuals.size());
        double model_log = log2p + (v == 0 ? 0.0 : double(v) * log2q);
        kl += emp * (std::log2(emp) - model_log);
    }
    st.fit_divergence = std::max(kl, 0.0);
    return st;
}

// How many bits per value Rice spends at its best parameter versus the
// empirical entropy of the zigzag values; the gap measures Rice's loss when
// residuals stray from the geometric shape it assumes.
struct RiceCostEstimate {
    double rice_bits_per_value = 0.0;
    double empirical_entropy = 0.0;
    int rice_k = 0;
    double gap() const { return rice_bits_per_value - empirical_entropy; }
};

inline RiceCostEstimate rice_cost_estimate(std::span<const int64_t> residuals)
{
    require(!residuals.empty(), "no residuals to analyze");
    std::vector<uint64_t> zz;
    zz.reserve(residuals.size());
    for (int64_t r : residuals)
        zz.push_back(zigzag(r));

    RiceCostEstimate est;
    est.rice_k = select_rice_k(zz);
    est.rice_bits_per_value = double(rice_cost(zz, est.rice_k)) / double(zz.size());

    auto counts = detail::zigzag_counts(residuals);
    double h = 0.0;
    for (auto& [v, c] : counts) {
        double emp = double(c) / double(zz.size());
        h -= emp * std::log2(emp);
    }
    est.empirical_entropy = h;
    return est;
}

// ---------------------------------------------------------------------------
// Report rendering: key/value structured text and a histogram CSV.

inline std::string residual_stats_json(const ResidualStats& st)
{
    std::ostringstream os;
    os.precision(10);
    os << "{\n";
    os << "  \"n\": " << st.n << ",\n";
    os << "  \"channels\": \"pooled\",\n";
    os << "  \"mean_abs\": " << st.mean_abs << ",\n";
    os << "  \"geometric_p\": " << st.geometric_p << ",\n";
    os << "  \"fit_divergence_bits\": " << st.fit_divergence << ",\n";
    os << "  \"histogram_bins\": " << st.histogram.size() << "\n";
    os << "}\n";
    return os.str();
}

inline std::string residual_histogram_csv(const ResidualStats& st)
{
    std::ostringstream os;
    os << "bin_low,bin_high,count\n";
    for (size_t j = 0; j < st.histogram.size(); j++) {
        uint64_t lo = j == 0 ? 0 : uint64_t(1) << (j - 1);
        uint64_t hi = j == 0 ? 1 : uint64_t(1) << j;
        os << lo << "," << hi << "," << st.histogram[j] << "\n";
    }
    return os.str();
}

} // namespace trlb
