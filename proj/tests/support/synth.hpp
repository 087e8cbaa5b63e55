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

// Deterministic synthetic signals shared by the test suites.

#include <cmath>
#include <vector>

#include <trilobyte/common.hpp>
#include <trilobyte/pcm.hpp>

namespace synth {

inline int32_t clamp_sample(double v, int bit_depth)
{
    double lo = -std::ldexp(1.0, bit_depth - 1);
    double hi = std::ldexp(1.0, bit_depth - 1) - 1;
    return int32_t(std::lround(std::min(std::max(v, lo), hi)));
}

inline trlb::PcmClip sine_clip(int bit_depth, int channels, size_t frames, uint32_t f_s,
                               double freq, double rel_amp = 0.5)
{
    trlb::PcmClip clip;
    clip.bit_depth = bit_depth;
    clip.sample_rate = f_s;
    clip.channels.assign(size_t(channels), {});
    double amp = rel_amp * (std::ldexp(1.0, bit_depth - 1) - 1);
    for (int c = 0; c < channels; c++) {
        clip.channels[size_t(c)].reserve(frames);
        double phase = c * 0.7;
        for (size_t i = 0; i < frames; i++) {
            double t = double(i) / double(f_s);
            clip.channels[size_t(c)].push_back(
                clamp_sample(amp * std::sin(2.0 * M_PI * freq * t + phase), bit_depth));
        }
    }
    return clip;
}

inline trlb::PcmClip noise_clip(int bit_depth, int channels, size_t frames, uint32_t f_s,
                                uint64_t seed, double rel_amp = 1.0)
{
    trlb::PcmClip clip;
    clip.bit_depth = bit_depth;
    clip.sample_rate = f_s;
    clip.channels.assign(size_t(channels), {});
    trlb::Rng rng(seed);
    double span = rel_amp * std::ldexp(1.0, bit_depth);
    for (int c = 0; c < channels; c++)
        for (size_t i = 0; i < frames; i++)
            clip.channels[size_t(c)].push_back(
                clamp_sample((rng.unit() - 0.5) * span, bit_depth));
    return clip;
}

inline trlb::PcmClip silence_clip(int bit_depth, int channels, size_t frames, uint32_t f_s)
{
    trlb::PcmClip clip;
    clip.bit_depth = bit_depth;
    clip.sample_rate = f_s;
    clip.channels.assign(size_t(channels), std::vector<int32_t>(frames, 0));
    return clip;
}

// AR(2) process with Gaussian innovations, clamped into range.
inline trlb::PcmClip ar2_clip(int bit_depth, size_t frames, uint32_t f_s, double a1, double a2,
                              double innovation_sd, uint64_t seed)
{
    trlb::PcmClip clip;
    clip.bit_depth = bit_depth;
    clip.sample_rate = f_s;
    clip.channels.assign(1, {});
    clip.channels[0].reserve(frames);
    trlb::Rng rng(seed);
    double x1 = 0.0, x2 = 0.0;
    for (size_t i = 0; i < frames; i++) {
        double x = a1 * x1 + a2 * x2 + innovation_sd * rng.normal();
        int32_t s = clamp_sample(x, bit_depth);
        x2 = x1;
        x1 = double(s);
        clip.channels[0].push_back(s);
    }
    return clip;
}

// Speech-shaped synthesis: voiced segments (glottal pulse train through two
// resonators with a pitch contour), fricative noise bursts and short pauses.
inline trlb::PcmClip speechlike_clip(int bit_depth, size_t frames, uint32_t f_s, uint64_t seed)
{
    trlb::PcmClip clip;
    clip.bit_depth = bit_depth;
    clip.sample_rate = f_s;
    clip.channels.assign(1, {});
    clip.channels[0].reserve(frames);
    trlb::Rng rng(seed);

    double amp = 0.35 * (std::ldexp(1.0, bit_depth - 1) - 1);
    double y1 = 0, y2 = 0, z1 = 0, z2 = 0;
    size_t i = 0;
    int segment = 0;
    while (i < frames) {
        size_t seg_len = 400 + size_t(rng.below(1200));
        seg_len = std::min(seg_len, frames - i);
        int kind = segment % 4 == 3 ? (rng.unit() < 0.5 ? 1 : 2) : 0; // mostly voiced
        double pitch = 90.0 + 60.0 * rng.unit();
        double f1 = 350.0 + 400.0 * rng.unit();
        double f2 = 1100.0 + 900.0 * rng.unit();
        double r = 0.985;
        double c1 = 2 * r * std::cos(2 * M_PI * f1 / f_s), c2 = -r * r;
        double d1 = 2 * r * std::cos(2 * M_PI * f2 / f_s), d2 = -r * r;
        double phase = 0.0;
        for (size_t j = 0; j < seg_len; j++, i++) {
            double exc = 0.0;
            if (kind == 0) {
                phase += pitch / f_s;
                if (phase >= 1.0) {
                    phase -= 1.0;
                    exc = 1.0;
                }
                exc += 0.02 * rng.normal();
            } else if (kind == 1) {
                exc = 0.15 * rng.normal(); // fricative
            } // kind 2: pause
            double a = exc + c1 * y1 + c2 * y2;
            y2 = y1;
            y1 = a;
            double b = a + d1 * z1 + d2 * z2;
            z2 = z1;
            z1 = b;
            double env = std::sin(M_PI * double(j + 1) / double(seg_len)); // fade in/out
            clip.channels[0].push_back(clamp_sample(amp * 0.08 * b * env, bit_depth));
        }
        segment++;
    }
    return clip;
}

} // namespace synth
