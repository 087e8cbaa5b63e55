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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "common.hpp"

namespace trlb {

enum class ChannelOrder : uint8_t {
    Mono = 0,
    LeftFirst = 1,
    RightFirst = 2,
};

inline const char* channel_order_name(ChannelOrder o)
{
    switch (o) {
    case ChannelOrder::Mono: return "mono";
    case ChannelOrder::LeftFirst: return "left-first";
    case ChannelOrder::RightFirst: return "right-first";
    }
    return "?";
}

// Decoded integer PCM. Samples are stored per channel in int32 regardless of
// bit depth; bit_depth gates the valid range, not the storage width.
struct PcmClip {
    std::vector<std::vector<int32_t>> channels;
    int bit_depth = 16;     // 8, 16 or 24
    uint32_t sample_rate = 44100;

    size_t channel_count() const { return channels.size(); }
    size_t frames() const { return channels.empty() ? 0 : channels[0].size(); }
    double duration_seconds() const
    {
        return sample_rate == 0 ? 0.0 : double(frames()) / double(sample_rate);
    }

    int32_t min_value() const { return -(int32_t(1) << (bit_depth - 1)); }
    int32_t max_value() const { return (int32_t(1) << (bit_depth - 1)) - 1; }

    void validate() const
    {
        require(bit_depth == 8 || bit_depth == 16 || bit_depth == 24,
                "bit depth must be 8, 16 or 24, got " + std::to_string(bit_depth));
        require(channel_count() == 1 || channel_count() == 2,
                "channel count must be 1 or 2, got " + std::to_string(channel_count()));
        require(sample_rate > 0, "sample rate must be positive");
        for (size_t c = 0; c < channels.size(); c++) {
            require(channels[c].size() == channels[0].size(),
                    "channels must have equal frame counts");
            for (int32_t v : channels[c])
                require(v >= min_value() && v <= max_value(),
                        "sample " + std::to_string(v) + " out of range for " + std::to_string(bit_depth) + "-bit");
        }
    }
};

// Signed samples offset into [0, 2^b) and serialized channel-after-channel.
struct UnsignedSequence {
    std::vector<uint32_t> values;
    int bit_depth = 16;
    ChannelOrder order = ChannelOrder::Mono;
    uint64_t frames_per_channel = 0;

    size_t channel_count() const { return order == ChannelOrder::Mono ? 1 : 2; }
};

// ---------------------------------------------------------------------------
// WAV parsing. RIFF/WAVE, PCM only (format tag 1, or extensible with a PCM
// sub-format), bit depth 8/16/24, 1-2 channels. 8-bit data is stored unsigned
// per WAV convention and converted to signed here.

namespace detail {

inline uint32_t rd_u32(std::span<const uint8_t> d, size_t off)
{
    require(off + 4 <= d.size(), "WAV file truncated");
    return uint32_t(get_le(d.data() + off, 4));
}

inline uint16_t rd_u16(std::span<const uint8_t> d, size_t off)
{
    require(off + 2 <= d.size(), "WAV file truncated");
    return uint16_t(get_le(d.data() + off, 2));
}

inline bool tag_is(std::span<const uint8_t> d, size_t off, const char* tag)
{
    return off + 4 <= d.size() && std::memcmp(d.data() + off, tag, 4) == 0;
}

} // namespace detail

inline PcmClip parse_wav(std::span<const uint8_t> data)
{
    using namespace detail;
    require(tag_is(data, 0, "RIFF"), "not a RIFF file (missing RIFF tag)");
    require(tag_is(data, 8, "WAVE"), "not a WAVE file (missing WAVE tag)");

    bool have_fmt = false;
    uint16_t format_tag = 0, channels = 0, bits = 0, block_align = 0;
    uint32_t sample_rate = 0;
    size_t data_off = 0, data_len = 0;
    bool have_data = false;

    size_t pos = 12;
    while (pos + 8 <= data.size()) {
        uint32_t chunk_len = rd_u32(data, pos + 4);
        size_t body = pos + 8;
        if (tag_is(data, pos, "fmt ")) {
            require(chunk_len >= 16, "fmt chunk too short");
            format_tag = rd_u16(data, body + 0);
            channels = rd_u16(data, body + 2);
            sample_rate = rd_u32(data, body + 4);
            block_align = rd_u16(data, body + 12);
            bits = rd_u16(data, body + 14);
            if (format_tag == 0xFFFE) {
                // extensible: accept when the sub-format GUID is PCM
                require(chunk_len >= 40, "extensible fmt chunk too short");
                uint16_t sub = rd_u16(data, body + 24);
                require(sub == 1, "unsupported extensible sub-format tag " + std::to_string(sub));
                format_tag = 1;
            }
            have_fmt = true;
        } else if (tag_is(data, pos, "data")) {
            data_off = body;
            data_len = chunk_len;
            require(data_off + data_len <= data.size(), "data chunk exceeds file size");
            have_data = true;
        }
        pos = body + chunk_len + (chunk_len & 1); // chunks are word-aligned
    }

    require(have_fmt, "missing fmt chunk");
    require(have_data, "missing data chunk");
    require(format_tag == 1, "unsupported format tag " + std::to_string(format_tag) + " (PCM only)");
    require(bits == 8 || bits == 16 || bits == 24,
            "unsupported bit depth " + std::to_string(bits));
    require(channels == 1 || channels == 2,
            "unsupported channel count " + std::to_string(channels));
    require(sample_rate > 0, "sample rate field is zero");
    size_t bytes_per_frame = size_t(channels) * (bits / 8);
    if (block_align != 0)
        require(block_align == bytes_per_frame,
                "block align " + std::to_string(block_align) + " inconsistent with format");
    require(data_len % bytes_per_frame == 0, "data chunk length not a whole number of frames");

    PcmClip clip;
    clip.bit_depth = bits;
    clip.sample_rate = sample_rate;
    clip.channels.assign(channels, {});
    size_t frames = data_len / bytes_per_frame;
    for (auto& ch : clip.channels)
        ch.reserve(frames);

    const uint8_t* p = data.data() + data_off;
    for (size_t f = 0; f < frames; f++) {
        for (int c = 0; c < channels; c++) {
            int32_t v = 0;
            switch (bits) {
            case 8:
                v = int32_t(*p++) - 128;
                break;
            case 16:
                v = int16_t(uint16_t(p[0]) | (uint16_t(p[1]) << 8));
                p += 2;
                break;
            case 24: {
                uint32_t u = uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16);
                if (u & 0x800000u)
                    u |= 0xFF000000u; // sign-extend
                v = int32_t(u);
                p += 3;
                break;
            }
            }
            clip.channels[c].push_back(v);
        }
    }
    return clip;
}

inline std::vector<uint8_t> write_wav(const PcmClip& clip)
{
    clip.validate();
    size_t channels = clip.channel_count();
    size_t frames = clip.frames();
    size_t bytes_per_sample = clip.bit_depth / 8;
    size_t data_len = frames * channels * bytes_per_sample;

    std::vector<uint8_t> out;
    out.reserve(44 + data_len + 1);
    auto tag = [&](const char* t) { out.insert(out.end(), t, t + 4); };

    tag("RIFF");
    put_le(out, 36 + data_len + (data_len & 1), 4);
    tag("WAVE");
    tag("fmt ");
    put_le(out, 16, 4);
    put_le(out, 1, 2);                                   // PCM
    put_le(out, channels, 2);
    put_le(out, clip.sample_rate, 4);
    put_le(out, uint64_t(clip.sample_rate) * channels * bytes_per_sample, 4);
    put_le(out, channels * bytes_per_sample, 2);          // block align
    put_le(out, clip.bit_depth, 2);
    tag("data");
    put_le(out, data_len, 4);

    for (size_t f = 0; f < frames; f++) {
        for (size_t c = 0; c < channels; c++) {
            int32_t v = clip.channels[c][f];
            switch (clip.bit_depth) {
            case 8:
                out.push_back(uint8_t(v + 128));
                break;
            case 16:
                put_le(out, uint16_t(v), 2);
                break;
            case 24:
                put_le(out, uint32_t(v) & 0xFFFFFFu, 3);
                break;
            }
        }
    }
    if (data_len & 1)
        out.push_back(0); // RIFF pad byte, not counted in the chunk length
    return out;
}

// ---------------------------------------------------------------------------
// Signed <-> unsigned token domain. x = w + 2^(b-1). Stereo channels are
// concatenated whole-channel, never interleaved.

inline UnsignedSequence to_unsigned(const PcmClip& clip, ChannelOrder order)
{
    clip.validate();
    bool mono = clip.channel_count() == 1;
    require(mono == (order == ChannelOrder::Mono),
            std::string("channel order ") + channel_order_name(order) + " does not match " + std::to_string(clip.channel_count()) + " channel(s)");

    UnsignedSequence seq;
    seq.bit_depth = clip.bit_depth;
    seq.order = order;
    seq.frames_per_channel = clip.frames();
    seq.values.reserve(clip.frames() * clip.channel_count());

    uint32_t offset = uint32_t(1) << (clip.bit_depth - 1);
    auto emit_channel = [&](const std::vector<int32_t>& ch) {
        for (int32_t w : ch)
            seq.values.push_back(uint32_t(w + int32_t(offset)));
    };
    if (mono) {
        emit_channel(clip.channels[0]);
    } else if (order == ChannelOrder::LeftFirst) {
        emit_channel(clip.channels[0]);
        emit_channel(clip.channels[1]);
    } else {
        emit_channel(clip.channels[1]);
        emit_channel(clip.channels[0]);
    }
    return seq;
}

inline PcmClip from_unsigned(const UnsignedSequence& seq, uint32_t sample_rate)
{
    size_t nch = seq.channel_count();
    require(seq.values.size() % nch == 0,
            "sequence length " + std::to_string(seq.values.size()) + " not divisible by channel count " + std::to_string(nch));
    size_t frames = seq.values.size() / nch;
    require(seq.frames_per_channel == frames,
            "frames_per_channel inconsistent with value count");

    int32_t offset = int32_t(1) << (seq.bit_depth - 1);
    PcmClip clip;
    clip.bit_depth = seq.bit_depth;
    clip.sample_rate = sample_rate;
    clip.channels.assign(nch, {});

    auto take_channel = [&](size_t slot) {
        std::vector<int32_t> ch;
        ch.reserve(frames);
        for (size_t i = 0; i < frames; i++)
            ch.push_back(int32_t(seq.values[slot * frames + i]) - offset);
        return ch;
    };
    if (seq.order == ChannelOrder::Mono) {
        clip.channels[0] = take_channel(0);
    } else if (seq.order == ChannelOrder::LeftFirst) {
        clip.channels[0] = take_channel(0);
        clip.channels[1] = take_channel(1);
    } else {
        clip.channels[1] = take_channel(0);
        clip.channels[0] = take_channel(1);
    }
    clip.validate();
    return clip;
}

// Depth reduction by dropping low-order bytes of the offset representation.
// This is the reference meaning of "the original at an effective bit depth".
inline PcmClip requantize_clip(const PcmClip& clip, int effective_b)
{
    require(effective_b % 8 == 0 && effective_b >= 8 && effective_b <= clip.bit_depth,
            "effective bit depth must be a multiple of 8 in [8, bit_depth]");
    if (effective_b == clip.bit_depth)
        return clip;
    int drop = clip.bit_depth - effective_b;
    uint32_t in_offset = uint32_t(1) << (clip.bit_depth - 1);
    int32_t out_offset = int32_t(1) << (effective_b - 1);
    PcmClip out;
    out.bit_depth = effective_b;
    out.sample_rate = clip.sample_rate;
    out.channels.assign(clip.channel_count(), {});
    for (size_t c = 0; c < clip.channel_count(); c++) {
        out.channels[c].reserve(clip.frames());
        for (int32_t w : clip.channels[c]) {
            uint32_t x = uint32_t(w + int32_t(in_offset));
            out.channels[c].push_back(int32_t(x >> drop) - out_offset);
        }
    }
    return out;
}

} // namespace trlb
