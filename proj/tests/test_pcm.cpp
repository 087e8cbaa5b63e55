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

#include <catch2/catch_amalgamated.hpp>
#include <trilobyte/pcm.hpp>

#include "support/synth.hpp"

using namespace trlb;

namespace {

// Reference WAV writer, independent of write_wav: bytes assembled literally.
std::vector<uint8_t> reference_wav(uint16_t channels, uint32_t rate, uint16_t bits,
                                   const std::vector<uint8_t>& data)
{
    std::vector<uint8_t> f;
    auto u32 = [&](uint32_t v) { for (int i = 0; i < 4; i++) f.push_back(uint8_t(v >> (8 * i))); };
    auto u16 = [&](uint16_t v) { for (int i = 0; i < 2; i++) f.push_back(uint8_t(v >> (8 * i))); };
    auto tag = [&](const char* t) { f.insert(f.end(), t, t + 4); };
    tag("RIFF");
    u32(uint32_t(36 + data.size() + (data.size() & 1)));
    tag("WAVE");
    tag("fmt ");
    u32(16);
    u16(1);
    u16(channels);
    u32(rate);
    u32(rate * channels * (bits / 8));
    u16(uint16_t(channels * (bits / 8)));
    u16(bits);
    tag("data");
    u32(uint32_t(data.size()));
    f.insert(f.end(), data.begin(), data.end());
    if (data.size() & 1)
        f.push_back(0);
    return f;
}

PcmClip random_clip(Rng& rng)
{
    int depths[3] = {8, 16, 24};
    PcmClip clip;
    clip.bit_depth = depths[rng.below(3)];
    clip.sample_rate = 8000 + uint32_t(rng.below(40000));
    size_t channels = 1 + rng.below(2);
    size_t frames = rng.below(200);
    clip.channels.assign(channels, {});
    int64_t lo = clip.min_value(), hi = clip.max_value();
    for (auto& ch : clip.channels)
        for (size_t i = 0; i < frames; i++)
            ch.push_back(int32_t(lo + int64_t(rng.below(uint64_t(hi - lo + 1)))));
    return clip;
}

} // namespace

TEST_CASE("8-bit WAV stored-unsigned convention")
{
    auto file = reference_wav(1, 8000, 8, {128, 255, 0});
    PcmClip clip = parse_wav(file);
    REQUIRE(clip.bit_depth == 8);
    REQUIRE(clip.channels[0] == std::vector<int32_t>{0, 127, -128});
}

TEST_CASE("16-bit two's complement frame")
{
    auto file = reference_wav(1, 44100, 16, {0x00, 0x80});
    PcmClip clip = parse_wav(file);
    REQUIRE(clip.channels[0] == std::vector<int32_t>{-32768});
}

TEST_CASE("hand-built 24-bit stereo WAV round trip is byte-identical")
{
    // 4 frames, interleaved L/R, little-endian 3-byte samples
    std::vector<int32_t> left = {0x123456, -1, 0, -0x400000};
    std::vector<int32_t> right = {0x7FFFFF, -0x800000, 5, -6};
    std::vector<uint8_t> data;
    for (size_t i = 0; i < 4; i++)
        for (int32_t v : {left[i], right[i]})
            for (int b = 0; b < 3; b++)
                data.push_back(uint8_t(uint32_t(v) >> (8 * b)));
    auto file = reference_wav(2, 48000, 24, data);

    PcmClip clip = parse_wav(file);
    REQUIRE(clip.channels[0] == left);
    REQUIRE(clip.channels[1] == right);

    auto rewritten = write_wav(clip);
    REQUIRE(rewritten == file);
}

TEST_CASE("write_wav basics")
{
    PcmClip clip;
    clip.bit_depth = 8;
    clip.sample_rate = 8000;
    clip.channels = {{0}};
    auto file = write_wav(clip);
    // data chunk payload is the final byte (plus pad), stored unsigned
    REQUIRE(file[44] == 128);

    PcmClip neg;
    neg.bit_depth = 24;
    neg.sample_rate = 8000;
    neg.channels = {{-1}};
    auto f2 = write_wav(neg);
    REQUIRE(f2[44] == 0xFF);
    REQUIRE(f2[45] == 0xFF);
    REQUIRE(f2[46] == 0xFF);
}

TEST_CASE("parse rejects malformed input with the offending field")
{
    auto ok = reference_wav(1, 8000, 8, {128});
    REQUIRE_NOTHROW(parse_wav(ok));

    auto bad_tag = ok;
    bad_tag[0] = 'X';
    REQUIRE_THROWS_WITH(parse_wav(bad_tag), Catch::Matchers::ContainsSubstring("RIFF"));

    auto bad_fmt = ok;
    bad_fmt[20] = 3; // format tag
    REQUIRE_THROWS_WITH(parse_wav(bad_fmt), Catch::Matchers::ContainsSubstring("format tag"));

    auto bad_bits = ok;
    bad_bits[34] = 12;
    REQUIRE_THROWS_WITH(parse_wav(bad_bits), Catch::Matchers::ContainsSubstring("bit depth"));

    auto bad_ch = reference_wav(3, 8000, 8, {128, 128, 128});
    REQUIRE_THROWS_WITH(parse_wav(bad_ch), Catch::Matchers::ContainsSubstring("channel count"));
}

TEST_CASE("extensible fmt header with PCM sub-format is accepted")
{
    std::vector<uint8_t> f;
    auto u32 = [&](uint32_t v) { for (int i = 0; i < 4; i++) f.push_back(uint8_t(v >> (8 * i))); };
    auto u16 = [&](uint16_t v) { for (int i = 0; i < 2; i++) f.push_back(uint8_t(v >> (8 * i))); };
    auto tag = [&](const char* t) { f.insert(f.end(), t, t + 4); };
    tag("RIFF");
    u32(36 + 24 + 2);
    tag("WAVE");
    tag("fmt ");
    u32(40);
    u16(0xFFFE); // extensible
    u16(1);
    u32(16000);
    u32(32000);
    u16(2);
    u16(16);
    u16(22);      // cbSize
    u16(16);      // valid bits
    u32(0);       // channel mask
    u16(1);       // sub-format: PCM
    for (int i = 0; i < 14; i++)
        f.push_back(0);
    tag("data");
    u32(2);
    f.push_back(0x34);
    f.push_back(0x12);
    PcmClip clip = parse_wav(f);
    REQUIRE(clip.channels[0] == std::vector<int32_t>{0x1234});
}

TEST_CASE("to_unsigned offsets and concatenates")
{
    PcmClip clip;
    clip.bit_depth = 8;
    clip.sample_rate = 8000;
    clip.channels = {{-128, 127}};
    auto seq = to_unsigned(clip, ChannelOrder::Mono);
    REQUIRE(seq.values == std::vector<uint32_t>{0, 255});

    PcmClip w16;
    w16.bit_depth = 16;
    w16.sample_rate = 8000;
    w16.channels = {{0}};
    REQUIRE(to_unsigned(w16, ChannelOrder::Mono).values == std::vector<uint32_t>{32768});

    PcmClip st;
    st.bit_depth = 8;
    st.sample_rate = 8000;
    st.channels = {{1, 2}, {3, 4}};
    REQUIRE(to_unsigned(st, ChannelOrder::LeftFirst).values == std::vector<uint32_t>{129, 130, 131, 132});
    REQUIRE(to_unsigned(st, ChannelOrder::RightFirst).values == std::vector<uint32_t>{131, 132, 129, 130});

    REQUIRE_THROWS_AS(to_unsigned(st, ChannelOrder::Mono), Error);
    REQUIRE_THROWS_AS(to_unsigned(clip, ChannelOrder::LeftFirst), Error);
}

TEST_CASE("from_unsigned inverts to_unsigned")
{
    UnsignedSequence seq;
    seq.bit_depth = 8;
    seq.order = ChannelOrder::Mono;
    seq.frames_per_channel = 0;
    PcmClip empty = from_unsigned(seq, 8000);
    REQUIRE(empty.frames() == 0);

    Rng rng(20260810);
    for (int trial = 0; trial < 1000; trial++) {
        PcmClip clip = random_clip(rng);
        ChannelOrder order = clip.channel_count() == 1
                                 ? ChannelOrder::Mono
                                 : (trial % 2 == 0 ? ChannelOrder::LeftFirst : ChannelOrder::RightFirst);
        auto seq2 = to_unsigned(clip, order);
        for (uint32_t v : seq2.values)
            REQUIRE(v < (uint32_t(1) << clip.bit_depth));
        PcmClip back = from_unsigned(seq2, clip.sample_rate);
        REQUIRE(back.channels == clip.channels);
        REQUIRE(back.bit_depth == clip.bit_depth);
    }
}

TEST_CASE("WAV round trip on random clips")
{
    Rng rng(42);
    for (int trial = 0; trial < 200; trial++) {
        PcmClip clip = random_clip(rng);
        PcmClip back = parse_wav(write_wav(clip));
        REQUIRE(back.channels == clip.channels);
        REQUIRE(back.bit_depth == clip.bit_depth);
        REQUIRE(back.sample_rate == clip.sample_rate);
    }
}

TEST_CASE("requantize drops low bytes of the offset representation")
{
    PcmClip clip = synth::sine_clip(24, 1, 64, 8000, 440.0);
    PcmClip q8 = requantize_clip(clip, 8);
    REQUIRE(q8.bit_depth == 8);
    for (size_t i = 0; i < clip.frames(); i++) {
        uint32_t x = uint32_t(clip.channels[0][i] + (1 << 23));
        REQUIRE(q8.channels[0][i] == int32_t(x >> 16) - 128);
    }
    REQUIRE(requantize_clip(clip, 24).channels == clip.channels);
}
