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

#include <array>
#include <cstring>
#include <optional>
#include <span>
#include <vector>

#include "checkpoint.hpp"
#include "coder.hpp"
#include "common.hpp"
#include "lpc.hpp"
#include "pcm.hpp"
#include "rate.hpp"
#include "tokenizer.hpp"

namespace trlb {

enum class Method : uint8_t {
    LmTrilobyte = 0,
    LmSampleLevel = 1,
    LpcRice = 2,
};

inline const char* method_name(Method m)
{
    switch (m) {
    case Method::LmTrilobyte: return "lm-trilobyte";
    case Method::LmSampleLevel: return "lm-sample";
    case Method::LpcRice: return "lpc-rice";
    }
    return "?";
}

constexpr char kContainerMagic[4] = {'T', 'R', 'L', 'B'};
constexpr uint8_t kContainerVersion = 1;
constexpr size_t kContainerHeaderSize = 47;

// Fixed 47-byte header, little-endian scalars:
//   0  magic "TRLB"            4 bytes
//   4  format version          1
//   5  method tag              1   (0 lm-trilobyte, 1 lm-sample, 2 lpc-rice)
//   6  bit depth b             1
//   7  effective bit depth     1   (= b unless transfer-masked)
//   8  sample rate             4
//  12  channels                1
//  13  channel order           1   (0 mono, 1 left-first, 2 right-first)
//  14  frames per channel      8
//  22  model content hash     16   (all zero for lpc-rice)
//  38  coder precision P       1   (0 for lpc-rice)
//  39  payload bit length      8
//  47  payload, byte-aligned, zero-padded
struct ContainerHeader {
    Method method = Method::LmTrilobyte;
    int bit_depth = 16;
    int effective_b = 16;
    uint32_t sample_rate = 44100;
    int channels = 1;
    ChannelOrder order = ChannelOrder::Mono;
    uint64_t frames_per_channel = 0;
    std::array<uint8_t, 16> model_hash{};
    int precision = 16;
    uint64_t payload_bits = 0;

    int bytes_per_sample() const { return (bit_depth + 7) / 8; }
    uint64_t total_samples() const { return frames_per_channel * uint64_t(channels); }

    uint64_t uncompressed_data_bits() const
    {
        return total_samples() * uint64_t(bit_depth);
    }
};

inline std::vector<uint8_t> build_container(const ContainerHeader& h, std::span<const uint8_t> payload)
{
    require((h.payload_bits + 7) / 8 == payload.size(), "payload bit length inconsistent with bytes");
    std::vector<uint8_t> out;
    out.reserve(kContainerHeaderSize + payload.size());
    out.insert(out.end(), kContainerMagic, kContainerMagic + 4);
    out.push_back(kContainerVersion);
    out.push_back(uint8_t(h.method));
    out.push_back(uint8_t(h.bit_depth));
    out.push_back(uint8_t(h.effective_b));
    put_le(out, h.sample_rate, 4);
    out.push_back(uint8_t(h.channels));
    out.push_back(uint8_t(h.order));
    put_le(out, h.frames_per_channel, 8);
    out.insert(out.end(), h.model_hash.begin(), h.model_hash.end());
    out.push_back(uint8_t(h.precision));
    put_le(out, h.payload_bits, 8);
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

inline ContainerHeader parse_container_header(std::span<const uint8_t> file)
{
    require(file.size() >= kContainerHeaderSize, "container smaller than its header");
    require(std::memcmp(file.data(), kContainerMagic, 4) == 0, "not a coded container (bad magic)");
    require(file[4] == kContainerVersion,
            "unsupported container version " + std::to_string(int(file[4])));

    ContainerHeader h;
    uint8_t method = file[5];
    require(method <= 2, "unknown method tag " + std::to_string(int(method)));
    h.method = Method(method);
    h.bit_depth = file[6];
    require(h.bit_depth == 8 || h.bit_depth == 16 || h.bit_depth == 24,
            "bad bit depth " + std::to_string(h.bit_depth));
    h.effective_b = file[7];
    require(h.effective_b % 8 == 0 && h.effective_b >= 8 && h.effective_b <= h.bit_depth,
            "bad effective bit depth " + std::to_string(h.effective_b));
    if (h.method != Method::LmTrilobyte)
        require(h.effective_b == h.bit_depth, "only trilobyte containers can be transfer-masked");
    h.sample_rate = uint32_t(get_le(file.data() + 8, 4));
    require(h.sample_rate > 0, "sample rate field is zero");
    h.channels = file[12];
    require(h.channels == 1 || h.channels == 2, "bad channel count " + std::to_string(h.channels));
    uint8_t order = file[13];
    require(order <= 2, "bad channel order " + std::to_string(int(order)));
    h.order = ChannelOrder(order);
    require((h.channels == 1) == (h.order == ChannelOrder::Mono),
            "channel order inconsistent with channel count");
    h.frames_per_channel = get_le(file.data() + 14, 8);
    std::memcpy(h.model_hash.data(), file.data() + 22, 16);
    h.precision = file[38];
    if (h.method == Method::LpcRice) {
        require(h.precision == 0, "lpc-rice containers carry no coder precision");
        bool zero = true;
        for (uint8_t b : h.model_hash)
            zero = zero && b == 0;
        require(zero, "lpc-rice containers carry no model hash");
    } else {
        require(h.precision >= kMinPrecision && h.precision <= kMaxPrecision,
                "coder precision " + std::to_string(h.precision) + " out of range");
    }
    h.payload_bits = get_le(file.data() + 39, 8);
    uint64_t payload_bytes = uint64_t(file.size()) - kContainerHeaderSize;
    require((h.payload_bits + 7) / 8 == payload_bytes,
            "payload bit length " + std::to_string(h.payload_bits) + " inconsistent with " + std::to_string(payload_bytes) + " payload bytes");
    return h;
}

// ---------------------------------------------------------------------------
// LM compression paths.

struct CompressOptions {
    ChannelOrder stereo_order = ChannelOrder::LeftFirst;
    int effective_b = 0; // 0 = full depth
    int precision = 0;   // 0 = default for the vocabulary
};

inline std::vector<uint8_t> lm_compress_clip(const PcmClip& clip, Method method,
                                             const Checkpoint& model,
                                             const CompressOptions& opt = {})
{
    clip.validate();
    require(method == Method::LmTrilobyte || method == Method::LmSampleLevel,
            "not an LM method");
    int eff = opt.effective_b == 0 ? clip.bit_depth : opt.effective_b;

    if (method == Method::LmSampleLevel) {
        require(clip.bit_depth <= 16,
                "sample-level tokenization of 24-bit audio needs a 2^24 = 16,777,216-token vocabulary; use the trilobyte method");
        require(eff == clip.bit_depth, "transfer masking needs the trilobyte method");
        require(model.vocab() == (uint32_t(1) << clip.bit_depth),
                "model vocabulary " + std::to_string(model.vocab()) + " does not match the " + std::to_string(clip.bit_depth) + "-bit sample-level vocabulary");
    } else {
        bool transfer = eff < clip.bit_depth;
        if (transfer)
            require(model.vocab() == 257, "transfer masking needs a 257-token model with the mask token");
        else
            require(model.vocab() == 256 || model.vocab() == 257,
                    "model vocabulary " + std::to_string(model.vocab()) + " does not match byte tokens");
    }

    ChannelOrder order = clip.channel_count() == 1 ? ChannelOrder::Mono : opt.stereo_order;
    UnsignedSequence seq = to_unsigned(clip, order);
    TokenStream stream;
    if (method == Method::LmTrilobyte)
        stream = tokenize_trilobyte(seq, model.vocab() == 257);
    else
        stream = tokenize_samples(seq);

    std::optional<MaskSchedule> mask;
    if (eff < clip.bit_depth) {
        stream = mask_lower_bytes(stream, eff);
        mask = MaskSchedule{stream.bytes_per_sample, eff / 8};
    }

    int precision = opt.precision == 0 ? default_precision(model.vocab()) : opt.precision;
    auto coder_model = model.instantiate();
    std::vector<uint8_t> payload =
        encode_tokens(stream.tokens, *coder_model, precision, mask ? &*mask : nullptr);

    ContainerHeader h;
    h.method = method;
    h.bit_depth = clip.bit_depth;
    h.effective_b = eff;
    h.sample_rate = clip.sample_rate;
    h.channels = int(clip.channel_count());
    h.order = order;
    h.frames_per_channel = clip.frames();
    h.model_hash = model.content_hash;
    h.precision = precision;
    h.payload_bits = uint64_t(payload.size()) * 8;
    return build_container(h, payload);
}

inline std::vector<uint8_t> lpc_compress_clip(const PcmClip& clip, const LpcConfig& cfg = {})
{
    clip.validate();
    uint64_t bits = 0;
    std::vector<uint8_t> payload = lpc_encode_payload(clip, cfg, bits);

    ContainerHeader h;
    h.method = Method::LpcRice;
    h.bit_depth = clip.bit_depth;
    h.effective_b = clip.bit_depth;
    h.sample_rate = clip.sample_rate;
    h.channels = int(clip.channel_count());
    h.order = clip.channel_count() == 1 ? ChannelOrder::Mono : ChannelOrder::LeftFirst;
    h.frames_per_channel = clip.frames();
    h.precision = 0;
    h.payload_bits = bits;
    return build_container(h, payload);
}

// Generic front door used by the CLI.
inline std::vector<uint8_t> compress_clip(const PcmClip& clip, Method method,
                                          const Checkpoint* model,
                                          const CompressOptions& opt = {},
                                          const LpcConfig& lpc_cfg = {})
{
    if (method == Method::LpcRice)
        return lpc_compress_clip(clip, lpc_cfg);
    require(model != nullptr, "LM methods need a model checkpoint");
    return lm_compress_clip(clip, method, *model, opt);
}

// ---------------------------------------------------------------------------
// Decompression. LM containers refuse to decode unless the supplied model's
// content hash matches the header; the decoded clip is bit-exact at the
// container's effective bit depth.

inline PcmClip decompress_container(std::span<const uint8_t> file, const Checkpoint* model,
                                    ContainerHeader* header_out = nullptr)
{
    ContainerHeader h = parse_container_header(file);
    if (header_out != nullptr)
        *header_out = h;
    std::span<const uint8_t> payload = file.subspan(kContainerHeaderSize);

    if (h.method == Method::LpcRice) {
        uint64_t consumed = 0;
        PcmClip clip = lpc_decode_payload(payload, h.payload_bits, h.bit_depth,
                                          size_t(h.channels), h.frames_per_channel,
                                          h.sample_rate, &consumed);
        uint64_t min_consumed = h.payload_bits > 7 ? h.payload_bits - 7 : 0;
        require(consumed >= min_consumed, "corrupt payload: trailing data after the last frame");
        clip.validate();
        return clip;
    }

    require(model != nullptr, "decoding an LM container needs its model checkpoint");
    require(std::equal(h.model_hash.begin(), h.model_hash.end(), model->content_hash.begin()),
            "model hash mismatch: container was coded with a different checkpoint");

    bool trilobyte = h.method == Method::LmTrilobyte;
    int B = trilobyte ? h.bytes_per_sample() : 1;
    uint64_t n_tokens = h.total_samples() * uint64_t(B);

    std::optional<MaskSchedule> mask;
    if (h.effective_b < h.bit_depth)
        mask = MaskSchedule{B, h.effective_b / 8};

    auto coder_model = model->instantiate();
    uint64_t consumed = 0;
    std::vector<uint32_t> tokens = decode_tokens(payload, h.payload_bits, *coder_model, n_tokens,
                                                 h.precision, mask ? &*mask : nullptr, &consumed);
    if (n_tokens > 0)
        require(consumed >= h.payload_bits,
                "corrupt payload: coded data left over after the last token");

    TokenStream stream;
    stream.scheme = trilobyte ? Scheme::Trilobyte : Scheme::SampleLevel;
    stream.bit_depth = h.bit_depth;
    stream.vocab_size = model->vocab();
    if (model->vocab() == 257)
        stream.mask_token_id = kMaskToken;
    stream.bytes_per_sample = B;
    stream.order = h.order;
    stream.frames_per_channel = h.frames_per_channel;
    stream.tokens = std::move(tokens);

    UnsignedSequence seq;
    if (h.effective_b < h.bit_depth)
        seq = detokenize_trilobyte(strip_mask_to_effective(stream, h.effective_b));
    else if (trilobyte)
        seq = detokenize_trilobyte(stream);
    else
        seq = detokenize_samples(stream);

    PcmClip clip = from_unsigned(seq, h.sample_rate);
    return clip;
}

// Compression rate as reported by the harness: uncompressed data-chunk bits
// over whole-container bits, header included.
inline double container_rate(const PcmClip& clip, size_t container_bytes)
{
    uint64_t data_bits = clip.frames() * clip.channel_count() * uint64_t(clip.bit_depth);
    return container_bytes == 0 ? 0.0 : double(data_bits) / double(container_bytes * 8);
}

} // namespace trlb
