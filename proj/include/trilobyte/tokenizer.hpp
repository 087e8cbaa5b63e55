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

#include <optional>
#include <vector>

#include "common.hpp"
#include "pcm.hpp"

namespace trlb {

enum class Scheme : uint8_t {
    SampleLevel = 0,
    Trilobyte = 1,
};

inline const char* scheme_name(Scheme s)
{
    return s == Scheme::SampleLevel ? "sample-level" : "trilobyte";
}

struct TokenStream {
    std::vector<uint32_t> tokens;
    Scheme scheme = Scheme::Trilobyte;
    int bit_depth = 16;
    uint32_t vocab_size = 256;
    std::optional<uint32_t> mask_token_id; // = 256 when the null token is enabled
    int bytes_per_sample = 1;              // ceil(b/8); meaningful for Trilobyte
    ChannelOrder order = ChannelOrder::Mono;
    uint64_t frames_per_channel = 0;

    size_t sample_count() const
    {
        return scheme == Scheme::Trilobyte ? tokens.size() / size_t(bytes_per_sample)
                                           : tokens.size();
    }
};

struct Diagnostics {
    std::vector<std::string> warnings;
    void warn(std::string msg) { warnings.push_back(std::move(msg)); }
};

inline int bytes_per_sample_for(int bit_depth) { return (bit_depth + 7) / 8; }

// ---------------------------------------------------------------------------
// Sample-level tokenization: one token per sample, vocabulary 2^b.

inline TokenStream tokenize_samples(const UnsignedSequence& seq, Diagnostics* diag = nullptr)
{
    if (seq.bit_depth == 24 && diag)
        diag->warn("sample-level tokenization of 24-bit audio implies a 16,777,216-token vocabulary; no bundled model can code it");
    TokenStream ts;
    ts.scheme = Scheme::SampleLevel;
    ts.bit_depth = seq.bit_depth;
    ts.vocab_size = uint32_t(1) << seq.bit_depth;
    ts.bytes_per_sample = 1;
    ts.order = seq.order;
    ts.frames_per_channel = seq.frames_per_channel;
    ts.tokens.assign(seq.values.begin(), seq.values.end());
    return ts;
}

inline UnsignedSequence detokenize_samples(const TokenStream& ts)
{
    require(ts.scheme == Scheme::SampleLevel, "stream is not sample-level tokenized");
    UnsignedSequence seq;
    seq.bit_depth = ts.bit_depth;
    seq.order = ts.order;
    seq.frames_per_channel = ts.frames_per_channel;
    seq.values.assign(ts.tokens.begin(), ts.tokens.end());
    return seq;
}

// ---------------------------------------------------------------------------
// Trilobyte tokenization: each b-bit sample becomes ceil(b/8) byte tokens,
// most significant byte first, over a constant 256-token vocabulary (257 with
// the null mask token enabled).

inline TokenStream tokenize_trilobyte(const UnsignedSequence& seq, bool enable_mask_token = false)
{
    int B = bytes_per_sample_for(seq.bit_depth);
    TokenStream ts;
    ts.scheme = Scheme::Trilobyte;
    ts.bit_depth = seq.bit_depth;
    ts.vocab_size = enable_mask_token ? 257 : 256;
    if (enable_mask_token)
        ts.mask_token_id = kMaskToken;
    ts.bytes_per_sample = B;
    ts.order = seq.order;
    ts.frames_per_channel = seq.frames_per_channel;
    ts.tokens.reserve(seq.values.size() * size_t(B));
    for (uint32_t x : seq.values)
        for (int j = B - 1; j >= 0; j--)
            ts.tokens.push_back((x >> (8 * j)) & 0xFF);
    return ts;
}

inline UnsignedSequence detokenize_trilobyte(const TokenStream& ts)
{
    require(ts.scheme == Scheme::Trilobyte, "stream is not trilobyte tokenized");
    int B = ts.bytes_per_sample;
    require(ts.tokens.size() % size_t(B) == 0,
            "token count " + std::to_string(ts.tokens.size()) + " not divisible by bytes-per-sample " + std::to_string(B));
    UnsignedSequence seq;
    seq.bit_depth = ts.bit_depth;
    seq.order = ts.order;
    seq.frames_per_channel = ts.frames_per_channel;
    seq.values.reserve(ts.tokens.size() / size_t(B));
    for (size_t i = 0; i < ts.tokens.size(); i += size_t(B)) {
        uint32_t x = 0;
        for (int j = 0; j < B; j++) {
            uint32_t tok = ts.tokens[i + size_t(j)];
            require(tok < 256, tok == kMaskToken
                                   ? "mask token encountered during detokenization"
                                   : "token id " + std::to_string(tok) + " out of byte range");
            x = (x << 8) | tok;
        }
        seq.values.push_back(x);
    }
    return seq;
}

// ---------------------------------------------------------------------------
// Transfer-learning mask operations. Masking always acts on whole lower-byte
// groups of a sample; the MSB position is never touched.

inline TokenStream mask_lower_bytes(const TokenStream& ts, int effective_b)
{
    require(ts.scheme == Scheme::Trilobyte, "masking requires a trilobyte stream");
    require(ts.mask_token_id.has_value(), "stream has no mask token enabled");
    require(ts.bit_depth % 8 == 0 && effective_b % 8 == 0,
            "bit depths must be multiples of 8");
    require(effective_b >= 8 && effective_b <= ts.bit_depth,
            "effective bit depth " + std::to_string(effective_b) + " must lie in [8, " + std::to_string(ts.bit_depth) + "]");

    int B = ts.bytes_per_sample;
    int keep = effective_b / 8;
    TokenStream out = ts;
    for (size_t i = 0; i < out.tokens.size(); i++)
        if (int(i % size_t(B)) >= keep)
            out.tokens[i] = kMaskToken;
    return out;
}

// Per sample, with probability p the whole lower-byte group is replaced by
// the mask token. Deterministic for a given (stream, p, seed).
inline TokenStream apply_training_dropout(const TokenStream& ts, double p, Rng& rng)
{
    require(ts.scheme == Scheme::Trilobyte, "dropout requires a trilobyte stream");
    require(ts.mask_token_id.has_value(), "stream has no mask token enabled");
    require(p >= 0.0 && p <= 1.0, "dropout probability must lie in [0, 1]");

    int B = ts.bytes_per_sample;
    TokenStream out = ts;
    for (size_t s = 0; s * size_t(B) < out.tokens.size(); s++) {
        bool drop = rng.unit() < p;
        if (drop)
            for (int j = 1; j < B; j++)
                out.tokens[s * size_t(B) + size_t(j)] = kMaskToken;
    }
    return out;
}

// Rebuild a plain trilobyte stream at the effective depth from a masked one:
// coded byte positions are kept, masked positions dropped. Inverse of
// mask_lower_bytes composed with tokenize, used when decoding transfer
// containers.
inline TokenStream strip_mask_to_effective(const TokenStream& ts, int effective_b)
{
    require(ts.scheme == Scheme::Trilobyte, "expected a trilobyte stream");
    require(effective_b % 8 == 0 && effective_b >= 8 && effective_b <= ts.bit_depth,
            "bad effective bit depth");
    int B = ts.bytes_per_sample;
    int keep = effective_b / 8;
    TokenStream out;
    out.scheme = Scheme::Trilobyte;
    out.bit_depth = effective_b;
    out.vocab_size = 256;
    out.bytes_per_sample = keep;
    out.order = ts.order;
    out.frames_per_channel = ts.frames_per_channel;
    out.tokens.reserve(ts.tokens.size() / size_t(B) * size_t(keep));
    for (size_t i = 0; i < ts.tokens.size(); i++) {
        int j = int(i % size_t(B));
        if (j < keep) {
            require(ts.tokens[i] < 256, "coded byte position holds a non-byte token");
            out.tokens.push_back(ts.tokens[i]);
        }
    }
    return out;
}

} // namespace trlb
