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

#include "common.hpp"
#include "model.hpp"
#include "tokenizer.hpp"

namespace trlb {

// Model-loss view of compression performance: b_theta is the average number
// of bits the model needs per token, which is what the arithmetic coder will
// spend up to quantization and termination. rate = 8 / bpb throughout.
struct RateReport {
    double b_theta = 0.0;          // bits per token
    double bits_per_byte = 0.0;    // bits per byte of source audio
    double compression_rate = 0.0;
    Scheme scheme = Scheme::Trilobyte;
    uint64_t token_count = 0;
    uint64_t coded_token_count = 0; // excludes zero-cost mask positions
};

// Streams the tokens through predict/update and accumulates -log2 P. The
// model must be fresh (or an intentional pre-trained starting state); it is
// mutated in place exactly as the encoder would mutate it.
inline RateReport estimate_bpb(PredictiveModel& model, const TokenStream& stream)
{
    std::vector<double> probs(model.vocab_size());
    double bits = 0.0;
    for (uint32_t tok : stream.tokens) {
        require(tok < model.vocab_size(), "token outside model vocabulary");
        model.predict(probs);
        bits += -std::log2(probs[tok]);
        model.update(tok);
    }

    RateReport r;
    r.scheme = stream.scheme;
    r.token_count = stream.tokens.size();
    r.coded_token_count = stream.tokens.size();
    r.b_theta = stream.tokens.empty() ? 0.0 : bits / double(stream.tokens.size());
    if (stream.scheme == Scheme::Trilobyte) {
        r.bits_per_byte = r.b_theta; // tokens are bytes
    } else {
        r.bits_per_byte = r.b_theta * 8.0 / double(stream.bit_depth);
    }
    r.compression_rate = r.bits_per_byte > 0.0 ? 8.0 / r.bits_per_byte : 0.0;
    return r;
}

// Rate of a transfer-masked trilobyte stream. Mask positions cost zero bits
// (their placement follows from the header) and are excluded from the
// denominator: only the effective_b/8 coded bytes per sample count as
// payload. That convention is stamped into every report this toolkit emits.
inline RateReport masked_stream_rate(PredictiveModel& model, const TokenStream& stream, int effective_b)
{
    require(stream.scheme == Scheme::Trilobyte, "masked rates apply to trilobyte streams");
    require(model.vocab_size() >= 257, "model lacks the mask token");
    require(effective_b % 8 == 0 && effective_b >= 8 && effective_b <= stream.bit_depth,
            "bad effective bit depth");

    int B = stream.bytes_per_sample;
    int keep = effective_b / 8;
    std::vector<double> probs(model.vocab_size());
    double bits = 0.0;
    uint64_t coded = 0;
    for (size_t i = 0; i < stream.tokens.size(); i++) {
        uint32_t tok = stream.tokens[i];
        bool masked = int(i % size_t(B)) >= keep;
        if (masked) {
            require(tok == kMaskToken, "mask schedule mismatch at position " + std::to_string(i));
            model.update(tok);
            continue;
        }
        require(tok < 256, "coded position holds a non-byte token");
        model.predict(probs);
        bits += -std::log2(probs[tok]);
        model.update(tok);
        coded++;
    }

    RateReport r;
    r.scheme = Scheme::Trilobyte;
    r.token_count = stream.tokens.size();
    r.coded_token_count = coded;
    r.b_theta = coded == 0 ? 0.0 : bits / double(coded);
    r.bits_per_byte = r.b_theta;
    r.compression_rate = r.bits_per_byte > 0.0 ? 8.0 / r.bits_per_byte : 0.0;
    return r;
}

} // namespace trlb
