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
#include <cmath>
#include <trilobyte/container.hpp>

#include "support/synth.hpp"

using namespace trlb;

namespace {

Checkpoint kt_checkpoint(int order = 3, uint32_t vocab = 256)
{
    return checkpoint_from_kt(std::make_shared<KTContextModel>(order, vocab));
}

uint64_t clip_digest(const PcmClip& c)
{
    uint64_t h = kFnv64Offset;
    h = fnv1a64_u32(h, uint32_t(c.bit_depth));
    h = fnv1a64_u32(h, c.sample_rate);
    for (const auto& ch : c.channels)
        h = fnv1a64(h, ch.data(), ch.size() * sizeof(int32_t));
    return h;
}

} // namespace

TEST_CASE("container header bytes are laid out exactly as documented")
{
    ContainerHeader h;
    h.method = Method::LmTrilobyte;
    h.bit_depth = 24;
    h.effective_b = 16;
    h.sample_rate = 44100;
    h.channels = 2;
    h.order = ChannelOrder::LeftFirst;
    h.frames_per_channel = 0x0102030405060708ULL;
    for (int i = 0; i < 16; i++)
        h.model_hash[size_t(i)] = uint8_t(i + 1);
    h.precision = 16;
    h.payload_bits = 9; // 2 payload bytes

    std::vector<uint8_t> payload = {0xAB, 0x80};
    auto file = build_container(h, payload);
    REQUIRE(file.size() == kContainerHeaderSize + 2);
    REQUIRE(std::memcmp(file.data(), "TRLB", 4) == 0);
    REQUIRE(file[4] == 1);               // version
    REQUIRE(file[5] == 0);               // method tag
    REQUIRE(file[6] == 24);              // b
    REQUIRE(file[7] == 16);              // effective_b
    REQUIRE(get_le(&file[8], 4) == 44100);
    REQUIRE(file[12] == 2);              // channels
    REQUIRE(file[13] == 1);              // left-first
    REQUIRE(get_le(&file[14], 8) == 0x0102030405060708ULL);
    REQUIRE(file[22] == 1);
    REQUIRE(file[37] == 16);             // last hash byte
    REQUIRE(file[38] == 16);             // precision
    REQUIRE(get_le(&file[39], 8) == 9);  // payload bits
    REQUIRE(file[47] == 0xAB);

    auto parsed = parse_container_header(file);
    REQUIRE(parsed.method == Method::LmTrilobyte);
    REQUIRE(parsed.bit_depth == 24);
    REQUIRE(parsed.effective_b == 16);
    REQUIRE(parsed.frames_per_channel == h.frames_per_channel);
    REQUIRE(parsed.payload_bits == 9);
}

TEST_CASE("every method round-trips bit-exactly")
{
    auto ck256 = kt_checkpoint();
    for (int depth : {8, 16, 24})
        for (int channels : {1, 2}) {
            auto clip = synth::sine_clip(depth, channels, 600, 16000, 330.0, 0.4);
            auto tri = lm_compress_clip(clip, Method::LmTrilobyte, ck256);
            REQUIRE(decompress_container(tri, &ck256).channels == clip.channels);

            if (depth <= 16) {
                auto cks = kt_checkpoint(2, uint32_t(1) << depth);
                auto smp = lm_compress_clip(clip, Method::LmSampleLevel, cks);
                REQUIRE(decompress_container(smp, &cks).channels == clip.channels);
            }

            auto lpc = lpc_compress_clip(clip);
            REQUIRE(decompress_container(lpc, nullptr).channels == clip.channels);
        }
}

TEST_CASE("sample-level refuses 24-bit input, trilobyte accepts it")
{
    auto clip = synth::noise_clip(24, 1, 400, 44100, 5);
    auto cks = kt_checkpoint(2, 65536);
    REQUIRE_THROWS_WITH(lm_compress_clip(clip, Method::LmSampleLevel, cks),
                        Catch::Matchers::ContainsSubstring("16,777,216"));

    auto ck = kt_checkpoint();
    auto tri = lm_compress_clip(clip, Method::LmTrilobyte, ck);
    REQUIRE(decompress_container(tri, &ck).channels == clip.channels);
}

TEST_CASE("transfer containers decode to the effective depth")
{
    auto clip = synth::sine_clip(24, 1, 800, 16000, 220.0, 0.6);
    auto ck = kt_checkpoint(3, 257);
    for (int eff : {8, 16, 24}) {
        CompressOptions opt;
        opt.effective_b = eff;
        auto file = lm_compress_clip(clip, Method::LmTrilobyte, ck, opt);
        ContainerHeader h;
        auto out = decompress_container(file, &ck, &h);
        REQUIRE(h.effective_b == eff);
        REQUIRE(out.bit_depth == eff);
        auto want = requantize_clip(clip, eff);
        REQUIRE(out.channels == want.channels);
    }
    CompressOptions bad;
    bad.effective_b = 16;
    auto ck256 = kt_checkpoint(3, 256);
    REQUIRE_THROWS_WITH(lm_compress_clip(clip, Method::LmTrilobyte, ck256, bad),
                        Catch::Matchers::ContainsSubstring("mask token"));
}

TEST_CASE("stereo channel order is honored end to end")
{
    auto clip = synth::sine_clip(16, 2, 500, 8000, 120.0, 0.3);
    auto ck = kt_checkpoint();
    CompressOptions opt;
    opt.stereo_order = ChannelOrder::RightFirst;
    auto file = lm_compress_clip(clip, Method::LmTrilobyte, ck, opt);
    ContainerHeader h;
    auto out = decompress_container(file, &ck, &h);
    REQUIRE(h.order == ChannelOrder::RightFirst);
    REQUIRE(out.channels == clip.channels);
}

TEST_CASE("wrong model hash is refused before any decoding")
{
    auto clip = synth::sine_clip(16, 1, 300, 8000, 100.0);
    auto ck = kt_checkpoint(3, 256);
    auto file = lm_compress_clip(clip, Method::LmTrilobyte, ck);
    auto other = kt_checkpoint(2, 256);
    REQUIRE_THROWS_WITH(decompress_container(file, &other),
                        Catch::Matchers::ContainsSubstring("hash mismatch"));
    REQUIRE_THROWS_WITH(decompress_container(file, nullptr),
                        Catch::Matchers::ContainsSubstring("model checkpoint"));
}

TEST_CASE("version and structural validation reject bad containers")
{
    auto clip = synth::sine_clip(16, 1, 100, 8000, 100.0);
    auto ck = kt_checkpoint();
    auto file = lm_compress_clip(clip, Method::LmTrilobyte, ck);

    auto bad_version = file;
    bad_version[4] = 2;
    REQUIRE_THROWS_WITH(parse_container_header(bad_version),
                        Catch::Matchers::ContainsSubstring("version"));

    auto truncated = file;
    truncated.resize(truncated.size() - 1);
    REQUIRE_THROWS_AS(parse_container_header(truncated), Error);

    auto tiny = std::vector<uint8_t>(10, 0);
    REQUIRE_THROWS_AS(parse_container_header(tiny), Error);
}

TEST_CASE("header fuzz: mutations are rejected or decode to a different clip, never a silent lie")
{
    auto clip = synth::sine_clip(16, 2, 300, 8000, 100.0, 0.4);
    auto ck = kt_checkpoint();
    auto file = lm_compress_clip(clip, Method::LmTrilobyte, ck);
    uint64_t original = clip_digest(decompress_container(file, &ck));

    Rng rng(99);
    size_t rejected = 0, detected = 0, benign = 0;
    for (size_t pos = 0; pos < kContainerHeaderSize; pos++) {
        for (int t = 0; t < 6; t++) {
            auto mutated = file;
            uint8_t delta = uint8_t(1 + rng.below(255));
            mutated[pos] = uint8_t(mutated[pos] ^ delta);
            if (mutated == file)
                continue;
            try {
                auto out = decompress_container(mutated, &ck);
                if (clip_digest(out) == original)
                    benign++; // decoded identically (e.g. masked no-op mutation)
                else
                    detected++; // different output; the comparison detects it
            } catch (const Error&) {
                rejected++;
            }
        }
    }
    // structural fields (magic, version, method, depths, counts, hash,
    // precision, payload length) dominate the header: most mutations must be
    // outright rejected, and nothing may decode back to the original claim
    REQUIRE(benign == 0);
    REQUIRE(rejected > detected);
    REQUIRE(rejected + detected > 200);
}

TEST_CASE("payload bit flips never pass silently")
{
    auto clip = synth::sine_clip(16, 1, 400, 8000, 100.0, 0.4);
    auto ck = kt_checkpoint();
    auto file = lm_compress_clip(clip, Method::LmTrilobyte, ck);
    uint64_t original = clip_digest(clip);
    uint64_t payload_bits = parse_container_header(file).payload_bits;

    Rng rng(7);
    size_t errored = 0, changed = 0, tail_benign = 0;
    for (int t = 0; t < 120; t++) {
        auto mutated = file;
        uint64_t bit = rng.below(payload_bits);
        mutated[kContainerHeaderSize + size_t(bit / 8)] ^= uint8_t(0x80u >> (bit % 8));
        try {
            auto out = decompress_container(mutated, &ck);
            if (clip_digest(out) == original) {
                // only the final termination tail can absorb a flip silently
                REQUIRE(bit >= payload_bits - 32);
                tail_benign++;
            } else {
                changed++;
            }
        } catch (const Error&) {
            errored++;
        }
    }
    REQUIRE(errored + changed + tail_benign == 120);
    REQUIRE(changed + errored > 100);
}

TEST_CASE("LPC payload tampering is caught by decode checks")
{
    auto clip = synth::sine_clip(16, 1, 2000, 8000, 100.0, 0.4);
    auto file = lpc_compress_clip(clip);
    uint64_t original = clip_digest(clip);
    uint64_t payload_bits = parse_container_header(file).payload_bits;

    Rng rng(17);
    size_t silent = 0;
    for (int t = 0; t < 120; t++) {
        auto mutated = file;
        uint64_t bit = rng.below(payload_bits);
        mutated[kContainerHeaderSize + size_t(bit / 8)] ^= uint8_t(0x80u >> (bit % 8));
        try {
            auto out = decompress_container(mutated, nullptr);
            if (clip_digest(out) == original)
                silent++;
        } catch (const Error&) {
        }
    }
    REQUIRE(silent == 0);
}

TEST_CASE("rate accounting uses data-chunk bits over container bits")
{
    auto clip = synth::silence_clip(16, 1, 4096, 8000);
    auto file = lpc_compress_clip(clip);
    double rate = container_rate(clip, file.size());
    REQUIRE(rate == Catch::Approx(double(4096 * 16) / double(file.size() * 8)));
}

TEST_CASE("checkpoint serialization round trip with hash verification")
{
    auto kt = std::make_shared<KTContextModel>(2, 257);
    for (uint32_t s : {1u, 2u, 3u, 2u, 1u, 256u})
        kt->update(s);
    auto ck = checkpoint_from_kt(kt);
    auto bytes = serialize_checkpoint(ck);
    auto back = parse_checkpoint(bytes);
    REQUIRE(back.kind == ModelKind::KT);
    REQUIRE(back.content_hash == ck.content_hash);

    // the reloaded counts predict identically
    auto a = ck.instantiate();
    auto b = back.instantiate();
    std::vector<double> pa(257), pb(257);
    for (uint32_t s : {3u, 1u, 2u}) {
        a->predict(pa);
        b->predict(pb);
        REQUIRE(pa == pb);
        a->update(s);
        b->update(s);
    }

    auto corrupt = bytes;
    corrupt[bytes.size() / 2] ^= 0x40;
    REQUIRE_THROWS_AS(parse_checkpoint(corrupt), Error);

    TransformerConfig cfg;
    cfg.vocab = 257;
    cfg.d_model = 8;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.context_len = 8;
    auto tf = std::make_shared<TinyTransformer>(TinyTransformer::random_init(cfg, 9));
    auto ckt = checkpoint_from_transformer(tf);
    auto tf_bytes = serialize_checkpoint(ckt);
    auto tf_back = parse_checkpoint(tf_bytes);
    REQUIRE(tf_back.transformer->params == tf->params);
    REQUIRE(tf_back.content_hash == ckt.content_hash);

    auto cku = checkpoint_from_uniform(256);
    auto u_back = parse_checkpoint(serialize_checkpoint(cku));
    REQUIRE(u_back.uniform_vocab == 256);
}

TEST_CASE("transformer-coded containers round trip through checkpoints")
{
    TransformerConfig cfg;
    cfg.vocab = 256;
    cfg.d_model = 8;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.context_len = 16;
    auto ck = checkpoint_from_transformer(
        std::make_shared<TinyTransformer>(TinyTransformer::random_init(cfg, 33)));
    auto clip = synth::sine_clip(16, 1, 200, 8000, 250.0, 0.4);
    auto file = lm_compress_clip(clip, Method::LmTrilobyte, ck);
    REQUIRE(decompress_container(file, &ck).channels == clip.channels);
}

TEST_CASE("empty clips produce decodable containers")
{
    PcmClip clip;
    clip.bit_depth = 16;
    clip.sample_rate = 8000;
    clip.channels = {{}};
    auto ck = kt_checkpoint();
    auto file = lm_compress_clip(clip, Method::LmTrilobyte, ck);
    auto out = decompress_container(file, &ck);
    REQUIRE(out.frames() == 0);

    auto lpc = lpc_compress_clip(clip);
    REQUIRE(decompress_container(lpc, nullptr).frames() == 0);
}
