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
#include <cstdlib>
#include <filesystem>
#include <trilobyte/bench.hpp>

#include "support/synth.hpp"

using namespace trlb;

TEST_CASE("CSV schema is stable byte for byte")
{
    std::vector<ReportRow> rows = {
        {"fileA.wav", "lm-trilobyte[kt]", 16, 16, 44100, 2, 2.5, 3.2, 100000.0, 12.5},
        {"fileB.wav", "lpc-rice", 8, 8, 8000, 1, 1.25, 6.4, 2000000.0, 1.0},
    };
    std::string csv = report_csv(rows);
    REQUIRE(csv ==
            "dataset,method,b,effective_b,f_s,c,rate,bpb,samples_per_sec,wall_ms\n"
            "fileA.wav,lm-trilobyte[kt],16,16,44100,2,2.5,3.2,100000,12.5\n"
            "fileB.wav,lpc-rice,8,8,8000,1,1.25,6.4,2e+06,1\n");
}

TEST_CASE("table marks the best rate per line, ties included")
{
    std::vector<ReportRow> rows = {
        {"a.wav", "m1", 16, 16, 8000, 1, 2.0, 4.0, 0, 0},
        {"a.wav", "m2", 16, 16, 8000, 1, 2.5, 3.2, 0, 0},
        {"b.wav", "m1", 16, 16, 8000, 1, 3.0, 2.6, 0, 0},
        {"b.wav", "m2", 16, 16, 8000, 1, 3.0, 2.6, 0, 0},
        {"c.wav", "m1", 8, 8, 8000, 1, 1.5, 5.3, 0, 0},
    };
    std::string table = report_table(rows);
    REQUIRE_THAT(table, Catch::Matchers::ContainsSubstring("2.5*"));
    REQUIRE_THAT(table, !Catch::Matchers::ContainsSubstring("2*"));
    // tie: both marked
    size_t first = table.find("3*");
    REQUIRE(first != std::string::npos);
    REQUIRE(table.find("3*", first + 1) != std::string::npos);
    // single row in its group: trivially best
    REQUIRE_THAT(table, Catch::Matchers::ContainsSubstring("1.5*"));
    REQUIRE_THAT(table, Catch::Matchers::ContainsSubstring("-- 8-bit"));
    REQUIRE_THAT(table, Catch::Matchers::ContainsSubstring("-- 16-bit"));
}

TEST_CASE("config files parse as flat key=value")
{
    std::string path = "/tmp/trlb_test_config.txt";
    {
        std::string text = "# comment\nkt.order = 4\n\ncoder.precision=18\n";
        write_file(path, std::span<const uint8_t>(
                             reinterpret_cast<const uint8_t*>(text.data()), text.size()));
    }
    auto kv = parse_config_file(path);
    REQUIRE(kv.at("kt.order") == "4");
    REQUIRE(kv.at("coder.precision") == "18");
    std::filesystem::remove(path);
}

TEST_CASE("parallel_for preserves result slots and propagates errors")
{
    std::vector<int> out(200, 0);
    parallel_for(out.size(), 8, [&](size_t i) { out[i] = int(i) * 3; });
    for (size_t i = 0; i < out.size(); i++)
        REQUIRE(out[i] == int(i) * 3);

    REQUIRE_THROWS_AS(parallel_for(16, 4,
                                   [&](size_t i) {
                                       if (i == 7)
                                           fail("boom");
                                   }),
                      Error);
}

TEST_CASE("model specs resolve to checkpoints")
{
    auto kt = resolve_model("kt", Method::LmTrilobyte, 16, false);
    REQUIRE(kt.kind == ModelKind::KT);
    REQUIRE(kt.vocab() == 256);

    auto kt4 = resolve_model("kt:4", Method::LmTrilobyte, 24, true);
    REQUIRE(kt4.kt->order() == 4);
    REQUIRE(kt4.vocab() == 257);

    auto uni = resolve_model("uniform", Method::LmSampleLevel, 16, false);
    REQUIRE(uni.vocab() == 65536);

    REQUIRE_THROWS_AS(resolve_model("kt", Method::LmSampleLevel, 24, false), Error);
}

TEST_CASE("estimate agrees with actual compression on the same file")
{
    auto clip = synth::ar2_clip(16, 40000, 8000, 0.9, 0.05, 25.0, 3);
    auto ck = checkpoint_from_kt(std::make_shared<KTContextModel>(3, 256));

    auto est = estimate_clip(clip, Method::LmTrilobyte, &ck);
    auto file = lm_compress_clip(clip, Method::LmTrilobyte, ck);
    uint64_t payload_bits = parse_container_header(file).payload_bits;
    double est_bits = est.report.b_theta * double(est.stream.tokens.size());
    REQUIRE(std::fabs(double(payload_bits) - est_bits) / double(payload_bits) < 0.01);

    // container-size rate can trail the estimate only by bounded overhead
    double actual_rate = container_rate(clip, file.size());
    REQUIRE(actual_rate <= est.report.compression_rate * 1.02);
    REQUIRE(actual_rate >= est.report.compression_rate * 0.95);
}

TEST_CASE("chunk sampling is deterministic and respects the protocol")
{
    auto a = synth::sine_clip(16, 2, 5000, 8000, 220.0);
    auto b = synth::noise_clip(16, 1, 3000, 8000, 5);
    std::vector<const PcmClip*> clips = {&a, &b};

    ChunkEvalParams p;
    p.n_chunks = 40;
    p.chunk_len = 256;
    p.seed = 12345;
    auto c1 = sample_chunks(clips, p);
    auto c2 = sample_chunks(clips, p);
    REQUIRE(c1.size() == 40);
    for (size_t i = 0; i < c1.size(); i++) {
        REQUIRE(c1[i].file == c2[i].file);
        REQUIRE(c1[i].channel == c2[i].channel);
        REQUIRE(c1[i].offset == c2[i].offset);
    }
    p.seed = 54321;
    auto c3 = sample_chunks(clips, p);
    bool same = true;
    for (size_t i = 0; i < c1.size(); i++)
        same = same && c1[i].offset == c3[i].offset && c1[i].file == c3[i].file;
    REQUIRE_FALSE(same);

    // never spanning, never overlapping
    std::vector<std::vector<std::pair<uint64_t, uint64_t>>> seen(4);
    for (auto& ref : c1) {
        const PcmClip& src = *clips[ref.file];
        REQUIRE(ref.offset + p.chunk_len <= src.frames());
        size_t slot = ref.file * 2 + ref.channel;
        for (auto& [s, e] : seen[slot])
            REQUIRE((ref.offset >= e || ref.offset + p.chunk_len <= s));
        seen[slot].push_back({ref.offset, ref.offset + p.chunk_len});
    }

    // a dataset with exactly one window: that window is chosen
    auto tiny = synth::sine_clip(16, 1, 256, 8000, 100.0);
    std::vector<const PcmClip*> one = {&tiny};
    p.n_chunks = 1;
    p.seed = 7;
    auto c4 = sample_chunks(one, p);
    REQUIRE(c4[0].offset == 0);
    REQUIRE(c4[0].file == 0);

    p.n_chunks = 2; // no second disjoint window exists
    REQUIRE_THROWS_AS(sample_chunks(one, p), Error);
}

TEST_CASE("chunk means approach the full-stream rate on a memoryless source")
{
    // i.i.d. uniform bytes: every window looks the same, so the per-chunk
    // mean must sit within a few percent of the whole-stream figure
    auto clip = synth::noise_clip(8, 1, 60000, 8000, 77, 1.0);
    auto ck = checkpoint_from_kt(std::make_shared<KTContextModel>(2, 256));

    ChunkEvalParams p;
    p.n_chunks = 50;
    p.chunk_len = 1024;
    p.seed = 3;
    std::vector<const PcmClip*> clips = {&clip};
    auto chunks = eval_chunks(clips, Method::LmTrilobyte, &ck, p);

    auto ck2 = checkpoint_from_kt(std::make_shared<KTContextModel>(2, 256));
    auto full = estimate_clip(clip, Method::LmTrilobyte, &ck2);
    REQUIRE(std::fabs(chunks.mean_bpb - full.report.bits_per_byte) / full.report.bits_per_byte < 0.05);
    REQUIRE(chunks.sd_bpb < 0.2);

    // uniform model: both sides are exactly 8 bits/byte
    auto cku = checkpoint_from_uniform(256);
    auto cu = eval_chunks(clips, Method::LmTrilobyte, &cku, p);
    REQUIRE(cu.mean_bpb == Catch::Approx(8.0).margin(1e-9));
    REQUIRE(estimate_clip(clip, Method::LmTrilobyte, &cku).report.bits_per_byte
            == Catch::Approx(8.0).margin(1e-9));
}

TEST_CASE("KT corpus training lowers bits per byte on structured audio")
{
    auto clip = synth::ar2_clip(16, 30000, 8000, 0.9, 0.05, 25.0, 9);
    auto seq = to_unsigned(clip, ChannelOrder::Mono);
    auto stream = tokenize_trilobyte(seq);
    auto result = train_kt_on_corpus({stream}, {"ar2"}, 3, 256);
    REQUIRE(result.log.size() == 1);
    REQUIRE(result.log[0].bpb < 8.0);

    // the trained checkpoint carries its counts through serialization
    auto ck = checkpoint_from_kt(result.model);
    auto inst = ck.instantiate();
    std::vector<double> probs(256);
    inst->predict(probs);
    double sum = 0;
    for (double p : probs)
        sum += p;
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("scan_wav_dir lists wav files sorted")
{
    namespace fs = std::filesystem;
    std::string dir = "/tmp/trlb_scan_test";
    fs::create_directories(dir);
    auto clip = synth::sine_clip(8, 1, 64, 8000, 100.0);
    for (const char* name : {"b.wav", "a.wav", "c.WAV", "notes.txt"}) {
        auto bytes = name == std::string("notes.txt") ? std::vector<uint8_t>{1, 2, 3}
                                                      : write_wav(clip);
        write_file(dir + "/" + name, bytes);
    }
    auto files = scan_wav_dir(dir);
    REQUIRE(files.size() == 3);
    REQUIRE_THAT(files[0], Catch::Matchers::EndsWith("a.wav"));
    REQUIRE_THAT(files[1], Catch::Matchers::EndsWith("b.wav"));
    REQUIRE_THAT(files[2], Catch::Matchers::EndsWith("c.WAV"));
    fs::remove_all(dir);
}

TEST_CASE("flac adapter reports unavailable cleanly when unconfigured")
{
    auto clip = synth::sine_clip(16, 1, 256, 8000, 100.0);
    std::string path = "/tmp/trlb_flac_test.wav";
    write_file(path, write_wav(clip));

    const char* saved = std::getenv("TRLB_FLAC_BIN");
    unsetenv("TRLB_FLAC_BIN");
    auto res = external_flac_adapter(path, 5);
    REQUIRE_FALSE(res.available);
    REQUIRE_THAT(res.message, Catch::Matchers::ContainsSubstring("unavailable"));

    REQUIRE_THROWS_AS(external_flac_adapter(path, 9), Error);
    REQUIRE_THROWS_AS(external_flac_adapter(path, -1), Error);

    // a configured but broken binary surfaces its message without throwing
    setenv("TRLB_FLAC_BIN", "/bin/false", 1);
    auto broken = external_flac_adapter(path, 5);
    REQUIRE(broken.available);
    REQUIRE_FALSE(broken.ok);
    REQUIRE_THAT(broken.message, Catch::Matchers::ContainsSubstring("status"));

    if (saved != nullptr)
        setenv("TRLB_FLAC_BIN", saved, 1);
    else
        unsetenv("TRLB_FLAC_BIN");
    std::filesystem::remove(path);
}
