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
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "container.hpp"

namespace trlb {

// ---------------------------------------------------------------------------
// Report rows. CSV schema (fixed):
//   dataset,method,b,effective_b,f_s,c,rate,bpb,samples_per_sec,wall_ms
// Estimate rows (rates derived from model loss, no bitstream produced) carry
// a "+est" suffix on the method.

struct ReportRow {
    std::string dataset;
    std::string method;
    int b = 16;
    int effective_b = 16;
    uint32_t f_s = 44100;
    int c = 1;
    double rate = 0.0;
    double bpb = 0.0;
    double samples_per_sec = 0.0;
    double wall_ms = 0.0;
};

namespace detail {

inline std::string fmt_g(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace detail

inline std::string report_csv(std::span<const ReportRow> rows)
{
    std::ostringstream os;
    os << "dataset,method,b,effective_b,f_s,c,rate,bpb,samples_per_sec,wall_ms\n";
    for (const auto& r : rows) {
        os << r.dataset << "," << r.method << "," << r.b << "," << r.effective_b << ","
           << r.f_s << "," << r.c << "," << detail::fmt_g(r.rate) << "," << detail::fmt_g(r.bpb)
           << "," << detail::fmt_g(r.samples_per_sec) << "," << detail::fmt_g(r.wall_ms) << "\n";
    }
    return os.str();
}

// Aligned table grouped by bit depth: one line per dataset, one column per
// method, best rate per line marked with '*' (ties all marked).
inline std::string report_table(std::span<const ReportRow> rows)
{
    std::vector<std::string> methods;
    for (const auto& r : rows)
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
            methods.push_back(r.method);

    struct Line {
        int b;
        std::string dataset;
        std::map<std::string, double> rate;
    };
    std::vector<Line> lines;
    for (const auto& r : rows) {
        auto it = std::find_if(lines.begin(), lines.end(), [&](const Line& l) {
            return l.b == r.b && l.dataset == r.dataset;
        });
        if (it == lines.end()) {
            lines.push_back({r.b, r.dataset, {}});
            it = lines.end() - 1;
        }
        it->rate[r.method] = r.rate;
    }
    std::stable_sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
        return a.b < b.b;
    });

    size_t name_w = 7;
    for (const auto& l : lines)
        name_w = std::max(name_w, l.dataset.size());
    std::vector<size_t> col_w;
    for (const auto& m : methods)
        col_w.push_back(std::max<size_t>(m.size(), 9));

    std::ostringstream os;
    os << std::string(name_w, ' ') << "  ";
    for (size_t i = 0; i < methods.size(); i++)
        os << std::string(col_w[i] + 2 - methods[i].size(), ' ') << methods[i];
    os << "\n";

    int current_b = -1;
    for (const auto& l : lines) {
        if (l.b != current_b) {
            current_b = l.b;
            os << "-- " << current_b << "-bit " << std::string(name_w, '-') << "\n";
        }
        os << l.dataset << std::string(name_w - l.dataset.size(), ' ') << "  ";
        double best = 0.0;
        for (auto& [m, v] : l.rate)
            best = std::max(best, v);
        for (size_t i = 0; i < methods.size(); i++) {
            auto it = l.rate.find(methods[i]);
            std::string cell = it == l.rate.end()
                                   ? std::string("-")
                                   : detail::fmt_g(it->second) + (it->second == best ? "*" : "");
            os << std::string(col_w[i] + 2 - cell.size(), ' ') << cell;
        }
        os << "\n";
    }
    os << "(* best rate per line; transfer rows exclude masked byte positions"
          " from their rate denominators)\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Dataset scanning and config files.

inline std::vector<std::string> scan_wav_dir(const std::string& dir)
{
    namespace fs = std::filesystem;
    require(fs::is_directory(dir), dir + " is not a directory");
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file())
            continue;
        std::string ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
        if (ext == ".wav")
            paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
    return paths;
}

// Flat key=value file; '#' starts a comment, blank lines ignored.
inline std::map<std::string, std::string> parse_config_file(const std::string& path)
{
    auto bytes = read_file(path);
    std::map<std::string, std::string> kv;
    std::string text(bytes.begin(), bytes.end());
    std::istringstream is(text);
    std::string line;
    auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    int lineno = 0;
    while (std::getline(is, line)) {
        lineno++;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#')
            continue;
        size_t eq = t.find('=');
        require(eq != std::string::npos,
                path + ":" + std::to_string(lineno) + ": expected key=value");
        kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return kv;
}

// ---------------------------------------------------------------------------
// Bounded worker pool over file indices; results keyed by index so assembly
// order never depends on completion order.

template <class F>
inline void parallel_for(size_t n, int threads, F&& f)
{
    int workers = std::max(1, std::min<int>(threads, int(n)));
    if (workers <= 1) {
        for (size_t i = 0; i < n; i++)
            f(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error)
                    first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; w++)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Model resolution for CLI specs: "uniform", "kt", "kt:<order>", or a
// checkpoint path.

inline int default_kt_order(Method method) { return method == Method::LmSampleLevel ? 2 : 3; }

inline Checkpoint resolve_model(const std::string& spec, Method method, int bit_depth,
                                bool transfer)
{
    require(method != Method::LpcRice, "lpc-rice takes no model");
    uint32_t vocab;
    if (method == Method::LmSampleLevel) {
        require(bit_depth <= 16, "sample-level vocabulary is intractable beyond 16-bit");
        vocab = uint32_t(1) << bit_depth;
        require(!transfer, "transfer masking needs the trilobyte method");
    } else {
        vocab = transfer ? 257 : 256;
    }
    if (spec.empty() || spec == "kt")
        return checkpoint_from_kt(std::make_shared<KTContextModel>(default_kt_order(method), vocab));
    if (spec.rfind("kt:", 0) == 0) {
        int order = std::stoi(spec.substr(3));
        return checkpoint_from_kt(std::make_shared<KTContextModel>(order, vocab));
    }
    if (spec == "uniform")
        return checkpoint_from_uniform(vocab);
    Checkpoint ck = load_checkpoint(spec);
    return ck;
}

// ---------------------------------------------------------------------------
// Estimate path: rates from model loss without producing a bitstream.

struct EstimateResult {
    RateReport report;
    TokenStream stream; // the tokenized view that was scored
};

inline EstimateResult estimate_clip(const PcmClip& clip, Method method, const Checkpoint* model,
                                    const CompressOptions& opt = {}, const LpcConfig& lpc_cfg = {})
{
    EstimateResult out;
    if (method == Method::LpcRice) {
        uint64_t bits = 0;
        lpc_encode_payload(clip, lpc_cfg, bits);
        RateReport r;
        r.scheme = Scheme::Trilobyte;
        uint64_t audio_bytes = clip.frames() * clip.channel_count() * uint64_t(clip.bit_depth / 8);
        r.bits_per_byte = audio_bytes == 0 ? 0.0 : double(bits) / double(audio_bytes);
        r.compression_rate = r.bits_per_byte > 0.0 ? 8.0 / r.bits_per_byte : 0.0;
        out.report = r;
        return out;
    }

    require(model != nullptr, "LM estimates need a model checkpoint");
    int eff = opt.effective_b == 0 ? clip.bit_depth : opt.effective_b;
    ChannelOrder order = clip.channel_count() == 1 ? ChannelOrder::Mono : opt.stereo_order;
    UnsignedSequence seq = to_unsigned(clip, order);
    auto instance = model->instantiate();
    if (method == Method::LmSampleLevel) {
        require(clip.bit_depth <= 16,
                "sample-level tokenization of 24-bit audio needs a 2^24 = 16,777,216-token vocabulary");
        require(model->vocab() == (uint32_t(1) << clip.bit_depth), "model/scheme vocabulary mismatch");
        out.stream = tokenize_samples(seq);
        out.report = estimate_bpb(*instance, out.stream);
    } else if (eff < clip.bit_depth) {
        require(model->vocab() == 257, "transfer masking needs a 257-token model");
        out.stream = mask_lower_bytes(tokenize_trilobyte(seq, true), eff);
        out.report = masked_stream_rate(*instance, out.stream, eff);
    } else {
        require(model->vocab() == 256 || model->vocab() == 257, "model/scheme vocabulary mismatch");
        out.stream = tokenize_trilobyte(seq, model->vocab() == 257);
        out.report = estimate_bpb(*instance, out.stream);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Chunked evaluation: n_chunks windows of chunk_len frames drawn uniformly
// over (file, channel, offset) with a seeded generator. Chunks never span
// file boundaries and never overlap; both facts are part of the protocol.

struct ChunkEvalParams {
    size_t n_chunks = 1000;
    size_t chunk_len = 1024;
    uint64_t seed = 0;
};

struct ChunkRef {
    size_t file = 0;
    size_t channel = 0;
    uint64_t offset = 0;
};

struct ChunkEvalResult {
    std::vector<ChunkRef> chunks;
    std::vector<double> bpb; // per chunk
    double mean_bpb = 0.0;
    double sd_bpb = 0.0;
    double mean_rate = 0.0;
};

inline std::vector<ChunkRef> sample_chunks(const std::vector<const PcmClip*>& clips,
                                           const ChunkEvalParams& p)
{
    struct Slot {
        size_t file, channel;
        uint64_t starts;
    };
    std::vector<Slot> slots;
    uint64_t total = 0;
    for (size_t f = 0; f < clips.size(); f++) {
        const PcmClip& c = *clips[f];
        if (c.frames() < p.chunk_len)
            continue;
        uint64_t starts = c.frames() - p.chunk_len + 1;
        for (size_t ch = 0; ch < c.channel_count(); ch++) {
            slots.push_back({f, ch, starts});
            total += starts;
        }
    }
    require(total > 0, "dataset holds no window of the requested chunk length");

    Rng rng(p.seed);
    std::vector<ChunkRef> picked;
    std::vector<std::vector<std::pair<uint64_t, uint64_t>>> used(slots.size());
    size_t attempts = 0, max_attempts = p.n_chunks * 1000 + 1000;
    while (picked.size() < p.n_chunks) {
        require(++attempts <= max_attempts,
                "dataset too small to place " + std::to_string(p.n_chunks) + " non-overlapping chunks");
        uint64_t g = rng.below(total);
        size_t si = 0;
        while (g >= slots[si].starts) {
            g -= slots[si].starts;
            si++;
        }
        uint64_t start = g, end = g + p.chunk_len;
        bool overlap = false;
        for (auto& [a, b] : used[si])
            if (start < b && a < end) {
                overlap = true;
                break;
            }
        if (overlap)
            continue;
        used[si].push_back({start, end});
        picked.push_back({slots[si].file, slots[si].channel, start});
    }
    return picked;
}

inline ChunkEvalResult eval_chunks(const std::vector<const PcmClip*>& clips, Method method,
                                   const Checkpoint* model, const ChunkEvalParams& p,
                                   const LpcConfig& lpc_cfg = {}, int threads = 1)
{
    ChunkEvalResult out;
    out.chunks = sample_chunks(clips, p);
    out.bpb.assign(out.chunks.size(), 0.0);
    parallel_for(out.chunks.size(), threads, [&](size_t i) {
        const ChunkRef& ref = out.chunks[i];
        const PcmClip& src = *clips[ref.file];
        PcmClip chunk;
        chunk.bit_depth = src.bit_depth;
        chunk.sample_rate = src.sample_rate;
        chunk.channels.assign(1, {});
        chunk.channels[0].assign(src.channels[ref.channel].begin() + long(ref.offset),
                                 src.channels[ref.channel].begin() + long(ref.offset + p.chunk_len));
        out.bpb[i] = estimate_clip(chunk, method, model, {}, lpc_cfg).report.bits_per_byte;
    });

    double mean = 0.0;
    for (double v : out.bpb)
        mean += v;
    mean /= double(out.bpb.size());
    double var = 0.0;
    for (double v : out.bpb)
        var += (v - mean) * (v - mean);
    out.mean_bpb = mean;
    out.sd_bpb = out.bpb.size() > 1 ? std::sqrt(var / double(out.bpb.size() - 1)) : 0.0;
    out.mean_rate = mean > 0.0 ? 8.0 / mean : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// KT "training": one deterministic streaming pass over the corpus, adapting
// counts and logging the adaptive bits/byte as it goes.

struct KtTrainLog {
    std::string item;
    double bpb = 0.0;
};

struct KtTrainResult {
    std::shared_ptr<KTContextModel> model;
    std::vector<KtTrainLog> log;
};

inline KtTrainResult train_kt_on_corpus(const std::vector<TokenStream>& corpus,
                                        const std::vector<std::string>& names,
                                        int order, uint32_t vocab, double mask_dropout_p = 0.0,
                                        uint64_t seed = 0)
{
    require(!corpus.empty(), "training corpus is empty");
    KtTrainResult out;
    out.model = std::make_shared<KTContextModel>(order, vocab);
    std::vector<double> probs(vocab);
    Rng rng(seed);
    for (size_t f = 0; f < corpus.size(); f++) {
        TokenStream ts = corpus[f];
        if (mask_dropout_p > 0.0) {
            require(vocab >= 257, "mask dropout requires the transfer vocabulary");
            ts = apply_training_dropout(ts, mask_dropout_p, rng);
        }
        double bits = 0.0;
        for (uint32_t tok : ts.tokens) {
            out.model->predict(probs);
            bits += -std::log2(probs[tok]);
            out.model->update(tok);
        }
        double bpb = ts.tokens.empty() ? 0.0 : bits / double(ts.tokens.size());
        out.log.push_back({names.size() > f ? names[f] : "item" + std::to_string(f), bpb});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Optional external FLAC encoder, discovered through TRLB_FLAC_BIN. Absence
// is not an error: rows are reported unavailable and the exit stays clean.

struct FlacAdapterResult {
    bool available = false;
    bool ok = false;
    size_t compressed_bytes = 0;
    double rate = 0.0;
    std::string message;
};

inline FlacAdapterResult external_flac_adapter(const std::string& wav_path, int level)
{
    require(level >= 0 && level <= 8, "FLAC level must lie in [0, 8]");
    FlacAdapterResult res;
    const char* bin = std::getenv("TRLB_FLAC_BIN");
    if (bin == nullptr || *bin == '\0') {
        res.message = "unavailable: TRLB_FLAC_BIN is not set";
        return res;
    }
    res.available = true;

    std::string out_path = wav_path + ".trlb-flac-tmp.flac";
    std::string cmd = std::string("\"") + bin + "\" -f -" + std::to_string(level)
                      + " -o \"" + out_path + "\" \"" + wav_path + "\" 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    require(pipe != nullptr, "failed to launch the FLAC encoder");
    std::string output;
    char buf[256];
    while (fgets(buf, sizeof buf, pipe) != nullptr)
        output += buf;
    int status = pclose(pipe);
    if (status != 0) {
        res.message = "flac exited with status " + std::to_string(status) + ": " + output;
        std::filesystem::remove(out_path);
        return res;
    }

    auto wav = read_file(wav_path);
    PcmClip clip = parse_wav(wav);
    res.compressed_bytes = size_t(std::filesystem::file_size(out_path));
    res.rate = container_rate(clip, res.compressed_bytes);
    res.ok = true;
    res.message = "ok";
    std::filesystem::remove(out_path);
    return res;
}

} // namespace trlb
