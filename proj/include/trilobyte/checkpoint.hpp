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
#include <fstream>
#include <memory>
#include <vector>

#include "common.hpp"
#include "model.hpp"
#include "transformer.hpp"

namespace trlb {

enum class ModelKind : uint8_t {
    Uniform = 0,
    KT = 1,
    Transformer = 2,
};

inline const char* model_kind_name(ModelKind k)
{
    switch (k) {
    case ModelKind::Uniform: return "uniform";
    case ModelKind::KT: return "kt";
    case ModelKind::Transformer: return "transformer";
    }
    return "?";
}

// A model checkpoint: versioned binary serialization of config + parameters,
// closed by a 16-byte content hash. The hash is what compressed containers
// embed, so decompression can refuse a mismatched model up front.
struct Checkpoint {
    ModelKind kind = ModelKind::Uniform;
    uint32_t uniform_vocab = 256;
    std::shared_ptr<const KTContextModel> kt;
    std::shared_ptr<const TinyTransformer> transformer;
    std::array<uint8_t, 16> content_hash{};

    uint32_t vocab() const
    {
        switch (kind) {
        case ModelKind::Uniform: return uniform_vocab;
        case ModelKind::KT: return kt->vocab_size();
        case ModelKind::Transformer: return transformer->config.vocab;
        }
        return 0;
    }

    // Fresh per-stream model: learned parameters/counts carried over, stream
    // history empty.
    std::unique_ptr<PredictiveModel> instantiate() const
    {
        switch (kind) {
        case ModelKind::Uniform:
            return std::make_unique<UniformModel>(uniform_vocab);
        case ModelKind::KT:
            return kt->clone();
        case ModelKind::Transformer:
            return std::make_unique<TransformerPredictor>(transformer);
        }
        fail("bad checkpoint kind");
    }
};

constexpr char kCheckpointMagic[4] = {'T', 'R', 'L', 'M'};
constexpr uint8_t kCheckpointVersion = 1;

namespace detail {

inline std::vector<uint8_t> checkpoint_body(const Checkpoint& ck)
{
    std::vector<uint8_t> out;
    out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 4);
    out.push_back(kCheckpointVersion);
    out.push_back(uint8_t(ck.kind));
    switch (ck.kind) {
    case ModelKind::Uniform:
        put_le(out, ck.uniform_vocab, 4);
        break;
    case ModelKind::KT:
        put_le(out, ck.kt->vocab_size(), 4);
        out.push_back(uint8_t(ck.kt->order()));
        ck.kt->serialize_counts(out);
        break;
    case ModelKind::Transformer: {
        const auto& cfg = ck.transformer->config;
        put_le(out, cfg.vocab, 4);
        put_le(out, uint64_t(cfg.d_model), 4);
        put_le(out, uint64_t(cfg.n_layers), 4);
        put_le(out, uint64_t(cfg.n_heads), 4);
        put_le(out, uint64_t(cfg.context_len), 4);
        put_le(out, ck.transformer->params.size(), 8);
        for (double p : ck.transformer->params) {
            uint64_t bits;
            std::memcpy(&bits, &p, 8);
            put_le(out, bits, 8);
        }
        break;
    }
    }
    return out;
}

} // namespace detail

inline std::vector<uint8_t> serialize_checkpoint(Checkpoint& ck)
{
    std::vector<uint8_t> body = detail::checkpoint_body(ck);
    std::vector<uint8_t> hash = fnv128(body);
    std::copy(hash.begin(), hash.end(), ck.content_hash.begin());
    body.insert(body.end(), hash.begin(), hash.end());
    return body;
}

inline Checkpoint parse_checkpoint(std::span<const uint8_t> data)
{
    require(data.size() >= 4 + 1 + 1 + 16, "checkpoint too small");
    require(std::memcmp(data.data(), kCheckpointMagic, 4) == 0, "not a model checkpoint (bad magic)");
    require(data[4] == kCheckpointVersion,
            "unsupported checkpoint version " + std::to_string(int(data[4])));

    std::vector<uint8_t> body(data.begin(), data.end() - 16);
    std::vector<uint8_t> hash = fnv128(body);
    require(std::equal(hash.begin(), hash.end(), data.end() - 16),
            "checkpoint content hash mismatch (file corrupt)");

    Checkpoint ck;
    ck.kind = ModelKind(data[5]);
    std::copy(data.end() - 16, data.end(), ck.content_hash.begin());
    const uint8_t* p = data.data();
    size_t n = data.size() - 16;
    size_t off = 6;
    switch (ck.kind) {
    case ModelKind::Uniform:
        require(off + 4 <= n, "checkpoint truncated");
        ck.uniform_vocab = uint32_t(get_le(p + off, 4));
        break;
    case ModelKind::KT: {
        require(off + 5 <= n, "checkpoint truncated");
        uint32_t vocab = uint32_t(get_le(p + off, 4));
        int order = int(p[off + 4]);
        off += 5;
        auto kt = std::make_shared<KTContextModel>(order, vocab);
        kt->load_counts(p, n, off);
        ck.kt = kt;
        break;
    }
    case ModelKind::Transformer: {
        require(off + 28 <= n, "checkpoint truncated");
        TransformerConfig cfg;
        cfg.vocab = uint32_t(get_le(p + off, 4));
        cfg.d_model = int(get_le(p + off + 4, 4));
        cfg.n_layers = int(get_le(p + off + 8, 4));
        cfg.n_heads = int(get_le(p + off + 12, 4));
        cfg.context_len = int(get_le(p + off + 16, 4));
        uint64_t nparams = get_le(p + off + 20, 8);
        off += 28;
        require(off + nparams * 8 <= n, "checkpoint truncated");
        auto model = std::make_shared<TinyTransformer>(TinyTransformer::zero_init(cfg));
        require(model->params.size() == nparams,
                "checkpoint parameter count does not match its config");
        for (uint64_t i = 0; i < nparams; i++) {
            uint64_t bits = get_le(p + off + i * 8, 8);
            std::memcpy(&model->params[size_t(i)], &bits, 8);
        }
        ck.transformer = model;
        break;
    }
    default:
        fail("unknown checkpoint model kind " + std::to_string(int(data[5])));
    }
    return ck;
}

inline Checkpoint checkpoint_from_uniform(uint32_t vocab)
{
    Checkpoint ck;
    ck.kind = ModelKind::Uniform;
    ck.uniform_vocab = vocab;
    serialize_checkpoint(ck); // fills the content hash
    return ck;
}

inline Checkpoint checkpoint_from_kt(std::shared_ptr<const KTContextModel> kt)
{
    Checkpoint ck;
    ck.kind = ModelKind::KT;
    ck.kt = std::move(kt);
    // Normalize through the wire format so the stored prototype carries the
    // learned counts with a clean stream state, exactly as a reader would see.
    auto bytes = serialize_checkpoint(ck);
    return parse_checkpoint(bytes);
}

inline Checkpoint checkpoint_from_transformer(std::shared_ptr<const TinyTransformer> model)
{
    Checkpoint ck;
    ck.kind = ModelKind::Transformer;
    ck.transformer = std::move(model);
    serialize_checkpoint(ck);
    return ck;
}

// ---------------------------------------------------------------------------

inline void write_file(const std::string& path, std::span<const uint8_t> data)
{
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(data.data()), long(data.size()));
    require(f.good(), "write to " + path + " failed");
}

inline std::vector<uint8_t> read_file(const std::string& path)
{
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    require(f.good(), "cannot open " + path);
    std::streamsize size = f.tellg();
    f.seekg(0);
    std::vector<uint8_t> data(size_t(size), 0);
    f.read(reinterpret_cast<char*>(data.data()), size);
    require(f.good(), "read from " + path + " failed");
    return data;
}

inline void save_checkpoint(Checkpoint& ck, const std::string& path)
{
    auto bytes = serialize_checkpoint(ck);
    write_file(path, bytes);
}

inline Checkpoint load_checkpoint(const std::string& path)
{
    auto bytes = read_file(path);
    return parse_checkpoint(bytes);
}

} // namespace trlb
