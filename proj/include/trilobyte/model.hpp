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
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "common.hpp"

namespace trlb {

// Stateful next-token distribution provider. The arithmetic encoder and
// decoder drive two identically initialized instances through the same
// predict/update sequence; state_digest() lets callers assert lockstep.
class PredictiveModel {
public:
    virtual ~PredictiveModel() = default;

    virtual uint32_t vocab_size() const = 0;

    // Fills out (size vocab_size) with P(next = s | history): non-negative,
    // summing to 1 within 1e-9.
    virtual void predict(std::span<double> out) = 0;

    virtual void update(uint32_t symbol) = 0;
    virtual void reset() = 0;
    virtual uint64_t state_digest() const = 0;
    virtual std::unique_ptr<PredictiveModel> clone() const = 0;
};

// ---------------------------------------------------------------------------

class UniformModel final : public PredictiveModel {
public:
    explicit UniformModel(uint32_t vocab)
        : vocab_(vocab)
    {
        require(vocab >= 2, "uniform model needs a vocabulary of at least 2");
    }

    uint32_t vocab_size() const override { return vocab_; }

    void predict(std::span<double> out) override
    {
        double p = 1.0 / double(vocab_);
        std::fill(out.begin(), out.end(), p);
    }

    void update(uint32_t) override {}
    void reset() override {}
    uint64_t state_digest() const override { return fnv1a64_u32(kFnv64Offset, vocab_); }

    std::unique_ptr<PredictiveModel> clone() const override
    {
        return std::make_unique<UniformModel>(vocab_);
    }

private:
    uint32_t vocab_;
};

// ---------------------------------------------------------------------------
// Adaptive order-k context model with Krichevsky-Trofimov smoothing.
//
// For a context c at order j the KT estimate is
//     KT_j(s | c) = (count(s | c) + 1/2) / (total(c) + vocab/2)
// and orders are blended top down: the order-j estimate gets weight
// total(c_j) / (total(c_j) + 1) of whatever probability mass is left, the
// remainder flows to order j-1, bottoming out at the full order-0 estimate.
// A fresh model therefore predicts exactly uniform.

namespace detail {

// Per-context successor counts. Sparse (sorted) until a context has seen
// many distinct symbols, then dense.
class CountTable {
public:
    void add(uint32_t sym, uint32_t vocab)
    {
        total_++;
        if (!dense_.empty()) {
            dense_[sym]++;
            return;
        }
        auto it = std::lower_bound(sparse_.begin(), sparse_.end(), sym,
                                   [](const auto& a, uint32_t s) { return a.first < s; });
        if (it != sparse_.end() && it->first == sym) {
            it->second++;
        } else {
            sparse_.insert(it, {sym, 1});
            if (sparse_.size() > kDenseThreshold && vocab > 2 * kDenseThreshold) {
                dense_.assign(vocab, 0);
                for (auto& [s, c] : sparse_)
                    dense_[s] = c;
                sparse_.clear();
                sparse_.shrink_to_fit();
            }
        }
    }

    uint64_t total() const { return total_; }

    template <class F>
    void for_each(F f) const
    {
        if (!dense_.empty()) {
            for (uint32_t s = 0; s < dense_.size(); s++)
                if (dense_[s])
                    f(s, dense_[s]);
        } else {
            for (auto& [s, c] : sparse_)
                f(s, c);
        }
    }

private:
    static constexpr size_t kDenseThreshold = 192;
    std::vector<std::pair<uint32_t, uint32_t>> sparse_;
    std::vector<uint32_t> dense_;
    uint64_t total_ = 0;
};

struct CtxKeyHash {
    size_t operator()(unsigned __int128 k) const
    {
        uint64_t lo = uint64_t(k), hi = uint64_t(k >> 64);
        uint64_t h = kFnv64Offset;
        h = fnv1a64(h, &lo, 8);
        h = fnv1a64(h, &hi, 8);
        return size_t(h);
    }
};

} // namespace detail

class KTContextModel final : public PredictiveModel {
public:
    KTContextModel(int order, uint32_t vocab)
        : order_(order)
        , vocab_(vocab)
    {
        require(order >= 0 && order <= 8, "context order must lie in [0, 8]");
        require(vocab >= 2, "vocabulary must be at least 2");
        maps_.resize(size_t(order) + 1);
        reset_history();
    }

    uint32_t vocab_size() const override { return vocab_; }
    int order() const { return order_; }

    void predict(std::span<double> out) override
    {
        std::fill(out.begin(), out.end(), 0.0);
        double base = 0.0;
        double rem = 1.0;
        for (int j = order_; j >= 0; j--) {
            if (size_t(j) > history_.size())
                continue;
            const detail::CountTable* t = find_table(j);
            double total = t ? double(t->total()) : 0.0;
            double denom = total + 0.5 * double(vocab_);
            double cw;
            if (j > 0) {
                cw = rem * (total / (total + 1.0));
                rem -= cw;
            } else {
                cw = rem;
            }
            if (cw == 0.0)
                continue;
            base += cw * 0.5 / denom;
            if (t)
                t->for_each([&](uint32_t s, uint32_t c) { out[s] += cw * double(c) / denom; });
        }
        for (double& p : out)
            p += base;
    }

    // KT estimate of the order-j term alone, before blending.
    double kt_term(int j, uint32_t symbol) const
    {
        require(j >= 0 && j <= order_ && size_t(j) <= history_.size(), "order has no context yet");
        const detail::CountTable* t = find_table(j);
        double total = t ? double(t->total()) : 0.0;
        double cnt = 0.0;
        if (t)
            t->for_each([&](uint32_t s, uint32_t c) { if (s == symbol) cnt = double(c); });
        return (cnt + 0.5) / (total + 0.5 * double(vocab_));
    }

    void update(uint32_t symbol) override
    {
        require(symbol < vocab_, "symbol out of vocabulary");
        for (int j = 0; j <= order_; j++) {
            if (size_t(j) > history_.size())
                break;
            maps_[size_t(j)][context_key(j)].add(symbol, vocab_);
        }
        push_history(symbol);
        digest_ = fnv1a64_u32(digest_, symbol);
    }

    void reset() override
    {
        for (auto& m : maps_)
            m.clear();
        reset_history();
    }

    uint64_t state_digest() const override { return digest_; }

    std::unique_ptr<PredictiveModel> clone() const override
    {
        return std::make_unique<KTContextModel>(*this);
    }

    // Deterministic serialization of the learned counts, used by checkpoints.
    void serialize_counts(std::vector<uint8_t>& out) const
    {
        for (int j = 0; j <= order_; j++) {
            const auto& m = maps_[size_t(j)];
            std::vector<unsigned __int128> keys;
            keys.reserve(m.size());
            for (auto& [k, t] : m)
                keys.push_back(k);
            std::sort(keys.begin(), keys.end());
            put_le(out, keys.size(), 8);
            for (auto k : keys) {
                put_le(out, uint64_t(k), 8);
                put_le(out, uint64_t(k >> 64), 8);
                const auto& t = m.at(k);
                std::vector<std::pair<uint32_t, uint32_t>> entries;
                t.for_each([&](uint32_t s, uint32_t c) { entries.push_back({s, c}); });
                put_le(out, entries.size(), 4);
                for (auto& [s, c] : entries) {
                    put_le(out, s, 4);
                    put_le(out, c, 4);
                }
            }
        }
    }

    void load_counts(const uint8_t* p, size_t n, size_t& off)
    {
        for (int j = 0; j <= order_; j++) {
            require(off + 8 <= n, "checkpoint truncated");
            uint64_t nkeys = get_le(p + off, 8);
            off += 8;
            for (uint64_t i = 0; i < nkeys; i++) {
                require(off + 20 <= n, "checkpoint truncated");
                unsigned __int128 key = get_le(p + off, 8);
                key |= (unsigned __int128)get_le(p + off + 8, 8) << 64;
                uint32_t nsym = uint32_t(get_le(p + off + 16, 4));
                off += 20;
                auto& t = maps_[size_t(j)][key];
                for (uint32_t s = 0; s < nsym; s++) {
                    require(off + 8 <= n, "checkpoint truncated");
                    uint32_t sym = uint32_t(get_le(p + off, 4));
                    uint32_t cnt = uint32_t(get_le(p + off + 4, 4));
                    off += 8;
                    for (uint32_t r = 0; r < cnt; r++)
                        t.add(sym, vocab_);
                }
            }
        }
    }

private:
    using CtxMap = std::unordered_map<unsigned __int128, detail::CountTable, detail::CtxKeyHash>;

    void reset_history()
    {
        history_.clear();
        digest_ = fnv1a64_u32(fnv1a64_u32(kFnv64Offset, uint32_t(order_)), vocab_);
    }

    void push_history(uint32_t symbol)
    {
        history_.push_back(symbol);
        if (history_.size() > size_t(order_))
            history_.erase(history_.begin());
    }

    // Last j symbols packed 16 bits apiece; exact for every vocabulary used
    // here (max symbol id 65535), so distinct contexts never merge.
    unsigned __int128 context_key(int j) const
    {
        unsigned __int128 key = 0;
        size_t n = history_.size();
        for (int i = 0; i < j; i++)
            key |= (unsigned __int128)(history_[n - 1 - size_t(i)] & 0xFFFF) << (16 * i);
        return key;
    }

    const detail::CountTable* find_table(int j) const
    {
        const auto& m = maps_[size_t(j)];
        auto it = m.find(context_key(j));
        return it == m.end() ? nullptr : &it->second;
    }

    int order_;
    uint32_t vocab_;
    std::vector<CtxMap> maps_;
    std::vector<uint32_t> history_;
    uint64_t digest_ = 0;
};

} // namespace trlb
