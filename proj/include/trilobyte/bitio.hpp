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
#include <vector>

#include "common.hpp"

namespace trlb {

// Append-only bit buffer, MSB-first within each byte.
class BitSink {
public:
    void put_bit(uint32_t bit)
    {
        size_t byte = size_t(bit_len_ >> 3);
        if (byte == bytes_.size())
            bytes_.push_back(0);
        if (bit & 1)
            bytes_[byte] |= uint8_t(0x80u >> (bit_len_ & 7));
        bit_len_++;
    }

    // Writes the low `count` bits of value, most significant first.
    void put_bits(uint64_t value, int count)
    {
        for (int i = count - 1; i >= 0; i--)
            put_bit(uint32_t(value >> i) & 1);
    }

    void put_unary(uint64_t q)
    {
        for (uint64_t i = 0; i < q; i++)
            put_bit(1);
        put_bit(0);
    }

    void put_byte(uint8_t b)
    {
        if ((bit_len_ & 7) == 0) {
            bytes_.push_back(b);
            bit_len_ += 8;
        } else {
            put_bits(b, 8);
        }
    }

    uint64_t bit_length() const { return bit_len_; }
    const std::vector<uint8_t>& bytes() const { return bytes_; }
    std::vector<uint8_t> take_bytes() { return std::move(bytes_); }

private:
    std::vector<uint8_t> bytes_;
    uint64_t bit_len_ = 0;
};

// Reader over a bit buffer with a recorded logical length. Reads past the
// end yield zero bits up to a small allowance (the arithmetic decoder's
// register preload and flush tail); anything beyond that is a truncation.
class BitSource {
public:
    BitSource(std::span<const uint8_t> bytes, uint64_t bit_length, uint64_t pad_allowance_bits = 0)
        : bytes_(bytes)
        , bit_len_(bit_length)
        , pad_allowance_(pad_allowance_bits)
    {
        require(bit_length <= uint64_t(bytes.size()) * 8, "bit length exceeds the buffer");
    }

    uint32_t get_bit()
    {
        if (pos_ >= bit_len_) {
            overrun_++;
            require(overrun_ <= pad_allowance_, "truncated bitstream: read past the coded payload");
            pos_++;
            return 0;
        }
        uint32_t bit = (bytes_[size_t(pos_ >> 3)] >> (7 - (pos_ & 7))) & 1;
        pos_++;
        return bit;
    }

    uint64_t get_bits(int count)
    {
        uint64_t v = 0;
        for (int i = 0; i < count; i++)
            v = (v << 1) | get_bit();
        return v;
    }

    uint64_t get_unary()
    {
        uint64_t q = 0;
        while (get_bit())
            q++;
        return q;
    }

    uint8_t get_byte()
    {
        if ((pos_ & 7) == 0 && pos_ + 8 <= bit_len_) {
            uint8_t b = bytes_[size_t(pos_ >> 3)];
            pos_ += 8;
            return b;
        }
        return uint8_t(get_bits(8));
    }

    uint64_t position() const { return pos_; }
    uint64_t bit_length() const { return bit_len_; }
    uint64_t overrun() const { return overrun_; }

private:
    std::span<const uint8_t> bytes_;
    uint64_t bit_len_;
    uint64_t pad_allowance_;
    uint64_t pos_ = 0;
    uint64_t overrun_ = 0;
};

} // namespace trlb
