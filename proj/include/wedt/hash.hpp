// SPDX-License-Identifier: Apache-2.0
//
// wedt: wireless environment digital twin calibration toolkit
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------


#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace wedt
{

// FNV-1a 64-bit, used for content hashes, lineage tags and seed splitting.
class Hasher
{
  public:
    Hasher &bytes(const void *data, std::size_t n)
    {
        const auto *p = static_cast<const unsigned char *>(data);
        for (std::size_t i = 0; i < n; ++i)
        {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
        return *this;
    }
    Hasher &str(std::string_view s)
    {
        auto n = static_cast<std::uint64_t>(s.size());
        bytes(&n, sizeof n);
        return bytes(s.data(), s.size());
    }
    Hasher &f64(double v) { return bytes(&v, sizeof v); }
    Hasher &i64(std::int64_t v) { return bytes(&v, sizeof v); }
    Hasher &u64(std::uint64_t v) { return bytes(&v, sizeof v); }

    std::uint64_t digest() const { return state_; }

  private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a(std::string_view s) { return Hasher{}.bytes(s.data(), s.size()).digest(); }

inline std::string to_hex(std::uint64_t v)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4)
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    return out;
}

/// Derives an independent stream seed from a root seed and a stage label.
inline std::uint64_t split_seed(std::uint64_t root, std::string_view label)
{
    std::uint64_t z = root ^ fnv1a(label);
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace wedt
