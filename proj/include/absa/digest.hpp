#pragma once

#include <cstdint>
#include <cstring>
#include <string>

namespace absa {

// FNV-1a 64-bit. Streaming so large weight blobs can be hashed chunk by chunk.
class Fnv1a64 {
public:
    Fnv1a64& update(const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            state_ ^= static_cast<std::uint64_t>(p[i]);
            state_ *= 0x100000001b3ULL;
        }
        return *this;
    }

    Fnv1a64& update(const std::string& s) { return update(s.data(), s.size()); }

    std::uint64_t value() const { return state_; }

    std::string hex() const {
        static const char* digits = "0123456789abcdef";
        std::string out(16, '0');
        std::uint64_t v = state_;
        for (int i = 15; i >= 0; --i) {
            out[static_cast<std::size_t>(i)] = digits[v & 0xF];
            v >>= 4;
        }
        return out;
    }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string fnv1a64_hex(const std::string& bytes) {
    Fnv1a64 h;
    h.update(bytes);
    return h.hex();
}

}  // namespace absa
