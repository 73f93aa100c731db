#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace zsdn {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using MacAddr = std::array<std::uint8_t, 6>;

// Big-endian (network order) helpers shared by every wire format in the project.

inline void put_u8(Bytes& out, std::uint8_t v) { out.push_back(v); }

inline void put_u16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_u32(Bytes& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) {
        out.push_back(static_cast<std::uint8_t>(v >> shift));
    }
}

inline void put_u64(Bytes& out, std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) {
        out.push_back(static_cast<std::uint8_t>(v >> shift));
    }
}

inline void put_bytes(Bytes& out, ByteView v) { out.insert(out.end(), v.begin(), v.end()); }

inline void put_zeros(Bytes& out, std::size_t n) { out.insert(out.end(), n, 0); }

inline std::uint16_t get_u16(ByteView in, std::size_t off) {
    return static_cast<std::uint16_t>((in[off] << 8) | in[off + 1]);
}

inline std::uint32_t get_u32(ByteView in, std::size_t off) {
    return (static_cast<std::uint32_t>(in[off]) << 24) | (static_cast<std::uint32_t>(in[off + 1]) << 16) |
           (static_cast<std::uint32_t>(in[off + 2]) << 8) | static_cast<std::uint32_t>(in[off + 3]);
}

inline std::uint64_t get_u64(ByteView in, std::size_t off) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < 8; ++i) {
        v = (v << 8) | in[off + i];
    }
    return v;
}

inline MacAddr get_mac(ByteView in, std::size_t off) {
    MacAddr mac{};
    for (std::size_t i = 0; i < mac.size(); ++i) {
        mac[i] = in[off + i];
    }
    return mac;
}

std::string to_hex(ByteView bytes, std::string_view sep = "");

/// Parses a hex string; whitespace, ':' and '.' separators are ignored.
/// Throws std::invalid_argument on odd digit count or non-hex characters.
Bytes from_hex(std::string_view text);

std::string mac_to_string(const MacAddr& mac);
MacAddr mac_from_string(std::string_view text);

}  // namespace zsdn
