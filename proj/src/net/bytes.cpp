#include "zsdn/bytes.hpp"

#include <cctype>
#include <stdexcept>

namespace zsdn {

namespace {
constexpr char kDigits[] = "0123456789abcdef";

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}
}  // namespace

std::string to_hex(ByteView bytes, std::string_view sep) {
    std::string out;
    out.reserve(bytes.size() * (2 + sep.size()));
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        if (i != 0) out.append(sep);
        out.push_back(kDigits[bytes[i] >> 4]);
        out.push_back(kDigits[bytes[i] & 0x0F]);
    }
    return out;
}

Bytes from_hex(std::string_view text) {
    Bytes out;
    int pending = -1;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c)) || c == ':' || c == '.') continue;
        int v = hex_value(c);
        if (v < 0) throw std::invalid_argument("invalid hex character '" + std::string(1, c) + "'");
        if (pending < 0) {
            pending = v;
        } else {
            out.push_back(static_cast<std::uint8_t>((pending << 4) | v));
            pending = -1;
        }
    }
    if (pending >= 0) throw std::invalid_argument("odd number of hex digits");
    return out;
}

std::string mac_to_string(const MacAddr& mac) { return to_hex(mac, ":"); }

MacAddr mac_from_string(std::string_view text) {
    Bytes raw = from_hex(text);
    if (raw.size() != 6) throw std::invalid_argument("MAC address must have 6 bytes: " + std::string(text));
    MacAddr mac{};
    for (std::size_t i = 0; i < 6; ++i) mac[i] = raw[i];
    return mac;
}

}  // namespace zsdn
