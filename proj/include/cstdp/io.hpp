// Small text-format helpers shared by the CSV emitters and parsers.

#ifndef CSTDP_IO_HPP
#define CSTDP_IO_HPP

#include <charconv>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace cstdp {

/// Shortest round-trip decimal form of a double (std::to_chars), so that
/// write -> parse -> write is byte-identical.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    double v{};
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument("bad numeric field: '" + std::string(s) + "'");
    return v;
}

inline std::uint64_t parse_u64(std::string_view s) {
    std::uint64_t v{};
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument("bad integer field: '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

/// Comment header carried by every output file: config hash + seed.
inline void write_file_header(std::ostream& os, std::uint64_t config_hash,
                              std::uint64_t seed) {
    char buf[17];
    auto res = std::to_chars(buf, buf + sizeof(buf), config_hash, 16);
    os << "# config_hash=0x" << std::string_view(buf, res.ptr) << " seed=" << seed
       << "\n";
}

}  // namespace cstdp

#endif  // CSTDP_IO_HPP
