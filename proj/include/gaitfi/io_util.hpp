#pragma once

// Little-endian binary file helpers shared by the GFC1/GFS1/GFW1 readers and
// writers. All multi-byte fields on disk are little-endian regardless of
// host order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gaitfi::io {

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw std::runtime_error(msg);
}

inline std::ofstream open_write(const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(f.good(), "cannot open for writing: " + path);
    return f;
}

inline std::ifstream open_read(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "cannot open for reading: " + path);
    return f;
}

inline void write_bytes(std::ofstream& f, const void* p, size_t n) {
    f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void read_exact(std::ifstream& f, void* p, size_t n, const std::string& what) {
    f.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    require(static_cast<size_t>(f.gcount()) == n, "truncated file while reading " + what);
}

// True at a clean record boundary end-of-file; throws mid-record.
inline bool at_eof(std::ifstream& f) { return f.peek() == std::ifstream::traits_type::eof(); }

inline uint32_t to_le32(uint32_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    return __builtin_bswap32(v);
}

inline void write_u32(std::ofstream& f, uint32_t v) {
    const uint32_t le = to_le32(v);
    write_bytes(f, &le, 4);
}

inline uint32_t read_u32(std::ifstream& f, const std::string& what) {
    uint32_t v = 0;
    read_exact(f, &v, 4, what);
    return to_le32(v);
}

inline void write_f32_array(std::ofstream& f, const float* data, size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
        write_bytes(f, data, n * 4);
    } else {
        for (size_t i = 0; i < n; ++i) {
            uint32_t bits;
            std::memcpy(&bits, data + i, 4);
            bits = __builtin_bswap32(bits);
            write_bytes(f, &bits, 4);
        }
    }
}

inline void read_f32_array(std::ifstream& f, float* data, size_t n, const std::string& what) {
    read_exact(f, data, n * 4, what);
    if constexpr (std::endian::native != std::endian::little) {
        for (size_t i = 0; i < n; ++i) {
            uint32_t bits;
            std::memcpy(&bits, data + i, 4);
            bits = __builtin_bswap32(bits);
            std::memcpy(data + i, &bits, 4);
        }
    }
}

// Bit packing, LSB-first within each byte, element order preserved.
inline std::vector<uint8_t> pack_bits(const uint8_t* flags, size_t n) {
    std::vector<uint8_t> out((n + 7) / 8, 0);
    for (size_t i = 0; i < n; ++i)
        if (flags[i]) out[i / 8] |= static_cast<uint8_t>(1u << (i % 8));
    return out;
}

inline void unpack_bits(const std::vector<uint8_t>& packed, uint8_t* flags, size_t n) {
    for (size_t i = 0; i < n; ++i) flags[i] = (packed[i / 8] >> (i % 8)) & 1u;
}

}  // namespace gaitfi::io
