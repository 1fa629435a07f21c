#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "nilm/errors.hpp"

namespace nilm {

/// Little-endian binary writer. Bytes are composed explicitly so files are
/// identical across platforms.
class BinaryWriter {
public:
    explicit BinaryWriter(const std::string& path)
        : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
        if (!out_) throw IoError("cannot open '" + path + "' for writing");
    }

    void write_bytes(const void* data, std::size_t n) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    }

    void write_u16(std::uint16_t v) { write_le(v, 2); }
    void write_u32(std::uint32_t v) { write_le(v, 4); }
    void write_u64(std::uint64_t v) { write_le(v, 8); }
    void write_f64(double v) { write_le(std::bit_cast<std::uint64_t>(v), 8); }

    void write_string(const std::string& s) {
        write_u32(static_cast<std::uint32_t>(s.size()));
        write_bytes(s.data(), s.size());
    }

    void write_f64_array(const double* data, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) write_f64(data[i]);
    }

    void finish() {
        out_.flush();
        if (!out_) throw IoError("write to '" + path_ + "' failed");
    }

private:
    void write_le(std::uint64_t v, int bytes) {
        unsigned char buf[8];
        for (int i = 0; i < bytes; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
        write_bytes(buf, static_cast<std::size_t>(bytes));
    }

    std::ofstream out_;
    std::string path_;
};

/// Little-endian binary reader; throws FormatError on truncated input.
class BinaryReader {
public:
    explicit BinaryReader(const std::string& path)
        : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw IoError("cannot open '" + path + "' for reading");
    }

    void read_bytes(void* data, std::size_t n) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw FormatError("'" + path_ + "' is truncated");
        }
    }

    std::uint16_t read_u16() { return static_cast<std::uint16_t>(read_le(2)); }
    std::uint32_t read_u32() { return static_cast<std::uint32_t>(read_le(4)); }
    std::uint64_t read_u64() { return read_le(8); }
    double read_f64() { return std::bit_cast<double>(read_le(8)); }

    std::string read_string() {
        const std::uint32_t n = read_u32();
        if (n > kMaxString) throw FormatError("'" + path_ + "': implausible string length");
        std::string s(n, '\0');
        read_bytes(s.data(), n);
        return s;
    }

    void read_f64_array(double* data, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) data[i] = read_f64();
    }

    bool at_eof() {
        return in_.peek() == std::char_traits<char>::eof();
    }

private:
    static constexpr std::uint32_t kMaxString = 1u << 20;

    std::uint64_t read_le(int bytes) {
        unsigned char buf[8];
        read_bytes(buf, static_cast<std::size_t>(bytes));
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
        return v;
    }

    std::ifstream in_;
    std::string path_;
};

}  // namespace nilm
