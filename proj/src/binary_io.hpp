#pragma once

// Little-endian binary helpers shared by the container formats.

#include "tomo/dataset.hpp"

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

namespace tomo::detail {

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open for writing: " + path.string());
    }

    void bytes(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        if (!out_) throw IoError("write failed: " + path_.string());
    }

    template <typename U>
    void uint(U v) {
        unsigned char b[sizeof(U)];
        for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
        bytes(b, sizeof(U));
    }

    void f32(double v) { uint(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }

    void str(const std::string& s) {
        uint(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

    void close() {
        out_.close();
        if (!out_) throw IoError("write failed: " + path_.string());
    }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open for reading: " + path.string());
    }

    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in_) throw IoError("truncated or unreadable file: " + path_.string());
    }

    template <typename U>
    U uint() {
        unsigned char b[sizeof(U)];
        bytes(b, sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
        return v;
    }

    double f32() { return static_cast<double>(std::bit_cast<float>(uint<std::uint32_t>())); }
    double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }

    std::string str() {
        const auto n = uint<std::uint32_t>();
        if (n > (1u << 20)) throw IoError("implausible string length in " + path_.string());
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }

    void magic(const char* expected) {
        char m[4];
        bytes(m, 4);
        if (std::string(m, 4) != expected) {
            throw IoError("bad magic in " + path_.string() + " (expected " + expected + ")");
        }
    }

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ifstream in_;
};

}  // namespace tomo::detail
