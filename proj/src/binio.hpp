#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cinp/error.hpp"

namespace cinp::binio {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_le(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

template <typename T>
void put(std::string& out, T v) {
    v = to_le(v);
    const auto* p = reinterpret_cast<const char*>(&v);
    out.append(p, sizeof(T));
}

inline void put_f64s(std::string& out, std::span<const double> values) {
    if constexpr (std::endian::native == std::endian::little) {
        out.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
    } else {
        for (double v : values) put(out, v);
    }
}

// Bounds-checked reader over an in-memory buffer.
class Reader {
public:
    Reader(std::span<const char> buf, ErrorCode on_short) : buf_(buf), code_(on_short) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, buf_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return to_le(v);
    }

    std::vector<double> get_f64s(std::size_t n) {
        if (n > remaining() / sizeof(double)) fail(code_, "truncated payload");
        std::vector<double> out(n);
        for (auto& v : out) v = get<double>();
        return out;
    }

    std::string get_bytes(std::size_t n) {
        need(n);
        std::string s(buf_.data() + pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return buf_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (n > remaining()) fail(code_, "unexpected end of data");
    }

    std::span<const char> buf_;
    ErrorCode code_;
    std::size_t pos_ = 0;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace cinp::binio
