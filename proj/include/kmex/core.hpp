#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kmex {

template <class Scalar>
using MatrixRX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixRXf = MatrixRX<float>;
using MatrixRXd = MatrixRX<double>;

/// The one exception type of the toolkit; everything that rejects its
/// input throws this with a message naming the offending value.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

template <class... Args>
[[noreturn]] void fail(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    throw Error(os.str());
}

template <class... Args>
void require(bool cond, Args&&... args) {
    if (!cond) fail(std::forward<Args>(args)...);
}

/// Shape of an image-like tensor, channel-major storage: index of
/// element (c, h, w) is (c*height + h)*width + w.
struct TensorShape {
    int channels = 0;
    int height = 0;
    int width = 0;

    Eigen::Index size() const {
        return static_cast<Eigen::Index>(channels) * height * width;
    }
    bool flat() const { return height == 1 && width == 1; }
    bool operator==(const TensorShape&) const = default;

    std::string str() const {
        return std::to_string(channels) + "x" + std::to_string(height) + "x" +
               std::to_string(width);
    }
};

template <class Scalar>
struct Tensor {
    TensorShape shape;
    Vector<Scalar> data;

    Tensor() = default;
    explicit Tensor(TensorShape s) : shape(s), data(Vector<Scalar>::Zero(s.size())) {}
    Tensor(TensorShape s, Vector<Scalar> v) : shape(s), data(std::move(v)) {
        require(data.size() == shape.size(), "tensor: data size ", data.size(),
                " does not match shape ", shape.str());
    }

    Scalar& operator()(int c, int h, int w) {
        return data[(static_cast<Eigen::Index>(c) * shape.height + h) * shape.width + w];
    }
    Scalar operator()(int c, int h, int w) const {
        return data[(static_cast<Eigen::Index>(c) * shape.height + h) * shape.width + w];
    }

    template <class To>
    Tensor<To> cast() const {
        return Tensor<To>(shape, data.template cast<To>());
    }
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

/// FNV-1a 64-bit, used for config hashes and model tags.
inline std::uint64_t fnv1a64_bytes(const void* bytes, std::size_t n,
                                   std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64_bytes(s.data(), s.size(), h);
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xf];
    return s;
}

/// Verbosity from the KMEX_LOG environment variable:
/// "quiet" < default < "debug".
inline int log_level() {
    static const int level = [] {
        const char* v = std::getenv("KMEX_LOG");
        if (!v) return 1;
        std::string_view s(v);
        if (s == "quiet" || s == "0") return 0;
        if (s == "debug" || s == "2") return 2;
        return 1;
    }();
    return level;
}

template <class... Args>
void log_info(Args&&... args) {
    if (log_level() >= 1) {
        (std::cerr << ... << args) << '\n';
    }
}

template <class... Args>
void log_debug(Args&&... args) {
    if (log_level() >= 2) {
        (std::cerr << "[kmex] " << ... << args) << '\n';
    }
}

}  // namespace kmex
