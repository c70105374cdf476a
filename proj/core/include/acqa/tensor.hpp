#pragma once

#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "acqa/errors.hpp"

namespace acqa {

// Dense row-major tensor. Production storage is 32-bit float (Tensor);
// the double variant exists so finite-difference probes can evaluate the
// same graph code without float32 cancellation drowning the signal.
template <class S>
struct TensorT {
    std::vector<int> shape;
    std::vector<S> data;

    TensorT() = default;

    explicit TensorT(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), S(0)) {}

    static TensorT zeros(std::vector<int> s) { return TensorT(std::move(s)); }

    static TensorT scalar(S v) {
        TensorT t({1});
        t.data[0] = v;
        return t;
    }

    static std::size_t numel_of(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t numel() const { return data.size(); }

    int rows() const { return shape.empty() ? 1 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    S& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
    S at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    void fill(S v) { std::fill(data.begin(), data.end(), v); }
};

using Tensor = TensorT<float>;

inline std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        os << (i ? "x" : "") << s[i];
    }
    os << ")";
    return os.str();
}

template <class S>
void require_same_shape(const TensorT<S>& a, const TensorT<S>& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ModelError(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                         " vs " + shape_str(b.shape));
    }
}

} // namespace acqa
