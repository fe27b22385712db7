#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "iik/common.hpp"

namespace iik {

// Dense row-major tensor.  Rank is whatever the shape says; most of the
// toolkit uses (N,C,H,W) activations, (C,H,W) fields and (Co,Ci,kh,kw)
// kernels.
template <typename T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(std::vector<int> s) : shape(std::move(s)), data(count(shape), T(0)) {}
    TensorT(std::vector<int> s, T fill) : shape(std::move(s)), data(count(shape), fill) {}

    static size_t count(const std::vector<int>& s) {
        size_t n = 1;
        for (int d : s) {
            if (d <= 0) throw ConfigError("tensor dimension must be positive");
            n *= static_cast<size_t>(d);
        }
        return n;
    }

    size_t size() const { return data.size(); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using Tensor = TensorT<double>;
using Tensor32 = TensorT<float>;

}  // namespace iik
