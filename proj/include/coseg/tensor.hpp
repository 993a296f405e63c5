#ifndef COSEG_TENSOR_HPP
#define COSEG_TENSOR_HPP

#include <Eigen/Dense>
#include <string>

#include "coseg/common.hpp"

namespace coseg {

template <typename T>
using ArrayX = Eigen::Array<T, Eigen::Dynamic, 1>;

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// All tensors are rank-4, NHWC, row-major. Scalars are {1,1,1,1}; weight
// tensors reuse the four slots as (kh, kw, cin, cout).
struct Shape4 {
    int n = 0, h = 0, w = 0, c = 0;
    long count() const { return long(n) * h * w * c; }
    bool operator==(const Shape4&) const = default;
};

inline std::string to_string(const Shape4& s) {
    return "(" + std::to_string(s.n) + "," + std::to_string(s.h) + "," + std::to_string(s.w) + "," +
           std::to_string(s.c) + ")";
}

template <typename T>
struct Tensor {
    Shape4 shape{0, 0, 0, 0};
    ArrayX<T> v;

    Tensor() = default;
    explicit Tensor(Shape4 s) : shape(s), v(ArrayX<T>::Zero(s.count())) {}
    Tensor(Shape4 s, ArrayX<T> data) : shape(s), v(std::move(data)) {}

    static Tensor zeros(Shape4 s) { return Tensor(s); }
    static Tensor constant(Shape4 s, T value) { return Tensor(s, ArrayX<T>::Constant(s.count(), value)); }

    long size() const { return v.size(); }
    bool empty() const { return v.size() == 0; }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    long index(int n, int y, int x, int c) const { return ((long(n) * shape.h + y) * shape.w + x) * shape.c + c; }
    T& at(int n, int y, int x, int c) { return v[index(n, y, x, c)]; }
    T at(int n, int y, int x, int c) const { return v[index(n, y, x, c)]; }

    // matrix views for GEMM-backed ops
    Eigen::Map<MatRM<T>> as_matrix(long rows, long cols) {
        return Eigen::Map<MatRM<T>>(v.data(), rows, cols);
    }
    Eigen::Map<const MatRM<T>> as_matrix(long rows, long cols) const {
        return Eigen::Map<const MatRM<T>>(v.data(), rows, cols);
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.v = v.template cast<U>();
        return out;
    }
};

template <typename T>
void require_shape(const Tensor<T>& t, const Shape4& want, const char* what) {
    if (!(t.shape == want))
        throw ShapeError(std::string(what) + ": expected " + to_string(want) + ", got " + to_string(t.shape));
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (!(a.shape == b.shape))
        throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a.shape) + " vs " + to_string(b.shape));
}

template <typename T>
Tensor<T> random_normal(Shape4 s, Rng& rng, T stddev) {
    Tensor<T> t(s);
    for (long i = 0; i < t.size(); ++i) t.v[i] = T(rng.gaussian()) * stddev;
    return t;
}

template <typename T>
Tensor<T> random_uniform(Shape4 s, Rng& rng, T lo, T hi) {
    Tensor<T> t(s);
    for (long i = 0; i < t.size(); ++i) t.v[i] = T(rng.uniform(double(lo), double(hi)));
    return t;
}

}  // namespace coseg

#endif
