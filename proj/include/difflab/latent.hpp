#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace difflab {

// All sampling math runs on flat 64-bit latent vectors.
using Latent = std::vector<double>;

inline Latent zeros(std::size_t dim) {
    return Latent(dim, 0.0);
}

inline void require_same_dim(const Latent& a, const Latent& b, const char* what) {
    if (a.size() != b.size()) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                    std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    }
}

inline Latent add(const Latent& a, const Latent& b) {
    require_same_dim(a, b, "add");
    Latent out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

inline Latent sub(const Latent& a, const Latent& b) {
    require_same_dim(a, b, "sub");
    Latent out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline Latent scaled(const Latent& a, double c) {
    Latent out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = c * a[i];
    return out;
}

// a*x + b*y
inline Latent lincomb(double a, const Latent& x, double b, const Latent& y) {
    require_same_dim(x, y, "lincomb");
    Latent out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * y[i];
    return out;
}

inline void axpy(double a, const Latent& x, Latent& y) {
    require_same_dim(x, y, "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline double dot(const Latent& a, const Latent& b) {
    require_same_dim(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_norm(const Latent& a) {
    return dot(a, a);
}

inline double norm(const Latent& a) {
    return std::sqrt(squared_norm(a));
}

inline double inf_norm(const Latent& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

inline double distance(const Latent& a, const Latent& b) {
    return norm(sub(a, b));
}

inline double inf_distance(const Latent& a, const Latent& b) {
    return inf_norm(sub(a, b));
}

// mean squared error per coordinate
inline double mse(const Latent& a, const Latent& b) {
    require_same_dim(a, b, "mse");
    if (a.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

// L2 distance normalized by sqrt(dim), dimension-free comparisons
inline double rms_distance(const Latent& a, const Latent& b) {
    require_same_dim(a, b, "rms_distance");
    if (a.empty()) return 0.0;
    return distance(a, b) / std::sqrt(static_cast<double>(a.size()));
}

inline Latent normalized(const Latent& a) {
    const double n = norm(a);
    if (n == 0.0) throw std::invalid_argument("normalized: zero vector");
    return scaled(a, 1.0 / n);
}

}  // namespace difflab
