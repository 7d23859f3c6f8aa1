#ifndef PCFGLAB_LOG_MATH_H_
#define PCFGLAB_LOG_MATH_H_

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace pcfglab {

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline double logAdd(double a, double b) {
    if (a == kLogZero) return b;
    if (b == kLogZero) return a;
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

inline double logSumExp(std::span<const double> values) {
    double peak = kLogZero;
    for (double v : values) peak = std::max(peak, v);
    if (peak == kLogZero) return kLogZero;
    double sum = 0.0;
    for (double v : values) sum += std::exp(v - peak);
    return peak + std::log(sum);
}

// A non-negative vector stored as exp(scale) * linear, with the largest
// linear entry kept at 1 after normalize(). Lets chart cells hold values far
// below the double range while inner loops stay in linear arithmetic.
struct ScaledVector {
    double scale = kLogZero;
    std::vector<double> linear;

    explicit ScaledVector(std::size_t size = 0) : linear(size, 0.0) {}

    bool empty() const { return scale == kLogZero; }

    double log(std::size_t i) const {
        return linear[i] > 0.0 ? std::log(linear[i]) + scale : kLogZero;
    }

    void clear() {
        scale = kLogZero;
        std::fill(linear.begin(), linear.end(), 0.0);
    }

    // Rescales so that max(linear) == 1; an all-zero vector becomes empty.
    void normalize() {
        double peak = 0.0;
        for (double v : linear) peak = std::max(peak, v);
        if (peak <= 0.0 || scale == kLogZero) {
            clear();
            return;
        }
        if (peak != 1.0) {
            const double inv = 1.0 / peak;
            for (double & v : linear) v *= inv;
            scale += std::log(peak);
        }
    }

    // this += exp(other_scale) * values
    void accumulate(std::span<const double> values, double other_scale) {
        if (other_scale == kLogZero) return;
        if (scale == kLogZero) {
            std::copy(values.begin(), values.end(), linear.begin());
            scale = other_scale;
            return;
        }
        if (other_scale > scale) {
            const double shrink = std::exp(scale - other_scale);
            for (std::size_t i = 0; i < linear.size(); ++i) linear[i] = linear[i] * shrink + values[i];
            scale = other_scale;
        } else {
            const double factor = std::exp(other_scale - scale);
            for (std::size_t i = 0; i < linear.size(); ++i) linear[i] += values[i] * factor;
        }
    }
};

} // namespace pcfglab

#endif // PCFGLAB_LOG_MATH_H_
