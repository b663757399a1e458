#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace bcjrsim {

/// Thrown when an argument violates an operation's precondition.
struct InvalidParameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Thrown when an input sequence or buffer has the wrong shape/content.
struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Thrown when every forward branch underflows to zero at some step.
struct DegenerateLikelihood : std::runtime_error {
    std::size_t step;
    explicit DegenerateLikelihood(std::size_t t)
        : std::runtime_error("forward recursion underflowed to zero at step " +
                             std::to_string(t)),
          step(t) {}
};

/// Thrown when a caller breaks an API contract (e.g. missing pair posteriors).
struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

/// Dense row-major matrix of doubles. Small sizes only; no BLAS.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Variance floor applied inside Gaussian densities; learned states can
/// collapse their variance and the density must stay finite.
inline constexpr double kVarianceFloor = 1e-12;

inline double gaussian_pdf(double y, double mean, double var) {
    const double v = var < kVarianceFloor ? kVarianceFloor : var;
    const double d = y - mean;
    return std::exp(-0.5 * d * d / v) / std::sqrt(2.0 * M_PI * v);
}

inline double gaussian_log_pdf(double y, double mean, double var) {
    const double v = var < kVarianceFloor ? kVarianceFloor : var;
    const double d = y - mean;
    return -0.5 * (d * d / v + std::log(2.0 * M_PI * v));
}

/// Gaussian tail probability Q(x) = P(Z > x).
inline double q_func(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

/// Noise power for a sweep point: sigma^2 = 10^(-dB/10).
inline double db_to_noise_power(double db) { return std::pow(10.0, -db / 10.0); }

inline bool rows_stochastic(const Matrix& m, double tol) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const double p = m(i, j);
            if (!(p >= 0.0) || p > 1.0 + tol) return false;
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol) return false;
    }
    return true;
}

}  // namespace bcjrsim
