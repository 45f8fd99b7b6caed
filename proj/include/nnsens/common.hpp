// Shared aliases, error type and small numeric helpers.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

#include <Eigen/Dense>

namespace nnsens {

template <typename S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

using Index = Eigen::Index;

// Non-deduced parameter types: callers pass any compatible Eigen expression
// and S is deduced from the other arguments.
template <typename S>
using VectorRef = std::type_identity_t<const Eigen::Ref<const Vector<S>>&>;

template <typename S>
using MatrixRef = std::type_identity_t<const Eigen::Ref<const Matrix<S>>&>;

enum class ErrorKind {
    Format,
    Consistency,
    Shape,
    DegenerateInput,
    Parameter,
    Numeric,
    Label,
    Sampling,
    DegenerateAnchor,
    Training,
    Data,
    Config,
    Io,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Format: return "format";
        case ErrorKind::Consistency: return "consistency";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::DegenerateInput: return "degenerate-input";
        case ErrorKind::Parameter: return "parameter";
        case ErrorKind::Numeric: return "numeric";
        case ErrorKind::Label: return "label";
        case ErrorKind::Sampling: return "sampling";
        case ErrorKind::DegenerateAnchor: return "degenerate-anchor";
        case ErrorKind::Training: return "training";
        case ErrorKind::Data: return "data";
        case ErrorKind::Config: return "config";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

/// Every failure raised by the library. `kind()` tells callers which
/// contract was violated; the message carries the specifics.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) throw Error(kind, what);
}

/// Kahan-Babuska (Neumaier) summation. Results depend only on input order.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Mixes a base seed with stream identifiers (splitmix64 finalizer), so
/// independent consumers get decorrelated generator streams.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream_a = 0, std::uint64_t stream_b = 0) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(seed) ^ stream_a) ^ (stream_b * 0x2545f4914f6cdd1dULL));
}

}  // namespace nnsens
