// Closed input-space trajectories and planar sampling grids.
#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nnsens/common.hpp"
#include "nnsens/data.hpp"

namespace nnsens {

/// cos/sin of 2*pi*i/k, reduced so that sample i + k/2 is exactly the
/// negation of sample i when k is even.
inline std::pair<double, double> unit_circle(Index i, Index k) {
    i %= k;
    double sign = 1.0;
    if (k % 2 == 0 && i >= k / 2) {
        i -= k / 2;
        sign = -1.0;
    }
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(k);
    return {sign * std::cos(theta), sign * std::sin(theta)};
}

/// A closed loop of k samples z_0, ..., z_{k-1} in R^d, generated on demand
/// so that very large k never has to be stored.
class Trajectory {
public:
    enum class Kind { Ellipse, Translation, Explicit };

    /// z(theta) = center + u cos(theta) + v sin(theta) at theta_i = 2 pi i / k.
    static Trajectory ellipse(Vector<double> center, Vector<double> u, Vector<double> v, Index k) {
        require(k >= 3, ErrorKind::Sampling, "a trajectory needs k >= 3 samples");
        require(center.size() == u.size() && u.size() == v.size(), ErrorKind::Shape, "ellipse vectors differ in size");
        Trajectory t(Kind::Ellipse, k, center.size());
        t.center_ = std::move(center);
        t.u_ = std::move(u);
        t.v_ = std::move(v);
        return t;
    }

    /// Linear interpolation through the `width` cyclic horizontal shifts of
    /// an image, shift s sitting at parameter s / width of the loop.
    static Trajectory translation(Vector<double> image, int width, int height, Index k) {
        require(image.size() == static_cast<Index>(width) * height, ErrorKind::Shape,
                "image size does not match width x height");
        require(k >= width, ErrorKind::Sampling,
                "k = " + std::to_string(k) + " is smaller than the " + std::to_string(width) + " shifts");
        require(k >= 3, ErrorKind::Sampling, "a trajectory needs k >= 3 samples");
        Trajectory t(Kind::Translation, k, image.size());
        t.center_ = std::move(image);
        t.width_ = width;
        t.height_ = height;
        t.anchors_ = {0};
        return t;
    }

    /// Rows of `points` taken as the samples, in order.
    static Trajectory from_points(RowMatrix points) {
        require(points.rows() >= 3, ErrorKind::Sampling, "a trajectory needs k >= 3 samples");
        Trajectory t(Kind::Explicit, points.rows(), points.cols());
        t.points_ = std::move(points);
        return t;
    }

    Kind kind() const { return kind_; }
    Index k() const { return k_; }
    Index dim() const { return dim_; }
    bool closed() const { return true; }
    const std::vector<Index>& anchor_indices() const { return anchors_; }
    void set_anchor_indices(std::vector<Index> anchors) { anchors_ = std::move(anchors); }

    /// Same curve sampled with a different k.
    Trajectory resampled(Index k) const {
        require(kind_ != Kind::Explicit, ErrorKind::Sampling, "explicit trajectories cannot be resampled");
        Trajectory t = kind_ == Kind::Ellipse ? ellipse(center_, u_, v_, k) : translation(center_, width_, height_, k);
        t.anchors_.clear();
        for (Index a : anchors_)
            if ((a * k) % k_ == 0) t.anchors_.push_back(a * k / k_);
        return t;
    }

    Vector<double> point(Index i) const {
        require(i >= 0 && i < k_, ErrorKind::Sampling, "sample index out of range");
        switch (kind_) {
            case Kind::Ellipse: {
                const auto [c, s] = unit_circle(i, k_);
                return center_ + c * u_ + s * v_;
            }
            case Kind::Translation: {
                // Parameter i * width / k split into a shift and a fraction.
                const Index scaled = i * width_;
                const int shift = static_cast<int>(scaled / k_);
                const double frac = static_cast<double>(scaled % k_) / static_cast<double>(k_);
                Vector<double> a = shift_image<double>(center_, width_, height_, shift, 0, true);
                if (frac == 0.0) return a;
                const Vector<double> b = shift_image<double>(center_, width_, height_, (shift + 1) % width_, 0, true);
                return (1.0 - frac) * a + frac * b;
            }
            case Kind::Explicit: return points_.row(i).transpose();
        }
        return {};
    }

    /// Samples [begin, begin + count) as the columns of a d x count matrix.
    template <typename S = double>
    Matrix<S> batch(Index begin, Index count) const {
        Matrix<S> out(dim_, count);
        for (Index j = 0; j < count; ++j) out.col(j) = point((begin + j) % k_).template cast<S>();
        return out;
    }

    RowMatrix materialize() const {
        RowMatrix out(k_, dim_);
        for (Index i = 0; i < k_; ++i) out.row(i) = point(i).transpose();
        return out;
    }

private:
    Trajectory(Kind kind, Index k, Index dim) : kind_(kind), k_(k), dim_(dim) {}

    Kind kind_;
    Index k_;
    Index dim_;
    Vector<double> center_, u_, v_;
    int width_ = 0;
    int height_ = 0;
    RowMatrix points_;
    std::vector<Index> anchors_;
};

/// Origin-centred ellipse whose axes have i.i.d. standard-normal entries,
/// so E||z||^2 = d, matching standardized data.
inline Trajectory random_ellipse(Index d, Index k, std::uint64_t seed) {
    require(d >= 2, ErrorKind::Parameter, "random ellipse needs d >= 2");
    std::mt19937_64 rng(mix_seed(seed, 0x656c6c6970ULL));
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector<double> a(d), b(d);
    for (Index i = 0; i < d; ++i) a(i) = normal(rng);
    for (Index i = 0; i < d; ++i) b(i) = normal(rng);
    return Trajectory::ellipse(Vector<double>::Zero(d), std::move(a), std::move(b), k);
}

namespace detail {

inline void require_distinct(const Vector<double>& x1, const Vector<double>& x2, const Vector<double>& x3) {
    require(x1.size() == x2.size() && x2.size() == x3.size(), ErrorKind::Shape, "anchors differ in dimension");
    require(x1 != x2 && x2 != x3 && x1 != x3, ErrorKind::DegenerateAnchor, "anchors must be pairwise distinct");
}

}  // namespace detail

inline constexpr double kAnchorPhases[3] = {std::numbers::pi / 3.0, std::numbers::pi, 5.0 * std::numbers::pi / 3.0};

/// Ellipse z(theta) = c + u cos(theta) + v sin(theta) through x1, x2, x3 at
/// theta = pi/3, pi, 5pi/3 (a 3x3 system shared by every coordinate). The
/// anchors sit on samples k/6, k/2, 5k/6 when 6 divides k.
inline Trajectory data_fitted_ellipse(const Vector<double>& x1, const Vector<double>& x2, const Vector<double>& x3,
                                      Index k) {
    detail::require_distinct(x1, x2, x3);
    Eigen::Matrix3d system;
    for (int j = 0; j < 3; ++j) system.row(j) << 1.0, std::cos(kAnchorPhases[j]), std::sin(kAnchorPhases[j]);
    const Eigen::Matrix3d inverse = system.inverse();
    Vector<double> c = inverse(0, 0) * x1 + inverse(0, 1) * x2 + inverse(0, 2) * x3;
    Vector<double> u = inverse(1, 0) * x1 + inverse(1, 1) * x2 + inverse(1, 2) * x3;
    Vector<double> v = inverse(2, 0) * x1 + inverse(2, 1) * x2 + inverse(2, 2) * x3;
    Trajectory t = Trajectory::ellipse(std::move(c), std::move(u), std::move(v), k);
    if (k % 6 == 0) t.set_anchor_indices({k / 6, k / 2, 5 * k / 6});
    return t;
}

inline Trajectory translation_trajectory(const Vector<double>& image, int width, int height, Index k) {
    return Trajectory::translation(image, width, height, k);
}

/// Affine image of the uniform resolution x resolution grid on [-1, 1]^2.
/// The plane's origin-centred equilateral triangle of circumradius 0.8
/// (vertices at pi/2, 7pi/6, 11pi/6) maps onto x1, x2, x3. Cells are
/// row-major; row 0 is v = +1 and column 0 is u = -1.
class PlaneGrid {
public:
    static constexpr double kCircumradius = 0.8;

    PlaneGrid(const Vector<double>& x1, const Vector<double>& x2, const Vector<double>& x3, int resolution)
        : resolution_(resolution) {
        detail::require_distinct(x1, x2, x3);
        require(resolution >= 2, ErrorKind::Parameter, "grid resolution must be at least 2");
        center_ = (x1 + x2 + x3) / 3.0;
        const Eigen::Vector2d q1 = vertex(0), q2 = vertex(1);
        Eigen::Matrix2d q;
        q.col(0) = q1;
        q.col(1) = q2;
        Matrix<double> targets(x1.size(), 2);
        targets.col(0) = x1 - center_;
        targets.col(1) = x2 - center_;
        axes_ = targets * q.inverse();
    }

    /// Plane coordinates of the i-th triangle vertex.
    static Eigen::Vector2d vertex(int i) {
        constexpr double angles[3] = {std::numbers::pi / 2.0, 7.0 * std::numbers::pi / 6.0,
                                      11.0 * std::numbers::pi / 6.0};
        return kCircumradius * Eigen::Vector2d(std::cos(angles[i]), std::sin(angles[i]));
    }

    int resolution() const { return resolution_; }
    Index size() const { return static_cast<Index>(resolution_) * resolution_; }
    Index dim() const { return center_.size(); }

    Eigen::Vector2d coords(Index cell) const {
        const Index row = cell / resolution_, col = cell % resolution_;
        const double step = 2.0 / static_cast<double>(resolution_ - 1);
        return {-1.0 + step * static_cast<double>(col), 1.0 - step * static_cast<double>(row)};
    }

    Vector<double> map(const Eigen::Vector2d& p) const { return center_ + axes_ * p; }
    Vector<double> point(Index cell) const { return map(coords(cell)); }

    template <typename S = double>
    Matrix<S> batch(Index begin, Index count) const {
        Matrix<S> out(dim(), count);
        for (Index j = 0; j < count; ++j) out.col(j) = point(begin + j).template cast<S>();
        return out;
    }

private:
    int resolution_;
    Vector<double> center_;
    Matrix<double> axes_;
};

inline PlaneGrid plane_grid(const Vector<double>& x1, const Vector<double>& x2, const Vector<double>& x3,
                            int resolution) {
    return PlaneGrid(x1, x2, x3, resolution);
}

}  // namespace nnsens
