// Dataset ingestion (IDX), per-example standardization, augmentation,
// label randomization and synthetic test corpora.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "nnsens/common.hpp"

namespace nnsens {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Labelled examples, one per row of `inputs`.
struct Dataset {
    RowMatrix inputs;           // N x d
    std::vector<int> labels;    // N entries in [0, n_classes)
    int n_classes = 0;
    std::string name;
    int image_width = 0;        // 0 when the rows are not images
    int image_height = 0;

    Index size() const { return inputs.rows(); }
    Index dim() const { return inputs.cols(); }

    void validate() const {
        require(inputs.rows() >= 1 && inputs.cols() >= 1, ErrorKind::Data, "dataset '" + name + "' is empty");
        require(static_cast<Index>(labels.size()) == inputs.rows(), ErrorKind::Consistency,
                "dataset '" + name + "' has " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(inputs.rows()) + " inputs");
        require(n_classes >= 1, ErrorKind::Data, "dataset '" + name + "' has no classes");
        for (int y : labels)
            require(y >= 0 && y < n_classes, ErrorKind::Label,
                    "label " + std::to_string(y) + " outside [0, " + std::to_string(n_classes) + ")");
        require(inputs.allFinite(), ErrorKind::Numeric, "dataset '" + name + "' has non-finite inputs");
        if (image_width > 0)
            require(static_cast<Index>(image_width) * image_height == inputs.cols(), ErrorKind::Shape,
                    "declared image shape does not match input dimension");
    }
};

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& path) {
    std::array<unsigned char, 4> b{};
    in.read(reinterpret_cast<char*>(b.data()), 4);
    require(static_cast<bool>(in), ErrorKind::Format, "truncated IDX header in " + path);
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                                static_cast<char>(v)};
    out.write(b.data(), 4);
}

struct IdxTensor {
    std::vector<std::uint32_t> dims;
    std::vector<unsigned char> payload;
};

// Reads an unsigned-byte IDX tensor: magic 0x000008RR where RR is the rank.
inline IdxTensor read_idx_ubyte(const std::string& path, std::uint32_t expected_rank) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path);
    const std::uint32_t magic = read_be32(in, path);
    const std::uint32_t expected = 0x00000800u | expected_rank;
    if (magic != expected) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "bad magic 0x%08x (expected 0x%08x) in ", magic, expected);
        throw Error(ErrorKind::Format, buf + path);
    }
    IdxTensor t;
    std::size_t count = 1;
    for (std::uint32_t r = 0; r < expected_rank; ++r) {
        t.dims.push_back(read_be32(in, path));
        count *= t.dims.back();
    }
    t.payload.resize(count);
    in.read(reinterpret_cast<char*>(t.payload.data()), static_cast<std::streamsize>(count));
    require(in.gcount() == static_cast<std::streamsize>(count), ErrorKind::Format, "truncated IDX payload in " + path);
    return t;
}

}  // namespace detail

/// Loads an IDX image/label file pair. Pixels are scaled to [0, 1]; no
/// standardization is applied here. `n_classes` of 0 infers max(label) + 1.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path, int n_classes = 0) {
    const auto images = detail::read_idx_ubyte(images_path, 3);
    const auto labels = detail::read_idx_ubyte(labels_path, 1);
    require(images.dims[0] == labels.dims[0], ErrorKind::Consistency,
            "image count " + std::to_string(images.dims[0]) + " differs from label count " +
                std::to_string(labels.dims[0]));

    Dataset ds;
    ds.name = images_path;
    ds.image_height = static_cast<int>(images.dims[1]);
    ds.image_width = static_cast<int>(images.dims[2]);
    const Index n = images.dims[0];
    const Index d = static_cast<Index>(images.dims[1]) * images.dims[2];
    ds.inputs.resize(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j)
            ds.inputs(i, j) = static_cast<double>(images.payload[static_cast<std::size_t>(i * d + j)]) / 255.0;
    ds.labels.assign(labels.payload.begin(), labels.payload.end());
    int max_label = 0;
    for (int y : ds.labels) max_label = std::max(max_label, y);
    ds.n_classes = n_classes > 0 ? n_classes : max_label + 1;
    ds.validate();
    return ds;
}

/// Writes unsigned-byte IDX files; inputs must already be bytes in [0, 255].
inline void save_idx(const std::string& images_path, const std::string& labels_path,
                     const std::vector<unsigned char>& pixels, std::uint32_t n, std::uint32_t rows, std::uint32_t cols,
                     const std::vector<unsigned char>& labels) {
    require(pixels.size() == std::size_t{n} * rows * cols && labels.size() == n, ErrorKind::Shape,
            "IDX payload sizes do not match the declared dimensions");
    std::ofstream img(images_path, std::ios::binary);
    std::ofstream lab(labels_path, std::ios::binary);
    require(img && lab, ErrorKind::Io, "cannot create IDX files");
    detail::write_be32(img, 0x00000803u);
    detail::write_be32(img, n);
    detail::write_be32(img, rows);
    detail::write_be32(img, cols);
    img.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    detail::write_be32(lab, 0x00000801u);
    detail::write_be32(lab, n);
    lab.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

/// Zero mean, unit population variance across the vector's own entries,
/// so the result lies on the sphere of radius sqrt(d).
inline Vector<double> standardize_per_example(const Eigen::Ref<const Vector<double>>& x) {
    const Index d = x.size();
    require(d >= 2, ErrorKind::Shape, "standardization needs at least two entries");
    require(x.allFinite(), ErrorKind::Numeric, "non-finite input");
    require((x.array() != x(0)).any(), ErrorKind::DegenerateInput, "constant input has zero variance");
    const double mean = x.mean();
    Vector<double> centered = x.array() - mean;
    const double var = centered.squaredNorm() / static_cast<double>(d);
    require(var > 0.0, ErrorKind::DegenerateInput, "input has zero variance");
    return centered / std::sqrt(var);
}

inline void standardize(Dataset& ds) {
    for (Index i = 0; i < ds.size(); ++i) ds.inputs.row(i) = standardize_per_example(ds.inputs.row(i).transpose()).transpose();
}

struct AugmentConfig {
    int max_translate_px = 4;
    bool wrap = true;
    double hflip_prob = 0.5;
    int image_width = 28;
    int image_height = 28;

    void validate() const {
        require(image_width > 0 && image_height > 0, ErrorKind::Parameter, "image dimensions must be positive");
        require(max_translate_px >= 0 && max_translate_px <= image_width && max_translate_px <= image_height,
                ErrorKind::Parameter, "max_translate_px must lie in [0, min(width, height)]");
        require(hflip_prob >= 0.0 && hflip_prob <= 1.0, ErrorKind::Parameter, "hflip_prob must lie in [0, 1]");
    }
};

/// Moves pixel (r, c) to (r + dy, c + dx). With `wrap` the shift is cyclic;
/// otherwise vacated pixels take `fill`.
template <typename S>
Vector<S> shift_image(VectorRef<S> x, int width, int height, int dx, int dy, bool wrap,
                      S fill = S(0)) {
    require(x.size() == static_cast<Index>(width) * height, ErrorKind::Shape, "image size does not match width x height");
    Vector<S> out(x.size());
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            int sr = r - dy;
            int sc = c - dx;
            if (wrap) {
                sr = ((sr % height) + height) % height;
                sc = ((sc % width) + width) % width;
            } else if (sr < 0 || sr >= height || sc < 0 || sc >= width) {
                out(r * width + c) = fill;
                continue;
            }
            out(r * width + c) = x(sr * width + sc);
        }
    }
    return out;
}

template <typename S>
Vector<S> hflip_image(VectorRef<S> x, int width, int height) {
    require(x.size() == static_cast<Index>(width) * height, ErrorKind::Shape, "image size does not match width x height");
    Vector<S> out(x.size());
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) out(r * width + c) = x(r * width + (width - 1 - c));
    return out;
}

/// Random translation (uniform offsets in [-max, max] per axis) followed by a
/// horizontal flip with probability hflip_prob. Always consumes three draws.
template <typename Rng>
Vector<double> augment(const Eigen::Ref<const Vector<double>>& x, const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    require(x.size() == static_cast<Index>(cfg.image_width) * cfg.image_height, ErrorKind::Shape,
            "input of size " + std::to_string(x.size()) + " does not match the declared " +
                std::to_string(cfg.image_width) + "x" + std::to_string(cfg.image_height) + " image");
    std::uniform_int_distribution<int> offset(-cfg.max_translate_px, cfg.max_translate_px);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    const int dx = offset(rng);
    const int dy = offset(rng);
    const bool flip = coin(rng) < cfg.hflip_prob;
    // Fill for the non-wrapping case: the image minimum, i.e. its background.
    Vector<double> out = shift_image<double>(x, cfg.image_width, cfg.image_height, dx, dy, cfg.wrap, x.minCoeff());
    if (flip) out = hflip_image<double>(out, cfg.image_width, cfg.image_height);
    return out;
}

/// Replaces every label with an i.i.d. uniform draw over the classes.
inline Dataset randomize_labels(const Dataset& ds, std::uint64_t seed) {
    Dataset out = ds;
    std::mt19937_64 rng(mix_seed(seed, 0x6c6162656c73ULL));
    std::uniform_int_distribution<int> cls(0, ds.n_classes - 1);
    for (int& y : out.labels) y = cls(rng);
    out.name = ds.name + "+random-labels";
    return out;
}

/// Isotropic unit-variance Gaussian clusters. Centers sit at `separation`
/// along mutually orthogonal random directions when n_classes <= d, and
/// along independent random unit directions otherwise. Samples are
/// interleaved by class.
inline Dataset synthetic_blobs(int n_per_class, int d, int n_classes, double separation, std::uint64_t seed) {
    require(n_per_class > 0 && d > 0 && n_classes > 0, ErrorKind::Parameter, "blob counts must be positive");
    require(d >= 2 && n_classes >= 2, ErrorKind::Parameter, "blobs need d >= 2 and at least two classes");
    std::mt19937_64 rng(mix_seed(seed, 0x626c6f6273ULL));
    std::normal_distribution<double> normal(0.0, 1.0);

    Matrix<double> directions(d, n_classes);
    for (Index j = 0; j < directions.cols(); ++j)
        for (Index i = 0; i < directions.rows(); ++i) directions(i, j) = normal(rng);
    if (n_classes <= d) {
        Eigen::HouseholderQR<Matrix<double>> qr(directions);
        directions = qr.householderQ() * Matrix<double>::Identity(d, n_classes);
    } else {
        directions.colwise().normalize();
    }
    const Matrix<double> centers = separation * directions;

    Dataset ds;
    ds.name = "blobs";
    ds.n_classes = n_classes;
    ds.inputs.resize(static_cast<Index>(n_per_class) * n_classes, d);
    ds.labels.resize(static_cast<std::size_t>(n_per_class) * n_classes);
    for (int s = 0; s < n_per_class; ++s) {
        for (int c = 0; c < n_classes; ++c) {
            const Index row = static_cast<Index>(s) * n_classes + c;
            for (Index j = 0; j < d; ++j) ds.inputs(row, j) = centers(j, c) + normal(rng);
            ds.labels[static_cast<std::size_t>(row)] = c;
        }
    }
    return ds;
}

/// Rows [offset, offset + count) as a new dataset.
inline Dataset slice(const Dataset& ds, Index offset, Index count) {
    require(offset >= 0 && count >= 1 && offset + count <= ds.size(), ErrorKind::Parameter,
            "slice [" + std::to_string(offset) + ", " + std::to_string(offset + count) + ") outside dataset of size " +
                std::to_string(ds.size()));
    Dataset out;
    out.inputs = ds.inputs.middleRows(offset, count);
    out.labels.assign(ds.labels.begin() + offset, ds.labels.begin() + offset + count);
    out.n_classes = ds.n_classes;
    out.name = ds.name;
    out.image_width = ds.image_width;
    out.image_height = ds.image_height;
    return out;
}

inline std::vector<Index> indices_of_class(const Dataset& ds, int cls) {
    std::vector<Index> out;
    for (std::size_t i = 0; i < ds.labels.size(); ++i)
        if (ds.labels[i] == cls) out.push_back(static_cast<Index>(i));
    return out;
}

}  // namespace nnsens
