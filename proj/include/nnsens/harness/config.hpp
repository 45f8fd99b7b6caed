// Experiment configuration: a JSON document with sections mirroring
// ExperimentSpec. Grid-valued keys accept a scalar or a list.
#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "nnsens/activation.hpp"
#include "nnsens/common.hpp"
#include "nnsens/data.hpp"
#include "nnsens/loss.hpp"
#include "nnsens/train.hpp"

namespace nnsens::harness {

using json = nlohmann::json;

enum class StudyKind { Trajectory, Boundary, PairedFactor, Sweep, PerPoint };

inline std::string_view to_string(StudyKind kind) {
    switch (kind) {
        case StudyKind::Trajectory: return "trajectory_study";
        case StudyKind::Boundary: return "boundary_study";
        case StudyKind::PairedFactor: return "paired_factor";
        case StudyKind::Sweep: return "sweep";
        case StudyKind::PerPoint: return "per_point";
    }
    return "unknown";
}

inline StudyKind parse_study(std::string_view name) {
    if (name == "trajectory_study" || name == "trajectory") return StudyKind::Trajectory;
    if (name == "boundary_study" || name == "boundary") return StudyKind::Boundary;
    if (name == "paired_factor" || name == "paired") return StudyKind::PairedFactor;
    if (name == "sweep") return StudyKind::Sweep;
    if (name == "per_point" || name == "per-point") return StudyKind::PerPoint;
    throw Error(ErrorKind::Config, "unknown study kind '" + std::string(name) + "'");
}

enum class Factor { Labels, Augmentation, Activation, Batch };

inline std::string_view to_string(Factor f) {
    switch (f) {
        case Factor::Labels: return "labels";
        case Factor::Augmentation: return "augmentation";
        case Factor::Activation: return "activation";
        case Factor::Batch: return "batch";
    }
    return "unknown";
}

inline Factor parse_factor(std::string_view name) {
    for (auto f : {Factor::Labels, Factor::Augmentation, Factor::Activation, Factor::Batch})
        if (to_string(f) == name) return f;
    throw Error(ErrorKind::Config, "unknown factor '" + std::string(name) + "'");
}

enum class Precision { F64, F32 };

struct DatasetSpec {
    std::string source = "idx";  // "idx" or "synthetic"
    std::string train_images, train_labels, test_images, test_labels;
    Index train_subset = 1000;   // 0 keeps every example
    Index test_subset = 1000;
    // synthetic blobs
    int blobs_per_class = 100;
    int blobs_dim = 16;
    int blobs_classes = 4;
    double blobs_separation = 10.0;
    std::uint64_t blobs_seed = 0;
};

struct NetworkGrid {
    std::vector<int> widths{100};
    std::vector<int> depths{5};  // hidden layers
    std::vector<ActivationKind> activations{ActivationKind::ReLU};
    std::vector<double> std_multipliers{1.0};
};

struct OptimizerGrid {
    std::vector<OptimizerKind> kinds{OptimizerKind::Momentum};
    std::vector<double> learning_rates{0.005};
    std::vector<int> batch_sizes{128};
    OptimizerConfig base;  // scalar coefficients shared by every cell
};

enum class TrajectoryKind { RandomEllipse, DifferentClassEllipse, SameClassEllipse };

inline std::string_view to_string(TrajectoryKind k) {
    switch (k) {
        case TrajectoryKind::RandomEllipse: return "random_ellipse";
        case TrajectoryKind::DifferentClassEllipse: return "data_ellipse_different_class";
        case TrajectoryKind::SameClassEllipse: return "data_ellipse_same_class";
    }
    return "unknown";
}

inline TrajectoryKind parse_trajectory_kind(std::string_view name) {
    for (auto k : {TrajectoryKind::RandomEllipse, TrajectoryKind::DifferentClassEllipse, TrajectoryKind::SameClassEllipse})
        if (to_string(k) == name) return k;
    throw Error(ErrorKind::Config, "unknown trajectory kind '" + std::string(name) + "'");
}

struct MeasureSpec {
    Index jacobian_points = 200;    // fixed leading test subset
    Index transition_points = 10;   // test images turned into translation loops
    Index translation_k = 224;
    Index trajectory_k = 1536;
    Index window = 64;
    std::vector<TrajectoryKind> trajectory_kinds{TrajectoryKind::RandomEllipse, TrajectoryKind::DifferentClassEllipse,
                                                 TrajectoryKind::SameClassEllipse};
    int grid_resolution = 64;
    bool all_layers = false;        // boundary maps: every hidden layer or only the last
    Index per_point_count = 1000;
};

struct ExperimentSpec {
    StudyKind kind = StudyKind::Sweep;
    DatasetSpec dataset;
    NetworkGrid network;
    OptimizerGrid optimizer;
    LossKind loss = LossKind::CrossEntropy;
    std::optional<AugmentConfig> augment;  // training-time augmentation; also side B of the augmentation factor
    std::vector<std::uint64_t> seeds{1};
    std::optional<Factor> factor;
    MeasureSpec measure;
    Precision precision = Precision::F64;
    std::string output = "out.csv";
    int jobs = 1;

    void validate() const {
        require(!network.widths.empty() && !network.depths.empty() && !network.activations.empty() &&
                    !network.std_multipliers.empty(),
                ErrorKind::Config, "network grid has an empty axis");
        require(!optimizer.kinds.empty() && !optimizer.learning_rates.empty() && !optimizer.batch_sizes.empty(),
                ErrorKind::Config, "optimizer grid has an empty axis");
        require(!seeds.empty(), ErrorKind::Config, "seeds must not be empty");
        require(factor.has_value() == (kind == StudyKind::PairedFactor), ErrorKind::Config,
                "'factor' must be given exactly when kind is paired_factor");
        require(jobs >= 1, ErrorKind::Config, "jobs must be >= 1");
        for (int w : network.widths) require(w >= 1, ErrorKind::Config, "width must be positive");
        for (int d : network.depths) require(d >= 0, ErrorKind::Config, "depth must be non-negative");
        for (double m : network.std_multipliers) require(m > 0, ErrorKind::Config, "std_multiplier must be positive");
        require(measure.window >= 1 && measure.trajectory_k % measure.window == 0, ErrorKind::Config,
                "measure.window must divide measure.trajectory_k");
        require(measure.jacobian_points >= 1 && measure.transition_points >= 0, ErrorKind::Config,
                "measure point counts must be positive");
        if (augment) augment->validate();
    }
};

/// One point of the hyper-parameter grid.
struct GridCell {
    Index index = 0;
    int width = 0;
    int depth = 0;
    ActivationKind activation = ActivationKind::ReLU;
    double std_multiplier = 1.0;
    OptimizerConfig optimizer;
};

/// Cartesian product in a fixed nesting order: width, depth, activation,
/// std multiplier, optimizer, learning rate, batch size (innermost).
inline std::vector<GridCell> expand_grid(const ExperimentSpec& spec) {
    std::vector<GridCell> cells;
    for (int w : spec.network.widths)
        for (int d : spec.network.depths)
            for (auto a : spec.network.activations)
                for (double s : spec.network.std_multipliers)
                    for (auto k : spec.optimizer.kinds)
                        for (double lr : spec.optimizer.learning_rates)
                            for (int b : spec.optimizer.batch_sizes) {
                                GridCell c;
                                c.index = static_cast<Index>(cells.size());
                                c.width = w;
                                c.depth = d;
                                c.activation = a;
                                c.std_multiplier = s;
                                c.optimizer = spec.optimizer.base;
                                c.optimizer.kind = k;
                                c.optimizer.learning_rate = lr;
                                c.optimizer.batch_size = b;
                                cells.push_back(c);
                            }
    return cells;
}

namespace detail {

inline void check_keys(const json& obj, const std::string& section, std::initializer_list<std::string_view> allowed) {
    require(obj.is_object(), ErrorKind::Config, "section '" + section + "' must be an object");
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || a == item.key();
        require(ok, ErrorKind::Config,
                "unknown key '" + (section.empty() ? item.key() : section + "." + item.key()) + "'");
    }
}

template <typename T>
T get_scalar(const json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorKind::Config, "key '" + key + "' has the wrong type");
    }
}

template <typename T, typename Convert>
std::vector<T> get_list(const json& j, const std::string& key, Convert convert) {
    std::vector<T> out;
    if (j.is_array()) {
        require(!j.empty(), ErrorKind::Config, "key '" + key + "' must not be an empty list");
        for (const auto& e : j) out.push_back(convert(e));
    } else {
        out.push_back(convert(j));
    }
    return out;
}

inline int parse_batch(const json& j, const std::string& key) {
    if (j.is_string()) {
        require(j.get<std::string>() == "full", ErrorKind::Config, "key '" + key + "' accepts an integer or \"full\"");
        return OptimizerConfig::kFullBatch;
    }
    const int b = get_scalar<int>(j, key);
    require(b >= 1, ErrorKind::Config, "key '" + key + "' must be positive");
    return b;
}

inline std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
    if (p.empty()) return p;
    std::filesystem::path path(p);
    return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

}  // namespace detail

/// Builds a validated spec from a JSON document; relative paths resolve
/// against `base_dir`. Unknown keys are rejected by name.
inline ExperimentSpec parse_config_json(const json& root, const std::filesystem::path& base_dir = {}) {
    using detail::check_keys;
    using detail::get_list;
    using detail::get_scalar;
    ExperimentSpec spec;
    check_keys(root, "", {"kind", "dataset", "network", "optimizer", "loss", "augment", "seeds", "factor", "measure",
                          "precision", "output", "jobs"});
    require(root.contains("kind"), ErrorKind::Config, "missing required key 'kind'");
    spec.kind = parse_study(get_scalar<std::string>(root["kind"], "kind"));

    if (root.contains("dataset")) {
        const auto& d = root["dataset"];
        check_keys(d, "dataset", {"source", "train_images", "train_labels", "test_images", "test_labels", "train_subset",
                                  "test_subset", "blobs_per_class", "blobs_dim", "blobs_classes", "blobs_separation",
                                  "blobs_seed"});
        auto& ds = spec.dataset;
        if (d.contains("source")) ds.source = get_scalar<std::string>(d["source"], "dataset.source");
        require(ds.source == "idx" || ds.source == "synthetic", ErrorKind::Config,
                "dataset.source must be \"idx\" or \"synthetic\"");
        for (auto [key, field] : {std::pair{"train_images", &ds.train_images}, {"train_labels", &ds.train_labels},
                                  {"test_images", &ds.test_images}, {"test_labels", &ds.test_labels}})
            if (d.contains(key))
                *field = detail::resolve_path(get_scalar<std::string>(d[key], std::string("dataset.") + key), base_dir);
        if (d.contains("train_subset")) ds.train_subset = get_scalar<Index>(d["train_subset"], "dataset.train_subset");
        if (d.contains("test_subset")) ds.test_subset = get_scalar<Index>(d["test_subset"], "dataset.test_subset");
        if (d.contains("blobs_per_class")) ds.blobs_per_class = get_scalar<int>(d["blobs_per_class"], "dataset.blobs_per_class");
        if (d.contains("blobs_dim")) ds.blobs_dim = get_scalar<int>(d["blobs_dim"], "dataset.blobs_dim");
        if (d.contains("blobs_classes")) ds.blobs_classes = get_scalar<int>(d["blobs_classes"], "dataset.blobs_classes");
        if (d.contains("blobs_separation")) ds.blobs_separation = get_scalar<double>(d["blobs_separation"], "dataset.blobs_separation");
        if (d.contains("blobs_seed")) ds.blobs_seed = get_scalar<std::uint64_t>(d["blobs_seed"], "dataset.blobs_seed");
        require(ds.train_subset >= 0 && ds.test_subset >= 0, ErrorKind::Config, "dataset subsets must be >= 0");
        if (ds.source == "idx")
            require(!ds.train_images.empty() && !ds.train_labels.empty() && !ds.test_images.empty() &&
                        !ds.test_labels.empty(),
                    ErrorKind::Config, "idx datasets need train/test image and label paths");
    } else {
        spec.dataset.source = "synthetic";
    }

    if (root.contains("network")) {
        const auto& n = root["network"];
        check_keys(n, "network", {"width", "depth", "activation", "std_multiplier"});
        if (n.contains("width"))
            spec.network.widths = get_list<int>(n["width"], "network.width", [](const json& e) { return get_scalar<int>(e, "network.width"); });
        if (n.contains("depth"))
            spec.network.depths = get_list<int>(n["depth"], "network.depth", [](const json& e) { return get_scalar<int>(e, "network.depth"); });
        if (n.contains("activation"))
            spec.network.activations = get_list<ActivationKind>(n["activation"], "network.activation", [](const json& e) {
                try {
                    return parse_activation(get_scalar<std::string>(e, "network.activation"));
                } catch (const Error& err) {
                    throw Error(ErrorKind::Config, std::string("network.activation: ") + err.what());
                }
            });
        if (n.contains("std_multiplier"))
            spec.network.std_multipliers = get_list<double>(n["std_multiplier"], "network.std_multiplier",
                                                            [](const json& e) { return get_scalar<double>(e, "network.std_multiplier"); });
    }

    if (root.contains("optimizer")) {
        const auto& o = root["optimizer"];
        check_keys(o, "optimizer", {"kind", "learning_rate", "batch_size", "total_steps", "decay_factor",
                                    "decay_interval_steps", "momentum_coeff", "beta1", "beta2", "epsilon", "rms_decay"});
        auto& g = spec.optimizer;
        if (o.contains("kind"))
            g.kinds = get_list<OptimizerKind>(o["kind"], "optimizer.kind", [](const json& e) {
                try {
                    return parse_optimizer(get_scalar<std::string>(e, "optimizer.kind"));
                } catch (const Error& err) {
                    throw Error(ErrorKind::Config, std::string("optimizer.kind: ") + err.what());
                }
            });
        if (o.contains("learning_rate"))
            g.learning_rates = get_list<double>(o["learning_rate"], "optimizer.learning_rate",
                                                [](const json& e) { return get_scalar<double>(e, "optimizer.learning_rate"); });
        if (o.contains("batch_size"))
            g.batch_sizes = get_list<int>(o["batch_size"], "optimizer.batch_size",
                                          [](const json& e) { return detail::parse_batch(e, "optimizer.batch_size"); });
        auto& b = g.base;
        if (o.contains("total_steps")) b.total_steps = get_scalar<long>(o["total_steps"], "optimizer.total_steps");
        if (o.contains("decay_factor")) b.decay_factor = get_scalar<double>(o["decay_factor"], "optimizer.decay_factor");
        if (o.contains("decay_interval_steps")) b.decay_interval_steps = get_scalar<long>(o["decay_interval_steps"], "optimizer.decay_interval_steps");
        if (o.contains("momentum_coeff")) b.momentum_coeff = get_scalar<double>(o["momentum_coeff"], "optimizer.momentum_coeff");
        if (o.contains("beta1")) b.beta1 = get_scalar<double>(o["beta1"], "optimizer.beta1");
        if (o.contains("beta2")) b.beta2 = get_scalar<double>(o["beta2"], "optimizer.beta2");
        if (o.contains("epsilon")) b.epsilon = get_scalar<double>(o["epsilon"], "optimizer.epsilon");
        if (o.contains("rms_decay")) b.rms_decay = get_scalar<double>(o["rms_decay"], "optimizer.rms_decay");
        for (double lr : g.learning_rates) require(lr > 0, ErrorKind::Config, "optimizer.learning_rate must be positive");
        try {
            b.validate();
        } catch (const Error& err) {
            throw Error(ErrorKind::Config, std::string("optimizer: ") + err.what());
        }
    }

    if (root.contains("loss")) {
        try {
            spec.loss = parse_loss(get_scalar<std::string>(root["loss"], "loss"));
        } catch (const Error& err) {
            throw Error(ErrorKind::Config, std::string("loss: ") + err.what());
        }
    }

    if (root.contains("augment")) {
        const auto& a = root["augment"];
        check_keys(a, "augment", {"max_translate_px", "wrap", "hflip_prob", "image_width", "image_height"});
        AugmentConfig cfg;
        if (a.contains("max_translate_px")) cfg.max_translate_px = get_scalar<int>(a["max_translate_px"], "augment.max_translate_px");
        if (a.contains("wrap")) cfg.wrap = get_scalar<bool>(a["wrap"], "augment.wrap");
        if (a.contains("hflip_prob")) cfg.hflip_prob = get_scalar<double>(a["hflip_prob"], "augment.hflip_prob");
        if (a.contains("image_width")) cfg.image_width = get_scalar<int>(a["image_width"], "augment.image_width");
        if (a.contains("image_height")) cfg.image_height = get_scalar<int>(a["image_height"], "augment.image_height");
        try {
            cfg.validate();
        } catch (const Error& err) {
            throw Error(ErrorKind::Config, std::string("augment: ") + err.what());
        }
        spec.augment = cfg;
    }

    if (root.contains("seeds"))
        spec.seeds = get_list<std::uint64_t>(root["seeds"], "seeds", [](const json& e) { return get_scalar<std::uint64_t>(e, "seeds"); });
    if (root.contains("factor")) spec.factor = parse_factor(get_scalar<std::string>(root["factor"], "factor"));

    if (root.contains("measure")) {
        const auto& m = root["measure"];
        check_keys(m, "measure", {"jacobian_points", "transition_points", "translation_k", "trajectory_k", "window",
                                  "trajectory_kinds", "grid_resolution", "layers", "per_point_count"});
        auto& ms = spec.measure;
        if (m.contains("jacobian_points")) ms.jacobian_points = get_scalar<Index>(m["jacobian_points"], "measure.jacobian_points");
        if (m.contains("transition_points")) ms.transition_points = get_scalar<Index>(m["transition_points"], "measure.transition_points");
        if (m.contains("translation_k")) ms.translation_k = get_scalar<Index>(m["translation_k"], "measure.translation_k");
        if (m.contains("trajectory_k")) ms.trajectory_k = get_scalar<Index>(m["trajectory_k"], "measure.trajectory_k");
        if (m.contains("window")) ms.window = get_scalar<Index>(m["window"], "measure.window");
        if (m.contains("trajectory_kinds"))
            ms.trajectory_kinds = get_list<TrajectoryKind>(m["trajectory_kinds"], "measure.trajectory_kinds", [](const json& e) {
                return parse_trajectory_kind(get_scalar<std::string>(e, "measure.trajectory_kinds"));
            });
        if (m.contains("grid_resolution")) ms.grid_resolution = get_scalar<int>(m["grid_resolution"], "measure.grid_resolution");
        if (m.contains("layers")) {
            const auto layers = get_scalar<std::string>(m["layers"], "measure.layers");
            require(layers == "last_hidden" || layers == "all", ErrorKind::Config,
                    "measure.layers must be \"last_hidden\" or \"all\"");
            ms.all_layers = layers == "all";
        }
        if (m.contains("per_point_count")) ms.per_point_count = get_scalar<Index>(m["per_point_count"], "measure.per_point_count");
    }

    if (root.contains("precision")) {
        const auto p = get_scalar<std::string>(root["precision"], "precision");
        require(p == "f64" || p == "f32", ErrorKind::Config, "precision must be \"f64\" or \"f32\"");
        spec.precision = p == "f32" ? Precision::F32 : Precision::F64;
    }
    if (root.contains("output")) spec.output = detail::resolve_path(get_scalar<std::string>(root["output"], "output"), base_dir);
    if (root.contains("jobs")) spec.jobs = get_scalar<int>(root["jobs"], "jobs");
    spec.validate();
    return spec;
}

inline ExperimentSpec parse_config(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open config " + path);
    json root;
    try {
        root = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Config, path + ": " + e.what());
    }
    return parse_config_json(root, std::filesystem::absolute(path).parent_path());
}

}  // namespace nnsens::harness
