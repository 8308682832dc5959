#pragma once

#include "ratlab/dataset.hpp"
#include "ratlab/domain.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ratlab::nn {

/// The three published hidden-layer shapes.
inline const std::vector<std::vector<std::size_t>> kStandardShapes = {{12}, {24, 6}, {24, 10, 3}};

struct NetworkConfig {
    std::size_t input_width = 0;
    std::vector<std::size_t> hidden_layers{12};
    std::uint64_t init_seed = 0;
    bool allow_custom_shape = false;

    void validate() const;
    /// e.g. "24-10-3"
    std::string shape_label() const;

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

std::vector<std::size_t> parse_shape(std::string_view label);

enum class IterationUnit : std::uint8_t { steps, epochs };

struct TrainConfig {
    double learning_rate = 0.001;
    std::size_t batch_size = 50;
    std::uint64_t iterations = 50000;
    IterationUnit unit = IterationUnit::steps;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t shuffle_seed = 0;
    std::uint64_t trace_interval = 1000;  // steps per recorded mean loss

    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct LayerShape {
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;

    friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

/// All weights and biases in one flat buffer. Layer l stores its weight
/// matrix row-major (fan_in x fan_out) followed by its bias vector.
class ModelParams {
public:
    ModelParams() = default;
    explicit ModelParams(std::vector<LayerShape> shapes);

    const std::vector<LayerShape>& shapes() const { return shapes_; }
    std::size_t layer_count() const { return shapes_.size(); }

    std::span<double> weights(std::size_t layer);
    std::span<const double> weights(std::size_t layer) const;
    std::span<double> bias(std::size_t layer);
    std::span<const double> bias(std::size_t layer) const;

    std::span<double> flat() { return values_; }
    std::span<const double> flat() const { return values_; }
    std::size_t size() const { return values_.size(); }

    bool all_finite() const;
    void fill(double v);

    friend bool operator==(const ModelParams&, const ModelParams&) = default;

private:
    std::vector<LayerShape> shapes_;
    std::vector<std::size_t> offsets_;
    std::vector<double> values_;
};

std::vector<LayerShape> layer_shapes(const NetworkConfig& config);

/// Fan-balanced uniform weights, zero biases; deterministic in init_seed.
ModelParams init(const NetworkConfig& config);

/// Forward pass on an already-scaled input vector.
double forward(const ModelParams& params, std::span<const double> input);

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A mini-batch in row-major form: rows x width inputs and 0/1 targets.
struct BatchView {
    std::span<const double> inputs;
    std::span<const double> targets;
    std::size_t width = 0;

    std::size_t rows() const { return targets.size(); }
};

struct LossAndGrads {
    double loss = 0.0;
    ModelParams grads;
};

/// Mean binary cross-entropy over the batch and its backprop gradient.
/// Throws DivergenceError if the loss is not finite.
LossAndGrads loss_and_grads(const ModelParams& params, const BatchView& batch);

/// Mean binary cross-entropy only.
double batch_loss(const ModelParams& params, const BatchView& batch);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;  // number of updates applied so far

    static AdamState for_params(const ModelParams& params);
};

/// One bias-corrected Adam update at step state.step + 1.
void adam_update(ModelParams& params, AdamState& state, const ModelParams& grads, const TrainConfig& config);

/// Min-max scaling to [0,1] from schema-declared ranges.
class FeatureScaling;

/// A network input that has been scaled exactly once. Only FeatureScaling
/// can produce one, and FeatureScaling only accepts raw cases, so applying
/// the scaling twice does not compile.
class ScaledInput {
public:
    std::span<const double> values() const { return values_; }

private:
    friend class FeatureScaling;
    explicit ScaledInput(std::vector<double> v) : values_(std::move(v)) {}
    std::vector<double> values_;
};

class FeatureScaling {
public:
    struct Range {
        double offset = 0.0;
        double scale = 1.0;
        friend bool operator==(const Range&, const Range&) = default;
    };

    FeatureScaling() = default;
    explicit FeatureScaling(std::vector<Range> ranges);
    static FeatureScaling from_schema(const DomainSchema& schema);

    ScaledInput apply(const Case& raw) const;
    void apply_into(const Case& raw, std::span<double> out) const;

    const std::vector<Range>& ranges() const { return ranges_; }
    std::size_t width() const { return ranges_.size(); }

    friend bool operator==(const FeatureScaling&, const FeatureScaling&) = default;

private:
    std::vector<Range> ranges_;
};

struct TrainedModel {
    DomainId domain = DomainId::tort;
    NetworkConfig config;
    TrainConfig train_config;
    FeatureScaling scaling;
    ModelParams params;
    std::vector<double> loss_trace;

    /// Raw case in, probability out; scaling is applied here and nowhere else.
    double forward(const Case& raw) const;
    double forward(const ScaledInput& input) const;
    bool predict(const Case& raw) const { return forward(raw) >= 0.5; }

    friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

/// Fits scaling from the schema, then runs `iterations` Adam steps (or epochs)
/// over mini-batches drawn from a per-epoch seeded shuffle.
TrainedModel train(const Dataset& dataset, const NetworkConfig& network, const TrainConfig& config);

/// Output >= 0.5 counts as positive.
bool predict(const TrainedModel& model, const Case& raw);

/// Versioned little-endian binary layout; round trips bit-exactly.
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

class ModelFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ratlab::nn
