#include "ratlab/network.hpp"

#include "ratlab/random.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <Eigen/Core>

namespace ratlab::nn {

void NetworkConfig::validate() const {
    if (input_width == 0) throw std::invalid_argument("network input width must be positive");
    if (hidden_layers.empty() && !allow_custom_shape) throw std::invalid_argument("network needs hidden layers");
    for (auto w : hidden_layers)
        if (w == 0) throw std::invalid_argument("hidden layer width must be positive");
    if (!allow_custom_shape &&
        std::find(kStandardShapes.begin(), kStandardShapes.end(), hidden_layers) == kStandardShapes.end())
        throw std::invalid_argument("hidden shape " + shape_label() + " is not one of 12, 24-6, 24-10-3");
}

std::string NetworkConfig::shape_label() const {
    std::string s;
    for (std::size_t i = 0; i < hidden_layers.size(); ++i) {
        if (i) s += '-';
        s += std::to_string(hidden_layers[i]);
    }
    return s;
}

std::vector<std::size_t> parse_shape(std::string_view label) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start <= label.size()) {
        auto pos = label.find('-', start);
        auto part = label.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        if (part.empty() || part.find_first_not_of("0123456789") != std::string_view::npos)
            throw std::invalid_argument("bad architecture '" + std::string(label) + "' (expected e.g. 24-10-3)");
        out.push_back(std::stoul(std::string(part)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning_rate must be > 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw std::invalid_argument("Adam betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw std::invalid_argument("Adam epsilon must be > 0");
    if (trace_interval < 1) throw std::invalid_argument("trace_interval must be >= 1");
}

ModelParams::ModelParams(std::vector<LayerShape> shapes) : shapes_(std::move(shapes)) {
    std::size_t total = 0;
    for (const auto& s : shapes_) {
        offsets_.push_back(total);
        total += s.fan_in * s.fan_out + s.fan_out;
    }
    values_.assign(total, 0.0);
}

std::span<double> ModelParams::weights(std::size_t l) {
    return {values_.data() + offsets_[l], shapes_[l].fan_in * shapes_[l].fan_out};
}
std::span<const double> ModelParams::weights(std::size_t l) const {
    return {values_.data() + offsets_[l], shapes_[l].fan_in * shapes_[l].fan_out};
}
std::span<double> ModelParams::bias(std::size_t l) {
    return {values_.data() + offsets_[l] + shapes_[l].fan_in * shapes_[l].fan_out, shapes_[l].fan_out};
}
std::span<const double> ModelParams::bias(std::size_t l) const {
    return {values_.data() + offsets_[l] + shapes_[l].fan_in * shapes_[l].fan_out, shapes_[l].fan_out};
}

bool ModelParams::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void ModelParams::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

std::vector<LayerShape> layer_shapes(const NetworkConfig& config) {
    std::vector<LayerShape> shapes;
    std::size_t in = config.input_width;
    for (auto w : config.hidden_layers) {
        shapes.push_back({in, w});
        in = w;
    }
    shapes.push_back({in, 1});
    return shapes;
}

ModelParams init(const NetworkConfig& config) {
    config.validate();
    ModelParams p(layer_shapes(config));
    Rng rng(config.init_seed);
    for (std::size_t l = 0; l < p.layer_count(); ++l) {
        const auto& s = p.shapes()[l];
        const double limit = std::sqrt(6.0 / static_cast<double>(s.fan_in + s.fan_out));
        for (double& w : p.weights(l)) w = rng.uniform_real(-limit, limit);
    }
    return p;
}

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// log(1 + e^z) without overflow.
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::RowVectorXd>;

// Everything Eigen touches lives in Eigen-owned storage. Maps over
// std::vector memory let the product kernels pick different paths depending
// on where the heap put the buffer, and then the rounding differs from run to run.
struct Workspace {
    std::vector<RowMatrix> weights;
    std::vector<Eigen::RowVectorXd> biases;
    std::vector<RowMatrix> acts;    // acts[l] = input to layer l; acts.back() = output logits
    std::vector<RowMatrix> deltas;  // deltas[l] = dLoss/d(pre-activation of layer l)
    std::vector<RowMatrix> grad_w;

    void load(const ModelParams& p, std::size_t rows) {
        const auto& shapes = p.shapes();
        const std::size_t layers = shapes.size();
        weights.resize(layers);
        biases.resize(layers);
        acts.resize(layers + 1);
        deltas.resize(layers);
        grad_w.resize(layers);
        const auto r = static_cast<Eigen::Index>(rows);
        acts[0].resize(r, static_cast<Eigen::Index>(shapes[0].fan_in));
        for (std::size_t l = 0; l < layers; ++l) {
            const auto fi = static_cast<Eigen::Index>(shapes[l].fan_in);
            const auto fo = static_cast<Eigen::Index>(shapes[l].fan_out);
            weights[l] = ConstMatrixMap(p.weights(l).data(), fi, fo);
            biases[l] = ConstVectorMap(p.bias(l).data(), fo);
            acts[l + 1].resize(r, fo);
        }
    }
};

void forward_pass(Workspace& ws) {
    const std::size_t layers = ws.weights.size();
    for (std::size_t l = 0; l < layers; ++l) {
        auto& out = ws.acts[l + 1];
        out.noalias() = ws.acts[l] * ws.weights[l];
        out.rowwise() += ws.biases[l];
        if (l + 1 < layers) out = (1.0 / (1.0 + (-out.array()).exp())).matrix();
    }
}

/// Returns the mean loss; accumulates gradients into `grads` when given.
double backprop(const ModelParams& p, const BatchView& batch, ModelParams* grads, Workspace& ws) {
    const std::size_t rows = batch.rows();
    const std::size_t layers = p.layer_count();
    if (rows == 0) throw std::invalid_argument("empty batch");
    if (batch.width != p.shapes()[0].fan_in || batch.inputs.size() != rows * batch.width)
        throw std::invalid_argument("batch width does not match the network input");
    ws.load(p, rows);
    std::copy(batch.inputs.begin(), batch.inputs.end(), ws.acts[0].data());
    forward_pass(ws);

    const auto& logits = ws.acts[layers];
    const double inv_n = 1.0 / static_cast<double>(rows);
    double loss = 0.0;
    auto& out_delta = ws.deltas[layers - 1];
    out_delta.resize(static_cast<Eigen::Index>(rows), 1);
    for (std::size_t r = 0; r < rows; ++r) {
        const double z = logits.data()[r];
        const double y = batch.targets[r];
        if (y != 0.0 && y != 1.0) throw std::invalid_argument("labels must be 0 or 1");
        loss += softplus(z) - y * z;
        out_delta.data()[r] = (sigmoid(z) - y) * inv_n;
    }
    loss *= inv_n;
    if (!std::isfinite(loss)) throw DivergenceError("non-finite training loss");
    if (!grads) return loss;

    for (std::size_t l = layers; l-- > 0;) {
        const auto& in = ws.acts[l];
        const auto& delta = ws.deltas[l];
        ws.grad_w[l].noalias() = in.transpose() * delta;
        auto gw = grads->weights(l);
        for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += ws.grad_w[l].data()[i];
        const Eigen::RowVectorXd gb = delta.colwise().sum();
        auto b = grads->bias(l);
        for (std::size_t i = 0; i < b.size(); ++i) b[i] += gb[static_cast<Eigen::Index>(i)];
        if (l == 0) break;
        auto& prev = ws.deltas[l - 1];
        prev.noalias() = delta * ws.weights[l].transpose();
        prev.array() *= in.array() * (1.0 - in.array());
    }
    return loss;
}

}  // namespace

double forward(const ModelParams& params, std::span<const double> input) {
    if (params.layer_count() == 0) throw std::invalid_argument("network has no layers");
    if (input.size() != params.shapes()[0].fan_in)
        throw std::invalid_argument("input width " + std::to_string(input.size()) + " does not match network width " +
                                    std::to_string(params.shapes()[0].fan_in));
    for (double x : input)
        if (!std::isfinite(x)) throw std::invalid_argument("non-finite network input");
    thread_local Workspace ws;
    ws.load(params, 1);
    std::copy(input.begin(), input.end(), ws.acts[0].data());
    forward_pass(ws);
    return sigmoid(ws.acts.back()(0, 0));
}

LossAndGrads loss_and_grads(const ModelParams& params, const BatchView& batch) {
    LossAndGrads out{0.0, ModelParams(params.shapes())};
    Workspace ws;
    out.loss = backprop(params, batch, &out.grads, ws);
    return out;
}

double batch_loss(const ModelParams& params, const BatchView& batch) {
    Workspace ws;
    return backprop(params, batch, nullptr, ws);
}

AdamState AdamState::for_params(const ModelParams& params) {
    return {std::vector<double>(params.size(), 0.0), std::vector<double>(params.size(), 0.0), 0};
}

void adam_update(ModelParams& params, AdamState& state, const ModelParams& grads, const TrainConfig& config) {
    auto p = params.flat();
    auto g = grads.flat();
    if (state.m.size() != p.size() || state.v.size() != p.size() || g.size() != p.size())
        throw std::invalid_argument("Adam state does not match parameter shapes");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t i = 0; i < p.size(); ++i) {
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g[i];
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g[i] * g[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        p[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
}

FeatureScaling::FeatureScaling(std::vector<Range> ranges) : ranges_(std::move(ranges)) {
    for (const auto& r : ranges_)
        if (!(r.scale > 0.0) || !std::isfinite(r.offset)) throw std::invalid_argument("feature scale must be > 0");
}

FeatureScaling FeatureScaling::from_schema(const DomainSchema& schema) {
    std::vector<Range> ranges;
    for (const auto& f : schema.features())
        ranges.push_back({static_cast<double>(f.lo), static_cast<double>(std::max(f.width(), 1))});
    return FeatureScaling(std::move(ranges));
}

void FeatureScaling::apply_into(const Case& raw, std::span<double> out) const {
    if (raw.values.size() != ranges_.size() || out.size() != ranges_.size())
        throw std::invalid_argument("case has " + std::to_string(raw.values.size()) + " values, model expects " +
                                    std::to_string(ranges_.size()));
    for (std::size_t i = 0; i < ranges_.size(); ++i)
        out[i] = (static_cast<double>(raw.values[i]) - ranges_[i].offset) / ranges_[i].scale;
}

ScaledInput FeatureScaling::apply(const Case& raw) const {
    std::vector<double> v(ranges_.size());
    apply_into(raw, v);
    return ScaledInput(std::move(v));
}

double TrainedModel::forward(const Case& raw) const { return nn::forward(params, scaling.apply(raw).values()); }

double TrainedModel::forward(const ScaledInput& input) const { return nn::forward(params, input.values()); }

bool predict(const TrainedModel& model, const Case& raw) { return model.predict(raw); }

TrainedModel train(const Dataset& dataset, const NetworkConfig& network, const TrainConfig& config) {
    config.validate();
    network.validate();
    if (dataset.cases.empty()) throw std::invalid_argument("cannot train on an empty dataset");
    const auto& schema = domain_schema(dataset.domain);
    if (network.input_width != schema.width())
        throw std::invalid_argument("network input width " + std::to_string(network.input_width) +
                                    " does not match domain width " + std::to_string(schema.width()));

    TrainedModel model;
    model.domain = dataset.domain;
    model.config = network;
    model.train_config = config;
    model.scaling = FeatureScaling::from_schema(schema);
    model.params = init(network);

    const std::size_t n = dataset.cases.size();
    const std::size_t d = schema.width();
    std::vector<double> xs(n * d), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = dataset.cases[i];
        if (!c.label) throw std::invalid_argument("training case " + std::to_string(i) + " has no label");
        model.scaling.apply_into(c, std::span<double>(xs.data() + i * d, d));
        ys[i] = *c.label ? 1.0 : 0.0;
    }

    const std::size_t batch = std::min(config.batch_size, n);
    const std::uint64_t steps_per_epoch = (n + batch - 1) / batch;
    const std::uint64_t total_steps =
        config.unit == IterationUnit::steps ? config.iterations : config.iterations * steps_per_epoch;

    Rng rng(config.shuffle_seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    std::size_t cursor = 0;

    ModelParams grads(model.params.shapes());
    AdamState adam = AdamState::for_params(model.params);
    Workspace ws;
    std::vector<double> bx(batch * d), by(batch);
    double trace_sum = 0.0;
    std::uint64_t trace_count = 0;

    for (std::uint64_t step = 0; step < total_steps; ++step) {
        if (cursor >= n) {
            rng.shuffle(std::span<std::size_t>(order));
            cursor = 0;
        }
        const std::size_t rows = std::min(batch, n - cursor);
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t idx = order[cursor + r];
            std::copy_n(xs.data() + idx * d, d, bx.data() + r * d);
            by[r] = ys[idx];
        }
        cursor += rows;

        grads.fill(0.0);
        double loss;
        try {
            loss = backprop(model.params, {std::span<const double>(bx.data(), rows * d),
                                           std::span<const double>(by.data(), rows), d},
                            &grads, ws);
        } catch (const DivergenceError&) {
            throw DivergenceError("training diverged at step " + std::to_string(step + 1) +
                                  ": loss is not finite");
        }
        adam_update(model.params, adam, grads, config);

        trace_sum += loss;
        if (++trace_count == config.trace_interval || step + 1 == total_steps) {
            model.loss_trace.push_back(trace_sum / static_cast<double>(trace_count));
            trace_sum = 0.0;
            trace_count = 0;
        }
    }
    if (!model.params.all_finite()) throw DivergenceError("training produced non-finite parameters");
    return model;
}

namespace {

constexpr char kMagic[8] = {'R', 'A', 'T', 'L', 'M', 'O', 'D', 'L'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}
    void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void tag(const char (&t)[5]) { out_.write(t, 4); }
    void f64s(std::span<const double> vs) {
        u64(vs.size());
        for (double v : vs) f64(v);
    }

private:
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}
    std::uint8_t u8() {
        const int c = in_.get();
        if (c == std::char_traits<char>::eof()) throw ModelFormatError("model file truncated");
        return static_cast<std::uint8_t>(c);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    void expect_tag(const char (&t)[5]) {
        char got[4];
        for (char& c : got) c = static_cast<char>(u8());
        if (std::string_view(got, 4) != std::string_view(t, 4))
            throw ModelFormatError("expected section " + std::string(t, 4) + ", found " + std::string(got, 4));
    }
    std::uint64_t count(std::uint64_t limit) {
        const auto n = u64();
        if (n > limit) throw ModelFormatError("implausible element count " + std::to_string(n));
        return n;
    }
    std::vector<double> f64s(std::uint64_t limit) {
        std::vector<double> v(count(limit));
        for (double& x : v) x = f64();
        return v;
    }

private:
    std::istream& in_;
};

constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

}  // namespace

void save_model(const TrainedModel& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(kMagic, sizeof kMagic);
    Writer w(out);
    w.u32(kFormatVersion);
    w.u8(static_cast<std::uint8_t>(m.domain));

    w.tag("CONF");
    w.u64(m.config.input_width);
    w.u64(m.config.hidden_layers.size());
    for (auto h : m.config.hidden_layers) w.u64(h);
    w.u64(m.config.init_seed);
    w.u8(m.config.allow_custom_shape ? 1 : 0);

    w.tag("TRAN");
    const auto& t = m.train_config;
    w.f64(t.learning_rate);
    w.u64(t.batch_size);
    w.u64(t.iterations);
    w.u8(static_cast<std::uint8_t>(t.unit));
    w.f64(t.beta1);
    w.f64(t.beta2);
    w.f64(t.epsilon);
    w.u64(t.shuffle_seed);
    w.u64(t.trace_interval);

    w.tag("SCAL");
    w.u64(m.scaling.width());
    for (const auto& r : m.scaling.ranges()) {
        w.f64(r.offset);
        w.f64(r.scale);
    }

    w.tag("PARM");
    w.u64(m.params.layer_count());
    for (const auto& s : m.params.shapes()) {
        w.u64(s.fan_in);
        w.u64(s.fan_out);
    }
    w.f64s(m.params.flat());

    w.tag("LOSS");
    w.f64s(m.loss_trace);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelFormatError("cannot open " + path.string());
    char magic[8];
    if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + 8, kMagic))
        throw ModelFormatError(path.string() + " is not a model file");
    Reader r(in);
    if (const auto v = r.u32(); v != kFormatVersion)
        throw ModelFormatError("unsupported model format version " + std::to_string(v));
    TrainedModel m;
    const auto domain = r.u8();
    if (domain > 2) throw ModelFormatError("bad domain id");
    m.domain = static_cast<DomainId>(domain);

    r.expect_tag("CONF");
    m.config.input_width = r.u64();
    m.config.hidden_layers.resize(r.count(64));
    for (auto& h : m.config.hidden_layers) h = r.u64();
    m.config.init_seed = r.u64();
    m.config.allow_custom_shape = r.u8() != 0;

    r.expect_tag("TRAN");
    auto& t = m.train_config;
    t.learning_rate = r.f64();
    t.batch_size = r.u64();
    t.iterations = r.u64();
    t.unit = static_cast<IterationUnit>(r.u8());
    t.beta1 = r.f64();
    t.beta2 = r.f64();
    t.epsilon = r.f64();
    t.shuffle_seed = r.u64();
    t.trace_interval = r.u64();

    r.expect_tag("SCAL");
    std::vector<FeatureScaling::Range> ranges(r.count(kMaxElements));
    for (auto& range : ranges) {
        range.offset = r.f64();
        range.scale = r.f64();
    }
    try {
        m.scaling = FeatureScaling(std::move(ranges));
    } catch (const std::invalid_argument& e) {
        throw ModelFormatError(e.what());
    }

    r.expect_tag("PARM");
    std::vector<LayerShape> shapes(r.count(64));
    for (auto& s : shapes) {
        s.fan_in = r.u64();
        s.fan_out = r.u64();
    }
    m.params = ModelParams(shapes);
    const auto values = r.f64s(kMaxElements);
    if (values.size() != m.params.size()) throw ModelFormatError("parameter count does not match layer shapes");
    std::copy(values.begin(), values.end(), m.params.flat().begin());
    if (shapes != layer_shapes(m.config)) throw ModelFormatError("layer shapes do not match network config");

    r.expect_tag("LOSS");
    m.loss_trace = r.f64s(kMaxElements);
    return m;
}

}  // namespace ratlab::nn
