#include "ratlab/rationale.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

namespace ratlab::rationale {

OutputFn model_output(const nn::TrainedModel& model) {
    return [&model](const Case& c) { return model.forward(c); };
}

OutputFn oracle_stub(const DomainSchema& schema) {
    return [&schema](const Case& c) { return eval_label(schema, c) ? 1.0 : 0.0; };
}

OutputFn constant_stub(double output) {
    return [output](const Case&) { return output; };
}

OutputFn condition_stub(const DomainSchema& schema, std::string cond_id) {
    const auto& cond = schema.condition(cond_id);
    return [&schema, &cond](const Case& c) {
        schema.validate_features(c, cond.involved_indices());
        return cond.evaluate_unchecked(c) ? 1.0 : 0.0;
    };
}

double accuracy(const OutputFn& model, const Dataset& dataset) {
    if (dataset.cases.empty()) throw std::invalid_argument("accuracy of an empty dataset");
    std::size_t correct = 0;
    for (const auto& c : dataset.cases) {
        if (!c.label) throw std::invalid_argument("accuracy needs labelled cases");
        if ((model(c) >= 0.5) == *c.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.cases.size());
}

double accuracy(const nn::TrainedModel& model, const Dataset& dataset) {
    if (model.domain != dataset.domain)
        throw std::invalid_argument("model was trained for domain " + std::string(to_string(model.domain)) +
                                    ", dataset is " + std::string(to_string(dataset.domain)));
    return accuracy(model_output(model), dataset);
}

const CurveGroup& RationaleCurve::group(int value) const {
    for (const auto& g : groups)
        if (g.group_value == value) return g;
    throw std::out_of_range("curve has no group " + std::to_string(value));
}

bool RationaleCurve::same_grid(const RationaleCurve& other) const {
    if (groups.size() != other.groups.size()) return false;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& a = groups[g];
        const auto& b = other.groups[g];
        if (a.group_value != b.group_value || a.points.size() != b.points.size()) return false;
        for (std::size_t i = 0; i < a.points.size(); ++i)
            if (a.points[i].x != b.points[i].x) return false;
    }
    return true;
}

namespace {

std::string group_label(const FeatureSpec& f, int value) {
    if (f.kind == FeatureKind::binary_categorical) return f.categories[static_cast<std::size_t>(value)];
    return value ? "true" : "false";
}

}  // namespace

RationaleCurve output_curve(const OutputFn& model, const Dataset& dataset, std::string_view x_feature,
                            std::string_view group_feature) {
    const auto& schema = domain_schema(dataset.domain);
    const auto xi = schema.feature_index(x_feature);
    const auto gi = schema.feature_index(group_feature);
    const auto& xf = schema.features()[xi];
    const auto& gf = schema.features()[gi];
    if (xf.kind != FeatureKind::integer_range)
        throw std::invalid_argument("x feature " + xf.name + " is not numeric");
    if (gf.lo != 0 || gf.hi != 1) throw std::invalid_argument("group feature " + gf.name + " is not binary");

    std::map<std::pair<int, int>, std::pair<double, std::size_t>> sums;
    for (const auto& c : dataset.cases) {
        auto& [sum, n] = sums[{c.values.at(gi), c.values.at(xi)}];
        sum += model(c);
        ++n;
    }
    RationaleCurve curve{xf.name, gf.name, {}};
    for (const auto& [key, acc] : sums) {
        const auto [g, x] = key;
        if (curve.groups.empty() || curve.groups.back().group_value != g)
            curve.groups.push_back({g, group_label(gf, g), {}});
        curve.groups.back().points.push_back({x, acc.first / static_cast<double>(acc.second), acc.second});
    }
    return curve;
}

RationaleCurve ideal_curve(DomainId domain, std::string_view cond_id) {
    if (domain == DomainId::tort) throw std::invalid_argument("ideal curves exist only for the welfare domains");
    DatasetKind kind;
    std::string_view x, group;
    if (cond_id == "C1") {
        kind = DatasetKind::age_gender;
        x = "Age";
        group = "Gender";
    } else if (cond_id == "C6") {
        kind = DatasetKind::patient_distance;
        x = "Distance";
        group = "Type";
    } else {
        throw std::invalid_argument("no ideal curve for condition " + std::string(cond_id) + " (supported: C1, C6)");
    }
    // The grid comes from the dedicated set itself; its content is seed-independent.
    const auto grid = generate({domain, kind, std::nullopt, 0});
    const auto& schema = domain_schema(domain);
    return output_curve(condition_stub(schema, std::string(cond_id)), grid, x, group);
}

std::optional<Crossing> GroupTurningPoints::first() const {
    if (crossings.empty()) return std::nullopt;
    return crossings.front();
}

const GroupTurningPoints& TurningPointReport::group(int value) const {
    for (const auto& g : groups)
        if (g.group_value == value) return g;
    throw std::out_of_range("report has no group " + std::to_string(value));
}

TurningPointReport turning_points(const RationaleCurve& curve) {
    TurningPointReport report;
    for (const auto& g : curve.groups) {
        GroupTurningPoints tp{g.group_value, g.group_label, {}};
        for (std::size_t i = 1; i < g.points.size(); ++i) {
            const auto& a = g.points[i - 1];
            const auto& b = g.points[i];
            const bool above_a = a.mean_output >= 0.5;
            const bool above_b = b.mean_output >= 0.5;
            if (above_a == above_b) continue;
            const double t = (0.5 - a.mean_output) / (b.mean_output - a.mean_output);
            tp.crossings.push_back({a.x + t * (b.x - a.x), b.x, above_b});
        }
        report.groups.push_back(std::move(tp));
    }
    return report;
}

ConditionOutputTable condition_table(const OutputFn& model, const Dataset& dataset, std::string_view cond_id) {
    const auto& schema = domain_schema(dataset.domain);
    ConditionOutputTable table{std::string(cond_id), {false, 0.0, 0}, {true, 0.0, 0}};
    double sum_false = 0.0, sum_true = 0.0;
    for (const auto& c : dataset.cases) {
        const double out = model(c);
        if (eval_condition(schema, cond_id, c)) {
            sum_true += out;
            ++table.when_true.count;
        } else {
            sum_false += out;
            ++table.when_false.count;
        }
    }
    if (table.when_true.count == 0 || table.when_false.count == 0)
        throw std::invalid_argument("condition " + std::string(cond_id) + " does not vary in this dataset");
    table.when_false.mean_output = sum_false / static_cast<double>(table.when_false.count);
    table.when_true.mean_output = sum_true / static_cast<double>(table.when_true.count);
    return table;
}

CurveDeviation curve_deviation(const RationaleCurve& curve, const RationaleCurve& ideal,
                               std::optional<double> min_distance_from_threshold) {
    if (!curve.same_grid(ideal)) throw std::invalid_argument("curve and ideal curve are on different grids");
    const auto ideal_tp = turning_points(ideal);
    CurveDeviation out;
    double total = 0.0;
    for (std::size_t g = 0; g < curve.groups.size(); ++g) {
        const auto& cg = curve.groups[g];
        const auto& ig = ideal.groups[g];
        const auto switch_point = ideal_tp.groups[g].first();
        Deviation d;
        double sum = 0.0;
        for (std::size_t i = 0; i < cg.points.size(); ++i) {
            const int x = cg.points[i].x;
            if (min_distance_from_threshold && switch_point &&
                std::abs(static_cast<double>(x - switch_point->grid_x)) < *min_distance_from_threshold)
                continue;
            const double diff = std::abs(cg.points[i].mean_output - ig.points[i].mean_output);
            d.max_abs = std::max(d.max_abs, diff);
            sum += diff;
            ++d.points;
        }
        d.mean_abs = d.points ? sum / static_cast<double>(d.points) : 0.0;
        out.overall.max_abs = std::max(out.overall.max_abs, d.max_abs);
        out.overall.points += d.points;
        total += sum;
        out.per_group.emplace_back(cg.group_value, d);
    }
    out.overall.mean_abs = out.overall.points ? total / static_cast<double>(out.overall.points) : 0.0;
    return out;
}

RationaleCurve average_curves(const std::vector<RationaleCurve>& curves) {
    if (curves.empty()) throw std::invalid_argument("no curves to average");
    RationaleCurve avg = curves.front();
    for (auto& g : avg.groups)
        for (auto& p : g.points) {
            p.mean_output = 0.0;
            p.n = 0;
        }
    for (const auto& c : curves) {
        if (!c.same_grid(avg)) throw std::invalid_argument("cannot average curves on different grids");
        for (std::size_t g = 0; g < c.groups.size(); ++g)
            for (std::size_t i = 0; i < c.groups[g].points.size(); ++i) {
                avg.groups[g].points[i].mean_output += c.groups[g].points[i].mean_output;
                avg.groups[g].points[i].n += c.groups[g].points[i].n;
            }
    }
    for (auto& g : avg.groups)
        for (auto& p : g.points) p.mean_output /= static_cast<double>(curves.size());
    return avg;
}

namespace {

std::string shortest(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

void write_curve_tsv(const RationaleCurve& curve, std::ostream& out) {
    out << "group\tx\tmean_output\tn\n";
    for (const auto& g : curve.groups)
        for (const auto& p : g.points) out << g.group_label << '\t' << p.x << '\t' << shortest(p.mean_output) << '\t' << p.n << '\n';
}

nlohmann::ordered_json to_json(const RationaleCurve& curve) {
    nlohmann::ordered_json j;
    j["x_feature"] = curve.x_feature;
    j["group_feature"] = curve.group_feature;
    j["groups"] = nlohmann::ordered_json::array();
    for (const auto& g : curve.groups) {
        nlohmann::ordered_json jg;
        jg["group"] = g.group_label;
        jg["points"] = nlohmann::ordered_json::array();
        for (const auto& p : g.points) jg["points"].push_back({{"x", p.x}, {"mean_output", p.mean_output}, {"n", p.n}});
        j["groups"].push_back(jg);
    }
    return j;
}

nlohmann::ordered_json to_json(const TurningPointReport& report) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& g : report.groups) {
        nlohmann::ordered_json jg;
        if (auto first = g.first()) {
            jg["turning_point"] = first->x;
            jg["grid_point"] = first->grid_x;
            jg["direction"] = first->upward ? "up" : "down";
        } else {
            jg["turning_point"] = nullptr;
        }
        jg["crossings"] = nlohmann::ordered_json::array();
        for (const auto& c : g.crossings) jg["crossings"].push_back(c.x);
        j[g.group_label] = jg;
    }
    return j;
}

nlohmann::ordered_json to_json(const ConditionOutputTable& t) {
    nlohmann::ordered_json j;
    j["condition"] = t.condition;
    j["false"] = {{"mean_output", t.when_false.mean_output}, {"count", t.when_false.count}};
    j["true"] = {{"mean_output", t.when_true.mean_output}, {"count", t.when_true.count}};
    return j;
}

nlohmann::ordered_json to_json(const CurveDeviation& d) {
    nlohmann::ordered_json j;
    j["max_abs"] = d.overall.max_abs;
    j["mean_abs"] = d.overall.mean_abs;
    j["points"] = d.overall.points;
    return j;
}

}  // namespace ratlab::rationale
