#pragma once

#include "ratlab/dataset.hpp"
#include "ratlab/domain.hpp"
#include "ratlab/network.hpp"

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace ratlab::rationale {

/// Anything that maps a raw case to an output in [0,1]. Trained networks,
/// and the oracle / constant / condition stubs used as reference points.
using OutputFn = std::function<double(const Case&)>;

OutputFn model_output(const nn::TrainedModel& model);
OutputFn oracle_stub(const DomainSchema& schema);
OutputFn constant_stub(double output);
OutputFn condition_stub(const DomainSchema& schema, std::string cond_id);

/// Fraction of cases where (output >= 0.5) equals the stored label.
double accuracy(const OutputFn& model, const Dataset& dataset);
double accuracy(const nn::TrainedModel& model, const Dataset& dataset);

struct CurvePoint {
    int x = 0;
    double mean_output = 0.0;
    std::size_t n = 0;

    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct CurveGroup {
    int group_value = 0;
    std::string group_label;
    std::vector<CurvePoint> points;  // strictly increasing x

    friend bool operator==(const CurveGroup&, const CurveGroup&) = default;
};

/// Mean output as a function of one feature, one series per value of a binary feature.
/// Ideal curves use the same shape with outputs in {0,1}.
struct RationaleCurve {
    std::string x_feature;
    std::string group_feature;
    std::vector<CurveGroup> groups;

    const CurveGroup& group(int value) const;
    /// Same groups and x grid, ignoring outputs and counts.
    bool same_grid(const RationaleCurve& other) const;

    friend bool operator==(const RationaleCurve&, const RationaleCurve&) = default;
};

RationaleCurve output_curve(const OutputFn& model, const Dataset& dataset, std::string_view x_feature,
                            std::string_view group_feature);

/// Condition truth over the grid of its dedicated test set (C1: age x gender,
/// C6: distance x patient type).
RationaleCurve ideal_curve(DomainId domain, std::string_view cond_id);

struct Crossing {
    double x = 0.0;       // linear interpolation between the bracketing grid points
    int grid_x = 0;       // first grid point on the far side of 0.5
    bool upward = true;
};

struct GroupTurningPoints {
    int group_value = 0;
    std::string group_label;
    std::vector<Crossing> crossings;  // in x order; empty means no crossing

    std::optional<Crossing> first() const;
};

/// A point counts as "above" when its output is >= 0.5 (the predict convention),
/// so a curve that sits exactly on 0.5 never crosses.
struct TurningPointReport {
    std::vector<GroupTurningPoints> groups;

    const GroupTurningPoints& group(int value) const;
};

TurningPointReport turning_points(const RationaleCurve& curve);

struct ConditionRow {
    bool truth = false;
    double mean_output = 0.0;
    std::size_t count = 0;
};

struct ConditionOutputTable {
    std::string condition;
    ConditionRow when_false;
    ConditionRow when_true;
};

ConditionOutputTable condition_table(const OutputFn& model, const Dataset& dataset, std::string_view cond_id);

struct Deviation {
    double max_abs = 0.0;
    double mean_abs = 0.0;
    std::size_t points = 0;
};

struct CurveDeviation {
    Deviation overall;
    std::vector<std::pair<int, Deviation>> per_group;  // group value -> deviation
};

/// Pointwise |curve - ideal|. With `min_distance_from_threshold`, grid points
/// closer than that to the ideal curve's switch point are skipped.
CurveDeviation curve_deviation(const RationaleCurve& curve, const RationaleCurve& ideal,
                               std::optional<double> min_distance_from_threshold = std::nullopt);

/// Mean of several curves on the same grid (e.g. across repetitions).
RationaleCurve average_curves(const std::vector<RationaleCurve>& curves);

void write_curve_tsv(const RationaleCurve& curve, std::ostream& out);

nlohmann::ordered_json to_json(const RationaleCurve& curve);
nlohmann::ordered_json to_json(const TurningPointReport& report);
nlohmann::ordered_json to_json(const ConditionOutputTable& table);
nlohmann::ordered_json to_json(const CurveDeviation& deviation);

}  // namespace ratlab::rationale
