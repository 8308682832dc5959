#pragma once

#include "ratlab/dataset.hpp"
#include "ratlab/network.hpp"
#include "ratlab/rationale.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ratlab::experiment {

struct DatasetSpec {
    DatasetKind kind = DatasetKind::tort_unique;
    std::optional<std::size_t> size;

    std::string label() const;
    friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

/// Every training set is combined with every test set and every architecture.
struct ExperimentPlan {
    std::string name;
    DomainId domain = DomainId::tort;
    std::vector<DatasetSpec> train_specs;
    std::vector<DatasetSpec> test_specs;
    std::vector<std::vector<std::size_t>> architectures;
    nn::TrainConfig train_config;  // shuffle_seed is derived per run
    std::size_t repetitions = 50;
    std::uint64_t master_seed = 0;

    void validate() const;
    std::size_t cell_count() const { return train_specs.size() * test_specs.size() * architectures.size(); }
};

ExperimentPlan plan_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const ExperimentPlan& plan);
/// Reads a plan file, or the plan embedded in an emitted manifest.
ExperimentPlan load_plan(const std::filesystem::path& path);

struct RepetitionResult {
    std::size_t repetition = 0;
    std::uint64_t train_seed = 0;
    std::uint64_t test_seed = 0;
    std::uint64_t init_seed = 0;
    std::uint64_t shuffle_seed = 0;
    std::optional<double> accuracy;  // percent; unset if training diverged
};

struct CellSummary {
    std::string train;
    std::string test;
    std::string arch;
    double mean = 0.0;  // percent
    double std = 0.0;   // population std over repetitions, percent
    double min = 0.0;
    double max = 0.0;
    std::size_t n = 0;
    std::size_t excluded = 0;
    std::vector<RepetitionResult> repetitions;
};

struct CurveSummary {
    std::string train;
    std::string test;
    std::string arch;
    std::string condition;
    rationale::RationaleCurve mean_curve;  // averaged over repetitions
    rationale::RationaleCurve ideal;
    rationale::TurningPointReport turning_points;
    rationale::CurveDeviation deviation;
    rationale::CurveDeviation deviation_off_threshold;  // grid points >= 5 units from the switch
    std::string file;                                   // relative TSV path
};

struct TableSummary {
    std::string train;
    std::string test;
    std::string arch;
    rationale::ConditionOutputTable table;  // mean outputs averaged over repetitions
    std::size_t repetitions = 0;
};

struct AggregateReport {
    ExperimentPlan plan;
    std::vector<CellSummary> cells;  // train-major, then test, then architecture
    std::vector<CurveSummary> curves;
    std::vector<TableSummary> tables;
    std::size_t diverged_runs = 0;

    const CellSummary& cell(std::string_view train, std::string_view test, std::string_view arch) const;
    const CurveSummary& curve(std::string_view train, std::string_view test, std::string_view arch) const;
    const TableSummary& table(std::string_view train, std::string_view test, std::string_view arch) const;
};

struct RunOptions {
    std::size_t parallelism = 1;
    std::function<void(const std::string&)> log;
};

AggregateReport run_plan(const ExperimentPlan& plan, const RunOptions& options = {});

nlohmann::ordered_json summary_json(const AggregateReport& report);
nlohmann::ordered_json condition_tables_json(const AggregateReport& report);
nlohmann::ordered_json manifest_json(const AggregateReport& report, std::string_view created_at);

/// Writes summary.json, accuracy.csv, condition_tables.json, manifest.json and
/// curves/*.tsv under `dir`.
void emit_report(const AggregateReport& report, const std::filesystem::path& dir);

}  // namespace ratlab::experiment
