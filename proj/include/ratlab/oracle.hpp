#pragma once

#include "ratlab/dataset.hpp"
#include "ratlab/domain.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace ratlab::oracle {

// Ground truth that deliberately shares no code with the Condition objects:
// every formula is transcribed again here, against raw feature values.

/// All 1024 tort assignments in lexicographic order (cau most significant),
/// labelled by the transcribed duty-to-repair formula.
Dataset enumerate_tort();

/// Per-condition truth values for a case of the given domain, in condition order.
std::vector<bool> condition_values(const DomainSchema& schema, const Case& c);
bool label(const DomainSchema& schema, const Case& c);

struct VerificationReport {
    std::optional<DatasetKind> kind;
    std::size_t size = 0;
    bool size_ok = true;
    std::vector<std::size_t> label_mismatch_rows;  // 0-based row indices
    double positive_fraction = 0.0;
    std::size_t positives = 0;
    std::map<std::string, std::size_t> per_condition_failure_counts;  // among negatives
    std::map<std::size_t, std::size_t> failed_condition_histogram;    // k -> negatives failing exactly k
    std::size_t duplicate_count = 0;

    std::size_t label_mismatches() const { return label_mismatch_rows.size(); }
    bool passed() const { return size_ok && label_mismatch_rows.empty(); }
    double mean_failed_conditions() const;
};

/// Audits every row: the stored label must agree with both the transcribed
/// formulas and the knowledge-domain evaluation.
VerificationReport verify_dataset(const Dataset& dataset, const DomainSchema& schema);

nlohmann::ordered_json to_json(const VerificationReport& report);

struct ExpectedStats {
    std::size_t size = 0;
    std::size_t positives = 0;
    double positive_fraction() const { return static_cast<double>(positives) / static_cast<double>(size); }
};

/// Size and label balance of an enumerated kind, computed by walking its grid
/// with the transcribed formulas.
ExpectedStats expected_stats(DomainId domain, DatasetKind kind);

}  // namespace ratlab::oracle
