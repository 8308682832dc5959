#pragma once

#include "ratlab/domain.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ratlab {

enum class DatasetKind {
    type_a,
    type_b,
    age_gender,
    patient_distance,
    tort_unique,
    tort_regular,
    unlawfulness,
    imputability,
};

/// CLI / file spelling: type-a, type-b, age-gender, patient-distance,
/// unique, regular, unlawfulness, imputability.
std::string_view to_string(DatasetKind kind);
DatasetKind parse_kind(std::string_view name);

/// True for kinds defined by a fixed grid or enumeration (size is implied).
bool is_enumerated(DatasetKind kind);
/// True when the kind's content does not depend on the seed.
bool is_seed_independent(DomainId domain, DatasetKind kind);
bool kind_belongs_to(DomainId domain, DatasetKind kind);

/// Condition a dedicated test set isolates, e.g. age-gender -> C1.
std::optional<std::string> targeted_condition(DatasetKind kind);

inline constexpr std::string_view kGeneratorVersion = "ratlab-gen/1";

struct DatasetMeta {
    std::uint64_t seed = 0;
    std::string generator_version{kGeneratorVersion};
    std::size_t size = 0;
    double positive_fraction = 0.0;

    friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

struct Dataset {
    DomainId domain = DomainId::tort;
    std::optional<DatasetKind> kind;  // unset for files without a sidecar
    std::vector<Case> cases;
    DatasetMeta meta;

    std::size_t positives() const;
    friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct GeneratorRequest {
    DomainId domain = DomainId::tort;
    DatasetKind kind = DatasetKind::tort_unique;
    std::optional<std::size_t> size;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument if the combination is not allowed.
    void validate() const;
    /// Short stable label, e.g. "type-b/2400" or "unique".
    std::string label() const;
};

Dataset gen_welfare(DatasetKind kind, std::optional<std::size_t> size, std::uint64_t seed, bool simplified);
Dataset gen_tort(DatasetKind kind, std::optional<std::size_t> size, std::uint64_t seed);
Dataset generate(const GeneratorRequest& request);

/// Writes `path` (CSV) and the `.meta.json` sidecar next to it.
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
/// Reads a CSV written by write_dataset. The sidecar is optional.
Dataset read_dataset(const std::filesystem::path& path, const DomainSchema& schema);

std::filesystem::path meta_path_for(const std::filesystem::path& csv_path);

class DatasetFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ratlab
