#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ratlab {

enum class DomainId { welfare, simplified, tort };

std::string_view to_string(DomainId id);
DomainId parse_domain(std::string_view name);

enum class FeatureKind { boolean, integer_range, binary_categorical };
enum class FeatureRole { substantive, noise };

/// One input column. Every value is stored as an integer: booleans as 0/1,
/// categoricals as the index of their label (female=1/male=0, in=0/out=1).
struct FeatureSpec {
    std::string name;
    FeatureKind kind = FeatureKind::boolean;
    FeatureRole role = FeatureRole::substantive;
    int lo = 0;
    int hi = 1;
    std::array<std::string, 2> categories{};  // binary_categorical only

    bool accepts(int value) const { return value >= lo && value <= hi; }
    int width() const { return hi - lo; }
};

/// A feature assignment in the schema's canonical feature order.
struct Case {
    std::vector<int> values;
    std::optional<bool> label;

    friend bool operator==(const Case&, const Case&) = default;
};

/// Raised for cases that do not fit a schema; carries the offending feature.
class CaseError : public std::invalid_argument {
public:
    CaseError(std::string feature, const std::string& what)
        : std::invalid_argument(what), feature_(std::move(feature)) {}
    const std::string& feature() const { return feature_; }

private:
    std::string feature_;
};

/// A named boolean condition. The predicate only ever receives the values of
/// its involved features, in declaration order, so it cannot read anything else.
class Condition {
public:
    using Predicate = std::function<bool(std::span<const int>)>;

    Condition(std::string id, std::string notion, std::vector<std::string> involved,
              std::vector<std::size_t> indices, Predicate predicate);

    const std::string& id() const { return id_; }
    /// Legal notion captured by the condition, if any (tort domain only).
    const std::string& notion() const { return notion_; }
    const std::vector<std::string>& involved_features() const { return involved_; }
    const std::vector<std::size_t>& involved_indices() const { return indices_; }

    /// Evaluates without range checks; callers validate first.
    bool evaluate_unchecked(const Case& c) const;

private:
    std::string id_;
    std::string notion_;
    std::vector<std::string> involved_;
    std::vector<std::size_t> indices_;
    Predicate predicate_;
};

class DomainSchema {
public:
    DomainSchema(DomainId id, std::vector<FeatureSpec> features, std::string label_name);

    DomainId id() const { return id_; }
    const std::vector<FeatureSpec>& features() const { return features_; }
    const std::vector<Condition>& conditions() const { return conditions_; }
    const std::string& label_name() const { return label_name_; }
    std::size_t width() const { return features_.size(); }

    /// Index of a feature in canonical order; throws for unknown names.
    std::size_t feature_index(std::string_view name) const;
    std::optional<std::size_t> find_feature(std::string_view name) const;
    const Condition& condition(std::string_view id) const;
    std::size_t condition_index(std::string_view id) const;

    /// Throws CaseError naming the first missing or out-of-range feature.
    void validate(const Case& c) const;
    void validate_features(const Case& c, std::span<const std::size_t> indices) const;

    void add_condition(std::string id, std::string notion, std::vector<std::string> involved,
                       Condition::Predicate predicate);

private:
    DomainId id_;
    std::vector<FeatureSpec> features_;
    std::vector<Condition> conditions_;
    std::string label_name_;
};

DomainSchema build_domain(DomainId id);
DomainSchema build_domain(std::string_view id);

/// Shared immutable schema instance; safe for concurrent use.
const DomainSchema& domain_schema(DomainId id);

bool eval_condition(const DomainSchema& schema, std::string_view cond_id, const Case& c);
bool eval_label(const DomainSchema& schema, const Case& c);

/// Number of conditions the case fails.
std::size_t count_failed_conditions(const DomainSchema& schema, const Case& c);

// Welfare thresholds shared by the generators and the ideal curves.
inline constexpr int kFemalePensionAge = 60;
inline constexpr int kMalePensionAge = 65;
inline constexpr int kResourceLimit = 3000;
inline constexpr int kDistanceLimit = 50;
inline constexpr int kMinContributions = 4;
inline constexpr int kNoiseFeatures = 52;

inline constexpr int kMale = 0;
inline constexpr int kFemale = 1;
inline constexpr int kInPatient = 0;
inline constexpr int kOutPatient = 1;

}  // namespace ratlab
