#include "ratlab/domain.hpp"

#include <algorithm>
#include <numeric>

namespace ratlab {

std::string_view to_string(DomainId id) {
    switch (id) {
        case DomainId::welfare: return "welfare";
        case DomainId::simplified: return "simplified";
        case DomainId::tort: return "tort";
    }
    return "?";
}

DomainId parse_domain(std::string_view name) {
    if (name == "welfare") return DomainId::welfare;
    if (name == "simplified") return DomainId::simplified;
    if (name == "tort") return DomainId::tort;
    throw std::invalid_argument("unknown domain '" + std::string(name) +
                                "' (expected welfare, simplified or tort)");
}

Condition::Condition(std::string id, std::string notion, std::vector<std::string> involved,
                     std::vector<std::size_t> indices, Predicate predicate)
    : id_(std::move(id)),
      notion_(std::move(notion)),
      involved_(std::move(involved)),
      indices_(std::move(indices)),
      predicate_(std::move(predicate)) {}

bool Condition::evaluate_unchecked(const Case& c) const {
    std::array<int, 8> buf{};
    for (std::size_t i = 0; i < indices_.size(); ++i) buf[i] = c.values[indices_[i]];
    return predicate_(std::span<const int>(buf.data(), indices_.size()));
}

DomainSchema::DomainSchema(DomainId id, std::vector<FeatureSpec> features, std::string label_name)
    : id_(id), features_(std::move(features)), label_name_(std::move(label_name)) {
    for (const auto& f : features_) {
        if (f.lo > f.hi) throw std::invalid_argument("feature " + f.name + ": lo > hi");
        if (f.kind == FeatureKind::binary_categorical &&
            (f.lo != 0 || f.hi != 1 || f.categories[0] == f.categories[1]))
            throw std::invalid_argument("feature " + f.name + ": needs two distinct categories");
    }
}

std::optional<std::size_t> DomainSchema::find_feature(std::string_view name) const {
    for (std::size_t i = 0; i < features_.size(); ++i)
        if (features_[i].name == name) return i;
    return std::nullopt;
}

std::size_t DomainSchema::feature_index(std::string_view name) const {
    if (auto i = find_feature(name)) return *i;
    throw std::invalid_argument("unknown feature '" + std::string(name) + "' in domain " +
                                std::string(to_string(id_)));
}

std::size_t DomainSchema::condition_index(std::string_view id) const {
    for (std::size_t i = 0; i < conditions_.size(); ++i)
        if (conditions_[i].id() == id) return i;
    throw std::invalid_argument("unknown condition '" + std::string(id) + "' in domain " +
                                std::string(to_string(id_)));
}

const Condition& DomainSchema::condition(std::string_view id) const {
    return conditions_[condition_index(id)];
}

void DomainSchema::validate_features(const Case& c, std::span<const std::size_t> indices) const {
    for (std::size_t i : indices) {
        const auto& f = features_[i];
        if (i >= c.values.size()) throw CaseError(f.name, "missing value for feature " + f.name);
        if (!f.accepts(c.values[i]))
            throw CaseError(f.name, "value " + std::to_string(c.values[i]) + " out of range [" +
                                        std::to_string(f.lo) + ", " + std::to_string(f.hi) +
                                        "] for feature " + f.name);
    }
}

void DomainSchema::validate(const Case& c) const {
    std::vector<std::size_t> all(features_.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    validate_features(c, all);
    if (c.values.size() > features_.size())
        throw CaseError("", "case has " + std::to_string(c.values.size()) + " values, schema has " +
                                std::to_string(features_.size()) + " features");
}

void DomainSchema::add_condition(std::string id, std::string notion, std::vector<std::string> involved,
                                 Condition::Predicate predicate) {
    if (involved.size() > 8) throw std::invalid_argument("condition " + id + ": too many features");
    std::vector<std::size_t> indices;
    for (const auto& name : involved) indices.push_back(feature_index(name));
    conditions_.emplace_back(std::move(id), std::move(notion), std::move(involved), std::move(indices),
                             std::move(predicate));
}

namespace {

FeatureSpec boolean(std::string name, FeatureRole role = FeatureRole::substantive) {
    return {std::move(name), FeatureKind::boolean, role, 0, 1, {}};
}

FeatureSpec integer(std::string name, int lo, int hi, FeatureRole role = FeatureRole::substantive) {
    return {std::move(name), FeatureKind::integer_range, role, lo, hi, {}};
}

FeatureSpec categorical(std::string name, std::string v0, std::string v1) {
    return {std::move(name), FeatureKind::binary_categorical, FeatureRole::substantive, 0, 1,
            {std::move(v0), std::move(v1)}};
}

bool pensionable(int age, int gender) {
    return (gender == kFemale && age >= kFemalePensionAge) || (gender == kMale && age >= kMalePensionAge);
}

bool distance_ok(int type, int distance) {
    return (type == kInPatient && distance < kDistanceLimit) ||
           (type == kOutPatient && distance >= kDistanceLimit);
}

void add_age_gender(DomainSchema& s) {
    s.add_condition("C1", "age-gender", {"Age", "Gender"},
                    [](std::span<const int> v) { return pensionable(v[0], v[1]); });
}

void add_patient_distance(DomainSchema& s) {
    s.add_condition("C6", "patient-distance", {"Type", "Distance"},
                    [](std::span<const int> v) { return distance_ok(v[0], v[1]); });
}

DomainSchema welfare() {
    std::vector<FeatureSpec> f;
    f.push_back(integer("Age", 0, 100));
    f.push_back(categorical("Gender", "male", "female"));
    for (int i = 1; i <= 5; ++i) f.push_back(boolean("Con" + std::to_string(i)));
    f.push_back(boolean("Spouse"));
    f.push_back(boolean("Absent"));
    f.push_back(integer("Resources", 0, 10000));
    f.push_back(categorical("Type", "in", "out"));
    f.push_back(integer("Distance", 0, 100));
    for (int i = 1; i <= kNoiseFeatures; ++i)
        f.push_back(integer("noise_" + std::to_string(i), 0, 100, FeatureRole::noise));

    DomainSchema s(DomainId::welfare, std::move(f), "Eligible");
    add_age_gender(s);
    s.add_condition("C2", "contributions", {"Con1", "Con2", "Con3", "Con4", "Con5"},
                    [](std::span<const int> v) {
                        return std::count(v.begin(), v.end(), 1) >= kMinContributions;
                    });
    s.add_condition("C3", "spouse", {"Spouse"}, [](std::span<const int> v) { return v[0] == 1; });
    s.add_condition("C4", "not-absent", {"Absent"}, [](std::span<const int> v) { return v[0] == 0; });
    s.add_condition("C5", "resources", {"Resources"},
                    [](std::span<const int> v) { return !(v[0] >= kResourceLimit); });
    add_patient_distance(s);
    return s;
}

DomainSchema simplified() {
    std::vector<FeatureSpec> f;
    f.push_back(integer("Age", 0, 100));
    f.push_back(categorical("Gender", "male", "female"));
    f.push_back(categorical("Type", "in", "out"));
    f.push_back(integer("Distance", 0, 100));
    DomainSchema s(DomainId::simplified, std::move(f), "Eligible");
    add_age_gender(s);
    add_patient_distance(s);
    return s;
}

DomainSchema tort() {
    std::vector<FeatureSpec> f;
    for (const char* name : {"cau", "ico", "ila", "ift", "vun", "vst", "vrt", "jus", "dmg", "prp"})
        f.push_back(boolean(name));
    DomainSchema s(DomainId::tort, std::move(f), "dut");
    s.add_condition("c1", "causation", {"cau"}, [](std::span<const int> v) { return v[0] == 1; });
    s.add_condition("c2", "imputability", {"ico", "ila", "ift"},
                    [](std::span<const int> v) { return v[0] == 1 || v[1] == 1 || v[2] == 1; });
    s.add_condition("c3", "unlawfulness", {"vun", "vst", "vrt", "jus"}, [](std::span<const int> v) {
        const bool vun = v[0] == 1, vst = v[1] == 1, vrt = v[2] == 1, jus = v[3] == 1;
        return vun || (vst && !jus) || (vrt && !jus);
    });
    s.add_condition("c4", "damage", {"dmg"}, [](std::span<const int> v) { return v[0] == 1; });
    s.add_condition("c5", "relativity", {"vst", "prp"}, [](std::span<const int> v) {
        const bool vst = v[0] == 1, prp = v[1] == 1;
        return !(vst && !prp);
    });
    return s;
}

}  // namespace

DomainSchema build_domain(DomainId id) {
    switch (id) {
        case DomainId::welfare: return welfare();
        case DomainId::simplified: return simplified();
        case DomainId::tort: return tort();
    }
    throw std::invalid_argument("unknown domain");
}

DomainSchema build_domain(std::string_view id) { return build_domain(parse_domain(id)); }

const DomainSchema& domain_schema(DomainId id) {
    static const DomainSchema w = build_domain(DomainId::welfare);
    static const DomainSchema s = build_domain(DomainId::simplified);
    static const DomainSchema t = build_domain(DomainId::tort);
    switch (id) {
        case DomainId::welfare: return w;
        case DomainId::simplified: return s;
        case DomainId::tort: return t;
    }
    throw std::invalid_argument("unknown domain");
}

bool eval_condition(const DomainSchema& schema, std::string_view cond_id, const Case& c) {
    const auto& cond = schema.condition(cond_id);
    schema.validate_features(c, cond.involved_indices());
    return cond.evaluate_unchecked(c);
}

bool eval_label(const DomainSchema& schema, const Case& c) {
    schema.validate(c);
    bool result = true;
    for (const auto& cond : schema.conditions()) result = cond.evaluate_unchecked(c) && result;
    return result;
}

std::size_t count_failed_conditions(const DomainSchema& schema, const Case& c) {
    schema.validate(c);
    std::size_t failed = 0;
    for (const auto& cond : schema.conditions())
        if (!cond.evaluate_unchecked(c)) ++failed;
    return failed;
}

}  // namespace ratlab
