#include "ratlab/oracle.hpp"

#include <set>

namespace ratlab::oracle {

namespace {

// Tort propositions as bits, cau is bit 9 so that enumeration order matches
// the generator's lexicographic order.
struct TortBits {
    bool cau, ico, ila, ift, vun, vst, vrt, jus, dmg, prp;
};

TortBits tort_bits(unsigned i) {
    auto bit = [i](int k) { return ((i >> (9 - k)) & 1u) != 0; };
    return {bit(0), bit(1), bit(2), bit(3), bit(4), bit(5), bit(6), bit(7), bit(8), bit(9)};
}

std::vector<bool> tort_conditions(const TortBits& b) {
    return {
        b.cau,
        b.ico || b.ila || b.ift,
        b.vun || (b.vst && !b.jus) || (b.vrt && !b.jus),
        b.dmg,
        !(b.vst && !b.prp),
    };
}

bool all_of(const std::vector<bool>& v) {
    for (bool b : v)
        if (!b) return false;
    return true;
}

bool c1_welfare(int age, int gender) {
    // gender 1 = female
    if (gender == 1) return age >= 60;
    return age >= 65;
}

bool c6_welfare(int type, int distance) {
    // type 0 = in-patient
    if (type == 0) return distance < 50;
    return distance >= 50;
}

int value(const DomainSchema& schema, const Case& c, std::string_view name) {
    return c.values.at(schema.feature_index(name));
}

}  // namespace

Dataset enumerate_tort() {
    Dataset d;
    d.domain = DomainId::tort;
    d.kind = DatasetKind::tort_unique;
    for (unsigned i = 0; i < 1024; ++i) {
        const auto b = tort_bits(i);
        Case c{{b.cau, b.ico, b.ila, b.ift, b.vun, b.vst, b.vrt, b.jus, b.dmg, b.prp}, all_of(tort_conditions(b))};
        d.cases.push_back(std::move(c));
    }
    d.meta.size = d.cases.size();
    d.meta.positive_fraction = static_cast<double>(d.positives()) / 1024.0;
    return d;
}

std::vector<bool> condition_values(const DomainSchema& schema, const Case& c) {
    switch (schema.id()) {
        case DomainId::tort: {
            auto v = [&](std::string_view n) { return value(schema, c, n) == 1; };
            TortBits b{v("cau"), v("ico"), v("ila"), v("ift"), v("vun"), v("vst"), v("vrt"), v("jus"), v("dmg"), v("prp")};
            return tort_conditions(b);
        }
        case DomainId::simplified:
            return {c1_welfare(value(schema, c, "Age"), value(schema, c, "Gender")),
                    c6_welfare(value(schema, c, "Type"), value(schema, c, "Distance"))};
        case DomainId::welfare: {
            int paid = 0;
            for (const char* con : {"Con1", "Con2", "Con3", "Con4", "Con5"}) paid += value(schema, c, con);
            return {
                c1_welfare(value(schema, c, "Age"), value(schema, c, "Gender")),
                paid >= 4,
                value(schema, c, "Spouse") == 1,
                value(schema, c, "Absent") == 0,
                value(schema, c, "Resources") < 3000,
                c6_welfare(value(schema, c, "Type"), value(schema, c, "Distance")),
            };
        }
    }
    throw std::invalid_argument("unknown domain");
}

bool label(const DomainSchema& schema, const Case& c) { return all_of(condition_values(schema, c)); }

double VerificationReport::mean_failed_conditions() const {
    std::size_t n = 0, total = 0;
    for (auto [k, count] : failed_condition_histogram) {
        n += count;
        total += k * count;
    }
    return n == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(n);
}

VerificationReport verify_dataset(const Dataset& dataset, const DomainSchema& schema) {
    if (dataset.domain != schema.id())
        throw std::invalid_argument("dataset belongs to domain " + std::string(to_string(dataset.domain)) +
                                    ", not " + std::string(to_string(schema.id())));
    VerificationReport r;
    r.kind = dataset.kind;
    r.size = dataset.cases.size();
    r.size_ok = dataset.meta.size == r.size;
    if (dataset.kind && is_enumerated(*dataset.kind)) r.size_ok = r.size_ok && expected_stats(dataset.domain, *dataset.kind).size == r.size;

    for (const auto& cond : schema.conditions()) r.per_condition_failure_counts[cond.id()] = 0;
    std::set<std::vector<int>> seen;
    for (std::size_t row = 0; row < dataset.cases.size(); ++row) {
        const auto& c = dataset.cases[row];
        schema.validate(c);
        const auto truth = condition_values(schema, c);
        const bool expected = all_of(truth);
        if (!c.label || *c.label != expected || eval_label(schema, c) != expected) r.label_mismatch_rows.push_back(row);
        if (c.label.value_or(false)) ++r.positives;
        if (!seen.insert(c.values).second) ++r.duplicate_count;
        if (!expected) {
            std::size_t failed = 0;
            for (std::size_t k = 0; k < truth.size(); ++k)
                if (!truth[k]) {
                    ++failed;
                    ++r.per_condition_failure_counts[schema.conditions()[k].id()];
                }
            ++r.failed_condition_histogram[failed];
        }
    }
    r.positive_fraction = r.size == 0 ? 0.0 : static_cast<double>(r.positives) / static_cast<double>(r.size);
    return r;
}

nlohmann::ordered_json to_json(const VerificationReport& r) {
    nlohmann::ordered_json j;
    j["dataset_kind"] = r.kind ? nlohmann::ordered_json(to_string(*r.kind)) : nlohmann::ordered_json();
    j["size"] = r.size;
    j["size_ok"] = r.size_ok;
    j["label_mismatches"] = r.label_mismatches();
    j["label_mismatch_rows"] = r.label_mismatch_rows;
    j["positives"] = r.positives;
    j["positive_fraction"] = r.positive_fraction;
    j["per_condition_failure_counts"] = r.per_condition_failure_counts;
    nlohmann::ordered_json hist = nlohmann::ordered_json::object();
    for (auto [k, n] : r.failed_condition_histogram) hist[std::to_string(k)] = n;
    j["failed_condition_histogram"] = hist;
    j["mean_failed_conditions"] = r.mean_failed_conditions();
    j["duplicate_count"] = r.duplicate_count;
    j["passed"] = r.passed();
    return j;
}

ExpectedStats expected_stats(DomainId domain, DatasetKind kind) {
    if (!is_enumerated(kind)) throw std::invalid_argument(std::string(to_string(kind)) + " is not an enumerated kind");
    if (!kind_belongs_to(domain, kind))
        throw std::invalid_argument(std::string(to_string(kind)) + " is not defined for " + std::string(to_string(domain)));
    ExpectedStats s;
    auto count = [&s](bool positive, std::size_t weight = 1) {
        s.size += weight;
        if (positive) s.positives += weight;
    };
    const bool full = domain == DomainId::welfare;
    switch (kind) {
        case DatasetKind::tort_unique:
        case DatasetKind::unlawfulness:
        case DatasetKind::imputability: {
            // Dedicated sets keep every condition except the free one satisfied.
            const int free = kind == DatasetKind::unlawfulness ? 2 : kind == DatasetKind::imputability ? 1 : -1;
            for (unsigned i = 0; i < 1024; ++i) {
                const auto truth = tort_conditions(tort_bits(i));
                bool keep = true;
                for (int k = 0; k < 5; ++k)
                    if (k != free && free >= 0 && !truth[k]) keep = false;
                if (keep) count(all_of(truth));
            }
            break;
        }
        case DatasetKind::age_gender:
            if (full) {
                for (int age = 5; age <= 100; age += 5)
                    for (int gender = 0; gender <= 1; ++gender) count(c1_welfare(age, gender), 1000);
            } else {
                for (int age = 0; age <= 100; ++age)
                    for (int gender = 0; gender <= 1; ++gender)
                        for (int distance = 0; distance <= 100; distance += 5) count(c1_welfare(age, gender));
            }
            break;
        case DatasetKind::patient_distance:
            if (full) {
                for (int distance = 5; distance <= 100; distance += 5)
                    for (int type = 0; type <= 1; ++type) count(c6_welfare(type, distance), 1000);
            } else {
                std::size_t pairs = 0;
                for (int age = 0; age <= 100; ++age)
                    for (int gender = 0; gender <= 1; ++gender) pairs += c1_welfare(age, gender) ? 1 : 0;
                for (int distance = 0; distance <= 100; distance += 5)
                    for (int type = 0; type <= 1; ++type) count(c6_welfare(type, distance), pairs);
            }
            break;
        default: break;
    }
    return s;
}

}  // namespace ratlab::oracle
