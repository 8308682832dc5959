#include "ratlab/dataset.hpp"

#include "ratlab/random.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ratlab {

namespace {

struct KindName {
    DatasetKind kind;
    std::string_view name;
};

constexpr KindName kKindNames[] = {
    {DatasetKind::type_a, "type-a"},
    {DatasetKind::type_b, "type-b"},
    {DatasetKind::age_gender, "age-gender"},
    {DatasetKind::patient_distance, "patient-distance"},
    {DatasetKind::tort_unique, "unique"},
    {DatasetKind::tort_regular, "regular"},
    {DatasetKind::unlawfulness, "unlawfulness"},
    {DatasetKind::imputability, "imputability"},
};

}  // namespace

std::string_view to_string(DatasetKind kind) {
    for (const auto& k : kKindNames)
        if (k.kind == kind) return k.name;
    return "?";
}

DatasetKind parse_kind(std::string_view name) {
    for (const auto& k : kKindNames)
        if (k.name == name) return k.kind;
    throw std::invalid_argument("unknown dataset kind '" + std::string(name) + "'");
}

bool is_enumerated(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::type_a:
        case DatasetKind::type_b:
        case DatasetKind::tort_regular: return false;
        default: return true;
    }
}

bool is_seed_independent(DomainId domain, DatasetKind kind) {
    if (!is_enumerated(kind)) return false;
    // Full-domain dedicated sets still sample the non-targeted features.
    return domain != DomainId::welfare;
}

bool kind_belongs_to(DomainId domain, DatasetKind kind) {
    switch (kind) {
        case DatasetKind::type_a:
        case DatasetKind::type_b:
        case DatasetKind::age_gender:
        case DatasetKind::patient_distance: return domain != DomainId::tort;
        default: return domain == DomainId::tort;
    }
}

std::optional<std::string> targeted_condition(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::age_gender: return "C1";
        case DatasetKind::patient_distance: return "C6";
        // The unlawfulness set frees c3's features, the imputability set c2's.
        case DatasetKind::unlawfulness: return "c3";
        case DatasetKind::imputability: return "c2";
        default: return std::nullopt;
    }
}

std::size_t Dataset::positives() const {
    return static_cast<std::size_t>(
        std::count_if(cases.begin(), cases.end(), [](const Case& c) { return c.label.value_or(false); }));
}

void GeneratorRequest::validate() const {
    if (!kind_belongs_to(domain, kind))
        throw std::invalid_argument("dataset kind " + std::string(to_string(kind)) + " is not defined for domain " +
                                    std::string(to_string(domain)));
    if (is_enumerated(kind)) {
        if (size) throw std::invalid_argument("size must not be given for enumerated kind " + std::string(to_string(kind)));
        return;
    }
    if (!size) throw std::invalid_argument("size is required for kind " + std::string(to_string(kind)));
    if (*size == 0 || *size % 2 != 0)
        throw std::invalid_argument("size for kind " + std::string(to_string(kind)) + " must be even and positive");
}

std::string GeneratorRequest::label() const {
    std::string s(to_string(kind));
    if (size) s += "/" + std::to_string(*size);
    return s;
}

namespace {

void finalize(Dataset& d, const DomainSchema& schema, std::uint64_t seed) {
    for (auto& c : d.cases) c.label = eval_label(schema, c);
    d.meta.seed = seed;
    d.meta.size = d.cases.size();
    d.meta.positive_fraction =
        d.cases.empty() ? 0.0 : static_cast<double>(d.positives()) / static_cast<double>(d.cases.size());
}

/// Condition-forcing samplers for the welfare family. Each one overwrites only
/// the features its condition involves.
class WelfareSampler {
public:
    explicit WelfareSampler(const DomainSchema& schema) : schema_(schema) {
        age_ = schema.feature_index("Age");
        gender_ = schema.feature_index("Gender");
        type_ = schema.feature_index("Type");
        distance_ = schema.feature_index("Distance");
        if (schema.id() == DomainId::welfare) {
            for (int i = 1; i <= 5; ++i) cons_.push_back(schema.feature_index("Con" + std::to_string(i)));
            spouse_ = schema.feature_index("Spouse");
            absent_ = schema.feature_index("Absent");
            resources_ = schema.feature_index("Resources");
        }
    }

    Case uniform(Rng& rng) const {
        Case c;
        c.values.reserve(schema_.width());
        for (const auto& f : schema_.features()) c.values.push_back(static_cast<int>(rng.uniform_int(f.lo, f.hi)));
        return c;
    }

    void force(std::string_view cond, bool satisfy, Case& c, Rng& rng) const {
        auto& v = c.values;
        if (cond == "C1") {
            const int gender = static_cast<int>(rng.uniform_int(0, 1));
            const int threshold = gender == kFemale ? kFemalePensionAge : kMalePensionAge;
            v[gender_] = gender;
            v[age_] = static_cast<int>(satisfy ? rng.uniform_int(threshold, 100) : rng.uniform_int(0, threshold - 1));
        } else if (cond == "C2") {
            unsigned mask;
            if (satisfy) {
                // Five subsets with one contribution missing, plus the full set.
                const auto pick = rng.uniform_int(0, 5);
                mask = pick == 5 ? 0x1Fu : (0x1Fu & ~(1u << pick));
            } else {
                do {
                    mask = static_cast<unsigned>(rng.uniform_int(0, 31));
                } while (std::popcount(mask) >= kMinContributions);
            }
            for (std::size_t i = 0; i < cons_.size(); ++i) v[cons_[i]] = (mask >> i) & 1u;
        } else if (cond == "C3") {
            v[spouse_] = satisfy ? 1 : 0;
        } else if (cond == "C4") {
            v[absent_] = satisfy ? 0 : 1;
        } else if (cond == "C5") {
            v[resources_] = static_cast<int>(satisfy ? rng.uniform_int(0, kResourceLimit - 1)
                                                     : rng.uniform_int(kResourceLimit, 10000));
        } else if (cond == "C6") {
            const int type = static_cast<int>(rng.uniform_int(0, 1));
            const bool near = (type == kInPatient) == satisfy;
            v[type_] = type;
            v[distance_] = static_cast<int>(near ? rng.uniform_int(0, kDistanceLimit - 1)
                                                 : rng.uniform_int(kDistanceLimit, 100));
        } else {
            throw std::logic_error("no sampler for condition " + std::string(cond));
        }
    }

    std::size_t age() const { return age_; }
    std::size_t gender() const { return gender_; }
    std::size_t type() const { return type_; }
    std::size_t distance() const { return distance_; }

private:
    const DomainSchema& schema_;
    std::size_t age_, gender_, type_, distance_;
    std::vector<std::size_t> cons_;
    std::size_t spouse_ = 0, absent_ = 0, resources_ = 0;
};

Dataset balanced_welfare(const DomainSchema& schema, DatasetKind kind, std::size_t size, Rng& rng) {
    WelfareSampler sampler(schema);
    const auto& conds = schema.conditions();
    Dataset d;
    d.cases.reserve(size);
    const std::size_t half = size / 2;
    for (std::size_t i = 0; i < half; ++i) {
        Case c = sampler.uniform(rng);
        for (const auto& cond : conds) sampler.force(cond.id(), true, c, rng);
        d.cases.push_back(std::move(c));
    }
    for (std::size_t i = 0; i < size - half; ++i) {
        const auto& target = conds[i % conds.size()];
        Case c = sampler.uniform(rng);
        if (kind == DatasetKind::type_b)
            for (const auto& cond : conds)
                if (&cond != &target) sampler.force(cond.id(), true, c, rng);
        sampler.force(target.id(), false, c, rng);
        d.cases.push_back(std::move(c));
    }
    rng.shuffle(std::span<Case>(d.cases));
    return d;
}

Dataset age_gender(const DomainSchema& schema, bool simplified, Rng& rng) {
    WelfareSampler sampler(schema);
    Dataset d;
    if (simplified) {
        // One case per (age, gender, distance); type chosen so C6 holds.
        for (int age = 0; age <= 100; ++age)
            for (int gender : {kMale, kFemale})
                for (int distance = 0; distance <= 100; distance += 5) {
                    Case c{std::vector<int>(schema.width(), 0), std::nullopt};
                    c.values[sampler.age()] = age;
                    c.values[sampler.gender()] = gender;
                    c.values[sampler.type()] = distance < kDistanceLimit ? kInPatient : kOutPatient;
                    c.values[sampler.distance()] = distance;
                    d.cases.push_back(std::move(c));
                }
        return d;
    }
    d.cases.reserve(40000);
    for (int age = 5; age <= 100; age += 5)
        for (int gender : {kMale, kFemale})
            for (int rep = 0; rep < 1000; ++rep) {
                Case c = sampler.uniform(rng);
                for (const auto& cond : schema.conditions())
                    if (cond.id() != "C1") sampler.force(cond.id(), true, c, rng);
                c.values[sampler.age()] = age;
                c.values[sampler.gender()] = gender;
                d.cases.push_back(std::move(c));
            }
    return d;
}

Dataset patient_distance(const DomainSchema& schema, bool simplified, Rng& rng) {
    WelfareSampler sampler(schema);
    const auto& c1 = schema.condition("C1");
    Dataset d;
    if (simplified) {
        for (int distance = 0; distance <= 100; distance += 5)
            for (int type : {kInPatient, kOutPatient})
                for (int age = 0; age <= 100; ++age)
                    for (int gender : {kMale, kFemale}) {
                        Case c{std::vector<int>(schema.width(), 0), std::nullopt};
                        c.values[sampler.age()] = age;
                        c.values[sampler.gender()] = gender;
                        if (!c1.evaluate_unchecked(c)) continue;
                        c.values[sampler.type()] = type;
                        c.values[sampler.distance()] = distance;
                        d.cases.push_back(std::move(c));
                    }
        return d;
    }
    d.cases.reserve(40000);
    for (int distance = 5; distance <= 100; distance += 5)
        for (int type : {kInPatient, kOutPatient})
            for (int rep = 0; rep < 1000; ++rep) {
                Case c = sampler.uniform(rng);
                for (const auto& cond : schema.conditions())
                    if (cond.id() != "C6") sampler.force(cond.id(), true, c, rng);
                c.values[sampler.type()] = type;
                c.values[sampler.distance()] = distance;
                d.cases.push_back(std::move(c));
            }
    return d;
}

std::vector<Case> tort_unique_cases(const DomainSchema& schema) {
    const std::size_t n = schema.width();
    std::vector<Case> cases;
    cases.reserve(std::size_t{1} << n);
    for (std::size_t i = 0; i < (std::size_t{1} << n); ++i) {
        Case c{std::vector<int>(n), std::nullopt};
        for (std::size_t k = 0; k < n; ++k) c.values[k] = static_cast<int>((i >> (n - 1 - k)) & 1u);
        c.label = eval_label(schema, c);
        cases.push_back(std::move(c));
    }
    return cases;
}

/// Draws `count` items so that every item appears either floor(count/n) or
/// ceil(count/n) times; the items receiving the extra copy are chosen
/// without replacement.
std::vector<const Case*> draw_evenly(const std::vector<const Case*>& pool, std::size_t count, Rng& rng) {
    std::vector<const Case*> out;
    out.reserve(count);
    for (std::size_t round = 0; round < count / pool.size(); ++round) out.insert(out.end(), pool.begin(), pool.end());
    std::vector<const Case*> rest = pool;
    rng.shuffle(std::span<const Case*>(rest));
    out.insert(out.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(count % pool.size()));
    return out;
}

}  // namespace

Dataset gen_welfare(DatasetKind kind, std::optional<std::size_t> size, std::uint64_t seed, bool simplified) {
    const DomainId domain = simplified ? DomainId::simplified : DomainId::welfare;
    GeneratorRequest{domain, kind, size, seed}.validate();
    const auto& schema = domain_schema(domain);
    Rng rng(seed);
    Dataset d;
    switch (kind) {
        case DatasetKind::type_a:
        case DatasetKind::type_b: d = balanced_welfare(schema, kind, *size, rng); break;
        case DatasetKind::age_gender: d = age_gender(schema, simplified, rng); break;
        case DatasetKind::patient_distance: d = patient_distance(schema, simplified, rng); break;
        default: throw std::invalid_argument("not a welfare dataset kind");
    }
    d.domain = domain;
    d.kind = kind;
    finalize(d, schema, is_seed_independent(domain, kind) ? 0 : seed);
    return d;
}

Dataset gen_tort(DatasetKind kind, std::optional<std::size_t> size, std::uint64_t seed) {
    GeneratorRequest{DomainId::tort, kind, size, seed}.validate();
    const auto& schema = domain_schema(DomainId::tort);
    auto unique = tort_unique_cases(schema);
    Dataset d;
    d.domain = DomainId::tort;
    d.kind = kind;

    // Dedicated sets: unique cases where every condition except the target holds.
    auto dedicated = [&](std::string_view target) {
        for (auto& c : unique) {
            bool others = true;
            for (const auto& cond : schema.conditions())
                if (cond.id() != target && !cond.evaluate_unchecked(c)) others = false;
            if (others) d.cases.push_back(c);
        }
    };

    switch (kind) {
        case DatasetKind::tort_unique: d.cases = std::move(unique); break;
        case DatasetKind::unlawfulness:
        case DatasetKind::imputability: dedicated(*targeted_condition(kind)); break;
        case DatasetKind::tort_regular: {
            std::vector<const Case*> pos, neg;
            for (const auto& c : unique) (*c.label ? pos : neg).push_back(&c);
            Rng rng(seed);
            const std::size_t half = *size / 2;
            d.cases.reserve(*size);
            for (const auto* pool : {&pos, &neg})
                for (const Case* c : draw_evenly(*pool, half, rng)) d.cases.push_back(*c);
            rng.shuffle(std::span<Case>(d.cases));
            break;
        }
        default: throw std::invalid_argument("not a tort dataset kind");
    }
    finalize(d, schema, is_enumerated(kind) ? 0 : seed);
    return d;
}

Dataset generate(const GeneratorRequest& request) {
    request.validate();
    if (request.domain == DomainId::tort) return gen_tort(request.kind, request.size, request.seed);
    return gen_welfare(request.kind, request.size, request.seed, request.domain == DomainId::simplified);
}

std::filesystem::path meta_path_for(const std::filesystem::path& csv_path) {
    auto p = csv_path;
    p.replace_extension(".meta.json");
    return p;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    const auto& schema = domain_schema(dataset.domain);
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
        for (const auto& f : schema.features()) out << f.name << ',';
        out << "label\n";
        std::string line;
        for (const auto& c : dataset.cases) {
            line.clear();
            for (int v : c.values) {
                line += std::to_string(v);
                line += ',';
            }
            line += c.label.value_or(false) ? '1' : '0';
            line += '\n';
            out << line;
        }
        if (!out) throw std::runtime_error("write failed for " + path.string());
    }
    nlohmann::ordered_json meta;
    meta["domain"] = to_string(dataset.domain);
    meta["kind"] = dataset.kind ? nlohmann::ordered_json(to_string(*dataset.kind)) : nlohmann::ordered_json();
    meta["seed"] = dataset.meta.seed;
    meta["generator_version"] = dataset.meta.generator_version;
    meta["size"] = dataset.meta.size;
    meta["positive_fraction"] = dataset.meta.positive_fraction;
    std::ofstream mout(meta_path_for(path), std::ios::binary);
    if (!mout) throw std::runtime_error("cannot open " + meta_path_for(path).string() + " for writing");
    mout << meta.dump(2) << '\n';
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

Dataset read_dataset(const std::filesystem::path& path, const DomainSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetFormatError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DatasetFormatError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const auto header = split_commas(line);
    const auto& features = schema.features();
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (i >= header.size())
            throw DatasetFormatError(path.string() + ": missing column '" + features[i].name + "'");
        if (header[i] != features[i].name)
            throw DatasetFormatError(path.string() + ": column " + std::to_string(i + 1) + " is '" +
                                     std::string(header[i]) + "', expected '" + features[i].name + "' for domain " +
                                     std::string(to_string(schema.id())));
    }
    if (header.size() == features.size()) throw DatasetFormatError(path.string() + ": missing column 'label'");
    if (header.size() > features.size() + 1 || header.back() != "label")
        throw DatasetFormatError(path.string() + ": expected final column 'label', found '" +
                                 std::string(header[features.size()]) + "'");

    Dataset d;
    d.domain = schema.id();
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_commas(line);
        if (cells.size() != header.size())
            throw DatasetFormatError(path.string() + ": row " + std::to_string(row) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " + std::to_string(header.size()));
        Case c;
        c.values.resize(features.size());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            int v = 0;
            auto [ptr, ec] = std::from_chars(cells[i].data(), cells[i].data() + cells[i].size(), v);
            if (ec != std::errc{} || ptr != cells[i].data() + cells[i].size())
                throw DatasetFormatError(path.string() + ": row " + std::to_string(row) + ", column '" +
                                         std::string(header[i]) + "': non-numeric cell '" + std::string(cells[i]) + "'");
            if (i < features.size()) {
                c.values[i] = v;
            } else {
                if (v != 0 && v != 1)
                    throw DatasetFormatError(path.string() + ": row " + std::to_string(row) + ": label " +
                                             std::to_string(v) + " outside {0,1}");
                c.label = v == 1;
            }
        }
        try {
            schema.validate(c);
        } catch (const CaseError& e) {
            throw DatasetFormatError(path.string() + ": row " + std::to_string(row) + ": " + e.what());
        }
        d.cases.push_back(std::move(c));
    }

    d.meta.size = d.cases.size();
    d.meta.positive_fraction =
        d.cases.empty() ? 0.0 : static_cast<double>(d.positives()) / static_cast<double>(d.cases.size());
    d.meta.generator_version.clear();

    const auto meta_path = meta_path_for(path);
    if (std::filesystem::exists(meta_path)) {
        std::ifstream mi(meta_path);
        nlohmann::json meta;
        try {
            meta = nlohmann::json::parse(mi);
        } catch (const nlohmann::json::exception& e) {
            throw DatasetFormatError(meta_path.string() + ": " + e.what());
        }
        if (meta.value("domain", std::string(to_string(schema.id()))) != to_string(schema.id()))
            throw DatasetFormatError(meta_path.string() + ": sidecar domain '" + meta["domain"].get<std::string>() +
                                     "' does not match " + std::string(to_string(schema.id())));
        if (meta.contains("kind") && meta["kind"].is_string()) d.kind = parse_kind(meta["kind"].get<std::string>());
        d.meta.seed = meta.value("seed", std::uint64_t{0});
        d.meta.generator_version = meta.value("generator_version", std::string{});
        d.meta.size = meta.value("size", d.cases.size());
        d.meta.positive_fraction = meta.value("positive_fraction", d.meta.positive_fraction);
    }
    return d;
}

}  // namespace ratlab
