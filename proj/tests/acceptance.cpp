// Runs the ten acceptance criteria and prints one PASS/FAIL line per criterion.
// Criteria listed with --expect-fail still print FAIL but do not fail the process.
#include "ratlab/dataset.hpp"
#include "ratlab/domain.hpp"
#include "ratlab/experiment.hpp"
#include "ratlab/network.hpp"
#include "ratlab/oracle.hpp"
#include "ratlab/rationale.hpp"

#include "gradcheck.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace ratlab;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [miss] " << what << ";";
        }
    }
    void note(const std::string& what) { detail << " " << what << ";"; }
};

std::string num(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

const std::vector<std::string> kArchs = {"12", "24-6", "24-10-3"};

fs::path plan_path(const std::string& name) { return fs::path(RATLAB_SOURCE_DIR) / "plans" / (name + ".json"); }

experiment::AggregateReport run(const std::string& name) {
    const auto plan = experiment::load_plan(plan_path(name));
    const auto t0 = std::chrono::steady_clock::now();
    auto report = experiment::run_plan(plan);
    const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << name << ": " << plan.cell_count() << " cells in " << num(secs, 0) << " s\n";
    return report;
}

void no_divergence(Outcome& o, const experiment::AggregateReport& r) {
    o.require(r.diverged_runs == 0, std::to_string(r.diverged_runs) + " diverged runs");
}

Dataset gen(DomainId d, DatasetKind k, std::optional<std::size_t> size = std::nullopt, std::uint64_t seed = 1) {
    return generate({d, k, size, seed});
}

// 1
void enumeration(Outcome& o) {
    struct Row {
        DomainId domain;
        DatasetKind kind;
        std::size_t size;
        std::optional<std::size_t> positives;
    };
    const std::vector<Row> rows = {
        {DomainId::tort, DatasetKind::tort_unique, 1024, 112},
        {DomainId::tort, DatasetKind::unlawfulness, 168, 112},
        {DomainId::tort, DatasetKind::imputability, 128, 112},
        {DomainId::welfare, DatasetKind::age_gender, 40000, 17000},
        {DomainId::welfare, DatasetKind::patient_distance, 40000, 20000},
        {DomainId::simplified, DatasetKind::age_gender, 4242, std::nullopt},
        {DomainId::simplified, DatasetKind::patient_distance, 3234, 1617},
    };
    for (const auto& r : rows) {
        const auto d = gen(r.domain, r.kind);
        const auto e = oracle::expected_stats(r.domain, r.kind);
        const std::string name = std::string(to_string(r.domain)) + "/" + std::string(to_string(r.kind));
        o.require(d.cases.size() == r.size && e.size == r.size, name + " size " + std::to_string(d.cases.size()));
        o.require(d.positives() == e.positives, name + " positives differ from oracle");
        if (r.positives) o.require(d.positives() == *r.positives, name + " positives " + std::to_string(d.positives()));
        o.note(name + " " + std::to_string(d.cases.size()) + "/" + num(100.0 * d.positives() / d.cases.size()) + "%");
    }
}

// 2
void label_equivalence(Outcome& o) {
    std::size_t sets = 0, rows = 0;
    for (DomainId dom : {DomainId::welfare, DomainId::simplified, DomainId::tort}) {
        const auto& schema = domain_schema(dom);
        for (DatasetKind k : {DatasetKind::type_a, DatasetKind::type_b, DatasetKind::age_gender,
                              DatasetKind::patient_distance, DatasetKind::tort_unique, DatasetKind::tort_regular,
                              DatasetKind::unlawfulness, DatasetKind::imputability}) {
            if (!kind_belongs_to(dom, k)) continue;
            for (std::size_t size : {500, 2400, 50000}) {
                const auto d = is_enumerated(k) ? gen(dom, k) : gen(dom, k, size, 7 + size);
                const auto rep = oracle::verify_dataset(d, schema);
                o.require(rep.passed(), std::string(to_string(dom)) + "/" + std::string(to_string(k)) + " has " +
                                            std::to_string(rep.label_mismatches()) + " mismatches");
                ++sets;
                rows += d.cases.size();
                if (is_enumerated(k)) break;
            }
        }
    }
    const auto& tort = domain_schema(DomainId::tort);
    const auto all = oracle::enumerate_tort();
    std::size_t disagree = 0;
    for (const auto& c : all.cases)
        if (oracle::label(tort, c) != eval_label(tort, c)) ++disagree;
    o.require(all.cases.size() == 1024 && disagree == 0, std::to_string(disagree) + " tort disagreements");
    o.note(std::to_string(sets) + " sets, " + std::to_string(rows) + " rows audited; tort cases agree " +
           std::to_string(all.cases.size() - disagree) + "/1024");
}

// 3
void type_structure(Outcome& o) {
    const auto& schema = domain_schema(DomainId::welfare);
    const auto b = oracle::verify_dataset(gen(DomainId::welfare, DatasetKind::type_b, 40000, 31), schema);
    const auto a = oracle::verify_dataset(gen(DomainId::welfare, DatasetKind::type_a, 40000, 32), schema);
    const std::size_t b_neg = b.size - b.positives;
    const std::size_t b_one = b.failed_condition_histogram.count(1) ? b.failed_condition_histogram.at(1) : 0;
    o.require(b_neg > 0 && b_one == b_neg, "type B exactly-one " + std::to_string(b_one) + "/" + std::to_string(b_neg));
    const std::size_t a_neg = a.size - a.positives;
    const double mean = a.mean_failed_conditions();
    o.require(a_neg >= 10000, "only " + std::to_string(a_neg) + " type A negatives");
    o.require(mean >= 3.8 && mean <= 4.3, "type A mean failed " + num(mean, 3));
    o.note("type B " + std::to_string(b_one) + "/" + std::to_string(b_neg) + " fail exactly one; type A mean " +
           num(mean, 3) + " over " + std::to_string(a_neg));
}

// 4
void gradients(Outcome& o) {
    for (const auto& shape : nn::kStandardShapes) {
        const auto g = testing::gradient_check(10, shape, 4242);
        const std::string label = nn::NetworkConfig{10, shape}.shape_label();
        o.require(g.max_rel_error < 1e-4, label + " rel error " + std::to_string(g.max_rel_error));
        o.note(label + " max rel " + std::to_string(g.max_rel_error) + " over " + std::to_string(g.checked));
    }
}

// 5
void tort_full(Outcome& o, const experiment::AggregateReport& r) {
    no_divergence(o, r);
    for (const auto& arch : {"12", "24-6"}) {
        for (const auto& test : {"unique", "unlawfulness", "imputability"}) {
            const auto& c = r.cell("unique", test, arch);
            o.require(c.mean >= 99.8, std::string(arch) + " on " + test + " " + num(c.mean));
            o.note(std::string(arch) + "/" + test + " " + num(c.mean));
        }
        for (const auto& test : {"unlawfulness", "imputability"}) {
            const auto& t = r.table("unique", test, arch).table;
            o.require(t.when_false.mean_output <= 0.02 && t.when_true.mean_output >= 0.98,
                      std::string(arch) + " " + test + " table " + num(t.when_false.mean_output, 3) + "/" +
                          num(t.when_true.mean_output, 3));
            o.note(std::string(arch) + " " + test + " false " + num(t.when_false.mean_output, 3) + " true " +
                   num(t.when_true.mean_output, 3));
        }
    }
}

// 6
void tort_small(Outcome& o, const experiment::AggregateReport& r) {
    no_divergence(o, r);
    for (const auto& arch : kArchs) {
        const double acc = r.cell("regular/500", "regular/5000", arch).mean;
        const double imp_f = r.table("regular/500", "imputability", arch).table.when_false.mean_output;
        const double unl_f = r.table("regular/500", "unlawfulness", arch).table.when_false.mean_output;
        o.require(acc >= 96.0, arch + " general " + num(acc));
        o.require(imp_f > 0.5, arch + " imputability-false " + num(imp_f, 3));
        o.require(unl_f < 0.15, arch + " unlawfulness-false " + num(unl_f, 3));
        o.note(arch + " acc " + num(acc) + " impF " + num(imp_f, 3) + " unlF " + num(unl_f, 3));
    }
}

// 7
void welfare_gap(Outcome& o, const experiment::AggregateReport& r) {
    no_divergence(o, r);
    for (const auto& arch : kArchs) {
        const double on_a = r.cell("type-a/2400", "type-a/2400", arch).mean;
        const double on_b = r.cell("type-a/2400", "type-b/2400", arch).mean;
        o.require(on_a - on_b >= 10.0, arch + " A-trained A-B gap " + num(on_a - on_b));
        std::string line = arch + " A " + num(on_a) + " B " + num(on_b);
        for (const auto& test : {"age-gender", "patient-distance"}) {
            const double from_a = r.cell("type-a/2400", test, arch).mean;
            const double from_b = r.cell("type-b/2400", test, arch).mean;
            o.require(from_b - from_a >= 20.0, arch + " " + test + " gain " + num(from_b - from_a));
            line += std::string(" ") + test + " " + num(from_a) + "->" + num(from_b);
        }
        o.note(line);
    }
}

// 8
void welfare_more_data(Outcome& o, const experiment::AggregateReport& r) {
    no_divergence(o, r);
    for (const auto& arch : kArchs)
        for (const auto& test : {"age-gender", "patient-distance"}) {
            const double acc = r.cell("type-b/50000", test, arch).mean;
            o.require(acc >= 94.0, arch + " " + test + " " + num(acc));
            o.note(arch + " " + test + " " + num(acc));
        }
    const auto& tp = r.curve("type-b/50000", "age-gender", "12").turning_points;
    for (const auto& [value, name, target] : {std::tuple{1, "female", 60.0}, std::tuple{0, "male", 65.0}}) {
        const auto first = tp.group(value).first();
        o.require(first && std::abs(first->x - target) <= 2.5,
                  std::string(name) + " turning point " + (first ? num(first->x) : std::string("none")));
        if (first) o.note(std::string(name) + " turns at " + num(first->x) + " (grid " + std::to_string(first->grid_x) + ")");
    }
    // the rule itself, read the same way, sits on the edge of the tolerance
    const auto ideal = rationale::turning_points(rationale::ideal_curve(DomainId::welfare, "C1"));
    o.note("ideal curve turns at " + num(ideal.group(1).first()->x) + " / " + num(ideal.group(0).first()->x));
}

// 9
void simplified(Outcome& o, const experiment::AggregateReport& r) {
    no_divergence(o, r);
    double worst = 100.0;
    std::string worst_cell;
    for (const auto& c : r.cells) {
        o.require(c.mean >= 98.0, c.train + " x " + c.test + " x " + c.arch + " " + num(c.mean));
        if (c.mean < worst) {
            worst = c.mean;
            worst_cell = c.train + " x " + c.test + " x " + c.arch;
        }
    }
    double dev = 0.0;
    for (const auto& c : r.curves) {
        dev = std::max(dev, c.deviation_off_threshold.overall.max_abs);
        o.require(c.deviation_off_threshold.overall.max_abs <= 0.25,
                  c.train + " " + c.test + " " + c.arch + " deviation " + num(c.deviation_off_threshold.overall.max_abs, 3));
    }
    o.note("lowest accuracy " + num(worst) + " (" + worst_cell + "); max off-threshold deviation " + num(dev, 3) +
           " over " + std::to_string(r.curves.size()) + " curves");
}

// 10
void replay(Outcome& o, const experiment::AggregateReport& first) {
    testing::TempDir tmp;
    experiment::emit_report(first, tmp.path / "a");
    const auto plan = experiment::load_plan(tmp.path / "a" / "manifest.json");
    experiment::emit_report(experiment::run_plan(plan), tmp.path / "b");
    const auto a = testing::slurp(tmp.path / "a" / "summary.json");
    const auto b = testing::slurp(tmp.path / "b" / "summary.json");
    o.require(!a.empty() && a == b, "replayed summary.json differs");
    o.note(first.plan.name + " summary.json " + std::to_string(a.size()) + " bytes, replay identical " +
           (a == b ? "yes" : "no"));
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> expected_failures;
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg.rfind("--expect-fail=", 0) == 0)
            expected_failures.insert(std::stoi(arg.substr(14)));
        else
            only.insert(std::stoi(arg));
    }
    const auto wanted = [&](int n) { return only.empty() || only.count(n) > 0; };

    int failed = 0, unexpected = 0, ran = 0;
    const auto report = [&](int n, const std::string& title, auto&& body) {
        if (!wanted(n)) return;
        Outcome o;
        try {
            body(o);
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        ++ran;
        if (!o.pass) {
            ++failed;
            if (!expected_failures.count(n)) ++unexpected;
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << title << " |" << o.detail.str()
                  << (o.pass || !expected_failures.count(n) ? "" : " (known failure)") << std::endl;
    };

    report(1, "enumeration audit", enumeration);
    report(2, "label-oracle equivalence", label_equivalence);
    report(3, "type A/B structure", type_structure);
    report(4, "gradient check", gradients);

    std::optional<experiment::AggregateReport> tort_all;
    report(5, "tort full-information", [&](Outcome& o) {
        tort_all = run("tort-all-desk");
        tort_full(o, *tort_all);
    });
    report(6, "tort small-data rationale failure", [&](Outcome& o) { tort_small(o, run("tort-desk")); });
    report(7, "welfare rationale gap", [&](Outcome& o) { welfare_gap(o, run("welfare-desk")); });
    report(8, "welfare more data", [&](Outcome& o) { welfare_more_data(o, run("welfare-more-data-desk")); });
    report(9, "simplified domain", [&](Outcome& o) { simplified(o, run("simplified-desk")); });
    report(10, "manifest replay", [&](Outcome& o) {
        if (!tort_all) tort_all = run("tort-all-desk");
        replay(o, *tort_all);
    });

    std::cout << "acceptance: " << (ran - failed) << "/" << ran << " passed";
    if (failed != unexpected) std::cout << ", " << (failed - unexpected) << " known failure(s)";
    std::cout << std::endl;
    return unexpected == 0 ? 0 : 1;
}
