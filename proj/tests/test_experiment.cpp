#include "ratlab/experiment.hpp"
#include "support.hpp"

#include <filesystem>
#include <fstream>

#include <doctest.h>

using namespace ratlab;
using namespace ratlab::experiment;
namespace fs = std::filesystem;

namespace {

const fs::path kPlans = fs::path(RATLAB_SOURCE_DIR) / "plans";

ExperimentPlan tiny_plan(std::size_t reps = 2) {
    auto p = plan_from_json(nlohmann::json::parse(R"({
        "name": "tiny", "domain": "tort",
        "train": ["regular/200", "unique"],
        "test": ["unique", "unlawfulness", {"kind": "regular", "size": 100}],
        "architectures": ["12", [24, 6]],
        "train_config": {"iterations": 300},
        "master_seed": 17})"));
    p.repetitions = reps;
    return p;
}

}  // namespace

TEST_CASE("bundled plans load and have the published shapes") {
    CHECK(load_plan(kPlans / "welfare.json").cell_count() == 48);
    CHECK(load_plan(kPlans / "tort.json").cell_count() == 24);
    CHECK(load_plan(kPlans / "simplified.json").cell_count() == 24);
    for (const auto& entry : fs::directory_iterator(kPlans)) {
        INFO(entry.path().string());
        const auto p = load_plan(entry.path());
        CHECK(p.architectures.size() == 3);
        const bool desk = entry.path().stem().string().ends_with("-desk");
        CHECK(p.repetitions == (desk ? 10u : 50u));
        if (!desk) CHECK(p.train_config.iterations == 50000);
        CHECK(p.train_config.learning_rate == 0.001);
        CHECK(p.train_config.batch_size == 50);
        if (!desk) CHECK(fs::exists(kPlans / (entry.path().stem().string() + "-desk.json")));
    }
}

TEST_CASE("plan validation") {
    auto base = nlohmann::json::parse(R"({"domain": "tort", "train": ["unique"], "test": ["unique"],
                                           "architectures": ["12"]})");
    CHECK(plan_from_json(base).repetitions == 50);
    auto j = base;
    j["repetitions"] = 0;
    CHECK_THROWS_AS(plan_from_json(j), std::invalid_argument);
    j = base;
    j["test"] = {"type-a/100"};
    CHECK_THROWS_AS(plan_from_json(j), std::invalid_argument);
    j = base;
    j["architectures"] = {"7"};
    CHECK_THROWS_AS(plan_from_json(j), std::invalid_argument);
    j = base;
    j["train"] = {"regular"};
    CHECK_THROWS_AS(plan_from_json(j), std::invalid_argument);
    j = base;
    j.erase("domain");
    CHECK_THROWS_AS(plan_from_json(j), std::invalid_argument);
    j = base;
    j["train_config"] = {{"iteration_unit", "hours"}};
    CHECK_THROWS_AS(plan_from_json(j), std::invalid_argument);

    const auto p = tiny_plan();
    CHECK(to_json(plan_from_json(to_json(p))).dump() == to_json(p).dump());
}

TEST_CASE("run_plan") {
    const auto plan = tiny_plan(2);
    const auto r = run_plan(plan);
    CHECK(r.cells.size() == plan.cell_count());
    CHECK(r.cells.size() == 12);
    CHECK(r.diverged_runs == 0);
    CHECK(r.cells[0].train == "regular/200");
    CHECK(r.cells[0].test == "unique");
    CHECK(r.cells[0].arch == "12");
    CHECK(r.cells[1].arch == "24-6");
    for (const auto& c : r.cells) {
        CHECK(c.n == 2);
        CHECK(c.mean >= c.min);
        CHECK(c.mean <= c.max);
        CHECK(c.min >= 0.0);
        CHECK(c.max <= 100.0);
        CHECK(c.std >= 0.0);
    }
    // seed-independent tests share seed 0; stochastic ones differ per repetition
    const auto& reg = r.cell("unique", "regular/100", "12");
    CHECK(reg.repetitions[0].test_seed != reg.repetitions[1].test_seed);
    CHECK(r.cell("unique", "unique", "12").repetitions[0].train_seed == 0);
    CHECK(r.cell("regular/200", "unique", "12").repetitions[0].init_seed !=
          r.cell("regular/200", "unique", "24-6").repetitions[0].init_seed);
    // one table per (train, unlawfulness, arch)
    CHECK(r.tables.size() == 4);
    CHECK(r.table("unique", "unlawfulness", "24-6").table.condition == "c3");
    CHECK(r.curves.empty());
    CHECK_THROWS(r.cell("x", "y", "z"));
}

TEST_CASE("single repetition has zero spread") {
    const auto r = run_plan(tiny_plan(1));
    for (const auto& c : r.cells) CHECK(c.std == 0.0);
}

TEST_CASE("aggregation does not depend on scheduling") {
    const auto plan = tiny_plan(2);
    const auto a = summary_json(run_plan(plan)).dump();
    const auto b = summary_json(run_plan(plan, {3, {}})).dump();
    CHECK(a == b);
    auto other = plan;
    other.master_seed = 18;
    CHECK(summary_json(run_plan(other)).dump() != a);
}

TEST_CASE("welfare curves") {
    auto p = plan_from_json(nlohmann::json::parse(R"({
        "domain": "simplified", "train": ["type-b/400"], "test": ["age-gender", "patient-distance"],
        "architectures": ["12"], "train_config": {"iterations": 200}, "repetitions": 2, "master_seed": 3})"));
    const auto r = run_plan(p);
    REQUIRE(r.curves.size() == 2);
    const auto& c = r.curve("type-b/400", "age-gender", "12");
    CHECK(c.condition == "C1");
    CHECK(c.mean_curve.same_grid(c.ideal));
    CHECK(c.file == "curves/type-b-400__12__age-gender.tsv");
    CHECK(r.curve("type-b/400", "patient-distance", "12").condition == "C6");
}

TEST_CASE("emit_report and manifest replay") {
    testing::TempDir tmp;
    const auto plan = tiny_plan(2);
    const auto r = run_plan(plan);
    emit_report(r, tmp.path / "a");
    for (const char* f : {"summary.json", "accuracy.csv", "condition_tables.json", "manifest.json"})
        CHECK(fs::exists(tmp.path / "a" / f));
    std::ifstream csv(tmp.path / "a" / "accuracy.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "train,test,arch,mean,std");
    std::size_t rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 12);

    const auto manifest = nlohmann::json::parse(testing::slurp(tmp.path / "a" / "manifest.json"));
    CHECK(manifest.contains("created_at"));
    CHECK(manifest["runs"].size() == 2 * 2 * 2);

    const auto replayed = run_plan(load_plan(tmp.path / "a" / "manifest.json"));
    emit_report(replayed, tmp.path / "b");
    CHECK(testing::slurp(tmp.path / "a" / "summary.json") == testing::slurp(tmp.path / "b" / "summary.json"));
    CHECK(testing::slurp(tmp.path / "a" / "accuracy.csv") == testing::slurp(tmp.path / "b" / "accuracy.csv"));
}
