#include "ratlab/experiment.hpp"

#include "ratlab/random.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

namespace ratlab::experiment {

using nlohmann::ordered_json;

std::string DatasetSpec::label() const {
    std::string s(to_string(kind));
    if (size) s += "/" + std::to_string(*size);
    return s;
}

void ExperimentPlan::validate() const {
    if (train_specs.empty() || test_specs.empty() || architectures.empty())
        throw std::invalid_argument("plan needs at least one training set, test set and architecture");
    if (repetitions < 1) throw std::invalid_argument("plan repetitions must be >= 1");
    for (const auto* specs : {&train_specs, &test_specs})
        for (const auto& s : *specs) GeneratorRequest{domain, s.kind, s.size, 0}.validate();
    const auto width = domain_schema(domain).width();
    for (const auto& a : architectures) nn::NetworkConfig{width, a, 0, false}.validate();
    train_config.validate();
}

namespace {

DatasetSpec spec_from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        const auto slash = s.find('/');
        DatasetSpec spec{parse_kind(s.substr(0, slash)), std::nullopt};
        if (slash != std::string::npos) spec.size = std::stoull(s.substr(slash + 1));
        return spec;
    }
    DatasetSpec spec{parse_kind(j.at("kind").get<std::string>()), std::nullopt};
    if (j.contains("size") && !j["size"].is_null()) spec.size = j["size"].get<std::size_t>();
    return spec;
}

ordered_json spec_to_json(const DatasetSpec& s) {
    ordered_json j;
    j["kind"] = to_string(s.kind);
    if (s.size) j["size"] = *s.size;
    return j;
}

std::string arch_label(const std::vector<std::size_t>& shape) {
    return nn::NetworkConfig{1, shape, 0, true}.shape_label();
}

std::string number(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string file_safe(std::string s) {
    std::replace(s.begin(), s.end(), '/', '-');
    return s;
}

}  // namespace

ExperimentPlan plan_from_json(const nlohmann::json& j) {
    try {
        ExperimentPlan p;
        p.name = j.value("name", std::string{"plan"});
        p.domain = parse_domain(j.at("domain").get<std::string>());
        for (const auto& s : j.at("train")) p.train_specs.push_back(spec_from_json(s));
        for (const auto& s : j.at("test")) p.test_specs.push_back(spec_from_json(s));
        for (const auto& a : j.at("architectures"))
            p.architectures.push_back(a.is_string() ? nn::parse_shape(a.get<std::string>())
                                                    : a.get<std::vector<std::size_t>>());
        if (j.contains("train_config")) {
            const auto& t = j["train_config"];
            auto& c = p.train_config;
            c.learning_rate = t.value("learning_rate", c.learning_rate);
            c.batch_size = t.value("batch_size", c.batch_size);
            c.iterations = t.value("iterations", c.iterations);
            const auto unit = t.value("iteration_unit", std::string{"steps"});
            if (unit == "steps") c.unit = nn::IterationUnit::steps;
            else if (unit == "epochs") c.unit = nn::IterationUnit::epochs;
            else throw std::invalid_argument("iteration_unit must be steps or epochs");
            c.beta1 = t.value("beta1", c.beta1);
            c.beta2 = t.value("beta2", c.beta2);
            c.epsilon = t.value("epsilon", c.epsilon);
            c.trace_interval = t.value("trace_interval", c.trace_interval);
        }
        p.repetitions = j.value("repetitions", std::size_t{50});
        p.master_seed = j.value("master_seed", std::uint64_t{0});
        p.validate();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed plan: ") + e.what());
    }
}

ordered_json to_json(const ExperimentPlan& p) {
    ordered_json j;
    j["name"] = p.name;
    j["domain"] = to_string(p.domain);
    j["train"] = ordered_json::array();
    for (const auto& s : p.train_specs) j["train"].push_back(spec_to_json(s));
    j["test"] = ordered_json::array();
    for (const auto& s : p.test_specs) j["test"].push_back(spec_to_json(s));
    j["architectures"] = ordered_json::array();
    for (const auto& a : p.architectures) j["architectures"].push_back(arch_label(a));
    const auto& c = p.train_config;
    j["train_config"] = {{"learning_rate", c.learning_rate},
                         {"batch_size", c.batch_size},
                         {"iterations", c.iterations},
                         {"iteration_unit", c.unit == nn::IterationUnit::steps ? "steps" : "epochs"},
                         {"beta1", c.beta1},
                         {"beta2", c.beta2},
                         {"epsilon", c.epsilon},
                         {"trace_interval", c.trace_interval}};
    j["repetitions"] = p.repetitions;
    j["master_seed"] = p.master_seed;
    return j;
}

ExperimentPlan load_plan(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open plan " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
    if (j.contains("plan") && j["plan"].is_object()) return plan_from_json(j["plan"]);
    return plan_from_json(j);
}

const CellSummary& AggregateReport::cell(std::string_view train, std::string_view test, std::string_view arch) const {
    for (const auto& c : cells)
        if (c.train == train && c.test == test && c.arch == arch) return c;
    throw std::out_of_range("no cell " + std::string(train) + " x " + std::string(test) + " x " + std::string(arch));
}

const CurveSummary& AggregateReport::curve(std::string_view train, std::string_view test, std::string_view arch) const {
    for (const auto& c : curves)
        if (c.train == train && c.test == test && c.arch == arch) return c;
    throw std::out_of_range("no curve " + std::string(train) + " x " + std::string(test) + " x " + std::string(arch));
}

const TableSummary& AggregateReport::table(std::string_view train, std::string_view test, std::string_view arch) const {
    for (const auto& t : tables)
        if (t.train == train && t.test == test && t.arch == arch) return t;
    throw std::out_of_range("no table " + std::string(train) + " x " + std::string(test) + " x " + std::string(arch));
}

namespace {

struct CurveAxes {
    std::string x;
    std::string group;
};

std::optional<CurveAxes> curve_axes(DatasetKind kind) {
    if (kind == DatasetKind::age_gender) return CurveAxes{"Age", "Gender"};
    if (kind == DatasetKind::patient_distance) return CurveAxes{"Distance", "Type"};
    return std::nullopt;
}

bool has_table(DatasetKind kind) { return kind == DatasetKind::unlawfulness || kind == DatasetKind::imputability; }

/// Everything one trained network produced on every test set.
struct JobResult {
    std::uint64_t init_seed = 0;
    std::uint64_t shuffle_seed = 0;
    bool diverged = false;
    std::vector<double> accuracy;                                         // per test spec, percent
    std::map<std::size_t, rationale::RationaleCurve> curves;             // by test index
    std::map<std::size_t, rationale::ConditionOutputTable> tables;       // by test index
};

template <typename Fn>
void run_parallel(std::size_t jobs, std::size_t parallelism, Fn&& fn) {
    const std::size_t workers = std::max<std::size_t>(1, std::min(parallelism, jobs));
    if (workers == 1) {
        for (std::size_t i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < workers; ++w)
        threads.emplace_back([&] {
            for (std::size_t i = next++; i < jobs; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    threads.clear();
    if (error) std::rethrow_exception(error);
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {std::nan(""), std::nan("")};
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

}  // namespace

AggregateReport run_plan(const ExperimentPlan& plan, const RunOptions& options) {
    plan.validate();
    const auto& schema = domain_schema(plan.domain);
    const std::size_t n_train = plan.train_specs.size();
    const std::size_t n_test = plan.test_specs.size();
    const std::size_t n_arch = plan.architectures.size();
    auto log = [&](const std::string& msg) {
        if (options.log) options.log(msg);
    };

    // Seed-independent test sets are built once and shared by all repetitions.
    std::vector<std::shared_ptr<const Dataset>> cached_tests(n_test);
    for (std::size_t j = 0; j < n_test; ++j) {
        const auto& s = plan.test_specs[j];
        if (is_seed_independent(plan.domain, s.kind))
            cached_tests[j] = std::make_shared<Dataset>(generate({plan.domain, s.kind, s.size, 0}));
    }

    // results[rep][train * n_arch + arch]
    std::vector<std::vector<JobResult>> results(plan.repetitions, std::vector<JobResult>(n_train * n_arch));
    std::vector<std::vector<std::uint64_t>> train_seeds(plan.repetitions), test_seeds(plan.repetitions);

    for (std::size_t rep = 0; rep < plan.repetitions; ++rep) {
        std::vector<Dataset> train_sets;
        for (std::size_t i = 0; i < n_train; ++i) {
            const auto& s = plan.train_specs[i];
            const auto seed = is_seed_independent(plan.domain, s.kind)
                                  ? 0
                                  : derive_seed(plan.master_seed, rep, "train/" + std::to_string(i));
            train_seeds[rep].push_back(seed);
            train_sets.push_back(generate({plan.domain, s.kind, s.size, seed}));
        }
        std::vector<std::shared_ptr<const Dataset>> test_sets(n_test);
        for (std::size_t j = 0; j < n_test; ++j) {
            const auto& s = plan.test_specs[j];
            if (cached_tests[j]) {
                test_seeds[rep].push_back(0);
                test_sets[j] = cached_tests[j];
                continue;
            }
            const auto seed = derive_seed(plan.master_seed, rep, "test/" + std::to_string(j));
            test_seeds[rep].push_back(seed);
            test_sets[j] = std::make_shared<Dataset>(generate({plan.domain, s.kind, s.size, seed}));
        }

        run_parallel(n_train * n_arch, options.parallelism, [&](std::size_t job) {
            const std::size_t i = job / n_arch;
            const std::size_t k = job % n_arch;
            const std::string tag = std::to_string(i) + "/" + std::to_string(k);
            JobResult& out = results[rep][job];
            out.init_seed = derive_seed(plan.master_seed, rep, "init/" + tag);
            out.shuffle_seed = derive_seed(plan.master_seed, rep, "shuffle/" + tag);

            nn::TrainConfig tc = plan.train_config;
            tc.shuffle_seed = out.shuffle_seed;
            nn::NetworkConfig nc{schema.width(), plan.architectures[k], out.init_seed, false};
            nn::TrainedModel model;
            try {
                model = nn::train(train_sets[i], nc, tc);
            } catch (const nn::DivergenceError&) {
                out.diverged = true;
                return;
            }
            const auto output = rationale::model_output(model);
            for (std::size_t j = 0; j < n_test; ++j) {
                const auto& test = *test_sets[j];
                out.accuracy.push_back(100.0 * rationale::accuracy(output, test));
                if (auto axes = curve_axes(plan.test_specs[j].kind))
                    out.curves[j] = rationale::output_curve(output, test, axes->x, axes->group);
                if (has_table(plan.test_specs[j].kind))
                    out.tables[j] = rationale::condition_table(output, test, *targeted_condition(plan.test_specs[j].kind));
            }
        });
        log("repetition " + std::to_string(rep + 1) + "/" + std::to_string(plan.repetitions) + " done");
    }

    // Deterministic fold in plan order.
    AggregateReport report;
    report.plan = plan;
    for (const auto& rep : results)
        for (const auto& job : rep)
            if (job.diverged) ++report.diverged_runs;

    for (std::size_t i = 0; i < n_train; ++i)
        for (std::size_t j = 0; j < n_test; ++j)
            for (std::size_t k = 0; k < n_arch; ++k) {
                CellSummary cell;
                cell.train = plan.train_specs[i].label();
                cell.test = plan.test_specs[j].label();
                cell.arch = arch_label(plan.architectures[k]);
                std::vector<double> accs;
                for (std::size_t rep = 0; rep < plan.repetitions; ++rep) {
                    const auto& job = results[rep][i * n_arch + k];
                    RepetitionResult r{rep, train_seeds[rep][i], test_seeds[rep][j], job.init_seed, job.shuffle_seed, {}};
                    if (!job.diverged) {
                        r.accuracy = job.accuracy[j];
                        accs.push_back(job.accuracy[j]);
                    } else {
                        ++cell.excluded;
                    }
                    cell.repetitions.push_back(r);
                }
                std::tie(cell.mean, cell.std) = mean_std(accs);
                cell.n = accs.size();
                if (!accs.empty()) {
                    cell.min = *std::min_element(accs.begin(), accs.end());
                    cell.max = *std::max_element(accs.begin(), accs.end());
                }
                report.cells.push_back(std::move(cell));
            }

    for (std::size_t i = 0; i < n_train; ++i)
        for (std::size_t j = 0; j < n_test; ++j)
            for (std::size_t k = 0; k < n_arch; ++k) {
                const auto kind = plan.test_specs[j].kind;
                std::vector<rationale::RationaleCurve> curves;
                std::vector<rationale::ConditionOutputTable> tables;
                for (std::size_t rep = 0; rep < plan.repetitions; ++rep) {
                    const auto& job = results[rep][i * n_arch + k];
                    if (job.diverged) continue;
                    if (auto it = job.curves.find(j); it != job.curves.end()) curves.push_back(it->second);
                    if (auto it = job.tables.find(j); it != job.tables.end()) tables.push_back(it->second);
                }
                const std::string train = plan.train_specs[i].label();
                const std::string test = plan.test_specs[j].label();
                const std::string arch = arch_label(plan.architectures[k]);
                if (curve_axes(kind) && !curves.empty()) {
                    CurveSummary c;
                    c.train = train;
                    c.test = test;
                    c.arch = arch;
                    c.condition = *targeted_condition(kind);
                    c.mean_curve = rationale::average_curves(curves);
                    c.ideal = rationale::ideal_curve(plan.domain, c.condition);
                    c.turning_points = rationale::turning_points(c.mean_curve);
                    c.deviation = rationale::curve_deviation(c.mean_curve, c.ideal);
                    c.deviation_off_threshold = rationale::curve_deviation(c.mean_curve, c.ideal, 5.0);
                    c.file = "curves/" + file_safe(train) + "__" + arch + "__" + file_safe(test) + ".tsv";
                    report.curves.push_back(std::move(c));
                }
                if (has_table(kind) && !tables.empty()) {
                    TableSummary t;
                    t.train = train;
                    t.test = test;
                    t.arch = arch;
                    t.repetitions = tables.size();
                    t.table = tables.front();
                    t.table.when_false.mean_output = 0.0;
                    t.table.when_true.mean_output = 0.0;
                    for (const auto& tb : tables) {
                        t.table.when_false.mean_output += tb.when_false.mean_output;
                        t.table.when_true.mean_output += tb.when_true.mean_output;
                    }
                    t.table.when_false.mean_output /= static_cast<double>(tables.size());
                    t.table.when_true.mean_output /= static_cast<double>(tables.size());
                    report.tables.push_back(std::move(t));
                }
            }
    return report;
}

namespace {

ordered_json nullable(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(); }

ordered_json table_entry(const TableSummary& t) {
    ordered_json j;
    j["train"] = t.train;
    j["test"] = t.test;
    j["arch"] = t.arch;
    j["repetitions"] = t.repetitions;
    j["table"] = rationale::to_json(t.table);
    return j;
}

}  // namespace

ordered_json summary_json(const AggregateReport& r) {
    ordered_json j;
    j["plan"] = to_json(r.plan);
    j["generator_version"] = kGeneratorVersion;
    j["cell_count"] = r.cells.size();
    j["diverged_runs"] = r.diverged_runs;
    j["cells"] = ordered_json::array();
    for (const auto& c : r.cells) {
        ordered_json jc;
        jc["train"] = c.train;
        jc["test"] = c.test;
        jc["arch"] = c.arch;
        jc["mean"] = nullable(c.mean);
        jc["std"] = nullable(c.std);
        jc["min"] = c.min;
        jc["max"] = c.max;
        jc["n"] = c.n;
        jc["excluded"] = c.excluded;
        jc["accuracies"] = ordered_json::array();
        for (const auto& rep : c.repetitions)
            jc["accuracies"].push_back(rep.accuracy ? ordered_json(*rep.accuracy) : ordered_json());
        j["cells"].push_back(jc);
    }
    j["curves"] = ordered_json::array();
    for (const auto& c : r.curves) {
        ordered_json jc;
        jc["train"] = c.train;
        jc["test"] = c.test;
        jc["arch"] = c.arch;
        jc["condition"] = c.condition;
        jc["file"] = c.file;
        jc["turning_points"] = rationale::to_json(c.turning_points);
        jc["ideal_turning_points"] = rationale::to_json(rationale::turning_points(c.ideal));
        jc["deviation"] = rationale::to_json(c.deviation);
        jc["deviation_off_threshold"] = rationale::to_json(c.deviation_off_threshold);
        j["curves"].push_back(jc);
    }
    j["condition_tables"] = ordered_json::array();
    for (const auto& t : r.tables) j["condition_tables"].push_back(table_entry(t));
    return j;
}

ordered_json condition_tables_json(const AggregateReport& r) {
    ordered_json j = ordered_json::array();
    for (const auto& t : r.tables) j.push_back(table_entry(t));
    return j;
}

ordered_json manifest_json(const AggregateReport& r, std::string_view created_at) {
    ordered_json j;
    j["plan"] = to_json(r.plan);
    j["generator_version"] = kGeneratorVersion;
    j["created_at"] = created_at;
    j["runs"] = ordered_json::array();
    // One entry per (repetition, train, arch); the seeds are all derivable from
    // master_seed, and are listed so any single run can be reproduced alone.
    const std::size_t n_arch = r.plan.architectures.size();
    for (std::size_t rep = 0; rep < r.plan.repetitions; ++rep)
        for (std::size_t i = 0; i < r.plan.train_specs.size(); ++i)
            for (std::size_t k = 0; k < n_arch; ++k) {
                const auto& cell = r.cells[(i * r.plan.test_specs.size()) * n_arch + k];
                const auto& rr = cell.repetitions[rep];
                ordered_json e;
                e["repetition"] = rep;
                e["train"] = cell.train;
                e["arch"] = cell.arch;
                e["train_seed"] = rr.train_seed;
                e["init_seed"] = rr.init_seed;
                e["shuffle_seed"] = rr.shuffle_seed;
                j["runs"].push_back(e);
            }
    j["test_seeds"] = ordered_json::array();
    for (std::size_t rep = 0; rep < r.plan.repetitions; ++rep)
        for (std::size_t jt = 0; jt < r.plan.test_specs.size(); ++jt) {
            const auto& rr = r.cells[jt * n_arch].repetitions[rep];
            j["test_seeds"].push_back({{"repetition", rep}, {"test", r.plan.test_specs[jt].label()}, {"seed", rr.test_seed}});
        }
    return j;
}

void emit_report(const AggregateReport& r, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "curves");
    auto write = [&](const fs::path& rel, const std::string& content) {
        std::ofstream out(dir / rel, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (dir / rel).string());
        out << content;
        if (!out) throw std::runtime_error("write failed for " + (dir / rel).string());
    };

    write("summary.json", summary_json(r).dump(2) + "\n");
    write("condition_tables.json", condition_tables_json(r).dump(2) + "\n");

    std::string csv = "train,test,arch,mean,std\n";
    for (const auto& c : r.cells)
        csv += c.train + "," + c.test + "," + c.arch + "," + number(c.mean) + "," + number(c.std) + "\n";
    write("accuracy.csv", csv);

    for (const auto& c : r.curves) {
        std::ostringstream tsv;
        rationale::write_curve_tsv(c.mean_curve, tsv);
        write(c.file, tsv.str());
    }

    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    write("manifest.json", manifest_json(r, stamp).dump(2) + "\n");
}

}  // namespace ratlab::experiment
