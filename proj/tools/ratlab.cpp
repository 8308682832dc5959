#include "ratlab/dataset.hpp"
#include "ratlab/domain.hpp"
#include "ratlab/experiment.hpp"
#include "ratlab/network.hpp"
#include "ratlab/oracle.hpp"
#include "ratlab/random.hpp"
#include "ratlab/rationale.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

namespace fs = std::filesystem;
using namespace ratlab;

namespace {

enum Exit : int { ok = 0, audit_failed = 1, usage = 2, runtime = 3 };

// Usage problems detected after CLI11 parsing (bad enum values, bad combos).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

DomainId domain_flag(const std::string& s) {
    try {
        return parse_domain(s);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
}

void print_seed(std::string_view role, std::uint64_t seed) { std::cerr << "seed " << role << " = " << seed << "\n"; }

std::optional<std::string> curve_feature_pair(DatasetKind kind, std::string* group) {
    if (kind == DatasetKind::age_gender) {
        *group = "Gender";
        return "Age";
    }
    if (kind == DatasetKind::patient_distance) {
        *group = "Type";
        return "Distance";
    }
    return std::nullopt;
}

struct GenArgs {
    std::string domain, kind, out;
    std::optional<std::size_t> size;
    std::uint64_t seed = 0;
};

int cmd_gen(const GenArgs& a) {
    GeneratorRequest req;
    req.domain = domain_flag(a.domain);
    try {
        req.kind = parse_kind(a.kind);
        req.size = a.size;
        req.seed = a.seed;
        req.validate();
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    print_seed("data", req.seed);
    const Dataset d = generate(req);
    write_dataset(d, a.out);
    std::cout << a.out << ": " << d.cases.size() << " cases, " << d.positives() << " positive\n";
    return ok;
}

struct VerifyArgs {
    std::string in, domain;
};

int cmd_verify(const VerifyArgs& a) {
    const auto& schema = domain_schema(domain_flag(a.domain));
    const Dataset d = read_dataset(a.in, schema);
    print_seed("data", d.meta.seed);
    const auto report = oracle::verify_dataset(d, schema);
    std::cout << oracle::to_json(report).dump(2) << "\n";
    return report.passed() ? ok : audit_failed;
}

struct TrainArgs {
    std::string data, domain, arch = "12", out, unit = "steps";
    std::size_t iterations = 50000;
    std::size_t batch = 50;
    double learning_rate = 0.001;
    std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a) {
    const auto& schema = domain_schema(domain_flag(a.domain));
    nn::NetworkConfig nc;
    nn::TrainConfig tc;
    try {
        nc.input_width = schema.width();
        nc.hidden_layers = nn::parse_shape(a.arch);
        nc.init_seed = derive_seed(a.seed, 0, "init");
        nc.validate();
        tc.iterations = a.iterations;
        tc.batch_size = a.batch;
        tc.learning_rate = a.learning_rate;
        if (a.unit == "epochs")
            tc.unit = nn::IterationUnit::epochs;
        else if (a.unit != "steps")
            throw std::invalid_argument("unknown iteration unit '" + a.unit + "'");
        tc.shuffle_seed = derive_seed(a.seed, 0, "shuffle");
        tc.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    print_seed("master", a.seed);
    print_seed("init", nc.init_seed);
    print_seed("shuffle", tc.shuffle_seed);
    const Dataset d = read_dataset(a.data, schema);
    const auto model = nn::train(d, nc, tc);
    nn::save_model(model, a.out);
    std::cout << a.out << ": " << nc.shape_label() << ", final loss "
              << (model.loss_trace.empty() ? std::nan("") : model.loss_trace.back()) << ", train accuracy "
              << rationale::accuracy(model, d) << "\n";
    return ok;
}

struct EvalArgs {
    std::string model, data, curve_out;
};

int cmd_eval(const EvalArgs& a) {
    const auto model = nn::load_model(a.model);
    const auto& schema = domain_schema(model.domain);
    const Dataset d = read_dataset(a.data, schema);
    print_seed("init", model.config.init_seed);
    print_seed("shuffle", model.train_config.shuffle_seed);
    print_seed("data", d.meta.seed);
    const auto output = rationale::model_output(model);

    nlohmann::ordered_json j;
    j["model"] = a.model;
    j["data"] = a.data;
    j["cases"] = d.cases.size();
    j["accuracy"] = rationale::accuracy(output, d);
    if (d.kind) {
        if (auto cond = targeted_condition(*d.kind)) {
            std::string group;
            if (auto x = curve_feature_pair(*d.kind, &group)) {
                const auto curve = rationale::output_curve(output, d, *x, group);
                const auto ideal = rationale::ideal_curve(model.domain, *cond);
                j["turning_points"] = rationale::to_json(rationale::turning_points(curve));
                j["deviation"] = rationale::to_json(rationale::curve_deviation(curve, ideal));
                if (!a.curve_out.empty()) {
                    std::ofstream out(a.curve_out);
                    rationale::write_curve_tsv(curve, out);
                    if (!out) throw std::runtime_error("cannot write " + a.curve_out);
                }
            } else {
                j["condition_table"] = rationale::to_json(rationale::condition_table(output, d, *cond));
            }
        }
    }
    std::cout << j.dump(2) << "\n";
    return ok;
}

struct ExperimentArgs {
    std::string plan, out_dir;
    std::size_t parallelism = 1;
    std::optional<std::uint64_t> seed;
};

int cmd_experiment(const ExperimentArgs& a) {
    experiment::ExperimentPlan plan;
    try {
        plan = experiment::load_plan(a.plan);
        if (a.seed) plan.master_seed = *a.seed;
        plan.validate();
    } catch (const std::exception& e) {
        throw UsageError(a.plan + ": " + e.what());
    }
    print_seed("master", plan.master_seed);
    std::cerr << plan.name << ": " << plan.cell_count() << " cells x " << plan.repetitions << " repetitions\n";
    experiment::RunOptions opts;
    opts.parallelism = a.parallelism;
    opts.log = [](const std::string& m) { std::cerr << m << "\n"; };
    const auto report = experiment::run_plan(plan, opts);
    experiment::emit_report(report, a.out_dir);

    bool empty_cell = false;
    for (const auto& c : report.cells)
        if (c.n == 0) {
            std::cerr << "cell " << c.train << " x " << c.test << " x " << c.arch << ": no valid repetitions\n";
            empty_cell = true;
        }
    std::cout << a.out_dir << ": " << report.cells.size() << " cells, " << report.diverged_runs << " diverged runs\n";
    return empty_cell ? runtime : ok;
}

struct ReportArgs {
    std::string dir;
};

std::string fmt(const nlohmann::json& v) {
    if (v.is_null()) return "n/a";
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << v.get<double>();
    return s.str();
}

int cmd_report(const ReportArgs& a) {
    fs::path p = a.dir;
    if (fs::is_directory(p)) p /= "summary.json";
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    const auto j = nlohmann::json::parse(in);
    std::cout << j["plan"]["name"].get<std::string>() << " (master seed " << j["plan"]["master_seed"] << ", "
              << j["plan"]["repetitions"] << " repetitions)\n";
    std::cout << std::left << std::setw(22) << "train" << std::setw(22) << "test" << std::setw(10) << "arch"
              << "accuracy\n";
    for (const auto& c : j["cells"])
        std::cout << std::setw(22) << c["train"].get<std::string>() << std::setw(22) << c["test"].get<std::string>()
                  << std::setw(10) << c["arch"].get<std::string>() << fmt(c["mean"]) << " +- " << fmt(c["std"])
                  << "\n";
    if (j.contains("curves"))
        for (const auto& c : j["curves"]) {
            std::cout << c["train"].get<std::string>() << " " << c["arch"].get<std::string>() << " "
                      << c["condition"].get<std::string>() << " turning points:";
            for (const auto& [label, g] : c["turning_points"].items())
                std::cout << " " << label << "=" << fmt(g["turning_point"]);
            std::cout << "\n";
        }
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ratlab: rule-generated datasets, small MLPs and rationale checks"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "generate a dataset (CSV + .meta.json)");
    g->add_option("--domain", gen.domain, "welfare | simplified | tort")->required();
    g->add_option("--kind", gen.kind, "dataset kind")->required();
    g->add_option("--size", gen.size, "number of cases (sampled kinds only)");
    g->add_option("--seed", gen.seed, "generator seed");
    g->add_option("--out", gen.out, "output CSV")->required();

    VerifyArgs ver;
    auto* v = app.add_subcommand("verify", "audit a dataset against the oracle");
    v->add_option("--in", ver.in)->required();
    v->add_option("--domain", ver.domain)->required();

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "train one network");
    t->add_option("--data", tr.data)->required();
    t->add_option("--domain", tr.domain)->required();
    t->add_option("--arch", tr.arch, "hidden layer widths, e.g. 24-10-3")->capture_default_str();
    t->add_option("--iterations", tr.iterations)->capture_default_str();
    t->add_option("--unit", tr.unit, "steps | epochs")->capture_default_str();
    t->add_option("--batch-size", tr.batch)->capture_default_str();
    t->add_option("--learning-rate", tr.learning_rate)->capture_default_str();
    t->add_option("--seed", tr.seed);
    t->add_option("--out", tr.out, "model file")->required();

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "evaluate a model on a dataset");
    e->add_option("--model", ev.model)->required();
    e->add_option("--data", ev.data)->required();
    e->add_option("--curve-out", ev.curve_out, "write the output curve as TSV");

    ExperimentArgs ex;
    auto* x = app.add_subcommand("experiment", "run an experiment plan");
    x->add_option("--plan", ex.plan, "plan JSON or emitted manifest")->required();
    x->add_option("--out-dir", ex.out_dir)->required();
    x->add_option("--parallelism", ex.parallelism)->capture_default_str();
    x->add_option("--seed", ex.seed, "override the plan's master seed");

    ReportArgs rep;
    auto* r = app.add_subcommand("report", "print a summary.json as a table");
    r->add_option("dir", rep.dir, "experiment output directory or summary.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? ok : usage;
    }

    try {
        if (*g) return cmd_gen(gen);
        if (*v) return cmd_verify(ver);
        if (*t) return cmd_train(tr);
        if (*e) return cmd_eval(ev);
        if (*x) return cmd_experiment(ex);
        if (*r) return cmd_report(rep);
    } catch (const UsageError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return usage;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return runtime;
    }
    return usage;
}
