#include <pcac/pcac.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw pcac::ConfigError("cannot read '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw std::runtime_error("cannot write '" + path.string() + "'");
    }
}

pcac::Scenario load(const std::string& path)
{
    try {
        return pcac::parse_scenario(read_file(path));
    } catch (const pcac::ScenarioError& e) {
        std::vector<std::string> errs;
        for (const auto& msg : e.errors()) {
            errs.push_back(path + ": " + msg);
        }
        throw pcac::ScenarioError(std::move(errs));
    }
}

std::vector<pcac::LoopLimits> scenario_limits(const pcac::Scenario& s)
{
    std::vector<pcac::LoopLimits> out;
    for (std::size_t i = 0; i < s.loops.size(); ++i) {
        out.push_back({s.loops[i].name, s.loops[i].inputs, pcac::build_loop_config(s, i).limits});
    }
    return out;
}

struct RunJob {
    std::string path;
    pcac::Scenario scenario;
    fs::path out_dir;
    std::string error;
};

void run_job(RunJob& job)
{
    try {
        const auto trace = pcac::run_scenario(job.scenario);
        fs::create_directories(job.out_dir);
        write_file(job.out_dir / "trace.csv", pcac::trace_csv(trace));
        write_file(job.out_dir / "scenario.json", trace.config_echo);
        write_file(job.out_dir / "metrics.json", pcac::metrics_json(pcac::compute_metrics(trace)));
    } catch (const std::exception& e) {
        job.error = e.what();
    }
}

int cmd_run(const std::vector<std::string>& paths, const std::string& out, std::optional<std::int64_t> steps,
            std::optional<std::uint64_t> seed, unsigned jobs)
{
    std::vector<RunJob> work;
    try {
        for (const auto& p : paths) {
            RunJob job{p, load(p), {}, {}};
            if (steps) {
                job.scenario.steps = *steps;
            }
            if (seed) {
                job.scenario.seed = *seed;
            }
            // Re-validate after overrides.
            job.scenario = pcac::parse_scenario(pcac::print_scenario(job.scenario));
            job.out_dir = paths.size() == 1 ? fs::path(out) : fs::path(out) / job.scenario.name;
            work.push_back(std::move(job));
        }
    } catch (const pcac::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kInvalid;
    }

    // Scenarios are independent; each one runs sequentially on its own thread.
    std::size_t next = 0;
    std::mutex mtx;
    auto worker = [&] {
        while (true) {
            std::size_t idx = 0;
            {
                std::lock_guard lock(mtx);
                if (next >= work.size()) {
                    return;
                }
                idx = next++;
            }
            run_job(work[idx]);
        }
    };
    const unsigned n_threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(work.size())));
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_threads; ++i) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }

    int status = kOk;
    for (const auto& job : work) {
        if (job.error.empty()) {
            std::cout << job.scenario.name << ": wrote " << (job.out_dir / "trace.csv").string() << '\n';
        } else {
            std::cerr << job.path << ": run failed: " << job.error << '\n';
            status = kRuntime;
        }
    }
    return status;
}

int cmd_validate(const std::string& path)
{
    try {
        const auto s = load(path);
        std::cout << s.name << ": ok (" << s.loops.size() << " loop" << (s.loops.size() == 1 ? "" : "s");
        for (std::size_t i = 0; i < s.loops.size(); ++i) {
            std::cout << (i ? ", " : ": ") << s.loops[i].name << " theta "
                      << pcac::build_loop_config(s, i).dims.theta_size();
        }
        std::cout << ")\n";
        return kOk;
    } catch (const pcac::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kInvalid;
    }
}

int cmd_metrics(const std::string& trace_path, const std::string& scenario_path)
{
    std::vector<pcac::LoopLimits> limits;
    pcac::TraceTable table;
    try {
        if (!scenario_path.empty()) {
            limits = scenario_limits(load(scenario_path));
        }
        std::ifstream in(trace_path);
        if (!in) {
            throw pcac::ConfigError("cannot read '" + trace_path + "'");
        }
        table = pcac::read_trace_csv(in);
        std::cout << pcac::metrics_json(pcac::compute_metrics(table, limits));
        return kOk;
    } catch (const pcac::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return kRuntime;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Predictive cost adaptive control: closed-loop scenario runner"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run one or more scenarios and write trace.csv, scenario.json, metrics.json");
    std::vector<std::string> run_paths;
    std::string out_dir;
    std::optional<std::int64_t> steps;
    std::optional<std::uint64_t> seed;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    run->add_option("--scenario", run_paths, "Scenario file(s)")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "Output directory (one subdirectory per scenario when several)")->required();
    run->add_option("--steps", steps, "Override the step count")->check(CLI::PositiveNumber);
    run->add_option("--seed", seed, "Override the random seed");
    run->add_option("--jobs", jobs, "Worker threads for multiple scenarios")->check(CLI::PositiveNumber);

    auto* validate = app.add_subcommand("validate", "Parse and validate a scenario file");
    std::string validate_path;
    validate->add_option("--scenario", validate_path, "Scenario file")->required();

    auto* metrics = app.add_subcommand("metrics", "Summarize a trace CSV as JSON");
    std::string trace_path;
    std::string metrics_scenario;
    metrics->add_option("--trace", trace_path, "Trace CSV")->required();
    metrics->add_option("--scenario", metrics_scenario, "Scenario file, enables the constraint margin");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }

    if (*run) {
        return cmd_run(run_paths, out_dir, steps, seed, jobs);
    }
    if (*validate) {
        return cmd_validate(validate_path);
    }
    return cmd_metrics(trace_path, metrics_scenario);
}
