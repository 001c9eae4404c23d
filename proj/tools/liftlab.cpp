// Copyright 2026 The Liftlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// liftlab command-line driver.
//
// Exit codes: 0 success, 1 I/O or internal failure, 2 invalid input,
// 3 zero control baseline, 4 non-finite or degenerate fit, 5 every Monte
// Carlo fit failed.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"

#include "liftlab/io.hpp"
#include "liftlab/liftlab.hpp"

namespace {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kInvalid = 2,
    kZeroBaseline = 3,
    kFitError = 4,
    kAllFitsFailed = 5,
};

enum class LogLevel { Quiet = 0, Error, Warn, Info, Debug };

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("LIFTLAB_LOG");
        const std::string v = env ? env : "warn";
        if (v == "quiet" || v == "off") return LogLevel::Quiet;
        if (v == "error") return LogLevel::Error;
        if (v == "info") return LogLevel::Info;
        if (v == "debug") return LogLevel::Debug;
        return LogLevel::Warn;
    }();
    return level;
}

void log(LogLevel level, const std::string& message) {
    static constexpr const char* kNames[] = {"", "error", "warn", "info", "debug"};
    if (level <= log_level()) {
        std::cerr << "liftlab [" << kNames[static_cast<int>(level)] << "] " << message << '\n';
    }
}

void emit(const liftlab::io::Json& doc, const std::string& out_path) {
    const std::string text = doc.dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << text;
    } else {
        liftlab::io::write_atomic(out_path, text);
        log(LogLevel::Info, "wrote " + out_path);
    }
}

struct Options {
    std::string config;
    std::string out;
    std::string trace;
    std::string cohort_csv;
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;
    std::optional<std::uint64_t> n_treat, m_treat, n_ctrl, m_ctrl;
};

int cmd_lift(const Options& opt) {
    liftlab::ExperimentCounts counts;
    if (!opt.config.empty()) {
        const auto doc = liftlab::io::read_json_file(opt.config);
        const auto& obj = doc.contains("counts") ? doc.at("counts") : doc;
        counts = liftlab::io::detail::parse_counts(obj, "counts");
    }
    if (opt.n_treat) counts.n_treat = *opt.n_treat;
    if (opt.m_treat) counts.m_treat = *opt.m_treat;
    if (opt.n_ctrl) counts.n_ctrl = *opt.n_ctrl;
    if (opt.m_ctrl) counts.m_ctrl = *opt.m_ctrl;
    if (opt.config.empty() && !(opt.n_treat && opt.m_treat && opt.n_ctrl && opt.m_ctrl)) {
        throw liftlab::InvalidInput(
            "provide --n-treat, --m-treat, --n-ctrl and --m-ctrl, or --config");
    }
    counts.validate();
    const auto est = liftlab::estimate_lift(counts);
    emit(liftlab::io::lift_report(est, counts), opt.out);
    return kOk;
}

liftlab::io::RunConfig load_run_config(const Options& opt) {
    if (opt.config.empty()) {
        throw liftlab::InvalidInput("--config is required");
    }
    return liftlab::io::parse_run_config(liftlab::io::read_json_file(opt.config));
}

int cmd_fit(const Options& opt) {
    const auto cfg = load_run_config(opt);
    const liftlab::FactorModel model(cfg.structure);
    const auto result = liftlab::fit(model, cfg.overlap, cfg.observed, cfg.hyper, cfg.fit);
    for (const auto& w : result.warnings) {
        log(LogLevel::Warn, w);
    }
    if (!result.converged) {
        log(LogLevel::Warn, std::string("fit stopped without converging: ") +
                                liftlab::to_string(result.termination));
    }
    emit(liftlab::io::fit_report(cfg.structure, result, cfg.observed), opt.out);
    return kOk;
}

int cmd_simulate(const Options& opt) {
    const auto cfg = load_run_config(opt);
    liftlab::McConfig mc;
    mc.iterations = cfg.mc_iterations;
    mc.cold_start = cfg.mc_cold_start;
    mc.workers = opt.workers;
    mc.keep_trace = !opt.trace.empty();
    const auto seed = opt.seed ? opt.seed : cfg.mc_seed;
    if (!seed) {
        throw liftlab::io::ConfigError("monte_carlo.seed", "a seed is required for simulate");
    }
    mc.seed = *seed;
    const auto concentration = cfg.concentration();
    if (!concentration) {
        throw liftlab::io::ConfigError(
            "monte_carlo.concentration",
            "required when overlap is given as proportions without sample_size");
    }
    mc.dirichlet_concentration = *concentration;

    const liftlab::FactorModel model(cfg.structure);
    log(LogLevel::Info, "running " + std::to_string(mc.iterations) + " Monte Carlo iterations on " +
                            std::to_string(mc.workers) + " worker(s)");
    const auto result =
        liftlab::run_monte_carlo(model, cfg.overlap, cfg.observed, cfg.hyper, cfg.fit, mc);
    if (result.summary.failures > 0) {
        log(LogLevel::Warn, std::to_string(result.summary.failures) + " of " +
                                std::to_string(result.summary.iterations) +
                                " fits did not converge and were dropped");
    }
    if (!opt.trace.empty()) {
        liftlab::io::write_atomic(opt.trace, liftlab::io::trace_csv(result));
    }
    emit(liftlab::io::mc_report(cfg.structure, result, mc), opt.out);
    return kOk;
}

int cmd_generate(const Options& opt) {
    if (opt.config.empty()) {
        throw liftlab::InvalidInput("--config is required");
    }
    auto spec = liftlab::io::parse_world_spec(liftlab::io::read_json_file(opt.config));
    if (opt.seed) {
        spec.seed = *opt.seed;
    }
    const auto cohort = liftlab::generate_cohort(spec, opt.workers);
    const auto bundle = liftlab::io::run_virtual_experiments(cohort, opt.workers);
    if (!opt.cohort_csv.empty()) {
        std::ostringstream csv;
        liftlab::write_cohort_csv(cohort, liftlab::Scenario::global(spec.structure), csv);
        liftlab::io::write_atomic(opt.cohort_csv, csv.str());
    }
    emit(liftlab::io::bundle_json(spec, bundle), opt.out);
    return kOk;
}

int run_guarded(int (*command)(const Options&), const Options& opt) {
    try {
        return command(opt);
    } catch (const liftlab::ZeroBaseline& e) {
        log(LogLevel::Error, e.what());
        return kZeroBaseline;
    } catch (const liftlab::InvalidInput& e) {
        log(LogLevel::Error, e.what());
        return kInvalid;
    } catch (const liftlab::InvalidWorld& e) {
        log(LogLevel::Error, e.what());
        return kInvalid;
    } catch (const liftlab::NonFiniteObjective& e) {
        log(LogLevel::Error, e.what());
        return kFitError;
    } catch (const liftlab::DegenerateProblem& e) {
        log(LogLevel::Error, e.what());
        return kFitError;
    } catch (const liftlab::AllFitsFailed& e) {
        log(LogLevel::Error, e.what());
        return kAllFitsFailed;
    } catch (const std::exception& e) {
        log(LogLevel::Error, e.what());
        return kFailure;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pure and global incremental lifts of overlapping marketing journeys"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "JSON configuration file");
        sub->add_option("--out", opt.out, "output path (default: standard output)");
    };

    auto* lift = app.add_subcommand("lift", "observed lift with delta-method interval");
    add_common(lift);
    lift->add_option("--n-treat", opt.n_treat, "users in treatment");
    lift->add_option("--m-treat", opt.m_treat, "converters in treatment");
    lift->add_option("--n-ctrl", opt.n_ctrl, "users in control");
    lift->add_option("--m-ctrl", opt.m_ctrl, "converters in control");

    auto* fit = app.add_subcommand("fit", "fit the multiplicative factor model");
    add_common(fit);

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo parameter uncertainty");
    add_common(simulate);
    simulate->add_option("--seed", opt.seed, "random seed (overrides monte_carlo.seed)");
    simulate->add_option("--workers", opt.workers, "worker threads")->check(CLI::PositiveNumber);
    simulate->add_option("--trace", opt.trace, "per-iteration CSV trace");

    auto* generate = app.add_subcommand("generate", "synthetic cohort and virtual experiments");
    add_common(generate);
    generate->add_option("--seed", opt.seed, "override the world seed");
    generate->add_option("--workers", opt.workers, "worker threads")->check(CLI::PositiveNumber);
    generate->add_option("--cohort", opt.cohort_csv, "write the full cohort as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInvalid;
    }

    if (*lift) return run_guarded(cmd_lift, opt);
    if (*fit) return run_guarded(cmd_fit, opt);
    if (*simulate) return run_guarded(cmd_simulate, opt);
    return run_guarded(cmd_generate, opt);
}
