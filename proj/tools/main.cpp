/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "gearsim/bench.hpp"
#include "gearsim/system.hpp"

using namespace gearsim;

namespace {

struct CommonOpts {
    std::string config;
    u64 seed = 1;
    bool seed_set = false;
    u64 duration = 0;
    std::string out;
    std::string format = "csv";
};

void add_common(CLI::App* app, CommonOpts& o) {
    app->add_option("--config", o.config, "scenario file (JSON)");
    auto* s = app->add_option("--seed", o.seed, "PRNG seed");
    s->each([&o](const std::string&) { o.seed_set = true; });
    app->add_option("--duration", o.duration, "virtual run length in nanoseconds");
    app->add_option("--out", o.out, "output directory");
    app->add_option("--format", o.format, "report format")
        ->check(CLI::IsMember({"csv", "json"}));
}

ScenarioConfig effective_config(const CommonOpts& o, const ScenarioConfig& fallback) {
    ScenarioConfig cfg = o.config.empty() ? fallback : load_scenario(o.config);
    if (o.seed_set)
        cfg.seed = o.seed;
    if (o.duration)
        cfg.duration_ns = o.duration;
    return cfg;
}

CostModel effective_costs(const CommonOpts& o) {
    if (o.config.empty())
        return CostModel{};
    return load_scenario(o.config).cost_model;
}

void write_file(const std::string& dir, const std::string& name, const std::string& content) {
    if (dir.empty()) {
        std::cout << content;
        return;
    }
    std::filesystem::create_directories(dir);
    std::ofstream f(dir + "/" + name, std::ios::trunc);
    if (!f)
        throw std::runtime_error("cannot write " + dir + "/" + name);
    f << content;
}

ScenarioConfig default_sim_scenario(u64 seed) {
    return overhead_scenario(ProfileKind::IoBound, CostModel{}, 1'000'000'000, seed);
}

int cmd_sim_run(const CommonOpts& o) {
    ScenarioConfig cfg = effective_config(o, default_sim_scenario(o.seed));
    System sys(cfg);
    sys.run();
    System::Summary s = sys.summarize();
    if (!o.out.empty()) {
        std::ostringstream tr;
        write_canonical(sys.engine.trace(), tr);
        write_file(o.out, "trace.tsv", tr.str());
    }
    write_file(o.out, o.format == "json" ? "summary.json" : "summary.csv",
               o.format == "json" ? summary_json(s) : summary_csv(s));
    std::cerr << "trace_hash " << s.trace_hash << "\n";
    return 0;
}

int cmd_trace_dump(const CommonOpts& o) {
    ScenarioConfig cfg = effective_config(o, default_sim_scenario(o.seed));
    System sys(cfg);
    sys.run();
    std::ostringstream tr;
    write_canonical(sys.engine.trace(), tr);
    write_file(o.out, "trace.tsv", tr.str());
    return 0;
}

int cmd_report_emit(const CommonOpts& o) {
    ScenarioConfig cfg = effective_config(o, default_sim_scenario(o.seed));
    System sys(cfg);
    sys.run();
    System::Summary s = sys.summarize();
    write_file(o.out, o.format == "json" ? "summary.json" : "summary.csv",
               o.format == "json" ? summary_json(s) : summary_csv(s));
    return 0;
}

int cmd_bench_micro(const CommonOpts& o, const std::string& name) {
    CostModel cm = effective_costs(o);
    std::vector<MicroResult> rs;
    if (name.empty() || name == "all") {
        rs = run_all_microbench(cm, o.seed);
    } else {
        MicroBench which;
        if (name == "hypercall")
            which = MicroBench::Hypercall;
        else if (name == "world_switch")
            which = MicroBench::WorldSwitch;
        else if (name == "vm_trap")
            which = MicroBench::VmTrap;
        else if (name == "ipi")
            which = MicroBench::Ipi;
        else if (name == "io_out")
            which = MicroBench::IoOut;
        else {
            std::cerr << "unknown micro-benchmark '" << name << "'\n";
            return 2;
        }
        rs.push_back(run_microbench(which, cm, o.seed));
    }
    write_file(o.out, o.format == "json" ? "micro.json" : "micro.csv",
               o.format == "json" ? micro_json(rs) : micro_csv(rs));
    return 0;
}

int cmd_bench_overhead(const CommonOpts& o, const std::string& profile) {
    CostModel cm = effective_costs(o);
    u64 duration = o.duration ? o.duration : 10'000'000'000ull;
    std::vector<OverheadReport> reports;
    if (profile.empty() || profile == "all" ) {
        reports.push_back(measure_gear2_overhead(ProfileKind::IoBound, cm, duration, o.seed));
        reports.push_back(measure_gear2_overhead(ProfileKind::CpuBound, cm, duration, o.seed));
    } else if (profile == "io" || profile == "io_bound") {
        reports.push_back(measure_gear2_overhead(ProfileKind::IoBound, cm, duration, o.seed));
    } else if (profile == "cpu" || profile == "cpu_bound") {
        reports.push_back(measure_gear2_overhead(ProfileKind::CpuBound, cm, duration, o.seed));
    } else {
        std::cerr << "unknown profile '" << profile << "'\n";
        return 2;
    }
    std::ostringstream os;
    for (size_t i = 0; i < reports.size(); ++i) {
        if (o.format == "json")
            os << overhead_json(reports[i]);
        else if (i == 0)
            os << overhead_csv(reports[i]);
        else { // append data row only
            std::string full = overhead_csv(reports[i]);
            os << full.substr(full.find('\n') + 1);
        }
    }
    write_file(o.out, o.format == "json" ? "overhead.json" : "overhead.csv", os.str());
    return 0;
}

int cmd_bench_jitter(const CommonOpts& o, const std::string& profile, u64 seeds) {
    CostModel cm = effective_costs(o);
    JitterParams jp;
    jp.guest = profile == "preempt_rt" ? preempt_rt_profile() : xenomai_profile();
    if (o.duration)
        jp.duration_ns = o.duration;
    std::ostringstream os;
    bool all_ok = true;
    for (u64 s = 0; s < std::max<u64>(1, seeds); ++s) {
        JitterReport rep = run_jitter_suite(jp, cm, o.seed + s);
        all_ok = all_ok && rep.ordering_ok;
        if (o.format == "json")
            os << jitter_json(rep);
        else if (s == 0)
            os << jitter_csv(rep);
        else {
            std::string full = jitter_csv(rep);
            os << full.substr(full.find('\n') + 1);
        }
    }
    write_file(o.out, o.format == "json" ? "jitter.json" : "jitter.csv", os.str());
    std::cerr << "ordering " << (all_ok ? "ok" : "VIOLATED") << "\n";
    return all_ok ? 0 : 1;
}

int cmd_bench_calibrate(const CommonOpts& o) {
    CostModel cm = effective_costs(o);
    CalibrationResult cr = calibrate(cm, 9928, 8774, o.seed);
    std::ostringstream os;
    os << "ipi: base " << fmt6(cr.ipi_before_ns) << " ns, fitted gicd_emul_ns "
       << cr.fitted.gicd_emul_ns << ", verified " << fmt6(cr.ipi_after_ns) << " ns (target "
       << fmt6(cr.ipi_target_ns) << ")\n";
    os << "io_out: base " << fmt6(cr.io_out_before_ns) << " ns, fitted gdm_user_hop_ns "
       << cr.fitted.gdm_user_hop_ns << ", verified " << fmt6(cr.io_out_after_ns) << " ns (target "
       << fmt6(cr.io_out_target_ns) << ")\n";
    std::cerr << os.str();
    write_file(o.out, "cost_model.json", cost_model_json(cr.fitted));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic two-gear hypervisor simulator"};
    app.require_subcommand(1);
    app.fallthrough(false);

    CommonOpts o;
    std::string micro_which, overhead_profile, jitter_profile = "xenomai";
    u64 jitter_seeds = 1;

    CLI::App* sim = app.add_subcommand("sim", "run a scenario");
    CLI::App* sim_run = sim->add_subcommand("run", "run a scenario and emit trace + summary");
    add_common(sim_run, o);
    sim->require_subcommand(1);

    CLI::App* bench = app.add_subcommand("bench", "micro-benchmarks and experiments");
    bench->require_subcommand(1);
    CLI::App* b_micro = bench->add_subcommand("micro", "transition micro-benchmarks");
    add_common(b_micro, o);
    b_micro->add_option("--name", micro_which, "hypercall|world_switch|vm_trap|ipi|io_out|all");
    CLI::App* b_over = bench->add_subcommand("overhead", "Gear2 overhead estimate vs measurement");
    add_common(b_over, o);
    b_over->add_option("--profile", overhead_profile, "io|cpu|all");
    CLI::App* b_jit = bench->add_subcommand("jitter", "cyclictest analog across configurations");
    add_common(b_jit, o);
    b_jit->add_option("--profile", jitter_profile, "xenomai|preempt_rt");
    b_jit->add_option("--seeds", jitter_seeds, "number of consecutive seeds to sweep");
    CLI::App* b_cal = bench->add_subcommand("calibrate", "fit composite-path cost knobs");
    add_common(b_cal, o);

    CLI::App* report = app.add_subcommand("report", "report emission");
    CLI::App* rep_emit = report->add_subcommand("emit", "run a scenario and emit its report");
    add_common(rep_emit, o);
    report->require_subcommand(1);

    CLI::App* trace = app.add_subcommand("trace", "trace inspection");
    CLI::App* tr_dump = trace->add_subcommand("dump", "dump the canonical trace");
    add_common(tr_dump, o);
    trace->require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() != 0) {
            std::cerr << app.help() << "\n";
            return 2; // unknown subcommand or flag
        }
        return app.exit(e); // --help and friends
    }

    try {
        if (sim_run->parsed())
            return cmd_sim_run(o);
        if (b_micro->parsed())
            return cmd_bench_micro(o, micro_which);
        if (b_over->parsed())
            return cmd_bench_overhead(o, overhead_profile);
        if (b_jit->parsed())
            return cmd_bench_jitter(o, jitter_profile, jitter_seeds);
        if (b_cal->parsed())
            return cmd_bench_calibrate(o);
        if (rep_emit->parsed())
            return cmd_report_emit(o);
        if (tr_dump->parsed())
            return cmd_trace_dump(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
