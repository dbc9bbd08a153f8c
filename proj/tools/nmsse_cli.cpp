// nmsse - command-line driver for the non-Markovian SSE simulator

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"

#include "nmsse/config.hpp"
#include "nmsse/enlarged.hpp"
#include "nmsse/ensemble.hpp"
#include "nmsse/error.hpp"
#include "nmsse/noise.hpp"
#include "nmsse/sse.hpp"

namespace {

using namespace nmsse;

enum ExitCode { kOk = 0, kConfig = 2, kNumeric = 3, kIo = 4 };

struct ConfigOptions {
    std::string file;
    std::map<std::string, std::string> values;
};

void add_config_options(CLI::App* cmd, ConfigOptions& opts)
{
    cmd->add_option("-c,--config", opts.file, "flat key = value configuration file");
    for (const auto& key : config_keys()) {
        cmd->add_option_function<std::string>(
            "--" + key, [&opts, key](const std::string& v) { opts.values[key] = v; },
            "override '" + key + "'");
    }
}

RunConfig load(const ConfigOptions& opts)
{
    ConfigOverrides overrides(opts.values.begin(), opts.values.end());
    return parse_config(opts.file, overrides);
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void run_sse(const RunConfig& cfg)
{
    const auto start = std::chrono::steady_clock::now();
    const TrajectoryPlan plan(cfg.model(), cfg.memory_kernel(), cfg.provider(), cfg.variant,
                              cfg.stepper());
    EnsembleConfig ens;
    ens.ntraj = cfg.ntraj;
    ens.seed = cfg.seed;
    const EnsembleResult result = run_ensemble(plan, cfg.initial_ket(), ens);
    emit_csv(result.bloch, cfg.output);
    std::fprintf(stderr,
                 "%s %s order=%d variant=%s: %lld completed, %lld failed, max norm drift %.3e, "
                 "%.2f s\n",
                 std::string(to_string(cfg.method)).c_str(),
                 std::string(to_string(cfg.unravelling)).c_str(), cfg.order,
                 std::string(to_string(cfg.variant)).c_str(),
                 static_cast<long long>(result.n_completed),
                 static_cast<long long>(result.n_failed), result.max_norm_drift,
                 seconds_since(start));
}

void run_enlarged(const RunConfig& cfg)
{
    const auto start = std::chrono::steady_clock::now();
    const EnlargedSpace space(cfg.model(), cfg.memory_kernel(), cfg.nmax);
    const ReducedSeries r = evolve_enlarged(space, cfg.initial_ket(), cfg.reference_stepper());
    emit_csv(bloch_series(r), cfg.output);
    std::fprintf(stderr, "enlarged D=%d: top Fock population %.3e, trace error %.3e, %.2f s\n",
                 space.dim(), r.diagnostics.max_top_population, r.diagnostics.max_trace_error,
                 seconds_since(start));
}

void run_markov(const RunConfig& cfg)
{
    const MemoryKernel kernel = cfg.memory_kernel();
    const ReducedSeries r = lindblad_reference_markov(cfg.model(), kernel.markov_rate(),
                                                      cfg.initial_ket(), cfg.reference_stepper());
    emit_csv(bloch_series(r), cfg.output);
    std::fprintf(stderr, "lindblad gamma=%.6g\n", kernel.markov_rate());
}

void run_compare(const std::string& a, const std::string& b, const std::string& output)
{
    const ComparisonMetrics m = compare(read_bloch_csv(a), read_bloch_csv(b));
    emit_comparison_csv(m, output);
    std::fprintf(stderr, "time-averaged L1 %.6e, sup-norm %.6e\n", m.time_averaged_l1,
                 m.sup_norm);
}

void run_noise_check(const RunConfig& cfg)
{
    const MemoryKernel kernel = cfg.memory_kernel();
    const std::vector<std::pair<double, double>> pairs{
        {0.0, 0.0}, {0.5, 0.0}, {1.0, 0.0}, {2.0, 1.0}, {3.0, 1.0}};
    const double dt = 0.01;
    const NoiseCheck nc = noise_check(kernel, cfg.unravelling, cfg.seed, cfg.ntraj, dt, pairs);
    std::string out = "t,s,re,im,se_re,se_im,target_re,target_im,plain_re,plain_im\n";
    char buf[512];
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto& c = nc.conjugate[k];
        const auto& p = nc.plain[k];
        std::snprintf(buf, sizeof buf, "%.11e,%.11e,%.11e,%.11e,%.11e,%.11e,%.11e,%.11e,%.11e,%.11e\n",
                      c.t, c.s, c.mean.real(), c.mean.imag(), c.standard_error.real(),
                      c.standard_error.imag(), c.target.real(), c.target.imag(), p.mean.real(),
                      p.mean.imag());
        out += buf;
    }
    if (cfg.output == "-") {
        std::cout << out;
    } else {
        std::FILE* f = std::fopen(cfg.output.c_str(), "wb");
        if (!f || std::fwrite(out.data(), 1, out.size(), f) != out.size()) {
            if (f) std::fclose(f);
            throw IoError("cannot write '" + cfg.output + "'");
        }
        std::fclose(f);
    }
    std::fprintf(stderr, "E|z(0)|^2 = %.6f +- %.6f (target %.6f), max |Im z| = %.3e\n",
                 nc.variance, nc.variance_error, nc.variance_target, nc.max_abs_imag);
}

void run_markov_check(const RunConfig& cfg)
{
    const MemoryKernel kernel = cfg.memory_kernel();
    const EnlargedSpace space(cfg.model(), kernel, cfg.nmax);
    const StepperConfig ref = cfg.reference_stepper();
    const BlochSeries enlarged = bloch_series(evolve_enlarged(space, cfg.initial_ket(), ref));
    const BlochSeries lindblad = bloch_series(
        lindblad_reference_markov(cfg.model(), kernel.markov_rate(), cfg.initial_ket(), ref));
    const ComparisonMetrics m = compare(enlarged, lindblad);
    emit_comparison_csv(m, cfg.output);
    std::fprintf(stderr, "enlarged vs lindblad (gamma=%.6g): sup-norm %.6e, time-averaged L1 %.6e\n",
                 kernel.markov_rate(), m.sup_norm, m.time_averaged_l1);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Non-Markovian stochastic Schrodinger equation simulator"};
    app.require_subcommand(1);

    ConfigOptions sse_opts, enl_opts, mk_opts, pm_opts, noise_opts, mc_opts;
    auto* sse = app.add_subcommand("run-sse", "trajectory ensemble (perturbative hierarchy)");
    add_config_options(sse, sse_opts);
    auto* enl = app.add_subcommand("run-enlarged", "exact enlarged-system reference");
    add_config_options(enl, enl_opts);
    auto* mk = app.add_subcommand("run-markov", "Lindblad reference with the Markov-limit rate");
    add_config_options(mk, mk_opts);
    auto* pm = app.add_subcommand("run-postmarkovian", "trajectory ensemble (post-Markovian drift)");
    add_config_options(pm, pm_opts);
    auto* noise = app.add_subcommand("noise-check", "ostensible noise correlation statistics");
    add_config_options(noise, noise_opts);
    auto* mc = app.add_subcommand("markov-check", "enlarged solution vs Lindblad reference");
    add_config_options(mc, mc_opts);

    std::string cmp_a, cmp_b, cmp_out = "-";
    auto* cmp = app.add_subcommand("compare", "difference of two Bloch CSV files (a - b)");
    cmp->add_option("a", cmp_a, "first CSV")->required();
    cmp->add_option("b", cmp_b, "second CSV")->required();
    cmp->add_option("-o,--output", cmp_out, "output CSV ('-' for stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*sse) {
            run_sse(load(sse_opts));
        } else if (*enl) {
            run_enlarged(load(enl_opts));
        } else if (*mk) {
            run_markov(load(mk_opts));
        } else if (*pm) {
            RunConfig cfg = load(pm_opts);
            cfg.method = FunctionalMethod::ydgs;
            run_sse(cfg);
        } else if (*noise) {
            run_noise_check(load(noise_opts));
        } else if (*mc) {
            run_markov_check(load(mc_opts));
        } else if (*cmp) {
            run_compare(cmp_a, cmp_b, cmp_out);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const InvalidArgument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kConfig;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return kIo;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const CapacityError& e) {
        std::cerr << "capacity error: " << e.what() << '\n';
        return kConfig;
    } catch (const DegenerateState& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    }
    return kOk;
}
