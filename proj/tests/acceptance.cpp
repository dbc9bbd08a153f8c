// acceptance - end-to-end checks of the simulator against exact references,
// one status line per criterion

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "nmsse/enlarged.hpp"
#include "nmsse/ensemble.hpp"
#include "nmsse/error.hpp"
#include "nmsse/functionals.hpp"
#include "nmsse/noise.hpp"
#include "nmsse/sse.hpp"
#include "tla_expansions.hpp"

using namespace nmsse;

namespace {

enum class Status { pass, fail, known_fail };

struct Outcome {
    Status status;
    std::string detail;
};

struct Options {
    std::int64_t ntraj{10000};
    std::int64_t noise_paths{100000};
    std::uint64_t seed{2024};
};

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

StepperConfig grid(double dt, double t_final, int stride, Scheme scheme = Scheme::heun,
                   int substeps = 1)
{
    StepperConfig s;
    s.dt = dt;
    s.t_final = t_final;
    s.record_stride = stride;
    s.scheme = scheme;
    s.noise_substeps = substeps;
    return s;
}

const StateKet kExcited = tla::excited();

// gamma = kappa = 1, undriven: excited amplitude and the pole of -c'/c.
double undriven_c(double t)
{
    const double w = std::sqrt(3.0) / 4.0;
    return std::exp(-0.25 * t) * (std::cos(w * t) + std::sin(w * t) / (4.0 * w));
}
const double kPole = 8.0 * std::numbers::pi / (3.0 * std::sqrt(3.0));

EnsembleResult ensemble(const SystemModel& m, const MemoryKernel& k, ProviderSpec p, Variant v,
                        const StepperConfig& s, std::uint64_t seed, std::int64_t n,
                        double budget = 1e-3)
{
    const auto t0 = std::chrono::steady_clock::now();
    const TrajectoryPlan plan(m, k, p, v, s);
    EnsembleConfig cfg;
    cfg.ntraj = n;
    cfg.seed = seed;
    cfg.failure_budget = budget;
    EnsembleResult r = run_ensemble(plan, kExcited, cfg);
    std::fprintf(stderr, "  ensemble %s/%s order %d %s: %lld ok, %lld failed, %.1f s\n",
                 std::string(to_string(p.method)).c_str(),
                 std::string(to_string(p.unravelling)).c_str(), p.order,
                 std::string(to_string(v)).c_str(), static_cast<long long>(r.n_completed),
                 static_cast<long long>(r.n_failed), seconds_since(t0));
    return r;
}

// Driven setting (delta 3, chi 5, gamma = kappa = 1) shared by several criteria.
struct Reference {
    SystemModel model = SystemModel::driven_tla(3.0, 5.0);
    MemoryKernel kernel = MemoryKernel::lorentzian(1.0, 1.0);
    StepperConfig stepper = grid(1e-3, 10.0, 10);
    BlochSeries enlarged;
};

const ProviderSpec coh(int order) { return {FunctionalMethod::perturbative, Unravelling::coherent, order}; }
const ProviderSpec quad(int order) { return {FunctionalMethod::perturbative, Unravelling::quadrature, order}; }
const ProviderSpec ydgs(Unravelling u) { return {FunctionalMethod::ydgs, u, 1}; }

Outcome undriven_exactness(const Options& o)
{
    const SystemModel m = SystemModel::driven_tla(0.0, 0.0);
    const MemoryKernel k = MemoryKernel::lorentzian(1.0, 1.0);
    auto oracle_z = [](double t) { return 2.0 * undriven_c(t) * undriven_c(t) - 1.0; };

    const auto t0 = std::chrono::steady_clock::now();
    const ReducedSeries enl = evolve_enlarged(EnlargedSpace(m, k, 20), kExcited, grid(1e-3, 10.0, 10));
    const double enl_time = seconds_since(t0);
    double enl_sup = 0.0;
    for (std::size_t i = 0; i < enl.t.size(); ++i) {
        enl_sup = std::max(enl_sup, std::abs(bloch_from_density(enl.rho[i]).z - oracle_z(enl.t[i])));
    }
    const bool enl_ok = enl_sup <= 1e-6 && enl_time < 5.0;

    // Ensemble on the window before the pole of the exact functional.
    const double window = 4.5;
    const EnsembleResult r =
        ensemble(m, k, coh(1), Variant::nonlinear, grid(1e-3, window, 10), o.seed, o.ntraj);
    double worst = 0.0;
    bool sse_ok = r.n_failed == 0;
    for (std::size_t i = 0; i < r.t.size(); ++i) {
        const double dev = std::abs(r.bloch.mean[i].z - oracle_z(r.t[i]));
        const double se = r.bloch.stderr_[i].z;
        if (dev > 3.0 * se + 1e-12) sse_ok = false;
        if (se > 0.0) worst = std::max(worst, dev / se);
    }

    // Full window: count trajectories that survive past the pole.
    const std::int64_t probe = 200;
    const EnsembleResult full = ensemble(m, k, coh(1), Variant::nonlinear, grid(1e-3, 10.0, 100),
                                         o.seed, probe, 1.0);
    const double first_fail = full.sums.first_failure_time;

    std::string detail = "enlarged sup " + fmt("%.2e", enl_sup) + " in " + fmt("%.1f s", enl_time) +
                         "; SSE within 3 se on [0, 4.5], worst " + fmt("%.2f se", worst) +
                         "; full [0, 10] window: " + std::to_string(full.n_failed) + "/" +
                         std::to_string(probe) + " trajectories diverge";
    if (full.n_failed > 0) {
        detail += " (first at t = " + fmt("%.3f", first_fail) + ", pole of the exact functional at " +
                  fmt("%.3f", kPole) + ")";
    }
    if (!enl_ok || !sse_ok) return {Status::fail, detail};
    if (full.n_failed > 0) return {Status::known_fail, detail};
    return {Status::pass, detail};
}

Outcome markov_limit(const Options& o)
{
    const SystemModel m = SystemModel::driven_tla(3.0, 5.0);
    const MemoryKernel k = MemoryKernel::lorentzian(1.0, 100.0);
    const StepperConfig s = grid(1e-3, 10.0, 10);
    const BlochSeries enl = bloch_series(evolve_enlarged(EnlargedSpace(m, k, 20), kExcited, s));
    const BlochSeries mk = bloch_series(lindblad_reference_markov(m, k.markov_rate(), kExcited, s));
    const double sup = compare(enl, mk).sup_norm;

    const EnsembleResult r = ensemble(m, k, coh(0), Variant::nonlinear, s, o.seed + 1, o.ntraj);
    double excess = -1.0;
    for (std::size_t i = 0; i < r.t.size(); ++i) {
        const BlochVector& a = r.bloch.mean[i];
        const BlochVector& e = r.bloch.stderr_[i];
        const BlochVector& b = mk.mean[i];
        excess = std::max({excess, std::abs(a.x - b.x) - 3.0 * e.x, std::abs(a.y - b.y) - 3.0 * e.y,
                           std::abs(a.z - b.z) - 3.0 * e.z});
    }
    const bool ok = sup <= 0.05 && excess <= 0.05;
    return {ok ? Status::pass : Status::fail,
            "enlarged vs Lindblad sup " + fmt("%.4f", sup) + " (<= 0.05); order-0 SSE max |d| - 3 se = " +
                fmt("%.4f", excess) + " (<= 0.05)"};
}

struct DrivenRuns {
    double coh0, coh1, coh2, coh_ydgs, quad0, quad1, quad_ydgs;
    EnsembleResult coherent_order1, coherent_order2;
};

DrivenRuns driven_runs(const Options& o, const Reference& ref)
{
    DrivenRuns f{};
    auto l1 = [&](ProviderSpec p, std::uint64_t seed, EnsembleResult* keep = nullptr) {
        EnsembleResult r = ensemble(ref.model, ref.kernel, p, Variant::nonlinear, ref.stepper, seed, o.ntraj);
        const double v = compare(r.bloch, ref.enlarged).time_averaged_l1;
        if (keep) *keep = std::move(r);
        return v;
    };
    f.coh0 = l1(coh(0), o.seed + 10);
    f.coh1 = l1(coh(1), o.seed + 11, &f.coherent_order1);
    f.coh2 = l1(coh(2), o.seed + 12, &f.coherent_order2);
    f.coh_ydgs = l1(ydgs(Unravelling::coherent), o.seed + 13);
    f.quad0 = l1(quad(0), o.seed + 14);
    f.quad1 = l1(quad(1), o.seed + 15);
    f.quad_ydgs = l1(ydgs(Unravelling::quadrature), o.seed + 16);
    return f;
}

Outcome order_improvement(const DrivenRuns& f)
{
    const bool ok = f.coh1 < f.coh0 && f.quad1 < f.quad0 && f.coh2 <= 2.0 * f.coh1;
    return {ok ? Status::pass : Status::fail,
            "time-averaged L1 coherent o0 " + fmt("%.4f", f.coh0) + " > o1 " + fmt("%.4f", f.coh1) +
                ", o2 " + fmt("%.4f", f.coh2) + " <= 2 x o1; quadrature o0 " + fmt("%.4f", f.quad0) +
                " > o1 " + fmt("%.4f", f.quad1)};
}

Outcome post_markovian(const DrivenRuns& f)
{
    const bool ok = f.coh_ydgs > f.coh1 && f.quad_ydgs > f.quad1;
    return {ok ? Status::pass : Status::fail,
            "time-averaged L1 coherent post-Markovian " + fmt("%.4f", f.coh_ydgs) + " > order 1 " +
                fmt("%.4f", f.coh1) + "; quadrature " + fmt("%.4f", f.quad_ydgs) + " > " +
                fmt("%.4f", f.quad1)};
}

Outcome noise_statistics(const Options& o)
{
    const MemoryKernel k = MemoryKernel::lorentzian(1.0, 1.0);
    const std::vector<std::pair<double, double>> pairs{
        {0.0, 0.0}, {0.5, 0.0}, {1.0, 0.0}, {2.0, 1.0}, {3.0, 1.0}};
    const NoiseCheck c = noise_check(k, Unravelling::coherent, o.seed + 2, o.noise_paths, 0.01, pairs);
    const NoiseCheck q = noise_check(k, Unravelling::quadrature, o.seed + 3, o.noise_paths, 0.01, pairs);
    double worst = 0.0, worst_plain = 0.0;
    auto ratio = [](double d, double se) { return se > 0.0 ? std::abs(d) / se : (d == 0.0 ? 0.0 : 1e9); };
    for (const NoiseCheck* nc : {&c, &q}) {
        for (const auto& e : nc->conjugate) {
            worst = std::max({worst, ratio(e.mean.real() - e.target.real(), e.standard_error.real()),
                              ratio(e.mean.imag() - e.target.imag(), e.standard_error.imag())});
        }
    }
    for (const auto& e : c.plain) {
        worst_plain = std::max({worst_plain, ratio(e.mean.real(), e.standard_error.real()),
                                ratio(e.mean.imag(), e.standard_error.imag())});
    }
    const double var_dev = std::abs(c.variance - 0.25) / c.variance_error;
    const double qvar_dev = std::abs(q.variance - 0.25) / q.variance_error;
    const bool ok = worst <= 3.0 && worst_plain <= 3.0 && q.max_abs_imag == 0.0 && var_dev <= 3.0 &&
                    qvar_dev <= 3.0;
    return {ok ? Status::pass : Status::fail,
            std::to_string(o.noise_paths) + " paths: E[z z*] worst " + fmt("%.2f se", worst) +
                ", coherent E[z z] worst " + fmt("%.2f se", worst_plain) + ", quadrature max |Im z| " +
                fmt("%.1g", q.max_abs_imag) + ", variance " + fmt("%.5f", c.variance) + " (" +
                fmt("%.2f se", var_dev) + " from 0.25)"};
}

struct Equivalence {
    double diff[3]{};
    double se[3]{};
    double max_norm_dev{0.0};
    bool ok() const { return diff[0] <= 3.0 * se[0] && diff[1] <= 3.0 * se[1] && diff[2] <= 3.0 * se[2]; }
    std::string describe() const
    {
        std::string d;
        const char* names[3] = {"x ", ", y ", ", z "};
        for (int c = 0; c < 3; ++c) d += names[c] + fmt("%.4f", diff[c]) + "/" + fmt("%.4f", se[c]);
        return d + ", max |E<psi|psi> - 1| " + fmt("%.2f", max_norm_dev);
    }
};

// Time averages of |linear - nonlinear| and of the combined stderr.
Equivalence equivalence(const EnsembleResult& lin, const EnsembleResult& nl)
{
    Equivalence e;
    const auto& t = lin.t;
    for (double n : lin.mean_norm) e.max_norm_dev = std::max(e.max_norm_dev, std::abs(n - 1.0));
    const double span = t.back() - t.front();
    for (std::size_t i = 1; i < t.size(); ++i) {
        const double h = 0.5 * (t[i] - t[i - 1]) / span;
        for (std::size_t j : {i - 1, i}) {
            const BlochVector& a = lin.bloch.mean[j];
            const BlochVector& b = nl.bloch.mean[j];
            const BlochVector& ea = lin.bloch.stderr_[j];
            const BlochVector& eb = nl.bloch.stderr_[j];
            e.diff[0] += h * std::abs(a.x - b.x);
            e.diff[1] += h * std::abs(a.y - b.y);
            e.diff[2] += h * std::abs(a.z - b.z);
            e.se[0] += h * std::hypot(ea.x, eb.x);
            e.se[1] += h * std::hypot(ea.y, eb.y);
            e.se[2] += h * std::hypot(ea.z, eb.z);
        }
    }
    return e;
}

// The ratio estimator is exact only for the exact functional; the default
// order-1 truncation leaves the linear norm far from a martingale, so the
// order-2 pair is reported alongside.
Outcome estimator_equivalence(const Options& o, const Reference& ref, const DrivenRuns& f)
{
    auto linear = [&](int order, std::uint64_t seed) {
        return ensemble(ref.model, ref.kernel, coh(order), Variant::linear, ref.stepper, seed, o.ntraj);
    };
    const Equivalence e1 = equivalence(linear(1, o.seed + 20), f.coherent_order1);
    const Equivalence e2 = equivalence(linear(2, o.seed + 21), f.coherent_order2);
    const std::string detail = "time-averaged |d| / combined se, coherent order 1: " + e1.describe() +
                               "; order 2: " + e2.describe();
    if (e1.ok() && e2.ok()) return {Status::pass, detail};
    if (e2.ok()) return {Status::known_fail, detail + "; order-1 gap is truncation bias"};
    return {Status::fail, detail};
}

Outcome symbolic_oracle()
{
    using namespace tla_oracle;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n;
    std::uniform_real_distribution<double> u(0.0, 5.0);
    auto coeffs = [&] {
        Coeffs c;
        for (auto& x : c) x = {n(rng), n(rng)};
        return c;
    };
    auto dist = [](const Operator& a, const Operator& b) { return (a - b).cwiseAbs().maxCoeff(); };
    double worst = 0.0;
    const MemoryKernel k = MemoryKernel::lorentzian(1.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const double delta = u(rng) - 2.5, chi = u(rng), t = u(rng);
        const SystemModel m = SystemModel::driven_tla(delta, chi);
        const cd z{n(rng), n(rng)};
        const double zr = n(rng);
        const Coeffs a = coeffs(), b = coeffs();
        const cd i0 = cumulative_integral(k, t)[0];

        HierarchyState s1 = make_hierarchy(m, k, Unravelling::coherent, 1);
        s1.ops[0] = from_coeffs(a);
        const auto d1 = hierarchy_rhs_coherent(s1, m, k, z, t);
        worst = std::max(worst, dist(d1[0], from_coeffs(ftla(a, sigma_commutator(a, i0), 0.25, 1.0, delta, chi, z))));

        HierarchyState s2 = make_hierarchy(m, k, Unravelling::coherent, 2);
        s2.ops[0] = from_coeffs(a);
        s2.ops[1] = from_coeffs(b);
        const auto d2 = hierarchy_rhs_coherent(s2, m, k, z, t);
        worst = std::max(worst, dist(d2[0], from_coeffs(ftla(a, b, 0.25, 1.0, delta, chi, z))));
        worst = std::max(worst, dist(d2[1], from_coeffs(f1tla(a, b, sigma_commutator(b, i0), 0.25,
                                                              1.0, delta, chi, z))));

        HierarchyState sq = make_hierarchy(m, k, Unravelling::quadrature, 1);
        sq.ops[0] = from_coeffs(a);
        const auto dq = hierarchy_rhs_quadrature(sq, m, k, zr, t);
        worst = std::max(worst, dist(dq[0], from_coeffs(qtla(a, sigma_commutator(a, i0.real()), 0.25,
                                                             1.0, delta, chi, zr))));
    }
    return {worst <= 1e-12 ? Status::pass : Status::fail,
            "coherent order 1/2 and quadrature order 1 on 100 random states, max deviation " +
                fmt("%.1e", worst)};
}

Outcome structural_counts()
{
    const SystemModel m = SystemModel::driven_tla(3.0, 5.0);
    bool ok = true;
    std::string detail = "d = 2:";
    for (int J = 1; J <= 3; ++J) {
        std::vector<KernelComponent> comps;
        for (int j = 0; j < J; ++j) comps.push_back({0.1, 1.0 + j, 0.0});
        const MemoryKernel k(comps);
        for (int order = 1; order <= 2; ++order) {
            std::int64_t geometric = 0, p = 1;
            for (int i = 0; i < order; ++i) {
                p *= J;
                geometric += p;
            }
            const std::int64_t expected = 4 * geometric + 2 + J;
            const TrajectoryPlan plan(m, k, coh(order), Variant::nonlinear, grid(1e-3, 0.0, 1));
            const std::int64_t evolved = make_hierarchy(m, k, Unravelling::coherent, order).complex_entries() + 2 + J;
            ok = ok && plan.equation_count() == expected && evolved == expected &&
                 coherent_equation_count(2, J, order) == expected;
            detail += " (J=" + std::to_string(J) + ",n=" + std::to_string(order) + ")=" +
                      std::to_string(plan.equation_count());
        }
    }
    return {ok ? Status::pass : Status::fail, detail};
}

Outcome self_convergence(const Reference& ref, const Options& o)
{
    const EnlargedSpace s20(ref.model, ref.kernel, 20);
    const BlochSeries half = bloch_series(evolve_enlarged(s20, kExcited, grid(5e-4, 10.0, 20)));
    const double dt_sup = compare(ref.enlarged, half).sup_norm;
    const BlochSeries n30 = bloch_series(evolve_enlarged(EnlargedSpace(ref.model, ref.kernel, 30), kExcited, ref.stepper));
    const double nmax_sup = compare(ref.enlarged, n30).sup_norm;

    double traj_sup = 0.0;
    for (std::uint64_t idx = 0; idx < 20; ++idx) {
        const RngStreamSpec rng{o.seed + 30, idx};
        const TrajectoryResult a = run_trajectory(ref.model, ref.kernel, coh(1), Variant::nonlinear,
                                                  grid(1e-3, 10.0, 10, Scheme::heun, 2), rng, kExcited);
        const TrajectoryResult b = run_trajectory(ref.model, ref.kernel, coh(1), Variant::nonlinear,
                                                  grid(5e-4, 10.0, 20), rng, kExcited);
        for (std::size_t i = 0; i < a.t.size(); ++i) {
            const BlochVector x = bloch_from_density(a.rho[i]);
            const BlochVector y = bloch_from_density(b.rho[i]);
            traj_sup = std::max({traj_sup, std::abs(x.x - y.x), std::abs(x.y - y.y), std::abs(x.z - y.z)});
        }
    }
    const bool ok = dt_sup <= 1e-6 && traj_sup <= 1e-4 && nmax_sup <= 1e-8;
    return {ok ? Status::pass : Status::fail,
            "enlarged dt halving " + fmt("%.1e", dt_sup) + " (<= 1e-6), 20 fixed-seed trajectories " +
                fmt("%.1e", traj_sup) + " (<= 1e-4), nmax 20 -> 30 " + fmt("%.1e", nmax_sup) +
                " (<= 1e-8)"};
}

const char* label(Status s)
{
    switch (s) {
    case Status::pass:
        return "PASS";
    case Status::known_fail:
        return "KNOWN-FAIL";
    case Status::fail:
        break;
    }
    return "FAIL";
}

} // namespace

int main(int argc, char** argv)
{
    Options o;
    CLI::App app{"Acceptance checks"};
    app.add_option("--ntraj", o.ntraj, "trajectories per ensemble")->check(CLI::PositiveNumber);
    app.add_option("--noise-paths", o.noise_paths, "paths for the noise statistics")->check(CLI::Range(2, 100000000));
    app.add_option("--seed", o.seed, "master seed");
    CLI11_PARSE(app, argc, argv);

    const auto start = std::chrono::steady_clock::now();
    Reference ref;
    ref.enlarged = bloch_series(evolve_enlarged(EnlargedSpace(ref.model, ref.kernel, 20), kExcited, ref.stepper));

    struct Named {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    DrivenRuns driven{};
    bool have_driven = false;
    auto need_driven = [&]() -> const DrivenRuns& {
        if (!have_driven) {
            driven = driven_runs(o, ref);
            have_driven = true;
        }
        return driven;
    };
    const std::vector<Named> criteria{
        {1, "undriven exactness", [&] { return undriven_exactness(o); }},
        {2, "Markov limit", [&] { return markov_limit(o); }},
        {3, "order improvement", [&] { return order_improvement(need_driven()); }},
        {4, "post-Markovian comparison", [&] { return post_markovian(need_driven()); }},
        {5, "noise statistics", [&] { return noise_statistics(o); }},
        {6, "estimator equivalence", [&] { return estimator_equivalence(o, ref, need_driven()); }},
        {7, "symbolic oracle", [] { return symbolic_oracle(); }},
        {8, "structural counts", [] { return structural_counts(); }},
        {9, "self-convergence", [&] { return self_convergence(ref, o); }},
    };

    int failures = 0, known = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {Status::fail, std::string("exception: ") + e.what()};
        }
        if (out.status == Status::fail) ++failures;
        if (out.status == Status::known_fail) ++known;
        std::printf("[%d] %-10s %s (%.0f s): %s\n", c.id, label(out.status), c.name,
                    seconds_since(t0), out.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d passed, %d failed, %d known failures, N = %lld, %.0f s\n",
                static_cast<int>(criteria.size()) - failures - known, failures, known,
                static_cast<long long>(o.ntraj), seconds_since(start));
    return failures == 0 ? 0 : 1;
}
