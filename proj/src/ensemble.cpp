#include "nmsse/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>

#include "nmsse/error.hpp"

namespace nmsse {

namespace {

constexpr double kScale = 1152921504606846976.0; // 2^60
constexpr double kLimit = 1e17;                  // keeps 2^60 * |v| well inside int128

BlochVector bloch_of_ket(const StateKet& psi)
{
    const cd rho_eg = psi(0) * std::conj(psi(1));
    return {2.0 * rho_eg.real(), -2.0 * rho_eg.imag(), std::norm(psi(0)) - std::norm(psi(1))};
}

bool same_grid(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.size() != b.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::abs(a[i] - b[i]) > 1e-12 * std::max(1.0, std::abs(a[i]))) {
            return false;
        }
    }
    return true;
}

} // namespace

void ExactSum::add(double v)
{
    if (!std::isfinite(v) || std::abs(v) > kLimit) {
        throw NumericError("ensemble accumulator: value out of range");
    }
    acc_ += static_cast<__int128>(std::nearbyint(v * kScale));
}

double ExactSum::value() const
{
    // Split to keep the conversion exact for large sums.
    const __int128 hi = acc_ >> 60;
    const __int128 lo = acc_ - (hi << 60);
    return static_cast<double>(hi) + static_cast<double>(lo) / kScale;
}

BlochSeries bloch_series(const ReducedSeries& r)
{
    BlochSeries out;
    out.t = r.t;
    for (const auto& rho : r.rho) {
        out.mean.push_back(bloch_from_density(rho));
        out.stderr_.push_back({});
    }
    return out;
}

EnsembleSums::EnsembleSums(int d, std::vector<double> times) : dim(d), t(std::move(times))
{
    rho.assign(t.size(), std::vector<ExactSum>(2 * static_cast<std::size_t>(d) * d));
    norm.assign(t.size(), std::vector<ExactSum>(2));
    if (d == 2) {
        bloch.assign(t.size(), std::vector<ExactSum>(9));
    }
}

void EnsembleSums::add_trajectory(const std::vector<StateKet>& records, double norm_drift)
{
    if (records.size() != t.size()) {
        throw InvalidArgument("add_trajectory: record count does not match the grid");
    }
    for (std::size_t r = 0; r < records.size(); ++r) {
        const StateKet& psi = records[r];
        auto& row = rho[r];
        for (int i = 0; i < dim; ++i) {
            for (int j = 0; j < dim; ++j) {
                const cd v = psi(i) * std::conj(psi(j));
                row[2 * (i * dim + j)].add(v.real());
                row[2 * (i * dim + j) + 1].add(v.imag());
            }
        }
        const double w = psi.squaredNorm();
        norm[r][0].add(w);
        norm[r][1].add(w * w);
        if (dim == 2) {
            const BlochVector b = bloch_of_ket(psi);
            auto& br = bloch[r];
            br[0].add(b.x);
            br[1].add(b.y);
            br[2].add(b.z);
            br[3].add(b.x * b.x);
            br[4].add(b.y * b.y);
            br[5].add(b.z * b.z);
            br[6].add(b.x * w);
            br[7].add(b.y * w);
            br[8].add(b.z * w);
        }
    }
    norm_drift_sum.add(norm_drift);
    max_norm_drift = std::max(max_norm_drift, norm_drift);
    ++n_completed;
}

void EnsembleSums::merge(const EnsembleSums& other)
{
    if (dim != other.dim || !same_grid(t, other.t)) {
        throw InvalidArgument("merge: ensembles have different grids or dimensions");
    }
    for (std::size_t r = 0; r < rho.size(); ++r) {
        for (std::size_t k = 0; k < rho[r].size(); ++k) {
            rho[r][k].merge(other.rho[r][k]);
        }
        norm[r][0].merge(other.norm[r][0]);
        norm[r][1].merge(other.norm[r][1]);
        if (dim == 2) {
            for (std::size_t k = 0; k < bloch[r].size(); ++k) {
                bloch[r][k].merge(other.bloch[r][k]);
            }
        }
    }
    n_completed += other.n_completed;
    n_failed += other.n_failed;
    norm_drift_sum.merge(other.norm_drift_sum);
    max_norm_drift = std::max(max_norm_drift, other.max_norm_drift);
    if (other.first_failure_time >= 0.0 &&
        (first_failure_time < 0.0 || other.first_failure_time < first_failure_time)) {
        first_failure_time = other.first_failure_time;
    }
}

bool EnsembleSums::operator==(const EnsembleSums& o) const
{
    return dim == o.dim && t == o.t && rho == o.rho && norm == o.norm && bloch == o.bloch &&
           n_completed == o.n_completed && n_failed == o.n_failed &&
           norm_drift_sum == o.norm_drift_sum && max_norm_drift == o.max_norm_drift;
}

EnsembleResult finalize(const EnsembleSums& sums)
{
    EnsembleResult out;
    out.t = sums.t;
    out.n_completed = sums.n_completed;
    out.n_failed = sums.n_failed;
    out.max_norm_drift = sums.max_norm_drift;
    out.sums = sums;
    const auto n = static_cast<double>(sums.n_completed);
    if (sums.n_completed == 0) {
        return out;
    }
    out.mean_norm_drift = sums.norm_drift_sum.value() / n;
    const int d = sums.dim;
    for (std::size_t r = 0; r < sums.t.size(); ++r) {
        const double sum_w = sums.norm[r][0].value();
        const double sum_w2 = sums.norm[r][1].value();
        if (!(sum_w > 0.0)) {
            throw NumericError("ensemble: vanishing mean norm");
        }
        out.mean_norm.push_back(sum_w / n);
        DensityMatrix rho(d, d);
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                rho(i, j) = cd{sums.rho[r][2 * (i * d + j)].value(),
                               sums.rho[r][2 * (i * d + j) + 1].value()} / sum_w;
            }
        }
        out.rho_mean.push_back(rho);
        if (d == 2) {
            const auto& b = sums.bloch[r];
            double mean[3];
            double err[3];
            for (int c = 0; c < 3; ++c) {
                // Ratio estimator sum(b)/sum(w) with the delta-method variance
                // of b - mean * w; reduces to the sample variance when w = 1.
                mean[c] = b[c].value() / sum_w;
                if (sums.n_completed > 1) {
                    const double ss = b[c + 3].value() - 2.0 * mean[c] * b[c + 6].value() +
                                      mean[c] * mean[c] * sum_w2;
                    const double wbar = sum_w / n;
                    const double var = std::max(0.0, ss / (n - 1.0)) / (wbar * wbar);
                    err[c] = std::sqrt(var / n);
                } else {
                    err[c] = 0.0;
                }
            }
            out.bloch.t.push_back(sums.t[r]);
            out.bloch.mean.push_back({mean[0], mean[1], mean[2]});
            out.bloch.stderr_.push_back({err[0], err[1], err[2]});
        }
    }
    return out;
}

int resolve_workers(int requested)
{
    if (requested > 0) {
        return requested;
    }
    if (const char* env = std::getenv("NMSSE_WORKERS")) {
        const int v = std::atoi(env);
        if (v > 0) {
            return v;
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

EnsembleResult run_ensemble(const TrajectoryPlan& plan, const StateKet& initial,
                            const EnsembleConfig& config)
{
    if (config.ntraj < 1) {
        throw InvalidArgument("run_ensemble: ntraj must be >= 1");
    }
    const int d = plan.model().dim();
    const auto& times = plan.times();
    const int workers =
        static_cast<int>(std::min<std::int64_t>(resolve_workers(config.workers), config.ntraj));

    std::atomic<std::int64_t> next{0};
    std::vector<EnsembleSums> partial(workers, EnsembleSums(d, times));
    std::vector<std::exception_ptr> errors(workers);

    auto work = [&](int w) {
        try {
            std::vector<StateKet> buffer(times.size(), StateKet::Zero(d));
            EnsembleSums& sums = partial[w];
            for (;;) {
                const std::int64_t i = next.fetch_add(1);
                if (i >= config.ntraj) {
                    break;
                }
                const RngStreamSpec rng{config.seed, config.first_index + static_cast<std::uint64_t>(i)};
                try {
                    const TrajectoryStats stats = simulate(
                        plan, rng, initial,
                        [&](int idx, double, const StateKet& psi) { buffer[idx] = psi; });
                    sums.add_trajectory(buffer, stats.max_norm_drift);
                } catch (const TrajectoryFailure& f) {
                    ++sums.n_failed;
                    if (sums.first_failure_time < 0.0 || f.time() < sums.first_failure_time) {
                        sums.first_failure_time = f.time();
                    }
                }
            }
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };

    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back(work, w);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    EnsembleSums total(d, times);
    for (const auto& p : partial) {
        total.merge(p);
    }
    const double budget = config.failure_budget * static_cast<double>(config.ntraj);
    if (static_cast<double>(total.n_failed) > budget) {
        throw EnsembleFailure("ensemble failure: " + std::to_string(total.n_failed) + " of " +
                              std::to_string(config.ntraj) +
                              " trajectories failed (first at t = " +
                              std::to_string(total.first_failure_time) + ")");
    }
    return finalize(total);
}

EnsembleResult merge(const EnsembleResult& a, const EnsembleResult& b)
{
    EnsembleSums s = a.sums;
    s.merge(b.sums);
    return finalize(s);
}

ComparisonMetrics compare(const BlochSeries& a, const BlochSeries& b)
{
    if (!same_grid(a.t, b.t) || a.mean.size() != a.t.size() || b.mean.size() != b.t.size()) {
        throw InvalidArgument("compare: series are on different time grids");
    }
    ComparisonMetrics m;
    m.t = a.t;
    std::vector<double> l1;
    for (std::size_t i = 0; i < a.t.size(); ++i) {
        const BlochVector d{a.mean[i].x - b.mean[i].x, a.mean[i].y - b.mean[i].y,
                            a.mean[i].z - b.mean[i].z};
        m.diff.push_back(d);
        l1.push_back(std::abs(d.x) + std::abs(d.y) + std::abs(d.z));
        m.sup_norm = std::max({m.sup_norm, std::abs(d.x), std::abs(d.y), std::abs(d.z)});
    }
    if (l1.size() == 1) {
        m.time_averaged_l1 = l1.front();
    } else if (l1.size() > 1) {
        double integral = 0.0;
        for (std::size_t i = 1; i < l1.size(); ++i) {
            integral += 0.5 * (l1[i] + l1[i - 1]) * (a.t[i] - a.t[i - 1]);
        }
        m.time_averaged_l1 = integral / (a.t.back() - a.t.front());
    }
    return m;
}

} // namespace nmsse
