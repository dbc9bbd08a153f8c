// ensemble.hpp - Trajectory ensembles, Bloch statistics and comparison metrics

#pragma once

#include <cstdint>
#include <vector>

#include "nmsse/enlarged.hpp"
#include "nmsse/quantum.hpp"
#include "nmsse/sse.hpp"

namespace nmsse {

// Fixed-point sum (2^-60 resolution) so that partial sums merge exactly and
// the result does not depend on how trajectories were split across workers.
class ExactSum {
public:
    void add(double v);
    void merge(const ExactSum& other) { acc_ += other.acc_; }
    double value() const;
    bool operator==(const ExactSum& o) const { return acc_ == o.acc_; }

private:
    __int128 acc_{0};
};

struct BlochSeries {
    std::vector<double> t;
    std::vector<BlochVector> mean;
    std::vector<BlochVector> stderr_; // zero for deterministic references
};

BlochSeries bloch_series(const ReducedSeries& r);

// Raw sums per record: Re/Im of every density-matrix entry, the squared
// norm w = <psi|psi> and, for d = 2, the Bloch components with the second
// moments needed for standard errors.
struct EnsembleSums {
    int dim{0};
    std::vector<double> t;
    std::vector<std::vector<ExactSum>> rho;   // [record][2*(i*d+j) + {0,1}]
    std::vector<std::vector<ExactSum>> norm;  // [record][w, w^2]
    std::vector<std::vector<ExactSum>> bloch; // [record][x, y, z, x^2, y^2, z^2, xw, yw, zw]
    std::int64_t n_completed{0};
    std::int64_t n_failed{0};
    ExactSum norm_drift_sum;
    double max_norm_drift{0.0};
    double first_failure_time{-1.0};

    EnsembleSums() = default;
    EnsembleSums(int dim, std::vector<double> times);
    void add_trajectory(const std::vector<StateKet>& records, double norm_drift);
    void merge(const EnsembleSums& other);
    bool operator==(const EnsembleSums& o) const;
};

// Unnormalised (linear) ensembles are reported as the ratio
// sum |psi><psi| / sum <psi|psi>; for normalised kets w = 1 and this is the
// plain mean.
struct EnsembleResult {
    std::vector<double> t;
    std::vector<DensityMatrix> rho_mean;
    std::vector<double> mean_norm; // sample mean of <psi|psi> per record
    BlochSeries bloch; // d = 2 only
    std::int64_t n_completed{0};
    std::int64_t n_failed{0};
    double max_norm_drift{0.0};
    double mean_norm_drift{0.0};
    EnsembleSums sums;
};

EnsembleResult finalize(const EnsembleSums& sums);

struct EnsembleConfig {
    std::int64_t ntraj{1000};
    std::uint64_t seed{0};
    std::uint64_t first_index{0}; // streams first_index .. first_index + ntraj - 1
    int workers{0};               // 0: NMSSE_WORKERS or hardware concurrency
    double failure_budget{1e-3};
};

// Throws EnsembleFailure when more than failure_budget * ntraj trajectories fail.
EnsembleResult run_ensemble(const TrajectoryPlan& plan, const StateKet& initial,
                            const EnsembleConfig& config);

EnsembleResult merge(const EnsembleResult& a, const EnsembleResult& b);

int resolve_workers(int requested);

struct ComparisonMetrics {
    std::vector<double> t;
    std::vector<BlochVector> diff; // a - b
    double time_averaged_l1{0.0};  // (1/T) int (|dx|+|dy|+|dz|) dt, trapezoid
    double sup_norm{0.0};          // max over t and components of |d|
    double runtime_seconds{0.0};
};

// Throws InvalidArgument when the grids differ.
ComparisonMetrics compare(const BlochSeries& a, const BlochSeries& b);

} // namespace nmsse
