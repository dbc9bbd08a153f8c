// sse.hpp - Single-trajectory integration of the linear and normalised
// non-Markovian stochastic Schrodinger equations

#pragma once

#include <functional>
#include <memory>
#include <string_view>
#include <vector>

#include "nmsse/functionals.hpp"
#include "nmsse/kernel.hpp"
#include "nmsse/noise.hpp"
#include "nmsse/quantum.hpp"

namespace nmsse {

enum class Scheme { heun, rk4 };
enum class Variant { linear, nonlinear };

std::string_view to_string(Scheme s);
std::string_view to_string(Variant v);

struct StepperConfig {
    double dt{1e-3};
    Scheme scheme{Scheme::heun};
    double t_final{10.0};
    int record_stride{1};
    // Exact noise sub-steps per dt; see NoiseState.
    int noise_substeps{1};
};

void validate_stepper(const StepperConfig& s);

// Number of steps of length dt covering [0, t_final] (t_final must be a
// multiple of dt within 1e-9 relative).
int step_count(const StepperConfig& s);

// Times written by a run: step 0 and every record_stride-th step.
std::vector<double> record_times(const StepperConfig& s);

// dpsi/dt of the normalised SSE for a given drift operator F (F^(0) or Q^(0)).
// `drive` multiplies L: the actual z^*(t) (coherent) or the real z(t)
// (quadrature). psi need not be exactly normalised; expectations are divided
// by <psi|psi>.
StateKet drift_nonlinear(const StateKet& psi, const Operator& F, const SystemModel& model,
                         Unravelling u, cd drive);

// dpsi/dt of the linear SSE, driven by the ostensible noise.
StateKet drift_linear(const StateKet& psi, const Operator& F, const SystemModel& model,
                      Unravelling u, cd drive);

struct TrajectoryStats {
    int steps{0};
    double max_norm_drift{0.0}; // max |1 - ||psi||| before renormalisation
};

// Everything a trajectory needs that does not depend on the noise stream.
// Built once and shared read-only between ensemble workers.
class TrajectoryPlan {
public:
    TrajectoryPlan(SystemModel model, MemoryKernel kernel, ProviderSpec provider, Variant variant,
                   StepperConfig stepper);
    ~TrajectoryPlan();
    TrajectoryPlan(const TrajectoryPlan&) = delete;
    TrajectoryPlan& operator=(const TrajectoryPlan&) = delete;

    const SystemModel& model() const { return model_; }
    const MemoryKernel& kernel() const { return kernel_; }
    const ProviderSpec& provider() const { return provider_; }
    Variant variant() const { return variant_; }
    const StepperConfig& stepper() const { return stepper_; }
    const std::vector<double>& times() const { return times_; }

    // Complex ODEs integrated per trajectory: hierarchy entries, amplitudes and
    // noise processes (Girsanov accumulators excluded).
    std::int64_t equation_count() const;

    struct Impl;
    const Impl& impl() const { return *impl_; }

private:
    SystemModel model_;
    MemoryKernel kernel_;
    ProviderSpec provider_;
    Variant variant_;
    StepperConfig stepper_;
    std::vector<double> times_;
    std::unique_ptr<Impl> impl_;
};

// Called at every record time with the record index and the current ket
// (normalised for the nonlinear variant, raw for the linear one).
using RecordCallback = std::function<void(int index, double t, const StateKet& psi)>;

// Throws TrajectoryFailure on norm underflow or non-finite values.
TrajectoryStats simulate(const TrajectoryPlan& plan, const RngStreamSpec& rng,
                         const StateKet& initial, const RecordCallback& on_record);

struct TrajectoryResult {
    std::vector<double> t;
    std::vector<DensityMatrix> rho; // |psi><psi| per record
    TrajectoryStats stats;
};

TrajectoryResult run_trajectory(const SystemModel& model, const MemoryKernel& kernel,
                                const ProviderSpec& provider, Variant variant,
                                const StepperConfig& stepper, const RngStreamSpec& rng,
                                const StateKet& initial);

} // namespace nmsse
