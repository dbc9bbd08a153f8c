// noise.hpp - Ostensible coloured noise paths and the Girsanov shift

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "nmsse/kernel.hpp"

namespace nmsse {

struct RngStreamSpec {
    std::uint64_t master_seed{0};
    std::uint64_t trajectory_index{0};
};

// Seed of the per-trajectory engine; a pure function of (seed, index).
std::uint64_t stream_seed(const RngStreamSpec& spec);

// Ostensible noise over one step [t, t+h]. For the quadrature unravelling all
// three values are real with an exactly zero imaginary part.
struct NoiseSample {
    cd start;
    cd end;
    cd average; // (1/h) int_t^{t+h} z_Lambda(s) ds
};

// Per-component complex Ornstein-Uhlenbeck processes w_j with
// E[w_j(t) w_j^*(s)] = A_j e^{-lambda_j (t-s)}, E[w_j w_j] = 0. The coherent
// noise is z = sum_j w_j, the quadrature noise z = sqrt(2) sum_j Re w_j.
//
// Each step is sampled exactly: the endpoint and the step integral of every
// w_j are drawn jointly from their conditional Gaussian law. A step of length
// h can be split into `substeps` exact sub-steps; a path sampled with
// (h, substeps = 2) is then identical to the path sampled with
// (h/2, substeps = 1) from the same stream.
class NoiseState {
public:
    NoiseState(const MemoryKernel& kernel, Unravelling mode, const RngStreamSpec& spec,
               int substeps = 1);

    Unravelling mode() const { return mode_; }
    int size() const { return static_cast<int>(w_.size()); }
    double time() const { return t_; }
    std::span<const cd> components() const { return w_; }

    // z_Lambda at the current time.
    cd value() const;

    cd decay_factor(int j, double h) const;

    NoiseSample step(double h);

    // Girsanov accumulators M_j' = -lambda_j M_j + A_j <X>_t, advanced exactly
    // with the expectation held constant over the step. X is L (coherent) or
    // L_x (quadrature).
    cd advance_shift(cd expectation, double h);
    cd shift() const;
    std::span<const cd> shift_accumulators() const { return shift_; }

    // z_Lambda + shift.
    cd actual() const { return value() + shift(); }

private:
    struct StepCoefficients {
        double h{-1.0};
        std::vector<cd> decay;     // e^{-lambda h}
        std::vector<cd> mean_int;  // h phi1(lambda h)
        std::vector<double> l11;   // Cholesky of the (endpoint, integral) covariance
        std::vector<cd> l21;
        std::vector<double> l22;
    };

    const StepCoefficients& coefficients(double h);
    cd standard_complex_normal();
    cd project(cd sum_w) const;

    const MemoryKernel* kernel_;
    Unravelling mode_;
    int substeps_;
    double t_{0.0};
    std::vector<cd> w_;
    std::vector<cd> shift_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    StepCoefficients cache_;
};

NoiseState init_noise(const MemoryKernel& kernel, Unravelling mode, const RngStreamSpec& spec);
NoiseSample step_noise(NoiseState& state, double h);

// Advances the accumulators and returns the new shift. Coherent: sum_j M_j.
// Quadrature: sum_j Re M_j = int_0^t beta(t-s) <L_x>_s ds.
cd girsanov_shift(NoiseState& state, cd expectation, double h);

// Time derivative of the Girsanov accumulators, for callers that integrate
// them inside their own stepper.
void girsanov_rate(const MemoryKernel& kernel, std::span<const cd> accumulators, cd expectation,
                   std::span<cd> rate);

// Combined shift from raw accumulators.
cd combine_shift(Unravelling mode, std::span<const cd> accumulators);

// Monte Carlo check of the ostensible noise statistics over npaths streams
// (seed, 0..npaths-1) sampled on a grid of spacing dt.
struct CorrelationEstimate {
    double t{0.0};
    double s{0.0};
    cd mean;          // sample mean of z(t) z^*(s) (or z(t) z(s))
    cd standard_error; // per real/imag part
    cd target;
};

struct NoiseCheck {
    std::vector<CorrelationEstimate> conjugate; // E[z(t) z^*(s)] against alpha(t-s)
    std::vector<CorrelationEstimate> plain;     // E[z(t) z(s)], target 0 (coherent)
    double variance{0.0};                       // E[|z(0)|^2]
    double variance_error{0.0};
    double variance_target{0.0};
    double max_abs_imag{0.0}; // largest |Im z| seen (quadrature: exactly 0)
};

// Pairs need t >= s >= 0 and both on the dt grid.
NoiseCheck noise_check(const MemoryKernel& kernel, Unravelling mode, std::uint64_t seed,
                       std::int64_t npaths, double dt,
                       const std::vector<std::pair<double, double>>& pairs);

} // namespace nmsse
