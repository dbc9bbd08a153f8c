// enlarged.hpp - Exact reference dynamics: the system coupled to damped
// fictitious oscillators under a Markovian master equation, and the plain
// Lindblad equation for the Markov limit

#pragma once

#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "nmsse/kernel.hpp"
#include "nmsse/quantum.hpp"
#include "nmsse/sse.hpp"

namespace nmsse {

using SparseOperator = Eigen::SparseMatrix<cd, Eigen::RowMajor>;

inline constexpr int kDefaultNmax = 20;

// System (x) mode_0 (x) ... (x) mode_{J-1}, system index most significant.
// Mode j is truncated to Fock states 0..nmax[j] and couples with
// G_j = sqrt(A_j), damping kappa_j and detuning omega_j.
class EnlargedSpace {
public:
    EnlargedSpace(const SystemModel& model, const MemoryKernel& kernel, std::vector<int> nmax);
    EnlargedSpace(const SystemModel& model, const MemoryKernel& kernel, int nmax = kDefaultNmax);

    int system_dim() const { return d_; }
    int dim() const { return dim_; }
    int modes() const { return static_cast<int>(nmax_.size()); }
    const std::vector<int>& nmax() const { return nmax_; }

    double coupling(int j) const { return g_[j]; }
    double kappa(int j) const { return kappa_[j]; }
    double omega(int j) const { return omega_[j]; }

    const SparseOperator& L() const { return l_; }
    const SparseOperator& L_dag() const { return l_dag_; }
    const SparseOperator& H() const { return h_; }
    const SparseOperator& c(int j) const { return c_[j]; }
    const SparseOperator& c_dag(int j) const { return c_dag_[j]; }
    const SparseOperator& number(int j) const { return n_[j]; }

    // Population of states with any mode in its top Fock level.
    double top_population(const DensityMatrix& w) const;

    // Vacuum of every mode tensored with |psi><psi|.
    DensityMatrix initial_state(const StateKet& psi) const;

    DensityMatrix reduce(const DensityMatrix& w) const;

    // alpha(tau) rebuilt from the stored couplings, rates and detunings.
    cd correlation(double tau) const;

private:
    int d_;
    int dim_;
    std::vector<int> nmax_;
    std::vector<double> g_, kappa_, omega_;
    SparseOperator l_, l_dag_, h_;
    std::vector<SparseOperator> c_, c_dag_, n_;
    std::vector<char> top_mask_;
};

// Truncated annihilation operator on Fock states 0..nmax.
Operator annihilation(int nmax);

// dW/dt = [K, W] + sum_j kappa_j D[c_j] W with
// K = -iH + sum_j G_j (e^{i omega_j t} L c_j^dag - e^{-i omega_j t} L^dag c_j).
DensityMatrix lindblad_rhs(const DensityMatrix& w, const EnlargedSpace& space, double t);

struct ReducedDiagnostics {
    double max_top_population{0.0};
    double max_trace_error{0.0};
    double max_hermiticity_error{0.0};
    double min_eigenvalue{1.0};
};

struct ReducedSeries {
    std::vector<double> t;
    std::vector<DensityMatrix> rho;
    ReducedDiagnostics diagnostics;
};

// Fixed-step RK4 from |psi><psi| (x) vacuum on the grid of `stepper` (the
// scheme field is ignored). Throws TruncationError when the top Fock level
// population reaches 1e-6.
ReducedSeries evolve_enlarged(const EnlargedSpace& space, const StateKet& initial,
                              const StepperConfig& stepper);

inline constexpr double kTruncationTolerance = 1e-6;

// d rho/dt = -i[H, rho] + gamma D[L] rho, RK4.
ReducedSeries lindblad_reference_markov(const SystemModel& model, double gamma,
                                        const StateKet& initial, const StepperConfig& stepper);

// Largest |space.correlation(tau) - alpha_eval(kernel, tau)| over the grid.
double kernel_identity_check(const EnlargedSpace& space, const MemoryKernel& kernel,
                             std::span<const double> taus);

} // namespace nmsse
