// kernel.hpp - Exponential-sum memory kernels and their cumulative integrals

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nmsse/quantum.hpp"

namespace nmsse {

enum class Unravelling { coherent, quadrature };

std::string_view to_string(Unravelling u);

// One term A e^{-kappa|tau|/2 - i omega tau}. The single stored amplitude is
// alpha_j(0) for coherent use and beta_j(0) for quadrature use; the enlarged
// system couples with G_j = sqrt(A).
struct KernelComponent {
    double amplitude{0.0};
    double kappa{0.0};
    double omega{0.0};

    // kappa/2 + i omega, the decay rate of e^{-lambda tau}.
    cd rate() const { return {0.5 * kappa, omega}; }
};

class MemoryKernel {
public:
    explicit MemoryKernel(std::vector<KernelComponent> components);

    // Single Lorentzian term with alpha(0) = gamma*kappa/4.
    static MemoryKernel lorentzian(double gamma, double kappa, double omega = 0.0);

    // "A,kappa,omega; A,kappa,omega; ..." Throws InvalidArgument.
    static MemoryKernel parse(std::string_view spec);

    int size() const { return static_cast<int>(components_.size()); }
    const KernelComponent& operator[](int j) const { return components_[j]; }
    const std::vector<KernelComponent>& components() const { return components_; }

    // True when alpha(tau) is real, i.e. every component with omega != 0 has a
    // mirror partner at -omega. Only such kernels can drive the quadrature
    // unravelling.
    bool quadrature_ok() const { return quadrature_ok_; }

    // Markov-limit decay rate: integral of alpha over the whole real line.
    double markov_rate() const;

    std::string to_string() const;

private:
    std::vector<KernelComponent> components_;
    bool quadrature_ok_{false};
};

// (1 - e^{-x})/x and (1 - (1+x)e^{-x})/x^2, accurate near x = 0.
cd phi1(cd x);
cd phi2(cd x);

cd alpha_eval(const MemoryKernel& k, double tau);

// Per-component closed form of int_0^t alpha_j(tau) dtau.
std::vector<cd> cumulative_integral(const MemoryKernel& k, double t);

// Per-component int_0^t alpha_j(tau) tau dtau.
std::vector<cd> first_moment(const MemoryKernel& k, double t);

struct BetaParts {
    std::vector<double> cos_parts;
    std::vector<double> sin_parts;
};

// beta^{(j,cos)}(tau) and beta^{(j,sin)}(tau); throws KernelNotReal.
BetaParts beta_split(const MemoryKernel& k, double tau);

// int_0^t of beta^{(j,cos)} and beta^{(j,sin)}.
BetaParts cumulative_beta(const MemoryKernel& k, double t);

// First-order post-Markovian weights on a uniform grid. For the coherent
// unravelling these are g0, g1, g2; for the quadrature unravelling h0, h1, h2
// (real, stored with zero imaginary part).
struct YdgsWeights {
    Unravelling unravelling{Unravelling::coherent};
    std::vector<double> t;
    std::vector<cd> w0;
    std::vector<cd> w1;
    std::vector<cd> w2;
};

// Closed-form w0 and w1 at time t for either unravelling.
cd ydgs_w0(const MemoryKernel& k, Unravelling u, double t);
cd ydgs_w1(const MemoryKernel& k, Unravelling u, double t);

// w2 is integrated through the per-component auxiliary pair
// P' = -lambda P + A w0(t), w2' = -lambda w2 + P with RK4 on the grid.
YdgsWeights ydgs_weights(const MemoryKernel& k, std::span<const double> grid,
                         Unravelling u = Unravelling::coherent);

} // namespace nmsse
