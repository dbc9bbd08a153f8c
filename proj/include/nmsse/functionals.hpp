// functionals.hpp - Perturbative operator-functional hierarchy and the
// first-order post-Markovian provider

#pragma once

#include <cstdint>
#include <vector>

#include "nmsse/kernel.hpp"
#include "nmsse/quantum.hpp"

namespace nmsse {

enum class FunctionalMethod { perturbative, ydgs };

std::string_view to_string(FunctionalMethod m);

// How the drift operator F^(0) / Q^(0) is obtained.
struct ProviderSpec {
    FunctionalMethod method{FunctionalMethod::perturbative};
    Unravelling unravelling{Unravelling::coherent};
    int order{1};
};

inline constexpr int kMaxCoherentOrder = 2;
inline constexpr int kMaxQuadratureOrder = 1;

// Throws UnsupportedOrder / KernelNotReal for combinations that cannot run.
void validate_provider(const ProviderSpec& spec, const MemoryKernel& kernel);

// Component indices (j, k, ..., l) of an order-m coherent functional, m+1 entries.
struct MultiIndex {
    std::vector<int> components;
};

// Base-J flattening, first index most significant.
int flat_index(const MultiIndex& index, int J);
MultiIndex unflatten(int flat, int level, int J);

// Evolved functionals of one trajectory. Levels 0..order-1 are evolved; the
// level `order` functionals are supplied by the truncation closure.
//   coherent:   ops = [F0_j (J)] + [F1_{j,k} (J^2), order 2 only]
//   quadrature: ops = [Q0cos_j (J)] + [Q0sin_j (J)], order 1 only
struct HierarchyState {
    Unravelling unravelling{Unravelling::coherent};
    int order{0};
    int components{1};
    int dim{2};
    std::vector<Operator> ops;

    // Coherent level-m functional F^(m) at a multi-index of length m+1.
    const Operator& functional(const MultiIndex& index) const;
    Operator& functional(const MultiIndex& index);

    const Operator& quadrature_cos(int j) const { return ops.at(j); }
    const Operator& quadrature_sin(int j) const { return ops.at(components + j); }

    std::int64_t complex_entries() const;
};

// All evolved functionals start at zero (empty integral at t = 0).
HierarchyState make_hierarchy(const SystemModel& model, const MemoryKernel& kernel,
                              Unravelling unravelling, int order);

// d/dt of every evolved operator; z_star is the noise multiplying L in the SSE.
std::vector<Operator> hierarchy_rhs_coherent(const HierarchyState& state, const SystemModel& model,
                                             const MemoryKernel& kernel, cd z_star, double t);
std::vector<Operator> hierarchy_rhs_quadrature(const HierarchyState& state,
                                               const SystemModel& model,
                                               const MemoryKernel& kernel, double z, double t);

// F^(0) = sum_j F0_j or Q^(0) = sum_j Q0cos_j; for order 0 the closure
// sum_j int_0^t alpha_j * L.
Operator drift_operator(const HierarchyState& state, const SystemModel& model,
                        const MemoryKernel& kernel, double t);

// Coherent closure F^(order) at time t for a multi-index of length order+1:
// I0_j(t) [L, F^(order-1)_{rest}] (I0_j(t) L at order 0).
Operator coherent_closure(const HierarchyState& state, const SystemModel& model,
                          const MemoryKernel& kernel, const MultiIndex& index, double t);

// The four first-order quadrature closures Q1^{(j,k,a,b)}, a,b in {cos,sin},
// indexed [a*2 + b][j*J + k] with cos = 0, sin = 1. Only (cos,cos) and
// (sin,cos) enter the level-0 equations.
std::vector<std::vector<Operator>> quadrature_first_order_closures(const HierarchyState& state,
                                                                    const SystemModel& model,
                                                                    const MemoryKernel& kernel,
                                                                    double t);

// d^2 J (J^n - 1)/(J - 1) + d + J: functional entries, amplitudes and noise
// processes of an order-n coherent run.
std::int64_t coherent_equation_count(int d, int J, int n);

// Noise-independent post-Markovian drift operator at a grid time of `weights`.
Operator ydgs_provider(const SystemModel& model, const YdgsWeights& weights, double t);

} // namespace nmsse
