#include "nmsse/functionals.hpp"

#include <cmath>
#include <string>

#include "nmsse/detail/hierarchy_kernels.hpp"
#include "nmsse/error.hpp"

namespace nmsse {

using DynOps = detail::ModelOps<Eigen::Dynamic>;

std::string_view to_string(FunctionalMethod m)
{
    return m == FunctionalMethod::perturbative ? "perturbative" : "ydgs";
}

void validate_provider(const ProviderSpec& spec, const MemoryKernel& kernel)
{
    if (spec.unravelling == Unravelling::quadrature && !kernel.quadrature_ok()) {
        throw KernelNotReal("quadrature unravelling needs a real (mirror-paired) kernel");
    }
    if (spec.method == FunctionalMethod::ydgs) {
        return;
    }
    const int max_order =
        spec.unravelling == Unravelling::coherent ? kMaxCoherentOrder : kMaxQuadratureOrder;
    if (spec.order < 0 || spec.order > max_order) {
        throw UnsupportedOrder("order " + std::to_string(spec.order) + " not supported for the " +
                               std::string(to_string(spec.unravelling)) +
                               " unravelling (max " + std::to_string(max_order) + ")");
    }
}

int flat_index(const MultiIndex& index, int J)
{
    int flat = 0;
    for (int c : index.components) {
        if (c < 0 || c >= J) {
            throw InvalidArgument("MultiIndex: component index out of range");
        }
        flat = flat * J + c;
    }
    return flat;
}

MultiIndex unflatten(int flat, int level, int J)
{
    MultiIndex out;
    out.components.assign(level + 1, 0);
    for (int pos = level; pos >= 0; --pos) {
        out.components[pos] = flat % J;
        flat /= J;
    }
    return out;
}

namespace {

int level_offset(int level, int J)
{
    // Levels are stored consecutively with J^{m+1} operators at level m.
    int offset = 0;
    int width = J;
    for (int m = 0; m < level; ++m) {
        offset += width;
        width *= J;
    }
    return offset;
}

int coherent_slot(const HierarchyState& s, const MultiIndex& index)
{
    if (s.unravelling != Unravelling::coherent) {
        throw InvalidArgument("functional(): multi-index access is for the coherent hierarchy");
    }
    const int level = static_cast<int>(index.components.size()) - 1;
    if (level < 0 || level >= s.order) {
        throw InvalidArgument("functional(): level " + std::to_string(level) +
                              " is not evolved at order " + std::to_string(s.order));
    }
    return level_offset(level, s.components) + flat_index(index, s.components);
}

void check_state(const HierarchyState& s, const SystemModel& model, const MemoryKernel& kernel)
{
    if (s.dim != model.dim() || s.components != kernel.size()) {
        throw InvalidArgument("hierarchy state does not match model/kernel");
    }
    if (static_cast<int>(s.ops.size()) != detail::evolved_count(s.unravelling, s.order, s.components)) {
        throw InvalidArgument("hierarchy state has the wrong number of operators");
    }
}

} // namespace

const Operator& HierarchyState::functional(const MultiIndex& index) const
{
    return ops.at(coherent_slot(*this, index));
}

Operator& HierarchyState::functional(const MultiIndex& index)
{
    return ops.at(coherent_slot(*this, index));
}

std::int64_t HierarchyState::complex_entries() const
{
    return static_cast<std::int64_t>(ops.size()) * dim * dim;
}

HierarchyState make_hierarchy(const SystemModel& model, const MemoryKernel& kernel,
                              Unravelling unravelling, int order)
{
    validate_provider({FunctionalMethod::perturbative, unravelling, order}, kernel);
    HierarchyState s;
    s.unravelling = unravelling;
    s.order = order;
    s.components = kernel.size();
    s.dim = model.dim();
    s.ops.assign(detail::evolved_count(unravelling, order, kernel.size()),
                 Operator::Zero(model.dim(), model.dim()));
    return s;
}

std::vector<Operator> hierarchy_rhs_coherent(const HierarchyState& state, const SystemModel& model,
                                             const MemoryKernel& kernel, cd z_star, double t)
{
    if (state.unravelling != Unravelling::coherent) {
        throw InvalidArgument("hierarchy_rhs_coherent: state is not coherent");
    }
    check_state(state, model, kernel);
    const DynOps m(model);
    std::vector<Operator> d_ops(state.ops.size(), Operator::Zero(model.dim(), model.dim()));
    detail::coherent_rhs<Eigen::Dynamic>(m, kernel, state.order, t, z_star, state.ops, d_ops);
    return d_ops;
}

std::vector<Operator> hierarchy_rhs_quadrature(const HierarchyState& state,
                                               const SystemModel& model,
                                               const MemoryKernel& kernel, double z, double t)
{
    if (state.unravelling != Unravelling::quadrature) {
        throw InvalidArgument("hierarchy_rhs_quadrature: state is not quadrature");
    }
    if (!kernel.quadrature_ok()) {
        throw KernelNotReal("hierarchy_rhs_quadrature: kernel is not real");
    }
    check_state(state, model, kernel);
    const DynOps m(model);
    std::vector<Operator> d_ops(state.ops.size(), Operator::Zero(model.dim(), model.dim()));
    detail::quadrature_rhs<Eigen::Dynamic>(m, kernel, state.order, t, z, state.ops, d_ops);
    return d_ops;
}

Operator drift_operator(const HierarchyState& state, const SystemModel& model,
                        const MemoryKernel& kernel, double t)
{
    check_state(state, model, kernel);
    const DynOps m(model);
    return detail::drift_operator<Eigen::Dynamic>(m, kernel, state.unravelling, state.order, t,
                                                  state.ops);
}

Operator coherent_closure(const HierarchyState& state, const SystemModel& model,
                          const MemoryKernel& kernel, const MultiIndex& index, double t)
{
    check_state(state, model, kernel);
    if (state.unravelling != Unravelling::coherent) {
        throw InvalidArgument("coherent_closure: state is not coherent");
    }
    if (static_cast<int>(index.components.size()) != state.order + 1) {
        throw InvalidArgument("coherent_closure: multi-index length must be order + 1");
    }
    const int j = index.components.front();
    const cd i0 = cumulative_integral(kernel, t).at(j);
    if (state.order == 0) {
        return i0 * model.L();
    }
    MultiIndex rest;
    rest.components.assign(index.components.begin() + 1, index.components.end());
    return i0 * commutator(model.L(), state.functional(rest));
}

std::vector<std::vector<Operator>> quadrature_first_order_closures(const HierarchyState& state,
                                                                    const SystemModel& model,
                                                                    const MemoryKernel& kernel,
                                                                    double t)
{
    check_state(state, model, kernel);
    if (state.unravelling != Unravelling::quadrature || state.order != 1) {
        throw InvalidArgument("quadrature_first_order_closures: needs an order-1 quadrature state");
    }
    const int J = kernel.size();
    const BetaParts weights = cumulative_beta(kernel, t);
    std::vector<std::vector<Operator>> out(4);
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            auto& family = out[a * 2 + b];
            for (int j = 0; j < J; ++j) {
                const double w = (a == 0) ? weights.cos_parts[j] : weights.sin_parts[j];
                for (int k = 0; k < J; ++k) {
                    const Operator& q = (b == 0) ? state.quadrature_cos(k) : state.quadrature_sin(k);
                    family.push_back(w * commutator(model.L(), q));
                }
            }
        }
    }
    return out;
}

std::int64_t coherent_equation_count(int d, int J, int n)
{
    if (d < 1 || J < 1 || n < 0) {
        throw InvalidArgument("coherent_equation_count: invalid arguments");
    }
    // J + J^2 + ... + J^n, which is J (J^n - 1)/(J - 1) for J > 1.
    std::int64_t geometric = 0;
    std::int64_t power = 1;
    for (int m = 1; m <= n; ++m) {
        power *= J;
        geometric += power;
    }
    return static_cast<std::int64_t>(d) * d * geometric + d + J;
}

Operator ydgs_provider(const SystemModel& model, const YdgsWeights& weights, double t)
{
    if (weights.t.empty()) {
        throw InvalidArgument("ydgs_provider: empty weights");
    }
    const double dt = weights.t.size() > 1 ? weights.t[1] - weights.t[0] : 1.0;
    const double pos = (t - weights.t.front()) / dt;
    const long idx = std::lround(pos);
    if (idx < 0 || idx >= static_cast<long>(weights.t.size()) ||
        std::abs(weights.t[idx] - t) > 1e-9 * std::max(1.0, dt)) {
        throw InvalidArgument("ydgs_provider: t is not a grid point of the weights");
    }
    const DynOps m(model);
    return detail::ydgs_operator<Eigen::Dynamic>(m, weights.unravelling, weights.w0[idx],
                                                 weights.w1[idx], weights.w2[idx]);
}

} // namespace nmsse
