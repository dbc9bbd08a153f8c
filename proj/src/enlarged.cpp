#include "nmsse/enlarged.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "nmsse/error.hpp"

namespace nmsse {

namespace {

SparseOperator sparse_identity(int n)
{
    SparseOperator id(n, n);
    id.setIdentity();
    return id;
}

SparseOperator sparse_kron(const SparseOperator& a, const SparseOperator& b)
{
    std::vector<Eigen::Triplet<cd>> entries;
    entries.reserve(static_cast<std::size_t>(a.nonZeros()) * b.nonZeros());
    for (int i = 0; i < a.outerSize(); ++i) {
        for (SparseOperator::InnerIterator ia(a, i); ia; ++ia) {
            for (int k = 0; k < b.outerSize(); ++k) {
                for (SparseOperator::InnerIterator ib(b, k); ib; ++ib) {
                    entries.emplace_back(ia.row() * b.rows() + ib.row(),
                                         ia.col() * b.cols() + ib.col(), ia.value() * ib.value());
                }
            }
        }
    }
    SparseOperator out(a.rows() * b.rows(), a.cols() * b.cols());
    out.setFromTriplets(entries.begin(), entries.end());
    return out;
}

SparseOperator to_sparse(const Operator& a)
{
    SparseOperator s = a.sparseView();
    s.makeCompressed();
    return s;
}

} // namespace

Operator annihilation(int nmax)
{
    if (nmax < 1) {
        throw InvalidArgument("annihilation: nmax must be >= 1");
    }
    Operator c = Operator::Zero(nmax + 1, nmax + 1);
    for (int n = 1; n <= nmax; ++n) {
        c(n - 1, n) = std::sqrt(static_cast<double>(n));
    }
    return c;
}

EnlargedSpace::EnlargedSpace(const SystemModel& model, const MemoryKernel& kernel, int nmax)
    : EnlargedSpace(model, kernel, std::vector<int>(kernel.size(), nmax))
{
}

EnlargedSpace::EnlargedSpace(const SystemModel& model, const MemoryKernel& kernel,
                             std::vector<int> nmax)
    : d_(model.dim()), nmax_(std::move(nmax))
{
    if (static_cast<int>(nmax_.size()) != kernel.size()) {
        throw InvalidArgument("EnlargedSpace: one truncation per kernel component required");
    }
    long long modes_dim = 1;
    for (int n : nmax_) {
        if (n < 1) {
            throw InvalidArgument("EnlargedSpace: nmax must be >= 1");
        }
        modes_dim *= (n + 1);
        if (modes_dim * d_ > kMaxEnlargedDim) {
            throw CapacityError("EnlargedSpace: dimension exceeds " +
                                std::to_string(kMaxEnlargedDim));
        }
    }
    dim_ = static_cast<int>(modes_dim * d_);
    const SparseOperator id_modes = sparse_identity(static_cast<int>(modes_dim));
    l_ = sparse_kron(to_sparse(model.L()), id_modes);
    l_dag_ = sparse_kron(to_sparse(model.L_dag()), id_modes);
    h_ = sparse_kron(to_sparse(model.H()), id_modes);

    const int J = kernel.size();
    for (int j = 0; j < J; ++j) {
        g_.push_back(std::sqrt(kernel[j].amplitude));
        kappa_.push_back(kernel[j].kappa);
        omega_.push_back(kernel[j].omega);
        int before = d_;
        for (int i = 0; i < j; ++i) before *= nmax_[i] + 1;
        int after = 1;
        for (int i = j + 1; i < J; ++i) after *= nmax_[i] + 1;
        const SparseOperator a = to_sparse(annihilation(nmax_[j]));
        SparseOperator cj = sparse_kron(sparse_kron(sparse_identity(before), a), sparse_identity(after));
        cj.makeCompressed();
        SparseOperator cdj = cj.adjoint();
        SparseOperator nj = cdj * cj;
        c_.push_back(std::move(cj));
        c_dag_.push_back(std::move(cdj));
        n_.push_back(std::move(nj));
    }

    top_mask_.assign(dim_, 0);
    for (int idx = 0; idx < dim_; ++idx) {
        int m = idx % static_cast<int>(modes_dim);
        for (int j = J - 1; j >= 0; --j) {
            const int occ = m % (nmax_[j] + 1);
            m /= nmax_[j] + 1;
            if (occ == nmax_[j]) {
                top_mask_[idx] = 1;
            }
        }
    }
}

double EnlargedSpace::top_population(const DensityMatrix& w) const
{
    double p = 0.0;
    for (int i = 0; i < dim_; ++i) {
        if (top_mask_[i]) {
            p += w(i, i).real();
        }
    }
    return p;
}

DensityMatrix EnlargedSpace::initial_state(const StateKet& psi) const
{
    if (psi.size() != d_) {
        throw InvalidArgument("initial_state: ket dimension mismatch");
    }
    const double norm = psi.norm();
    if (!(norm > 0.0)) {
        throw DegenerateState("initial_state: zero ket");
    }
    const StateKet p = psi / norm;
    const int m = dim_ / d_;
    DensityMatrix w = DensityMatrix::Zero(dim_, dim_);
    for (int a = 0; a < d_; ++a) {
        for (int b = 0; b < d_; ++b) {
            w(a * m, b * m) = p(a) * std::conj(p(b));
        }
    }
    return w;
}

DensityMatrix EnlargedSpace::reduce(const DensityMatrix& w) const
{
    return partial_trace_trailing(w, d_);
}

cd EnlargedSpace::correlation(double tau) const
{
    if (tau < 0.0) {
        throw InvalidArgument("correlation: tau must be >= 0");
    }
    cd sum{0.0, 0.0};
    for (std::size_t j = 0; j < g_.size(); ++j) {
        // <0| c e^{-(kappa/2 + i omega) c^dag c tau} c^dag |0>, weighted by G^2.
        sum += g_[j] * g_[j] * std::exp(cd{-0.5 * kappa_[j] * tau, -omega_[j] * tau});
    }
    return sum;
}

DensityMatrix lindblad_rhs(const DensityMatrix& w, const EnlargedSpace& space, double t)
{
    if (w.rows() != space.dim() || w.cols() != space.dim()) {
        throw InvalidArgument("lindblad_rhs: state dimension mismatch");
    }
    SparseOperator k = cd{0.0, -1.0} * space.H();
    for (int j = 0; j < space.modes(); ++j) {
        const cd phase = std::exp(cd{0.0, space.omega(j) * t});
        const SparseOperator up = space.L() * space.c_dag(j);
        const SparseOperator down = space.L_dag() * space.c(j);
        k += (space.coupling(j) * phase) * up - (space.coupling(j) * std::conj(phase)) * down;
    }
    // K is anti-Hermitian, so [K, W] = KW + (KW)^dag.
    const DensityMatrix kw = k * w;
    DensityMatrix out = kw + kw.adjoint();
    for (int j = 0; j < space.modes(); ++j) {
        const DensityMatrix cw = space.c(j) * w;
        const DensityMatrix nw = space.number(j) * w;
        out += space.kappa(j) * (space.c(j) * cw.adjoint() - 0.5 * (nw + nw.adjoint()));
    }
    return out;
}

namespace {

template <class Rhs>
ReducedSeries integrate(DensityMatrix w, const StepperConfig& stepper, const Rhs& rhs,
                        const std::function<DensityMatrix(const DensityMatrix&)>& reduce,
                        const std::function<void(const DensityMatrix&, double)>& check)
{
    const int steps = step_count(stepper);
    const double dt = stepper.dt;
    ReducedSeries out;
    auto record = [&](double t) {
        const DensityMatrix rho = reduce(w);
        out.t.push_back(t);
        out.rho.push_back(rho);
        auto& diag = out.diagnostics;
        diag.max_trace_error = std::max(diag.max_trace_error, std::abs(trace(w) - 1.0));
        diag.max_hermiticity_error = std::max(diag.max_hermiticity_error, hermiticity_error(w));
        if (rho.rows() <= 4) {
            diag.min_eigenvalue = std::min(diag.min_eigenvalue, min_eigenvalue_hermitian(rho));
        }
    };
    check(w, 0.0);
    record(0.0);
    for (int n = 0; n < steps; ++n) {
        const double t = n * dt;
        const DensityMatrix k1 = rhs(w, t);
        const DensityMatrix k2 = rhs(w + 0.5 * dt * k1, t + 0.5 * dt);
        const DensityMatrix k3 = rhs(w + 0.5 * dt * k2, t + 0.5 * dt);
        const DensityMatrix k4 = rhs(w + dt * k3, t + dt);
        w += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!is_finite(w)) {
            throw NumericError("master equation produced non-finite values at t = " +
                               std::to_string(t + dt));
        }
        check(w, t + dt);
        if ((n + 1) % stepper.record_stride == 0) {
            record((n + 1) * dt);
        }
    }
    return out;
}

} // namespace

ReducedSeries evolve_enlarged(const EnlargedSpace& space, const StateKet& initial,
                              const StepperConfig& stepper)
{
    validate_stepper(stepper);
    double max_top = 0.0;
    auto check = [&](const DensityMatrix& w, double t) {
        const double top = space.top_population(w);
        max_top = std::max(max_top, top);
        if (top >= kTruncationTolerance) {
            const int current = *std::max_element(space.nmax().begin(), space.nmax().end());
            const int suggested = current + std::max(10, current / 2);
            throw TruncationError("top Fock level population " + std::to_string(top) +
                                      " at t = " + std::to_string(t) + "; try nmax = " +
                                      std::to_string(suggested),
                                  suggested);
        }
    };
    ReducedSeries out = integrate(
        space.initial_state(initial), stepper,
        [&](const DensityMatrix& w, double t) { return lindblad_rhs(w, space, t); },
        [&](const DensityMatrix& w) { return space.reduce(w); }, check);
    out.diagnostics.max_top_population = max_top;
    return out;
}

ReducedSeries lindblad_reference_markov(const SystemModel& model, double gamma,
                                        const StateKet& initial, const StepperConfig& stepper)
{
    validate_stepper(stepper);
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw InvalidArgument("lindblad_reference_markov: gamma must be >= 0");
    }
    if (initial.size() != model.dim()) {
        throw InvalidArgument("lindblad_reference_markov: ket dimension mismatch");
    }
    const Operator minus_ih = cd{0.0, -1.0} * model.H();
    const Operator ldl = model.L_dag() * model.L();
    auto rhs = [&](const DensityMatrix& rho, double) {
        const DensityMatrix hr = minus_ih * rho;
        const DensityMatrix lr = model.L() * rho;
        const DensityMatrix nr = ldl * rho;
        return DensityMatrix(hr + hr.adjoint() +
                             gamma * (model.L() * lr.adjoint() - 0.5 * (nr + nr.adjoint())));
    };
    return integrate(
        density_from_ket(normalized(initial)), stepper, rhs,
        [](const DensityMatrix& w) { return w; }, [](const DensityMatrix&, double) {});
}

double kernel_identity_check(const EnlargedSpace& space, const MemoryKernel& kernel,
                             std::span<const double> taus)
{
    if (space.modes() != kernel.size()) {
        throw InvalidArgument("kernel_identity_check: mode count does not match the kernel");
    }
    double worst = 0.0;
    for (double tau : taus) {
        worst = std::max(worst, std::abs(space.correlation(tau) - alpha_eval(kernel, tau)));
    }
    return worst;
}

} // namespace nmsse
