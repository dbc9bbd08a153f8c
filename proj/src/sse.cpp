#include "nmsse/sse.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "nmsse/detail/hierarchy_kernels.hpp"
#include "nmsse/error.hpp"

namespace nmsse {

using detail::Mat;
using detail::ModelOps;
using detail::Vec;

std::string_view to_string(Scheme s) { return s == Scheme::heun ? "heun" : "rk4"; }
std::string_view to_string(Variant v) { return v == Variant::linear ? "linear" : "nonlinear"; }

void validate_stepper(const StepperConfig& s)
{
    if (!(s.dt > 0.0) || !std::isfinite(s.dt)) {
        throw InvalidArgument("stepper: dt must be > 0");
    }
    if (!(s.t_final >= 0.0) || !std::isfinite(s.t_final)) {
        throw InvalidArgument("stepper: t_final must be >= 0");
    }
    if (s.record_stride < 1) {
        throw InvalidArgument("stepper: record_stride must be >= 1");
    }
    if (s.noise_substeps < 1) {
        throw InvalidArgument("stepper: noise_substeps must be >= 1");
    }
    const double n = s.t_final / s.dt;
    if (std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n)) {
        throw InvalidArgument("stepper: t_final must be a multiple of dt");
    }
    if (n > 1e9) {
        throw InvalidArgument("stepper: too many steps");
    }
}

int step_count(const StepperConfig& s)
{
    validate_stepper(s);
    return static_cast<int>(std::lround(s.t_final / s.dt));
}

std::vector<double> record_times(const StepperConfig& s)
{
    const int n = step_count(s);
    std::vector<double> out;
    for (int i = 0; i <= n; i += s.record_stride) {
        out.push_back(i * s.dt);
    }
    return out;
}

namespace {

template <int D>
Vec<D> ket_drift(const ModelOps<D>& m, Unravelling u, bool nonlinear, const Mat<D>& F,
                 const Vec<D>& psi, cd drive, cd* exp_l_out)
{
    const Vec<D> l_psi = m.L * psi;
    const Vec<D> f_psi = F * psi;
    const Mat<D>& X = (u == Unravelling::coherent) ? m.Ld : m.Lx;
    const Vec<D> xf_psi = X * f_psi;
    Vec<D> out = m.minus_iH * psi;
    if (!nonlinear) {
        out += drive * l_psi - xf_psi;
        return out;
    }
    const double norm2 = psi.squaredNorm();
    const cd exp_l = psi.dot(l_psi) / norm2;
    const cd exp_x = (u == Unravelling::coherent) ? std::conj(exp_l) : cd{2.0 * exp_l.real(), 0.0};
    const cd exp_f = psi.dot(f_psi) / norm2;
    const cd exp_xf = psi.dot(xf_psi) / norm2;
    out += -(xf_psi - exp_x * f_psi) + (exp_xf - exp_x * exp_f) * psi +
           drive * (l_psi - exp_l * psi);
    if (exp_l_out) {
        *exp_l_out = exp_l;
    }
    return out;
}

template <int D>
struct JointState {
    Vec<D> psi;
    std::vector<Mat<D>> ops;
    std::vector<cd> m; // Girsanov accumulators (nonlinear only)
};

// out = base + h * k
template <int D>
void combine(JointState<D>& out, const JointState<D>& base, double h, const JointState<D>& k)
{
    out.psi = base.psi + h * k.psi;
    for (std::size_t i = 0; i < base.ops.size(); ++i) {
        out.ops[i] = base.ops[i] + h * k.ops[i];
    }
    for (std::size_t i = 0; i < base.m.size(); ++i) {
        out.m[i] = base.m[i] + h * k.m[i];
    }
}

// y += h * k
template <int D>
void accumulate(JointState<D>& y, double h, const JointState<D>& k)
{
    y.psi += h * k.psi;
    for (std::size_t i = 0; i < y.ops.size(); ++i) {
        y.ops[i] += h * k.ops[i];
    }
    for (std::size_t i = 0; i < y.m.size(); ++i) {
        y.m[i] += h * k.m[i];
    }
}

} // namespace

struct TrajectoryPlan::Impl {
    std::optional<ModelOps<2>> ops2;
    ModelOps<Eigen::Dynamic> ops_dyn;
    int evolved{0};
    // Post-Markovian weights on a dt/2 grid (covers every scheme stage time).
    std::optional<YdgsWeights> ydgs;
    double weight_spacing{0.0};

    explicit Impl(const SystemModel& model) : ops_dyn(model)
    {
        if (model.dim() == 2) {
            ops2.emplace(model);
        }
    }

    template <int D>
    const ModelOps<D>& ops() const
    {
        if constexpr (D == 2) {
            return *ops2;
        } else {
            return ops_dyn;
        }
    }
};

TrajectoryPlan::TrajectoryPlan(SystemModel model, MemoryKernel kernel, ProviderSpec provider,
                               Variant variant, StepperConfig stepper)
    : model_(std::move(model)), kernel_(std::move(kernel)), provider_(provider), variant_(variant),
      stepper_(stepper)
{
    validate_stepper(stepper_);
    validate_provider(provider_, kernel_);
    times_ = record_times(stepper_);
    impl_ = std::make_unique<Impl>(model_);
    if (provider_.method == FunctionalMethod::perturbative) {
        impl_->evolved = detail::evolved_count(provider_.unravelling, provider_.order, kernel_.size());
        if (provider_.unravelling == Unravelling::coherent &&
            equation_count() !=
                coherent_equation_count(model_.dim(), kernel_.size(), provider_.order)) {
            throw std::logic_error("coherent hierarchy size does not match the equation count");
        }
    } else {
        const int n = step_count(stepper_);
        std::vector<double> grid(2 * static_cast<std::size_t>(n) + 1);
        impl_->weight_spacing = 0.5 * stepper_.dt;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            grid[i] = static_cast<double>(i) * impl_->weight_spacing;
        }
        impl_->ydgs = ydgs_weights(kernel_, grid, provider_.unravelling);
    }
}

TrajectoryPlan::~TrajectoryPlan() = default;

std::int64_t TrajectoryPlan::equation_count() const
{
    const std::int64_t d = model_.dim();
    return static_cast<std::int64_t>(impl_->evolved) * d * d + d + kernel_.size();
}

namespace {

template <int D>
class Engine {
public:
    explicit Engine(const TrajectoryPlan& plan)
        : plan_(plan), m_(plan.impl().template ops<D>()), k_(plan.kernel()),
          u_(plan.provider().unravelling), nonlinear_(plan.variant() == Variant::nonlinear),
          order_(plan.provider().order),
          ydgs_(plan.provider().method == FunctionalMethod::ydgs)
    {
    }

    TrajectoryStats run(const RngStreamSpec& rng, const StateKet& initial,
                        const RecordCallback& on_record)
    {
        const StepperConfig& s = plan_.stepper();
        const int dim = m_.dim;
        if (initial.size() != dim) {
            throw InvalidArgument("simulate: initial state dimension mismatch");
        }
        const double n0 = initial.norm();
        if (!(n0 > 1e-12) || !std::isfinite(n0)) {
            throw DegenerateState("simulate: initial state has zero norm");
        }
        const int J = k_.size();
        const int evolved = plan_.impl().evolved;

        JointState<D> y;
        y.psi = nonlinear_ ? Vec<D>(initial / n0) : Vec<D>(initial);
        y.ops.assign(evolved, m_.zero());
        y.m.assign(nonlinear_ ? J : 0, cd{0.0, 0.0});
        JointState<D> k1 = y, k2 = y, k3 = y, k4 = y, tmp = y;

        NoiseState noise(k_, u_, rng, s.noise_substeps);
        const int steps = step_count(s);
        const double dt = s.dt;
        TrajectoryStats stats;
        StateKet out_ket(dim);

        auto emit = [&](int step) {
            if (on_record) {
                out_ket = y.psi;
                on_record(step / s.record_stride, step * dt, out_ket);
            }
        };
        emit(0);

        for (int n = 0; n < steps; ++n) {
            const double t = n * dt;
            const cd zbar = noise.step(dt).average;
            if (s.scheme == Scheme::heun) {
                rhs(t, zbar, y, k1);
                combine(tmp, y, dt, k1);
                rhs(t + dt, zbar, tmp, k2);
                accumulate(y, 0.5 * dt, k1);
                accumulate(y, 0.5 * dt, k2);
            } else {
                rhs(t, zbar, y, k1);
                combine(tmp, y, 0.5 * dt, k1);
                rhs(t + 0.5 * dt, zbar, tmp, k2);
                combine(tmp, y, 0.5 * dt, k2);
                rhs(t + 0.5 * dt, zbar, tmp, k3);
                combine(tmp, y, dt, k3);
                rhs(t + dt, zbar, tmp, k4);
                accumulate(y, dt / 6.0, k1);
                accumulate(y, dt / 3.0, k2);
                accumulate(y, dt / 3.0, k3);
                accumulate(y, dt / 6.0, k4);
            }
            const double t_new = (n + 1) * dt;
            const double norm = y.psi.norm();
            if (!std::isfinite(norm) || !(norm >= 1e-12)) {
                throw TrajectoryFailure("trajectory norm underflow or non-finite state at t = " +
                                            std::to_string(t_new),
                                        t_new);
            }
            if (nonlinear_) {
                stats.max_norm_drift = std::max(stats.max_norm_drift, std::abs(1.0 - norm));
                y.psi /= norm;
            }
            stats.steps = n + 1;
            if ((n + 1) % s.record_stride == 0) {
                emit(n + 1);
            }
        }
        return stats;
    }

private:
    Mat<D> drift_op(double t, const JointState<D>& y) const
    {
        if (ydgs_) {
            const auto& w = *plan_.impl().ydgs;
            const auto idx = static_cast<std::size_t>(std::lround(t / plan_.impl().weight_spacing));
            return detail::ydgs_operator<D>(m_, u_, w.w0[idx], w.w1[idx], w.w2[idx]);
        }
        return detail::drift_operator<D>(m_, k_, u_, order_, t, y.ops);
    }

    void rhs(double t, cd zbar, const JointState<D>& y, JointState<D>& dy)
    {
        cd drive;
        if (u_ == Unravelling::coherent) {
            cd z = zbar;
            for (const cd& acc : y.m) {
                z += acc;
            }
            drive = std::conj(z);
        } else {
            double z = zbar.real();
            for (const cd& acc : y.m) {
                z += acc.real();
            }
            drive = cd{z, 0.0};
        }
        if (!ydgs_ && order_ > 0) {
            if (u_ == Unravelling::coherent) {
                detail::coherent_rhs<D>(m_, k_, order_, t, drive, y.ops, dy.ops);
            } else {
                detail::quadrature_rhs<D>(m_, k_, order_, t, drive.real(), y.ops, dy.ops);
            }
        }
        const Mat<D> F = drift_op(t, y);
        cd exp_l;
        dy.psi = ket_drift<D>(m_, u_, nonlinear_, F, y.psi, drive, &exp_l);
        if (nonlinear_) {
            const cd source =
                (u_ == Unravelling::coherent) ? exp_l : cd{2.0 * exp_l.real(), 0.0};
            for (int j = 0; j < k_.size(); ++j) {
                dy.m[j] = -k_[j].rate() * y.m[j] + k_[j].amplitude * source;
            }
        }
    }

    const TrajectoryPlan& plan_;
    const ModelOps<D>& m_;
    const MemoryKernel& k_;
    Unravelling u_;
    bool nonlinear_;
    int order_;
    bool ydgs_;
};

} // namespace

TrajectoryStats simulate(const TrajectoryPlan& plan, const RngStreamSpec& rng,
                         const StateKet& initial, const RecordCallback& on_record)
{
    if (plan.model().dim() == 2) {
        Engine<2> engine(plan);
        return engine.run(rng, initial, on_record);
    }
    Engine<Eigen::Dynamic> engine(plan);
    return engine.run(rng, initial, on_record);
}

TrajectoryResult run_trajectory(const SystemModel& model, const MemoryKernel& kernel,
                                const ProviderSpec& provider, Variant variant,
                                const StepperConfig& stepper, const RngStreamSpec& rng,
                                const StateKet& initial)
{
    const TrajectoryPlan plan(model, kernel, provider, variant, stepper);
    TrajectoryResult out;
    out.stats = simulate(plan, rng, initial, [&](int, double t, const StateKet& psi) {
        out.t.push_back(t);
        out.rho.push_back(psi * psi.adjoint());
    });
    return out;
}

StateKet drift_nonlinear(const StateKet& psi, const Operator& F, const SystemModel& model,
                         Unravelling u, cd drive)
{
    if (psi.size() != model.dim() || F.rows() != model.dim() || F.cols() != model.dim()) {
        throw InvalidArgument("drift_nonlinear: dimension mismatch");
    }
    if (!(psi.norm() > 1e-12)) {
        throw TrajectoryFailure("drift_nonlinear: norm underflow", 0.0);
    }
    const ModelOps<Eigen::Dynamic> m(model);
    return ket_drift<Eigen::Dynamic>(m, u, true, F, psi, drive, nullptr);
}

StateKet drift_linear(const StateKet& psi, const Operator& F, const SystemModel& model,
                      Unravelling u, cd drive)
{
    if (psi.size() != model.dim() || F.rows() != model.dim() || F.cols() != model.dim()) {
        throw InvalidArgument("drift_linear: dimension mismatch");
    }
    const ModelOps<Eigen::Dynamic> m(model);
    return ket_drift<Eigen::Dynamic>(m, u, false, F, psi, drive, nullptr);
}

} // namespace nmsse
