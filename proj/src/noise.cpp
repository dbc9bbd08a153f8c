#include "nmsse/noise.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss.hpp>

#include "nmsse/error.hpp"

namespace nmsse {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct StepCovariance {
    double xx;
    cd xy;
    double yy;
};

// Covariance of X = int_0^h a(u) dW, Y = int_0^h b(u) dW for unit complex
// white noise, a(u) = e^{-lambda u}, b(u) = (1 - e^{-lambda u})/lambda.
StepCovariance unit_step_covariance(cd lambda, double h)
{
    const double kappa = 2.0 * lambda.real();
    if (std::abs(lambda) * h <= 4.0) {
        using Quad = boost::math::quadrature::gauss<double, 20>;
        auto b = [&](double u) { return u * phi1(lambda * u); };
        const double xx = Quad::integrate([&](double u) { return std::exp(-kappa * u); }, 0.0, h);
        const double xy_re = Quad::integrate(
            [&](double u) { return (std::exp(-lambda * u) * std::conj(b(u))).real(); }, 0.0, h);
        const double xy_im = Quad::integrate(
            [&](double u) { return (std::exp(-lambda * u) * std::conj(b(u))).imag(); }, 0.0, h);
        const double yy = Quad::integrate([&](double u) { return std::norm(b(u)); }, 0.0, h);
        return {xx, {xy_re, xy_im}, yy};
    }
    const cd e_lambda = h * phi1(lambda * h);
    const double e_kappa = h * phi1(cd{kappa * h, 0.0}).real();
    const double xx = e_kappa;
    const cd xy = (e_lambda - e_kappa) / std::conj(lambda);
    const double yy = (h - 2.0 * e_lambda.real() + e_kappa) / std::norm(lambda);
    return {xx, xy, yy};
}

} // namespace

std::uint64_t stream_seed(const RngStreamSpec& spec)
{
    return splitmix64(spec.master_seed ^ splitmix64(spec.trajectory_index ^ 0x6a09e667f3bcc909ULL));
}

NoiseState::NoiseState(const MemoryKernel& kernel, Unravelling mode, const RngStreamSpec& spec,
                       int substeps)
    : kernel_(&kernel), mode_(mode), substeps_(substeps), engine_(stream_seed(spec))
{
    if (mode == Unravelling::quadrature && !kernel.quadrature_ok()) {
        throw KernelNotReal("init_noise: quadrature noise needs a real kernel");
    }
    if (substeps < 1) {
        throw InvalidArgument("init_noise: substeps must be >= 1");
    }
    w_.resize(kernel.size());
    shift_.assign(kernel.size(), cd{0.0, 0.0});
    for (int j = 0; j < kernel.size(); ++j) {
        w_[j] = std::sqrt(kernel[j].amplitude) * standard_complex_normal();
    }
}

cd NoiseState::standard_complex_normal()
{
    const double re = normal_(engine_);
    const double im = normal_(engine_);
    return cd{re, im} * std::sqrt(0.5);
}

cd NoiseState::project(cd sum_w) const
{
    if (mode_ == Unravelling::coherent) {
        return sum_w;
    }
    return {std::sqrt(2.0) * sum_w.real(), 0.0};
}

cd NoiseState::value() const
{
    cd sum{0.0, 0.0};
    for (const cd& w : w_) {
        sum += w;
    }
    return project(sum);
}

cd NoiseState::decay_factor(int j, double h) const
{
    return std::exp(-(*kernel_)[j].rate() * h);
}

const NoiseState::StepCoefficients& NoiseState::coefficients(double h)
{
    if (cache_.h == h) {
        return cache_;
    }
    const int J = size();
    StepCoefficients c;
    c.h = h;
    for (int j = 0; j < J; ++j) {
        const auto& comp = (*kernel_)[j];
        const cd lambda = comp.rate();
        // sigma^2 = A kappa keeps the stationary variance at A.
        const double sigma2 = comp.amplitude * comp.kappa;
        const StepCovariance cov = unit_step_covariance(lambda, h);
        const double l11 = std::sqrt(sigma2 * cov.xx);
        const cd l21 = l11 > 0.0 ? std::conj(sigma2 * cov.xy) / l11 : cd{0.0, 0.0};
        const double rest = sigma2 * cov.yy - std::norm(l21);
        c.decay.push_back(std::exp(-lambda * h));
        c.mean_int.push_back(h * phi1(lambda * h));
        c.l11.push_back(l11);
        c.l21.push_back(l21);
        c.l22.push_back(rest > 0.0 ? std::sqrt(rest) : 0.0);
    }
    cache_ = std::move(c);
    return cache_;
}

NoiseSample NoiseState::step(double h)
{
    if (!(h > 0.0) || !std::isfinite(h)) {
        throw InvalidArgument("step_noise: step must be > 0");
    }
    NoiseSample sample;
    sample.start = value();
    const double hs = h / substeps_;
    const StepCoefficients& c = coefficients(hs);
    cd integral_sum{0.0, 0.0};
    for (int s = 0; s < substeps_; ++s) {
        for (int j = 0; j < size(); ++j) {
            const cd xi1 = standard_complex_normal();
            const cd xi2 = standard_complex_normal();
            const cd x = c.l11[j] * xi1;
            const cd y = c.l21[j] * xi1 + c.l22[j] * xi2;
            integral_sum += w_[j] * c.mean_int[j] + y;
            w_[j] = w_[j] * c.decay[j] + x;
        }
    }
    t_ += h;
    sample.end = value();
    sample.average = project(integral_sum / h);
    return sample;
}

cd NoiseState::advance_shift(cd expectation, double h)
{
    if (!(h > 0.0)) {
        throw InvalidArgument("girsanov_shift: step must be > 0");
    }
    for (int j = 0; j < size(); ++j) {
        const cd lambda = (*kernel_)[j].rate();
        shift_[j] = shift_[j] * std::exp(-lambda * h) +
                    (*kernel_)[j].amplitude * expectation * h * phi1(lambda * h);
    }
    return shift();
}

cd NoiseState::shift() const { return combine_shift(mode_, shift_); }

NoiseState init_noise(const MemoryKernel& kernel, Unravelling mode, const RngStreamSpec& spec)
{
    return NoiseState(kernel, mode, spec);
}

NoiseSample step_noise(NoiseState& state, double h) { return state.step(h); }

cd girsanov_shift(NoiseState& state, cd expectation, double h)
{
    return state.advance_shift(expectation, h);
}

void girsanov_rate(const MemoryKernel& kernel, std::span<const cd> accumulators, cd expectation,
                   std::span<cd> rate)
{
    for (int j = 0; j < kernel.size(); ++j) {
        rate[j] = -kernel[j].rate() * accumulators[j] + kernel[j].amplitude * expectation;
    }
}

cd combine_shift(Unravelling mode, std::span<const cd> accumulators)
{
    cd sum{0.0, 0.0};
    for (const cd& m : accumulators) {
        sum += m;
    }
    if (mode == Unravelling::quadrature) {
        return {sum.real(), 0.0};
    }
    return sum;
}

} // namespace nmsse

namespace nmsse {

namespace {

struct ComplexMoments {
    double n{0.0};
    cd sum{0.0, 0.0};
    double sum_re2{0.0};
    double sum_im2{0.0};

    void add(cd v)
    {
        n += 1.0;
        sum += v;
        sum_re2 += v.real() * v.real();
        sum_im2 += v.imag() * v.imag();
    }
    cd mean() const { return sum / n; }
    cd standard_error() const
    {
        const cd m = mean();
        const double vr = std::max(0.0, (sum_re2 - n * m.real() * m.real()) / (n - 1.0));
        const double vi = std::max(0.0, (sum_im2 - n * m.imag() * m.imag()) / (n - 1.0));
        return {std::sqrt(vr / n), std::sqrt(vi / n)};
    }
};

} // namespace

NoiseCheck noise_check(const MemoryKernel& kernel, Unravelling mode, std::uint64_t seed,
                       std::int64_t npaths, double dt,
                       const std::vector<std::pair<double, double>>& pairs)
{
    if (npaths < 2 || !(dt > 0.0)) {
        throw InvalidArgument("noise_check: need npaths >= 2 and dt > 0");
    }
    auto grid_index = [&](double t) {
        const double x = t / dt;
        const long n = std::lround(x);
        if (t < 0.0 || std::abs(x - n) > 1e-9 * std::max(1.0, x)) {
            throw InvalidArgument("noise_check: times must be non-negative grid points");
        }
        return n;
    };
    long last = 0;
    std::vector<std::pair<long, long>> idx;
    for (const auto& [t, s] : pairs) {
        if (t < s) {
            throw InvalidArgument("noise_check: pairs need t >= s");
        }
        idx.emplace_back(grid_index(t), grid_index(s));
        last = std::max(last, idx.back().first);
    }
    std::vector<ComplexMoments> conj_m(pairs.size()), plain_m(pairs.size());
    ComplexMoments var_m;
    double max_imag = 0.0;
    std::vector<cd> path(last + 1);
    for (std::int64_t p = 0; p < npaths; ++p) {
        NoiseState noise(kernel, mode, {seed, static_cast<std::uint64_t>(p)});
        path[0] = noise.value();
        for (long n = 1; n <= last; ++n) {
            path[n] = noise.step(dt).end;
        }
        for (const cd& z : path) {
            max_imag = std::max(max_imag, std::abs(z.imag()));
        }
        var_m.add(std::norm(path[0]));
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const cd zt = path[idx[k].first];
            const cd zs = path[idx[k].second];
            conj_m[k].add(zt * std::conj(zs));
            plain_m[k].add(zt * zs);
        }
    }
    NoiseCheck out;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const double tau = pairs[k].first - pairs[k].second;
        cd target = alpha_eval(kernel, tau);
        if (mode == Unravelling::quadrature) {
            target = {target.real(), 0.0};
        }
        out.conjugate.push_back({pairs[k].first, pairs[k].second, conj_m[k].mean(),
                                 conj_m[k].standard_error(), target});
        out.plain.push_back({pairs[k].first, pairs[k].second, plain_m[k].mean(),
                             plain_m[k].standard_error(),
                             mode == Unravelling::quadrature ? target : cd{0.0, 0.0}});
    }
    out.variance = var_m.mean().real();
    out.variance_error = var_m.standard_error().real();
    out.variance_target = alpha_eval(kernel, 0.0).real();
    out.max_abs_imag = max_imag;
    return out;
}

} // namespace nmsse
