#include "nmsse/kernel.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "nmsse/error.hpp"

namespace nmsse {

std::string_view to_string(Unravelling u)
{
    return u == Unravelling::coherent ? "coherent" : "quadrature";
}

namespace {

bool same_value(double a, double b)
{
    return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

bool has_mirror_pairing(const std::vector<KernelComponent>& comps)
{
    std::vector<bool> used(comps.size(), false);
    for (std::size_t i = 0; i < comps.size(); ++i) {
        if (used[i]) {
            continue;
        }
        if (comps[i].omega == 0.0) {
            used[i] = true;
            continue;
        }
        bool matched = false;
        for (std::size_t j = i + 1; j < comps.size(); ++j) {
            if (!used[j] && same_value(comps[j].amplitude, comps[i].amplitude) &&
                same_value(comps[j].kappa, comps[i].kappa) &&
                same_value(comps[j].omega, -comps[i].omega)) {
                used[i] = used[j] = true;
                matched = true;
                break;
            }
        }
        if (!matched) {
            return false;
        }
    }
    return true;
}

// e^{x} - 1 for complex x without cancellation near 0.
cd cexpm1(cd x)
{
    const double a = x.real();
    const double b = x.imag();
    const double s = std::sin(0.5 * b);
    const double re = std::expm1(a) * std::cos(b) - 2.0 * s * s;
    const double im = std::exp(a) * std::sin(b);
    return {re, im};
}

void require_nonnegative_time(double t, const char* what)
{
    if (!(t >= 0.0) || !std::isfinite(t)) {
        throw InvalidArgument(std::string(what) + ": time must be finite and >= 0");
    }
}

} // namespace

MemoryKernel::MemoryKernel(std::vector<KernelComponent> components)
    : components_(std::move(components))
{
    if (components_.empty()) {
        throw InvalidArgument("MemoryKernel: at least one component required");
    }
    for (const auto& c : components_) {
        if (!std::isfinite(c.amplitude) || !std::isfinite(c.kappa) || !std::isfinite(c.omega)) {
            throw InvalidArgument("MemoryKernel: non-finite component");
        }
        if (!(c.amplitude > 0.0)) {
            throw InvalidArgument("MemoryKernel: amplitude must be > 0");
        }
        if (!(c.kappa > 0.0)) {
            throw InvalidArgument("MemoryKernel: kappa must be > 0");
        }
    }
    quadrature_ok_ = has_mirror_pairing(components_);
}

MemoryKernel MemoryKernel::lorentzian(double gamma, double kappa, double omega)
{
    return MemoryKernel({KernelComponent{0.25 * gamma * kappa, kappa, omega}});
}

MemoryKernel MemoryKernel::parse(std::string_view spec)
{
    std::vector<KernelComponent> comps;
    std::string text(spec);
    std::stringstream terms(text);
    std::string term;
    while (std::getline(terms, term, ';')) {
        if (term.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        std::stringstream fields(term);
        std::string field;
        std::vector<double> values;
        while (std::getline(fields, field, ',')) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(field, &used);
            } catch (const std::exception&) {
                throw InvalidArgument("kernel: cannot parse number '" + field + "'");
            }
            if (field.find_first_not_of(" \t", used) != std::string::npos) {
                throw InvalidArgument("kernel: trailing characters in '" + field + "'");
            }
            values.push_back(v);
        }
        if (values.size() != 3) {
            throw InvalidArgument("kernel: each component needs A,kappa,omega; got '" + term + "'");
        }
        comps.push_back({values[0], values[1], values[2]});
    }
    return MemoryKernel(std::move(comps));
}

double MemoryKernel::markov_rate() const
{
    double rate = 0.0;
    for (const auto& c : components_) {
        rate += 2.0 * (c.amplitude / c.rate()).real();
    }
    return rate;
}

std::string MemoryKernel::to_string() const
{
    std::ostringstream out;
    out << std::setprecision(17);
    for (std::size_t i = 0; i < components_.size(); ++i) {
        if (i > 0) {
            out << "; ";
        }
        out << components_[i].amplitude << ',' << components_[i].kappa << ','
            << components_[i].omega;
    }
    return out.str();
}

cd phi1(cd x)
{
    if (x == cd{0.0, 0.0}) {
        return {1.0, 0.0};
    }
    return -cexpm1(-x) / x;
}

cd phi2(cd x)
{
    if (std::abs(x) < 1.0) {
        // sum_{n>=2} (-1)^n (n-1)/n! x^{n-2}
        cd sum{0.0, 0.0};
        cd power{1.0, 0.0};
        double factorial = 2.0;
        for (int n = 2; n < 24; ++n) {
            const double sign = (n % 2 == 0) ? 1.0 : -1.0;
            sum += sign * (n - 1) / factorial * power;
            power *= x;
            factorial *= (n + 1);
        }
        return sum;
    }
    return (1.0 - std::exp(-x) * (1.0 + x)) / (x * x);
}

cd alpha_eval(const MemoryKernel& k, double tau)
{
    require_nonnegative_time(tau, "alpha_eval");
    cd sum{0.0, 0.0};
    for (const auto& c : k.components()) {
        sum += c.amplitude * std::exp(-c.rate() * tau);
    }
    return sum;
}

std::vector<cd> cumulative_integral(const MemoryKernel& k, double t)
{
    require_nonnegative_time(t, "cumulative_integral");
    std::vector<cd> out;
    out.reserve(k.size());
    for (const auto& c : k.components()) {
        out.push_back(c.amplitude * t * phi1(c.rate() * t));
    }
    return out;
}

std::vector<cd> first_moment(const MemoryKernel& k, double t)
{
    require_nonnegative_time(t, "first_moment");
    std::vector<cd> out;
    out.reserve(k.size());
    for (const auto& c : k.components()) {
        out.push_back(c.amplitude * t * t * phi2(c.rate() * t));
    }
    return out;
}

BetaParts beta_split(const MemoryKernel& k, double tau)
{
    if (!k.quadrature_ok()) {
        throw KernelNotReal("beta_split: kernel is not real-valued");
    }
    require_nonnegative_time(tau, "beta_split");
    BetaParts parts;
    for (const auto& c : k.components()) {
        const double env = c.amplitude * std::exp(-0.5 * c.kappa * tau);
        parts.cos_parts.push_back(env * std::cos(c.omega * tau));
        parts.sin_parts.push_back(env * std::sin(c.omega * tau));
    }
    return parts;
}

BetaParts cumulative_beta(const MemoryKernel& k, double t)
{
    if (!k.quadrature_ok()) {
        throw KernelNotReal("cumulative_beta: kernel is not real-valued");
    }
    BetaParts parts;
    // int A e^{-kappa tau/2} (cos - i sin)(omega tau) = I0_j
    for (const cd& i0 : cumulative_integral(k, t)) {
        parts.cos_parts.push_back(i0.real());
        parts.sin_parts.push_back(-i0.imag());
    }
    return parts;
}

cd ydgs_w0(const MemoryKernel& k, Unravelling u, double t)
{
    cd sum{0.0, 0.0};
    for (const cd& v : cumulative_integral(k, t)) {
        sum += v;
    }
    return u == Unravelling::coherent ? sum : cd{sum.real(), 0.0};
}

cd ydgs_w1(const MemoryKernel& k, Unravelling u, double t)
{
    cd sum{0.0, 0.0};
    for (const cd& v : first_moment(k, t)) {
        sum += v;
    }
    return u == Unravelling::coherent ? sum : cd{sum.real(), 0.0};
}

YdgsWeights ydgs_weights(const MemoryKernel& k, std::span<const double> grid, Unravelling u)
{
    if (u == Unravelling::quadrature && !k.quadrature_ok()) {
        throw KernelNotReal("ydgs_weights: quadrature weights need a real kernel");
    }
    if (grid.empty()) {
        throw InvalidArgument("ydgs_weights: empty grid");
    }
    if (grid.front() != 0.0) {
        throw InvalidArgument("ydgs_weights: grid must start at t = 0");
    }
    const double dt = grid.size() > 1 ? grid[1] - grid[0] : 0.0;
    for (std::size_t n = 1; n < grid.size(); ++n) {
        const double step = grid[n] - grid[n - 1];
        if (!(dt > 0.0) || std::abs(step - dt) > 1e-9 * dt) {
            throw InvalidArgument("ydgs_weights: grid must be uniform and increasing");
        }
    }

    const int J = k.size();
    YdgsWeights out;
    out.unravelling = u;
    out.t.assign(grid.begin(), grid.end());
    // Per component: aux[2j] = P_j, aux[2j+1] = w2_j.
    std::vector<cd> aux(2 * J, cd{0.0, 0.0});
    auto rhs = [&](double t, const std::vector<cd>& y, std::vector<cd>& dy) {
        const cd source = ydgs_w0(k, u, t);
        for (int j = 0; j < J; ++j) {
            const cd lambda = k[j].rate();
            dy[2 * j] = -lambda * y[2 * j] + k[j].amplitude * source;
            dy[2 * j + 1] = -lambda * y[2 * j + 1] + y[2 * j];
        }
    };
    auto total_w2 = [&]() {
        cd sum{0.0, 0.0};
        for (int j = 0; j < J; ++j) {
            sum += aux[2 * j + 1];
        }
        return u == Unravelling::coherent ? sum : cd{sum.real(), 0.0};
    };

    std::vector<cd> k1(2 * J), k2(2 * J), k3(2 * J), k4(2 * J), tmp(2 * J);
    for (std::size_t n = 0; n < grid.size(); ++n) {
        const double t = grid[n];
        out.w0.push_back(ydgs_w0(k, u, t));
        out.w1.push_back(ydgs_w1(k, u, t));
        out.w2.push_back(total_w2());
        if (n + 1 == grid.size()) {
            break;
        }
        const double h = grid[n + 1] - t;
        rhs(t, aux, k1);
        for (int i = 0; i < 2 * J; ++i) tmp[i] = aux[i] + 0.5 * h * k1[i];
        rhs(t + 0.5 * h, tmp, k2);
        for (int i = 0; i < 2 * J; ++i) tmp[i] = aux[i] + 0.5 * h * k2[i];
        rhs(t + 0.5 * h, tmp, k3);
        for (int i = 0; i < 2 * J; ++i) tmp[i] = aux[i] + h * k3[i];
        rhs(t + h, tmp, k4);
        for (int i = 0; i < 2 * J; ++i) {
            aux[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    return out;
}

} // namespace nmsse
