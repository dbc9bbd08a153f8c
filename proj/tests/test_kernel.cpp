#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "nmsse/error.hpp"
#include "nmsse/kernel.hpp"

using namespace nmsse;

namespace {

cd sum(const std::vector<cd>& v)
{
    cd s{0.0, 0.0};
    for (const cd& x : v) s += x;
    return s;
}

MemoryKernel fig1() { return MemoryKernel::lorentzian(1.0, 1.0); }

std::vector<double> grid(double dt, int n)
{
    std::vector<double> g(n + 1);
    for (int i = 0; i <= n; ++i) g[i] = i * dt;
    return g;
}

} // namespace

TEST_CASE("alpha at zero lag")
{
    CHECK(alpha_eval(fig1(), 0.0) == cd{0.25, 0.0});
    const MemoryKernel k({{0.3, 1.0, 2.0}, {0.7, 4.0, -1.0}});
    CHECK(alpha_eval(k, 0.0) == cd{1.0, 0.0});
    CHECK(std::abs(alpha_eval(fig1(), 2.0) - 0.25 * std::exp(-1.0)) < 1e-16);
    CHECK(std::abs(alpha_eval(k, 80.0)) < std::exp(-40.0));
    CHECK_THROWS_AS(alpha_eval(k, -0.1), InvalidArgument);
}

TEST_CASE("cumulative integral closed form")
{
    const auto zero = cumulative_integral(fig1(), 0.0);
    REQUIRE(zero.size() == 1);
    CHECK(zero[0] == cd{0.0, 0.0});
    const cd i2 = cumulative_integral(fig1(), 2.0)[0];
    CHECK(std::abs(i2 - 0.5 * (1.0 - std::exp(-1.0))) < 1e-15);
    CHECK(std::abs(i2.real() - 0.31606) < 1e-5);
    CHECK(std::abs(cumulative_integral(fig1(), 200.0)[0] - 0.5) < 1e-15);
}

TEST_CASE("cumulative integral against trapezoid quadrature")
{
    const MemoryKernel k({{0.25, 1.0, 0.0}, {0.4, 2.0, 1.0}});
    const double h = 1e-4;
    cd acc{0.0, 0.0};
    cd prev = alpha_eval(k, 0.0);
    double worst = 0.0;
    for (int n = 1; n <= 100000; ++n) {
        const cd cur = alpha_eval(k, n * h);
        acc += 0.5 * h * (prev + cur);
        prev = cur;
        if (n % 5000 == 0) {
            worst = std::max(worst, std::abs(sum(cumulative_integral(k, n * h)) - acc));
        }
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("first moment closed form")
{
    // A tau e^{-tau/2} integrated: 4A(1 - (1 + t/2) e^{-t/2})
    for (double t : {0.0, 1e-6, 0.3, 2.0, 9.0}) {
        const cd m = first_moment(fig1(), t)[0];
        const double oracle = t < 1e-3 ? 0.25 * t * t / 2.0
                                       : 1.0 * (1.0 - (1.0 + 0.5 * t) * std::exp(-0.5 * t));
        CHECK(std::abs(m - oracle) < 1e-12);
    }
}

TEST_CASE("phi helpers near zero")
{
    CHECK(phi1(cd{0.0, 0.0}) == cd{1.0, 0.0});
    const cd x{1e-9, 2e-9};
    CHECK(std::abs(phi1(x) - (1.0 - x / 2.0)) < 1e-15);
    CHECK(std::abs(phi2(x) - (0.5 - x / 3.0)) < 1e-15);
    const cd y{3.0, -1.0};
    CHECK(std::abs(phi2(y) - (1.0 - (1.0 + y) * std::exp(-y)) / (y * y)) < 1e-15);
    const cd z{0.9, 0.2};
    CHECK(std::abs(phi2(z) - (1.0 - (1.0 + z) * std::exp(-z)) / (z * z)) < 1e-14);
}

TEST_CASE("beta split")
{
    const BetaParts at0 = beta_split(fig1(), 0.0);
    CHECK(at0.cos_parts[0] == 0.25);
    CHECK(at0.sin_parts[0] == 0.0);
    for (double tau : {0.5, 3.0, 7.0}) CHECK(beta_split(fig1(), tau).sin_parts[0] == 0.0);

    const MemoryKernel pair({{1.0, 2.0, std::numbers::pi}, {1.0, 2.0, -std::numbers::pi}});
    CHECK(pair.quadrature_ok());
    const BetaParts b = beta_split(pair, 1.0);
    CHECK(std::abs(b.cos_parts[0] + std::exp(-1.0)) < 1e-15);
    CHECK(std::abs(b.sin_parts[0]) < 1e-15);

    const MemoryKernel lone({{1.0, 2.0, std::numbers::pi}});
    CHECK_FALSE(lone.quadrature_ok());
    CHECK_THROWS_AS(beta_split(lone, 1.0), KernelNotReal);
    CHECK_THROWS_AS(cumulative_beta(lone, 1.0), KernelNotReal);
}

TEST_CASE("cumulative beta integrates the cos and sin parts")
{
    const MemoryKernel pair({{0.5, 1.0, 2.0}, {0.5, 1.0, -2.0}});
    const double h = 1e-4;
    double c = 0.0, s = 0.0;
    BetaParts prev = beta_split(pair, 0.0);
    for (int n = 1; n <= 30000; ++n) {
        const BetaParts cur = beta_split(pair, n * h);
        c += 0.5 * h * (prev.cos_parts[0] + cur.cos_parts[0]);
        s += 0.5 * h * (prev.sin_parts[0] + cur.sin_parts[0]);
        prev = cur;
    }
    const BetaParts cb = cumulative_beta(pair, 3.0);
    CHECK(std::abs(cb.cos_parts[0] - c) < 1e-8);
    CHECK(std::abs(cb.sin_parts[0] - s) < 1e-8);
}

TEST_CASE("markov rate")
{
    CHECK(std::abs(fig1().markov_rate() - 1.0) < 1e-15);
    CHECK(std::abs(MemoryKernel::lorentzian(2.0, 100.0).markov_rate() - 2.0) < 1e-13);
    // 2 Re A/(kappa/2 + i omega)
    const MemoryKernel k({{1.0, 2.0, 1.0}});
    CHECK(std::abs(k.markov_rate() - 1.0) < 1e-15);
}

TEST_CASE("kernel parsing")
{
    const MemoryKernel k = MemoryKernel::parse("0.25,1,0; 0.5, 2, -1.5");
    REQUIRE(k.size() == 2);
    CHECK(k[1].amplitude == 0.5);
    CHECK(k[1].kappa == 2.0);
    CHECK(k[1].omega == -1.5);
    CHECK(MemoryKernel::parse(k.to_string()).components()[1].omega == -1.5);

    CHECK_THROWS_AS(MemoryKernel::parse(""), InvalidArgument);
    CHECK_THROWS_AS(MemoryKernel::parse("0.25,1"), InvalidArgument);
    CHECK_THROWS_AS(MemoryKernel::parse("0.25,1,0x"), InvalidArgument);
    CHECK_THROWS_AS(MemoryKernel::parse("0,1,0"), InvalidArgument);
    CHECK_THROWS_AS(MemoryKernel::parse("0.25,-1,0"), InvalidArgument);
    CHECK_THROWS_AS(MemoryKernel::parse("0.25,nan,0"), InvalidArgument);
}

TEST_CASE("post-Markovian weights")
{
    const double dt = 1e-3;
    const auto g = grid(dt, 10000);
    const YdgsWeights w = ydgs_weights(fig1(), g);
    CHECK(w.w0[0] == cd{0.0, 0.0});
    CHECK(w.w1[0] == cd{0.0, 0.0});
    CHECK(w.w2[0] == cd{0.0, 0.0});
    for (std::size_t n = 0; n < g.size(); n += 250) {
        CHECK(std::abs(w.w0[n] - sum(cumulative_integral(fig1(), g[n]))) < 1e-12);
    }
    for (std::size_t n = 1; n < g.size(); ++n) {
        CHECK(std::abs(w.w0[n]) >= std::abs(w.w0[n - 1]));
    }
    CHECK(std::abs(ydgs_w1(fig1(), Unravelling::coherent, 200.0) - 1.0) < 1e-12);

    // g2(t) = int_0^t alpha(t-s)(t-s) g0(s) ds by trapezoid, with g0 itself
    // accumulated by trapezoid.
    const std::size_t n_steps = g.size();
    std::vector<double> g0(n_steps, 0.0);
    for (std::size_t n = 1; n < n_steps; ++n) {
        g0[n] = g0[n - 1] + 0.5 * dt * (alpha_eval(fig1(), g[n - 1]) + alpha_eval(fig1(), g[n])).real();
    }
    double worst = 0.0;
    for (std::size_t n = 500; n < n_steps; n += 500) {
        const double t = g[n];
        double acc = 0.0;
        for (std::size_t m = 0; m <= n; ++m) {
            const double f = alpha_eval(fig1(), t - g[m]).real() * (t - g[m]) * g0[m];
            acc += (m == 0 || m == n) ? 0.5 * f : f;
        }
        worst = std::max(worst, std::abs(w.w2[n] - acc * dt));
    }
    CHECK(worst < 1e-5);

    const YdgsWeights q = ydgs_weights(fig1(), g, Unravelling::quadrature);
    CHECK(std::abs(q.w2[4000] - w.w2[4000]) < 1e-15);

    CHECK_THROWS_AS(ydgs_weights(fig1(), std::vector<double>{0.0, 0.1, 0.3}), InvalidArgument);
    CHECK_THROWS_AS(ydgs_weights(fig1(), std::vector<double>{}), InvalidArgument);
    CHECK_THROWS_AS(ydgs_weights(MemoryKernel({{1.0, 1.0, 1.0}}), g, Unravelling::quadrature),
                    KernelNotReal);
}
