// hierarchy_kernels.hpp - Dimension-templated right-hand sides of the functional hierarchy
//
// Instantiated with D = 2 for the two-level atom hot path and D = Eigen::Dynamic
// for everything else. The public, dynamically sized API lives in functionals.hpp.

#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nmsse/kernel.hpp"
#include "nmsse/quantum.hpp"

namespace nmsse::detail {

template <int D>
using Mat = Eigen::Matrix<cd, D, D>;
template <int D>
using Vec = Eigen::Matrix<cd, D, 1>;

template <int D>
struct ModelOps {
    explicit ModelOps(const SystemModel& m)
        : dim(m.dim()), L(m.L()), Ld(m.L_dag()), Lx(m.L_x()), H(m.H()),
          minus_iH(cd{0.0, -1.0} * m.H())
    {
        const Mat<D> i_comm = cd{0.0, 1.0} * (H * L - L * H);
        comm_i_H_L = i_comm;
        const Mat<D> ldl = Ld * L;
        comm_LdL_L = ldl * L - L * ldl;
        const Mat<D> lxl = Lx * L;
        comm_LxL_L = lxl * L - L * lxl;
    }

    Mat<D> zero() const { return Mat<D>::Zero(dim, dim); }

    int dim;
    Mat<D> L, Ld, Lx, H, minus_iH;
    Mat<D> comm_i_H_L;  // i[H, L]
    Mat<D> comm_LdL_L;  // [L^dag L, L]
    Mat<D> comm_LxL_L;  // [L_x L, L]
};

// Evolved-operator layout.
//   coherent order 1: F0_j                      (J)
//   coherent order 2: F0_j, then F1_{j,k} at J + j*J + k   (J + J^2)
//   quadrature order 1: Q0cos_j, then Q0sin_j at J + j       (2J)
// Order 0 evolves nothing.
inline int evolved_count(Unravelling u, int order, int J)
{
    if (order == 0) {
        return 0;
    }
    if (u == Unravelling::quadrature) {
        return 2 * J;
    }
    return order == 1 ? J : J + J * J;
}

// Drift operator F^(0) (coherent) or Q^(0) (quadrature) for the current
// evolved operators; order 0 uses the closed closure.
template <int D>
Mat<D> drift_operator(const ModelOps<D>& m, const MemoryKernel& k, Unravelling u, int order,
                      double t, std::span<const Mat<D>> ops)
{
    const int J = k.size();
    Mat<D> total = m.zero();
    if (order == 0) {
        cd weight{0.0, 0.0};
        for (int j = 0; j < J; ++j) {
            const cd i0 = k[j].amplitude * t * phi1(k[j].rate() * t);
            weight += (u == Unravelling::coherent) ? i0 : cd{i0.real(), 0.0};
        }
        return weight * m.L;
    }
    for (int j = 0; j < J; ++j) {
        total += ops[j];
    }
    return total;
}

// d/dt of the evolved coherent functionals. `drive` is z^*(t).
template <int D>
void coherent_rhs(const ModelOps<D>& m, const MemoryKernel& k, int order, double t, cd drive,
                  std::span<const Mat<D>> ops, std::span<Mat<D>> d_ops)
{
    if (order == 0) {
        return;
    }
    const int J = k.size();
    Mat<D> f_total = m.zero();
    for (int j = 0; j < J; ++j) {
        f_total += ops[j];
    }
    // -i[H, X] + z^*[L, X] - [L^dag F, X] = [G, X]
    const Mat<D> ld_f = m.Ld * f_total;
    const Mat<D> gen = m.minus_iH + drive * m.L - ld_f;
    const Mat<D> comm_l_f = m.L * f_total - f_total * m.L;

    if (order == 1) {
        for (int j = 0; j < J; ++j) {
            const cd lambda = k[j].rate();
            const cd i0 = k[j].amplitude * t * phi1(lambda * t);
            const Mat<D>& f = ops[j];
            // sum_k F1_{j,k} closed as I0_j [L, F0_k]
            d_ops[j] = k[j].amplitude * m.L - lambda * f + (gen * f - f * gen) -
                       i0 * (m.Ld * comm_l_f);
        }
        return;
    }

    // order 2: F1 evolved, F2_{j,k,l} closed as I0_j [L, F1_{k,l}].
    std::vector<Mat<D>> row_sum(J, m.zero());
    for (int j = 0; j < J; ++j) {
        for (int kk = 0; kk < J; ++kk) {
            row_sum[j] += ops[J + j * J + kk];
        }
    }
    for (int j = 0; j < J; ++j) {
        const cd lambda = k[j].rate();
        const Mat<D>& f = ops[j];
        d_ops[j] = k[j].amplitude * m.L - lambda * f + (gen * f - f * gen) - m.Ld * row_sum[j];
    }
    for (int j = 0; j < J; ++j) {
        const cd lambda_j = k[j].rate();
        const cd i0_j = k[j].amplitude * t * phi1(lambda_j * t);
        const Mat<D> ld_row = m.Ld * row_sum[j];
        for (int kk = 0; kk < J; ++kk) {
            const Mat<D>& f0k = ops[kk];
            const Mat<D>& f1 = ops[J + j * J + kk];
            const Mat<D> comm_l_f0k = m.L * f0k - f0k * m.L;
            const Mat<D> comm_l_rowk = m.L * row_sum[kk] - row_sum[kk] * m.L;
            d_ops[J + j * J + kk] = k[j].amplitude * comm_l_f0k -
                                    (lambda_j + k[kk].rate()) * f1 + (gen * f1 - f1 * gen) -
                                    (ld_row * f0k - f0k * ld_row) -
                                    i0_j * (m.Ld * comm_l_rowk);
        }
    }
}

// d/dt of the evolved quadrature functionals (order 1). `drive` is the real
// z(t) carried in a complex slot.
template <int D>
void quadrature_rhs(const ModelOps<D>& m, const MemoryKernel& k, int order, double t, double drive,
                    std::span<const Mat<D>> ops, std::span<Mat<D>> d_ops)
{
    if (order == 0) {
        return;
    }
    const int J = k.size();
    Mat<D> q_total = m.zero();
    for (int j = 0; j < J; ++j) {
        q_total += ops[j];
    }
    const Mat<D> gen = m.minus_iH + drive * m.L - m.Lx * q_total;
    const Mat<D> lx_comm = m.Lx * (m.L * q_total - q_total * m.L);
    for (int j = 0; j < J; ++j) {
        const auto& c = k[j];
        const cd i0 = c.amplitude * t * phi1(c.rate() * t);
        const double cos_int = i0.real();
        const double sin_int = -i0.imag();
        const Mat<D>& qc = ops[j];
        const Mat<D>& qs = ops[J + j];
        d_ops[j] = c.amplitude * m.L - 0.5 * c.kappa * qc - c.omega * qs + (gen * qc - qc * gen) -
                   cos_int * lx_comm;
        d_ops[J + j] = -0.5 * c.kappa * qs + c.omega * qc + (gen * qs - qs * gen) -
                       sin_int * lx_comm;
    }
}

template <int D>
Mat<D> ydgs_operator(const ModelOps<D>& m, Unravelling u, cd w0, cd w1, cd w2)
{
    const Mat<D>& nonlinear = (u == Unravelling::coherent) ? m.comm_LdL_L : m.comm_LxL_L;
    return w0 * m.L - w1 * m.comm_i_H_L - w2 * nonlinear;
}

} // namespace nmsse::detail
