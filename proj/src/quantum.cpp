#include "nmsse/quantum.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "nmsse/error.hpp"

namespace nmsse {

namespace {

void require_square(const Operator& a, const char* what)
{
    if (a.rows() != a.cols() || a.rows() < 1) {
        throw InvalidArgument(std::string(what) + ": operator must be square with dim >= 1");
    }
}

void require_same_dim(const Operator& a, const Operator& b, const char* what)
{
    require_square(a, what);
    require_square(b, what);
    if (a.rows() != b.rows()) {
        throw InvalidArgument(std::string(what) + ": dimension mismatch");
    }
}

} // namespace

Operator commutator(const Operator& a, const Operator& b)
{
    require_same_dim(a, b, "commutator");
    return a * b - b * a;
}

Operator adjoint(const Operator& a) { return a.adjoint(); }

cd trace(const Operator& a)
{
    require_square(a, "trace");
    return a.trace();
}

cd expectation(const Operator& a, const StateKet& psi)
{
    require_square(a, "expectation");
    if (a.rows() != psi.size()) {
        throw InvalidArgument("expectation: dimension mismatch");
    }
    return psi.dot(a * psi);
}

cd normalized_expectation(const Operator& a, const StateKet& psi)
{
    const double norm2 = psi.squaredNorm();
    if (!(norm2 > 0.0)) {
        throw DegenerateState("normalized_expectation: zero-norm state");
    }
    return expectation(a, psi) / norm2;
}

StateKet normalized(const StateKet& psi)
{
    const double n = psi.norm();
    if (!(n > 0.0)) {
        throw DegenerateState("normalized: zero-norm state");
    }
    return psi / n;
}

DensityMatrix density_from_ket(const StateKet& psi) { return psi * psi.adjoint(); }

BlochVector bloch_from_density(const DensityMatrix& rho)
{
    require_square(rho, "bloch_from_density");
    if (rho.rows() != 2) {
        throw UnsupportedDimension("bloch_from_density: requires d = 2, got d = " +
                                   std::to_string(rho.rows()));
    }
    const cd x = (rho * tla::sigma_x()).trace();
    const cd y = (rho * tla::sigma_y()).trace();
    const cd z = (rho * tla::sigma_z()).trace();
    constexpr double residue = 1e-10;
    // Non-Hermitian input produces a complex trace; reject it instead of
    // silently dropping the imaginary part.
    if (std::abs(x.imag()) > residue || std::abs(y.imag()) > residue ||
        std::abs(z.imag()) > residue) {
        throw InvalidArgument("bloch_from_density: complex Bloch component, rho not Hermitian");
    }
    return {x.real(), y.real(), z.real()};
}

DensityMatrix density_from_bloch(const BlochVector& b)
{
    return 0.5 * (tla::identity() + b.x * tla::sigma_x() + b.y * tla::sigma_y() +
                  b.z * tla::sigma_z());
}

Operator kron(const Operator& a, const Operator& b, int max_dim)
{
    const Eigen::Index rows = a.rows() * b.rows();
    const Eigen::Index cols = a.cols() * b.cols();
    if (rows > max_dim || cols > max_dim) {
        throw CapacityError("kron: dimension " + std::to_string(rows) + " exceeds cap " +
                            std::to_string(max_dim));
    }
    Operator out(rows, cols);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

Operator partial_trace_trailing(const Operator& w, int d)
{
    require_square(w, "partial_trace_trailing");
    if (d < 1 || w.rows() % d != 0) {
        throw InvalidArgument("partial_trace_trailing: d does not divide dimension");
    }
    const Eigen::Index m = w.rows() / d;
    Operator out = Operator::Zero(d, d);
    for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
            cd acc{0.0, 0.0};
            for (Eigen::Index k = 0; k < m; ++k) {
                acc += w(a * m + k, b * m + k);
            }
            out(a, b) = acc;
        }
    }
    return out;
}

bool is_finite(const Operator& a) { return a.allFinite(); }

double hermiticity_error(const Operator& a)
{
    require_square(a, "hermiticity_error");
    return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

double min_eigenvalue_hermitian(const Operator& a)
{
    require_square(a, "min_eigenvalue_hermitian");
    const Operator herm = 0.5 * (a + a.adjoint());
    Eigen::SelfAdjointEigenSolver<Operator> solver(herm, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

void validate_density(const DensityMatrix& rho)
{
    require_square(rho, "validate_density");
    if (!rho.allFinite()) {
        throw InvalidArgument("density matrix has non-finite entries");
    }
    if (hermiticity_error(rho) > 1e-10) {
        throw InvalidArgument("density matrix is not Hermitian");
    }
    if (std::abs(rho.trace() - cd{1.0, 0.0}) > 1e-9) {
        throw InvalidArgument("density matrix trace differs from one");
    }
    if (rho.rows() <= 4) {
        if (min_eigenvalue_hermitian(rho) < -1e-8) {
            throw InvalidArgument("density matrix has a negative eigenvalue");
        }
    } else {
        // Positivity via a Cholesky attempt on the shifted matrix.
        const Operator shifted = rho + 1e-8 * Operator::Identity(rho.rows(), rho.cols());
        Eigen::LLT<Operator> llt(shifted);
        if (llt.info() != Eigen::Success) {
            throw InvalidArgument("density matrix is not positive semidefinite");
        }
    }
}

namespace tla {

Operator sigma()
{
    Operator s = Operator::Zero(2, 2);
    s(1, 0) = 1.0;
    return s;
}

Operator sigma_dag() { return sigma().adjoint(); }

Operator sigma_x()
{
    Operator s(2, 2);
    s << 0.0, 1.0, 1.0, 0.0;
    return s;
}

Operator sigma_y()
{
    Operator s(2, 2);
    s << cd{0.0, 0.0}, cd{0.0, -1.0}, cd{0.0, 1.0}, cd{0.0, 0.0};
    return s;
}

Operator sigma_z()
{
    Operator s(2, 2);
    s << 1.0, 0.0, 0.0, -1.0;
    return s;
}

Operator identity() { return Operator::Identity(2, 2); }

StateKet excited()
{
    StateKet k = StateKet::Zero(2);
    k(0) = 1.0;
    return k;
}

StateKet ground()
{
    StateKet k = StateKet::Zero(2);
    k(1) = 1.0;
    return k;
}

} // namespace tla

SystemModel::SystemModel(Operator coupling, Operator hamiltonian)
    : l_(std::move(coupling)), h_(std::move(hamiltonian))
{
    require_same_dim(l_, h_, "SystemModel");
    if (l_.rows() > kMaxSystemDim) {
        throw CapacityError("SystemModel: dimension exceeds " + std::to_string(kMaxSystemDim));
    }
    if (!l_.allFinite() || !h_.allFinite()) {
        throw InvalidArgument("SystemModel: non-finite operator entries");
    }
    if (hermiticity_error(h_) > 1e-12) {
        throw InvalidArgument("SystemModel: Hamiltonian must be Hermitian");
    }
    l_dag_ = l_.adjoint();
    l_x_ = l_ + l_dag_;
}

SystemModel SystemModel::driven_tla(double delta, double chi)
{
    if (!std::isfinite(delta) || !std::isfinite(chi)) {
        throw InvalidArgument("driven_tla: non-finite parameters");
    }
    SystemModel m(tla::sigma(), 0.5 * delta * tla::sigma_z() + 0.5 * chi * tla::sigma_x());
    m.tla_ = TlaParams{delta, chi};
    return m;
}

} // namespace nmsse
