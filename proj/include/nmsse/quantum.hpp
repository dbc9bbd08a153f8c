// quantum.hpp - Small dense operator algebra, states and the system model

#pragma once

#include <complex>
#include <optional>

#include <Eigen/Dense>

namespace nmsse {

using cd = std::complex<double>;
using Operator = Eigen::MatrixXcd;
using StateKet = Eigen::VectorXcd;
using DensityMatrix = Eigen::MatrixXcd;

inline constexpr int kMaxSystemDim = 64;
inline constexpr int kMaxEnlargedDim = 4096;

struct BlochVector {
    double x{0.0};
    double y{0.0};
    double z{0.0};
};

Operator commutator(const Operator& a, const Operator& b);
Operator adjoint(const Operator& a);
cd trace(const Operator& a);

// <psi|A|psi> without normalisation.
cd expectation(const Operator& a, const StateKet& psi);
// <psi|A|psi>/<psi|psi>; throws DegenerateState for a zero-norm ket.
cd normalized_expectation(const Operator& a, const StateKet& psi);

StateKet normalized(const StateKet& psi);
DensityMatrix density_from_ket(const StateKet& psi);

// Requires d = 2 with basis order (|e>, |g>).
BlochVector bloch_from_density(const DensityMatrix& rho);
DensityMatrix density_from_bloch(const BlochVector& b);

// Tensor product with A-index-major layout: (A (x) B)(i*nb+k, j*nb+l) = A(i,j) B(k,l).
Operator kron(const Operator& a, const Operator& b, int max_dim = kMaxEnlargedDim);

// Trace out the trailing factor of a (d*m)x(d*m) operator laid out as in kron.
Operator partial_trace_trailing(const Operator& w, int d);

bool is_finite(const Operator& a);
double hermiticity_error(const Operator& a);
double min_eigenvalue_hermitian(const Operator& a);

// Throws InvalidArgument when rho violates the density-matrix invariants
// (hermiticity 1e-10, unit trace 1e-9, eigenvalues >= -1e-8 for d <= 4).
void validate_density(const DensityMatrix& rho);

// Two-level atom operators in the basis (|e>, |g>), sigma = |g><e|.
namespace tla {
Operator sigma();
Operator sigma_dag();
Operator sigma_x();
Operator sigma_y();
Operator sigma_z();
Operator identity();
StateKet excited();
StateKet ground();
} // namespace tla

struct TlaParams {
    double delta{3.0};
    double chi{5.0};
};

// System side of the open-system problem: coupling operator L and the
// (time-independent) interaction-picture Hamiltonian.
class SystemModel {
public:
    SystemModel(Operator coupling, Operator hamiltonian);

    // H = (delta/2) sigma_z + (chi/2) sigma_x, L = sigma.
    static SystemModel driven_tla(double delta, double chi);

    int dim() const { return static_cast<int>(l_.rows()); }
    const Operator& L() const { return l_; }
    const Operator& L_dag() const { return l_dag_; }
    const Operator& L_x() const { return l_x_; }
    const Operator& H() const { return h_; }
    const std::optional<TlaParams>& tla() const { return tla_; }

private:
    Operator l_;
    Operator l_dag_;
    Operator l_x_;
    Operator h_;
    std::optional<TlaParams> tla_;
};

} // namespace nmsse
