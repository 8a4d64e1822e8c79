#pragma once

// Dense operators and states on the truncated two-mode Fock space
// (logical mode a ⊗ blockade mode b). Composite index k = i_a · n_b + i_b.

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "stimosc/errors.hpp"

namespace stimosc {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

struct HilbertSpace {
    int n_a = 10;  // logical-mode truncation (levels 0..n_a-1)
    int n_b = 5;   // blockade-mode truncation

    void validate() const {
        if (n_a < 2 || n_b < 2) throw std::invalid_argument("HilbertSpace: n_a and n_b must be >= 2");
    }
    int dim() const { return n_a * n_b; }
    int index(int i_a, int i_b) const { return i_a * n_b + i_b; }
    int logical_of(int k) const { return k / n_b; }
    int blockade_of(int k) const { return k % n_b; }

    friend bool operator==(const HilbertSpace&, const HilbertSpace&) = default;
};

enum class Mode { logical, blockade };

namespace fock {

inline Matrix annihilation(int n) {
    Matrix a = Matrix::Zero(n, n);
    for (int k = 1; k < n; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
    return a;
}

inline Matrix number(int n) {
    Matrix m = Matrix::Zero(n, n);
    for (int k = 0; k < n; ++k) m(k, k) = static_cast<double>(k);
    return m;
}

inline Matrix parity(int n) {
    Matrix p = Matrix::Zero(n, n);
    for (int k = 0; k < n; ++k) p(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
    return p;
}

inline Vector basis(int n, int k) {
    Vector v = Vector::Zero(n);
    v(k) = 1.0;
    return v;
}

// Scaling-and-squaring Padé exponential (Eigen's MatrixFunctions).
inline Matrix expm(const Matrix& generator) { return generator.exp(); }

// exp(α a† − α* a) on an n-level oscillator.
inline Matrix displacement(int n, cplx alpha) {
    const Matrix a = annihilation(n);
    const Matrix generator = alpha * a.adjoint() - std::conj(alpha) * a;
    return expm(generator);
}

// Truncated coherent state: displacement of vacuum computed in a padded space
// then cut back, so the low-lying amplitudes are free of edge effects.
inline Vector coherent(int n, cplx alpha, int padding = 30) {
    const Vector full = displacement(n + padding, alpha).col(0);
    Vector v = full.head(n);
    return v / v.norm();
}

inline Matrix thermal(int n, double nbar) {
    Matrix rho = Matrix::Zero(n, n);
    if (nbar <= 0.0) {
        rho(0, 0) = 1.0;
        return rho;
    }
    const double ratio = nbar / (1.0 + nbar);
    double total = 0.0;
    for (int k = 0; k < n; ++k) {
        rho(k, k) = std::pow(ratio, k);
        total += std::pow(ratio, k);
    }
    return rho / total;
}

}  // namespace fock

inline Matrix kron(const Matrix& a, const Matrix& b) { return Eigen::kroneckerProduct(a, b).eval(); }

class Operator {
public:
    Operator() = default;
    Operator(HilbertSpace space, Matrix matrix, bool hermitian = false)
        : space_(space), matrix_(std::move(matrix)), hermitian_(hermitian) {
        space_.validate();
        if (matrix_.rows() != space_.dim() || matrix_.cols() != space_.dim()) {
            throw std::invalid_argument("Operator: matrix dimension does not match space");
        }
        if (hermitian_) {
            const double dev = (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff();
            if (dev > 1e-12 * std::max(1.0, matrix_.cwiseAbs().maxCoeff())) {
                std::ostringstream msg;
                msg << "Operator: hermiticity flag set but max|H - H^dag| = " << dev;
                throw std::invalid_argument(msg.str());
            }
        }
    }

    const HilbertSpace& space() const noexcept { return space_; }
    const Matrix& matrix() const noexcept { return matrix_; }
    bool hermitian() const noexcept { return hermitian_; }
    int dim() const noexcept { return space_.dim(); }

    Operator adjoint() const { return {space_, matrix_.adjoint(), hermitian_}; }

    friend Operator operator+(const Operator& x, const Operator& y) {
        check_same(x, y);
        return {x.space_, x.matrix_ + y.matrix_, x.hermitian_ && y.hermitian_};
    }
    friend Operator operator-(const Operator& x, const Operator& y) {
        check_same(x, y);
        return {x.space_, x.matrix_ - y.matrix_, x.hermitian_ && y.hermitian_};
    }
    friend Operator operator*(const Operator& x, const Operator& y) {
        check_same(x, y);
        return {x.space_, x.matrix_ * y.matrix_, false};
    }
    friend Operator operator*(double s, const Operator& x) { return {x.space_, s * x.matrix_, x.hermitian_}; }
    friend Operator operator*(cplx s, const Operator& x) {
        return {x.space_, s * x.matrix_, x.hermitian_ && s.imag() == 0.0};
    }

private:
    static void check_same(const Operator& x, const Operator& y) {
        if (!(x.space_ == y.space_)) throw std::invalid_argument("Operator: space mismatch");
    }

    HilbertSpace space_{};
    Matrix matrix_;
    bool hermitian_ = false;
};

struct StateHealth {
    double trace_error = 0.0;      // |Tr ρ − 1|
    double hermiticity_error = 0.0;  // max |ρ − ρ†|
    double min_eigenvalue = 0.0;
};

inline StateHealth state_health(const Matrix& rho) {
    StateHealth h;
    h.trace_error = std::abs(rho.trace() - cplx(1.0, 0.0));
    h.hermiticity_error = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    const Matrix herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(herm, Eigen::EigenvaluesOnly);
    h.min_eigenvalue = solver.eigenvalues().minCoeff();
    return h;
}

struct StateTolerance {
    double trace = 1e-9;
    double hermiticity = 1e-10;
    double min_eigenvalue = -1e-8;
};

class DensityMatrix {
public:
    using Tolerance = StateTolerance;

    DensityMatrix() = default;
    DensityMatrix(HilbertSpace space, Matrix matrix, Tolerance tol = {}) : space_(space), matrix_(std::move(matrix)) {
        space_.validate();
        if (matrix_.rows() != space_.dim() || matrix_.cols() != space_.dim()) {
            throw std::invalid_argument("DensityMatrix: matrix dimension does not match space");
        }
        const auto h = state_health(matrix_);
        if (h.trace_error > tol.trace || h.hermiticity_error > tol.hermiticity ||
            h.min_eigenvalue < tol.min_eigenvalue) {
            std::ostringstream msg;
            msg << "DensityMatrix: invalid state (trace error " << h.trace_error << ", hermiticity "
                << h.hermiticity_error << ", min eigenvalue " << h.min_eigenvalue << ")";
            throw NumericalError(msg.str());
        }
    }

    static DensityMatrix from_ket(HilbertSpace space, const Vector& ket) {
        const Vector psi = ket / ket.norm();
        return {space, psi * psi.adjoint()};
    }

    static DensityMatrix fock(HilbertSpace space, int i_a, int i_b = 0) {
        space.validate();
        if (i_a < 0 || i_a >= space.n_a || i_b < 0 || i_b >= space.n_b) {
            throw std::invalid_argument("DensityMatrix::fock: level outside truncation");
        }
        return from_ket(space, fock::basis(space.dim(), space.index(i_a, i_b)));
    }

    static DensityMatrix vacuum(HilbertSpace space) { return fock(space, 0, 0); }

    // Logical-mode state ρ_a ⊗ |0_b⟩⟨0_b|.
    static DensityMatrix logical(HilbertSpace space, const Matrix& rho_a) {
        space.validate();
        if (rho_a.rows() != space.n_a) throw std::invalid_argument("DensityMatrix::logical: wrong size");
        Matrix vac_b = Matrix::Zero(space.n_b, space.n_b);
        vac_b(0, 0) = 1.0;
        return {space, kron(rho_a, vac_b)};
    }

    static DensityMatrix coherent(HilbertSpace space, cplx alpha) {
        const Vector psi = fock::coherent(space.n_a, alpha);
        return logical(space, psi * psi.adjoint());
    }

    static DensityMatrix thermal(HilbertSpace space, double nbar) {
        return logical(space, fock::thermal(space.n_a, nbar));
    }

    const HilbertSpace& space() const noexcept { return space_; }
    const Matrix& matrix() const noexcept { return matrix_; }
    int dim() const noexcept { return space_.dim(); }

    // Partial trace over the blockade mode.
    Matrix reduced_logical() const {
        Matrix r = Matrix::Zero(space_.n_a, space_.n_a);
        for (int i = 0; i < space_.n_a; ++i)
            for (int j = 0; j < space_.n_a; ++j)
                for (int b = 0; b < space_.n_b; ++b) r(i, j) += matrix_(space_.index(i, b), space_.index(j, b));
        return r;
    }

    // Population of the Fock state |i_a, i_b⟩.
    double population(int i_a, int i_b) const { return matrix_(space_.index(i_a, i_b), space_.index(i_a, i_b)).real(); }

private:
    HilbertSpace space_{};
    Matrix matrix_;
};

inline Operator identity(HilbertSpace space) { return {space, Matrix::Identity(space.dim(), space.dim()), true}; }

// Single-mode matrix embedded on its factor of the composite space.
inline Operator embed(HilbertSpace space, Mode mode, const Matrix& single, bool hermitian = false) {
    space.validate();
    if (mode == Mode::logical) return {space, kron(single, Matrix::Identity(space.n_b, space.n_b)), hermitian};
    return {space, kron(Matrix::Identity(space.n_a, space.n_a), single), hermitian};
}

inline Operator ladder(HilbertSpace space, Mode mode) {
    space.validate();
    return embed(space, mode, fock::annihilation(mode == Mode::logical ? space.n_a : space.n_b));
}

inline Operator number(HilbertSpace space, Mode mode) {
    space.validate();
    return embed(space, mode, fock::number(mode == Mode::logical ? space.n_a : space.n_b), true);
}

inline bool displacement_is_truncation_safe(int n_a, cplx alpha) { return std::norm(alpha) <= n_a / 4.0; }

inline Operator displacement(HilbertSpace space, cplx alpha) {
    space.validate();
    if (!displacement_is_truncation_safe(space.n_a, alpha)) {
        std::ostringstream msg;
        msg << "displacement |alpha|^2 = " << std::norm(alpha) << " exceeds n_a/4 = " << space.n_a / 4.0;
        Warnings::emit(msg.str());
    }
    return embed(space, Mode::logical, fock::displacement(space.n_a, alpha));
}

inline Operator parity(HilbertSpace space) {
    space.validate();
    return embed(space, Mode::logical, fock::parity(space.n_a), true);
}

inline cplx expectation(const DensityMatrix& rho, const Operator& op) {
    if (!(rho.space() == op.space())) {
        throw std::invalid_argument("expectation: density matrix and operator live on different spaces");
    }
    // Tr(ρ·O) without forming the product.
    return (rho.matrix().transpose().cwiseProduct(op.matrix())).sum();
}

// Truncation convergence check: evaluates an observable at `base` and at
// base + (4, 2) and reports whether the relative change is within tolerance.
struct ConvergenceReport {
    double base_value = 0.0;
    double enlarged_value = 0.0;
    double relative_change = 0.0;
    bool converged = false;
};

inline ConvergenceReport check_truncation(HilbertSpace base, const std::function<double(HilbertSpace)>& observable,
                                          double tolerance = 1e-4) {
    ConvergenceReport r;
    r.base_value = observable(base);
    r.enlarged_value = observable({base.n_a + 4, base.n_b + 2});
    const double scale = std::max(std::abs(r.enlarged_value), 1e-300);
    r.relative_change = std::abs(r.enlarged_value - r.base_value) / scale;
    r.converged = r.relative_change < tolerance;
    return r;
}

}  // namespace stimosc
