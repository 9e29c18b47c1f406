#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace tubes {

/// Symmetric sparse matrix in CSR form (full pattern stored).
struct SparseSym {
    int n = 0;
    std::vector<int> row_ptr;
    std::vector<int> col_idx;
    std::vector<double> values;

    static SparseSym from_triplets(int n, std::vector<std::array<double, 3>> ijv);
    static SparseSym identity(int n);
    static SparseSym diagonal(const std::vector<double>& d);

    void multiply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const;
    Eigen::VectorXd operator*(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd operator*(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd dense() const;
    std::vector<double> diag() const;

    /// A + B with identical dimension.
    SparseSym plus(const SparseSym& other) const;

    /// Largest symmetry defect |a_ij - a_ji| relative to the largest entry.
    double symmetry_defect() const;

    /// MatrixMarket coordinate dump (debugging aid).
    std::string to_matrix_market() const;
};

struct CgFailure : std::runtime_error {
    Eigen::VectorXd best;
    explicit CgFailure(const std::string& what, Eigen::VectorXd iterate)
        : std::runtime_error(what), best(std::move(iterate)) {}
};

enum class Preconditioner { None, Jacobi, IncompleteCholesky };

/// Zero-fill incomplete Cholesky factor; falls back to a diagonal shift
/// when a pivot goes nonpositive.
struct IC0 {
    // lower-triangular CSR factor
    int n = 0;
    std::vector<int> row_ptr, col_idx;
    std::vector<double> values;

    static IC0 factor(const SparseSym& A);
    void solve(const Eigen::VectorXd& r, Eigen::VectorXd& z) const;  // z = (LL^T)^{-1} r
};

Eigen::VectorXd cg_solve(const SparseSym& A, const Eigen::VectorXd& b, double tol,
                         int max_iter, Preconditioner precond = Preconditioner::IncompleteCholesky);

/// sqrt(r^T (K+M)^{-1} r): the discrete dual norm against the full W^{1,2} norm.
double dual_norm(const Eigen::VectorXd& r, const SparseSym& K, const SparseSym& M, double tol);

struct EigenResult {
    std::vector<double> eigenvalues;   // ascending
    Eigen::MatrixXd eigenvectors;      // columns, M-orthonormal
    std::vector<double> residuals;     // ||Kx - lambda Mx|| / ||x||_M
    int iterations = 0;
    std::string provenance;
};

/// M-orthonormalize the columns of X (Gram-factor applied in place).
/// Throws on rank deficiency.
Eigen::MatrixXd m_orthonormalize(const Eigen::MatrixXd& X, const SparseSym& M);

/// k smallest eigenpairs of K x = lambda M x.  Deterministic for a fixed
/// seed; dense solve below a size threshold.
EigenResult lobpcg(const SparseSym& K, const SparseSym& M, int k, double tol,
                   int max_iter, unsigned seed = 1234);

}  // namespace tubes
