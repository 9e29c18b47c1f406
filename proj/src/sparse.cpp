#include "tubes/linalg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>

namespace tubes {

SparseSym SparseSym::from_triplets(int n, std::vector<std::array<double, 3>> ijv) {
    std::map<std::pair<int, int>, double> acc;
    for (const auto& t : ijv) {
        int i = static_cast<int>(t[0]);
        int j = static_cast<int>(t[1]);
        acc[{i, j}] += t[2];
    }
    SparseSym A;
    A.n = n;
    A.row_ptr.assign(n + 1, 0);
    for (const auto& [ij, v] : acc) A.row_ptr[ij.first + 1]++;
    for (int i = 0; i < n; ++i) A.row_ptr[i + 1] += A.row_ptr[i];
    A.col_idx.resize(acc.size());
    A.values.resize(acc.size());
    std::vector<int> cursor(A.row_ptr.begin(), A.row_ptr.end() - 1);
    for (const auto& [ij, v] : acc) {
        int pos = cursor[ij.first]++;
        A.col_idx[pos] = ij.second;
        A.values[pos] = v;
    }
    return A;
}

SparseSym SparseSym::identity(int n) {
    std::vector<double> d(n, 1.0);
    return diagonal(d);
}

SparseSym SparseSym::diagonal(const std::vector<double>& d) {
    SparseSym A;
    A.n = static_cast<int>(d.size());
    A.row_ptr.resize(A.n + 1);
    A.col_idx.resize(A.n);
    A.values = d;
    for (int i = 0; i <= A.n; ++i) A.row_ptr[i] = i;
    for (int i = 0; i < A.n; ++i) A.col_idx[i] = i;
    return A;
}

void SparseSym::multiply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    y.resize(n);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) s += values[p] * x[col_idx[p]];
        y[i] = s;
    }
}

Eigen::VectorXd SparseSym::operator*(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y;
    multiply(x, y);
    return y;
}

Eigen::MatrixXd SparseSym::operator*(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd Y(n, X.cols());
    Eigen::VectorXd col;
    for (int c = 0; c < X.cols(); ++c) {
        multiply(X.col(c), col);
        Y.col(c) = col;
    }
    return Y;
}

Eigen::MatrixXd SparseSym::dense() const {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) D(i, col_idx[p]) = values[p];
    return D;
}

std::vector<double> SparseSym::diag() const {
    std::vector<double> d(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
            if (col_idx[p] == i) d[i] = values[p];
    return d;
}

SparseSym SparseSym::plus(const SparseSym& other) const {
    std::vector<std::array<double, 3>> ijv;
    auto push = [&](const SparseSym& A) {
        for (int i = 0; i < A.n; ++i)
            for (int p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p)
                ijv.push_back({static_cast<double>(i), static_cast<double>(A.col_idx[p]), A.values[p]});
    };
    push(*this);
    push(other);
    return from_triplets(n, std::move(ijv));
}

double SparseSym::symmetry_defect() const {
    double amax = 0.0;
    for (double v : values) amax = std::max(amax, std::abs(v));
    if (amax == 0.0) return 0.0;
    auto entry = [&](int i, int j) {
        for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
            if (col_idx[p] == j) return values[p];
        return 0.0;
    };
    double defect = 0.0;
    for (int i = 0; i < n; ++i)
        for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
            defect = std::max(defect, std::abs(values[p] - entry(col_idx[p], i)));
    return defect / amax;
}

std::string SparseSym::to_matrix_market() const {
    std::ostringstream os;
    os << "%%MatrixMarket matrix coordinate real symmetric\n";
    int nnz_lower = 0;
    for (int i = 0; i < n; ++i)
        for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
            if (col_idx[p] <= i) nnz_lower++;
    os << n << " " << n << " " << nnz_lower << "\n";
    os.precision(17);
    for (int i = 0; i < n; ++i)
        for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
            if (col_idx[p] <= i) os << i + 1 << " " << col_idx[p] + 1 << " " << values[p] << "\n";
    return os.str();
}

IC0 IC0::factor(const SparseSym& A) {
    // extract lower triangle
    IC0 L;
    L.n = A.n;
    L.row_ptr.assign(A.n + 1, 0);
    for (int i = 0; i < A.n; ++i)
        for (int p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p)
            if (A.col_idx[p] <= i) L.row_ptr[i + 1]++;
    for (int i = 0; i < A.n; ++i) L.row_ptr[i + 1] += L.row_ptr[i];
    L.col_idx.resize(L.row_ptr.back());
    L.values.resize(L.row_ptr.back());
    {
        std::vector<int> cur(L.row_ptr.begin(), L.row_ptr.end() - 1);
        for (int i = 0; i < A.n; ++i)
            for (int p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p)
                if (A.col_idx[p] <= i) {
                    int q = cur[i]++;
                    L.col_idx[q] = A.col_idx[p];
                    L.values[q] = A.values[p];
                }
    }
    // row-oriented incomplete factorization A ~ L L^T on the lower pattern;
    // assumes columns ascending within each row (guaranteed by construction)
    std::vector<double> rowbuf(A.n, 0.0);
    for (int i = 0; i < A.n; ++i) {
        for (int p = L.row_ptr[i]; p < L.row_ptr[i + 1]; ++p) rowbuf[L.col_idx[p]] = L.values[p];
        double diag_acc = 0.0;
        for (int p = L.row_ptr[i]; p < L.row_ptr[i + 1] - 1; ++p) {
            int j = L.col_idx[p];
            double s = rowbuf[j];
            for (int q = L.row_ptr[j]; q < L.row_ptr[j + 1] - 1; ++q)
                s -= L.values[q] * rowbuf[L.col_idx[q]];
            double ljj = L.values[L.row_ptr[j + 1] - 1];
            double lij = s / ljj;
            rowbuf[j] = lij;
            diag_acc += lij * lij;
        }
        double d = rowbuf[i] - diag_acc;
        rowbuf[i] = std::sqrt(d > 1e-14 ? d : 1e-14);  // breakdown guard
        for (int p = L.row_ptr[i]; p < L.row_ptr[i + 1]; ++p) {
            L.values[p] = rowbuf[L.col_idx[p]];
            rowbuf[L.col_idx[p]] = 0.0;
        }
    }
    return L;
}

void IC0::solve(const Eigen::VectorXd& r, Eigen::VectorXd& z) const {
    z = r;
    for (int i = 0; i < n; ++i) {
        double s = z[i];
        for (int p = row_ptr[i]; p < row_ptr[i + 1] - 1; ++p) s -= values[p] * z[col_idx[p]];
        z[i] = s / values[row_ptr[i + 1] - 1];
    }
    for (int i = n - 1; i >= 0; --i) {
        double zi = z[i] / values[row_ptr[i + 1] - 1];
        z[i] = zi;
        for (int p = row_ptr[i]; p < row_ptr[i + 1] - 1; ++p) z[col_idx[p]] -= values[p] * zi;
    }
}

Eigen::VectorXd cg_solve(const SparseSym& A, const Eigen::VectorXd& b, double tol,
                         int max_iter, Preconditioner precond) {
    const int n = A.n;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    double bnorm = b.norm();
    if (bnorm == 0.0) return x;

    std::vector<double> dinv;
    IC0 ic;
    if (precond == Preconditioner::Jacobi) {
        dinv = A.diag();
        for (double& d : dinv) d = (d != 0.0) ? 1.0 / d : 1.0;
    } else if (precond == Preconditioner::IncompleteCholesky) {
        ic = IC0::factor(A);
    }
    auto apply_precond = [&](const Eigen::VectorXd& r, Eigen::VectorXd& z) {
        switch (precond) {
            case Preconditioner::None: z = r; break;
            case Preconditioner::Jacobi:
                z.resize(n);
                for (int i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
                break;
            case Preconditioner::IncompleteCholesky: ic.solve(r, z); break;
        }
    };

    Eigen::VectorXd r = b, z, p, Ap;
    apply_precond(r, z);
    p = z;
    double rz = r.dot(z);
    for (int it = 0; it < max_iter; ++it) {
        A.multiply(p, Ap);
        double pAp = p.dot(Ap);
        if (pAp <= 0.0) throw CgFailure("cg_solve: matrix not positive definite on Krylov space", x);
        double alpha = rz / pAp;
        x += alpha * p;
        r -= alpha * Ap;
        if (r.norm() <= tol * bnorm) return x;
        apply_precond(r, z);
        double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    if (r.norm() <= tol * bnorm) return x;
    throw CgFailure("cg_solve: max_iter exceeded", x);
}

double dual_norm(const Eigen::VectorXd& r, const SparseSym& K, const SparseSym& M, double tol) {
    if (r.norm() == 0.0) return 0.0;
    SparseSym KM = K.plus(M);
    Eigen::VectorXd x = cg_solve(KM, r, tol, 20000);
    return std::sqrt(std::max(0.0, r.dot(x)));
}

}  // namespace tubes
