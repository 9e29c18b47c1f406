#include "tubes/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>

namespace tubes {

namespace {

// B-orthonormalize the columns of S against the M inner product, dropping
// near-dependent directions.  Returns the retained basis.
Eigen::MatrixXd svqb(const Eigen::MatrixXd& S, const SparseSym& M, double drop_tol = 1e-12) {
    Eigen::MatrixXd MS = M * S;
    Eigen::MatrixXd G = S.transpose() * MS;
    G = 0.5 * (G + G.transpose().eval());
    Eigen::VectorXd d = G.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd Gs = d.asDiagonal() * G * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Gs);
    const auto& w = es.eigenvalues();
    double wmax = w.maxCoeff();
    int keep = 0;
    for (int i = 0; i < w.size(); ++i)
        if (w[i] > drop_tol * wmax) keep++;
    Eigen::MatrixXd T(S.cols(), keep);
    int c = 0;
    for (int i = 0; i < w.size(); ++i) {
        if (w[i] > drop_tol * wmax) {
            T.col(c++) = es.eigenvectors().col(i) / std::sqrt(w[i]);
        }
    }
    return S * (d.asDiagonal() * T);
}

EigenResult dense_solve(const SparseSym& K, const SparseSym& M, int k) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K.dense(), M.dense());
    EigenResult r;
    r.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + k);
    r.eigenvectors = es.eigenvectors().leftCols(k);
    for (int j = 0; j < k; ++j) {
        Eigen::VectorXd x = r.eigenvectors.col(j);
        double xm = std::sqrt(x.dot(M * x));
        r.residuals.push_back((K * x - r.eigenvalues[j] * (M * x)).norm() / xm);
    }
    r.provenance = "dense";
    return r;
}

}  // namespace

Eigen::MatrixXd m_orthonormalize(const Eigen::MatrixXd& X, const SparseSym& M) {
    Eigen::MatrixXd G = X.transpose() * (M * X);
    G = 0.5 * (G + G.transpose().eval());
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success) {
        throw std::runtime_error("m_orthonormalize: rank-deficient block");
    }
    Eigen::MatrixXd L = llt.matrixL();
    // guard against numerically tiny pivots that LLT accepted
    for (int i = 0; i < L.rows(); ++i) {
        if (L(i, i) < 1e-10 * L.diagonal().maxCoeff()) {
            throw std::runtime_error("m_orthonormalize: rank-deficient block");
        }
    }
    return L.triangularView<Eigen::Lower>().solve(X.transpose()).transpose();
}

EigenResult lobpcg(const SparseSym& K, const SparseSym& M, int k, double tol,
                   int max_iter, unsigned seed) {
    const int n = K.n;
    if (k < 1 || k > n) throw std::invalid_argument("lobpcg: bad k");
    if (n <= 200 || 4 * k > n) return dense_solve(K, M, k);

    const int m = std::min(k + 4, n / 4);  // block with guard vectors

    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd X(n, m);
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < n; ++i) X(i, j) = gauss(rng);
    X = svqb(X, M);

    IC0 ic = IC0::factor(K);
    auto precond = [&](const Eigen::MatrixXd& R) {
        // a few IC-preconditioned CG sweeps toward K^{-1} R
        Eigen::MatrixXd Z(n, R.cols());
        for (int c = 0; c < R.cols(); ++c) {
            Eigen::VectorXd b = R.col(c);
            Eigen::VectorXd x = Eigen::VectorXd::Zero(n), r = b, z, p, Ap;
            ic.solve(r, z);
            p = z;
            double rz = r.dot(z), bn = b.norm();
            for (int it = 0; it < 60; ++it) {
                K.multiply(p, Ap);
                double pAp = p.dot(Ap);
                if (pAp <= 0.0) break;
                double alpha = rz / pAp;
                x += alpha * p;
                r -= alpha * Ap;
                if (r.norm() < 1e-2 * bn) break;
                ic.solve(r, z);
                double rz2 = r.dot(z);
                p = z + (rz2 / rz) * p;
                rz = rz2;
            }
            Z.col(c) = x;
        }
        return Z;
    };

    Eigen::MatrixXd P;  // previous search directions
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
    EigenResult result;

    for (int iter = 0; iter < max_iter; ++iter) {
        Eigen::MatrixXd KX = K * X;
        Eigen::MatrixXd MX = M * X;
        // Rayleigh quotients of the current block
        for (int j = 0; j < X.cols(); ++j)
            lambda[j] = X.col(j).dot(KX.col(j)) / X.col(j).dot(MX.col(j));

        Eigen::MatrixXd R(n, X.cols());
        bool converged = true;
        for (int j = 0; j < X.cols(); ++j) {
            R.col(j) = KX.col(j) - lambda[j] * MX.col(j);
            double xm = std::sqrt(X.col(j).dot(MX.col(j)));
            double res = R.col(j).norm() / xm;
            if (j < k && res > tol) converged = false;
        }
        if (converged && iter > 0) {
            result.iterations = iter;
            break;
        }
        if (iter == max_iter - 1) {
            throw std::runtime_error("lobpcg: stagnation, residuals above tolerance at max_iter");
        }

        Eigen::MatrixXd W = precond(R);
        Eigen::MatrixXd S(n, X.cols() + W.cols() + (P.cols() > 0 ? P.cols() : 0));
        S.leftCols(X.cols()) = X;
        S.middleCols(X.cols(), W.cols()) = W;
        if (P.cols() > 0) S.rightCols(P.cols()) = P;
        S = svqb(S, M, 1e-10);

        Eigen::MatrixXd A = S.transpose() * (K * S);
        A = 0.5 * (A + A.transpose().eval());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
        int take = std::min<int>(m, static_cast<int>(S.cols()));
        Eigen::MatrixXd C = es.eigenvectors().leftCols(take);
        Eigen::MatrixXd Xnew = S * C;
        // implicit P: component of the new block outside the old one
        Eigen::MatrixXd MXold = M * X;
        Eigen::MatrixXd proj = X * (MXold.transpose() * Xnew);
        P = Xnew - proj;
        X = Xnew;
    }

    // final Rayleigh-Ritz cleanup and M-orthonormalization
    X = m_orthonormalize(X, M);
    Eigen::MatrixXd A = X.transpose() * (K * X);
    A = 0.5 * (A + A.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    X = X * es.eigenvectors();

    result.eigenvectors = X.leftCols(k);
    result.eigenvalues.clear();
    result.residuals.clear();
    for (int j = 0; j < k; ++j) {
        double lj = es.eigenvalues()[j];
        Eigen::VectorXd x = result.eigenvectors.col(j);
        Eigen::VectorXd Mx = M * x;
        double xm = std::sqrt(x.dot(Mx));
        result.eigenvalues.push_back(lj);
        result.residuals.push_back((K * x - lj * Mx).norm() / xm);
    }
    result.provenance = "lobpcg";
    return result;
}

}  // namespace tubes
