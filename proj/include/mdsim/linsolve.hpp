#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mdsim/errors.hpp"

namespace mdsim {

/// Compressed sparse row matrix with a deterministic (sorted-column) layout.
struct SparseMatrix {
    int n = 0;
    std::vector<int> row_ptr;
    std::vector<int> col;
    std::vector<double> val;

    std::vector<double> apply(const std::vector<double>& x) const {
        std::vector<double> y(static_cast<size_t>(n));
        for (int r = 0; r < n; ++r) {
            double s = 0.0;
            for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) s += val[k] * x[col[k]];
            y[r] = s;
        }
        return y;
    }

    std::vector<double> diagonal() const {
        std::vector<double> d(static_cast<size_t>(n), 0.0);
        for (int r = 0; r < n; ++r)
            for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
                if (col[k] == r) d[r] += val[k];
        return d;
    }
};

/// Accumulates (row, col, value) entries; duplicate positions are summed.
class MatrixBuilder {
  public:
    explicit MatrixBuilder(int n) : n_(n), rows_(static_cast<size_t>(n)) {}

    void add(int r, int c, double v) { rows_[r].emplace_back(c, v); }

    SparseMatrix build() const {
        SparseMatrix m;
        m.n = n_;
        m.row_ptr.assign(static_cast<size_t>(n_) + 1, 0);
        std::vector<std::pair<int, double>> row;
        for (int r = 0; r < n_; ++r) {
            row.assign(rows_[r].begin(), rows_[r].end());
            std::sort(row.begin(), row.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            int last = -1;
            for (const auto& [c, v] : row) {
                if (c == last) {
                    m.val.back() += v;
                } else {
                    m.col.push_back(c);
                    m.val.push_back(v);
                    last = c;
                }
            }
            m.row_ptr[r + 1] = static_cast<int>(m.col.size());
        }
        return m;
    }

  private:
    int n_;
    std::vector<std::vector<std::pair<int, double>>> rows_;
};

struct SolveResult {
    std::vector<double> x;
    double residual_l2 = 0.0;
    double residual_inf = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;  // l2 residual per iteration
};

namespace detail {

inline double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double a : v) s += a * a;
    return std::sqrt(s);
}

inline double norm_inf(const std::vector<double>& v) {
    double s = 0.0;
    for (double a : v) s = std::max(s, std::abs(a));
    return s;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
    for (size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

inline void subtract_mean(std::vector<double>& v) {
    double m = 0.0;
    for (double a : v) m += a;
    m /= static_cast<double>(v.size());
    for (double& a : v) a -= m;
}

}  // namespace detail

/// Jacobi-preconditioned conjugate gradients. With zero_mean set, the system
/// is solved on the zero-mean subspace (for the pure-Neumann pressure
/// operator, whose kernel is the constants): right-hand side, iterates and
/// preconditioned residuals are all kept mean-free by projection.
/// Stops when ||r||_2 <= rel_tol*||b||_2 and ||r||_inf <= abs_tol_inf,
/// verified against a freshly recomputed residual. Returns the best iterate
/// seen if the iteration cap is reached.
inline SolveResult conjugate_gradient(const SparseMatrix& A, std::vector<double> b,
                                      double rel_tol, double abs_tol_inf, int max_iter,
                                      bool zero_mean = false,
                                      const std::vector<double>* x0 = nullptr) {
    const size_t n = b.size();
    if (zero_mean) detail::subtract_mean(b);
    const double bnorm = detail::norm2(b);
    const double target_l2 = rel_tol * (bnorm > 0.0 ? bnorm : 1.0);

    std::vector<double> diag = A.diagonal();
    for (double& d : diag)
        if (d == 0.0) d = 1.0;

    SolveResult res;
    res.x.assign(n, 0.0);
    if (x0) {
        res.x = *x0;
        if (zero_mean) detail::subtract_mean(res.x);
    }

    std::vector<double> r = A.apply(res.x);
    for (size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    if (zero_mean) detail::subtract_mean(r);

    std::vector<double> z(n), p(n), Ap(n);
    auto precondition = [&](const std::vector<double>& in, std::vector<double>& out) {
        for (size_t i = 0; i < n; ++i) out[i] = in[i] / diag[i];
        if (zero_mean) detail::subtract_mean(out);
    };

    precondition(r, z);
    p = z;
    double rz = detail::dot(r, z);

    std::vector<double> best_x = res.x;
    double best_l2 = detail::norm2(r);

    auto refresh_residual = [&]() {
        r = A.apply(res.x);
        for (size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
        if (zero_mean) detail::subtract_mean(r);
    };

    for (int it = 0; it < max_iter; ++it) {
        const double rl2 = detail::norm2(r);
        res.history.push_back(rl2);
        if (rl2 < best_l2) {
            best_l2 = rl2;
            best_x = res.x;
        }
        if (rl2 <= target_l2 && detail::norm_inf(r) <= abs_tol_inf) {
            refresh_residual();
            const double true_l2 = detail::norm2(r);
            if (true_l2 <= 2.0 * target_l2 && detail::norm_inf(r) <= 2.0 * abs_tol_inf) {
                res.iterations = it;
                res.converged = true;
                res.residual_l2 = true_l2;
                res.residual_inf = detail::norm_inf(r);
                return res;
            }
            precondition(r, z);
            p = z;
            rz = detail::dot(r, z);
        }

        Ap = A.apply(p);
        if (zero_mean) detail::subtract_mean(Ap);
        const double pAp = detail::dot(p, Ap);
        if (pAp <= 0.0) break;  // loss of positive definiteness at round-off
        const double alpha = rz / pAp;
        detail::axpy(alpha, p, res.x);
        detail::axpy(-alpha, Ap, r);
        precondition(r, z);
        const double rz_new = detail::dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }

    res.x = best_x;
    refresh_residual();
    res.residual_l2 = detail::norm2(r);
    res.residual_inf = detail::norm_inf(r);
    res.iterations = static_cast<int>(res.history.size());
    res.converged = res.residual_l2 <= target_l2 && res.residual_inf <= abs_tol_inf;
    return res;
}

/// Jacobi(row-scaled) BiCGStab for the nonsymmetric transport systems.
/// Residual targets refer to the original (unscaled) system. Keeps the best
/// iterate seen, which matters when the requested tolerance sits near the
/// round-off floor.
inline SolveResult bicgstab(const SparseMatrix& A, const std::vector<double>& b,
                            double rel_tol, double abs_tol_inf, int max_iter,
                            const std::vector<double>* x0 = nullptr) {
    const size_t n = b.size();
    std::vector<double> diag = A.diagonal();
    for (double& d : diag)
        if (d == 0.0) d = 1.0;

    const double bnorm = detail::norm2(b);
    const double target_l2 = rel_tol * (bnorm > 0.0 ? bnorm : 1.0);

    SolveResult res;
    res.x.assign(n, 0.0);
    if (x0) res.x = *x0;

    // residual of the row-scaled system; the original residual is diag * r
    auto scaled_residual = [&](const std::vector<double>& x) {
        std::vector<double> r = A.apply(x);
        for (size_t i = 0; i < n; ++i) r[i] = (b[i] - r[i]) / diag[i];
        return r;
    };
    auto orig_norms = [&](const std::vector<double>& r_scaled) {
        double l2 = 0.0, li = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double o = r_scaled[i] * diag[i];
            l2 += o * o;
            li = std::max(li, std::abs(o));
        }
        return std::pair<double, double>(std::sqrt(l2), li);
    };

    std::vector<double> r = scaled_residual(res.x);
    std::vector<double> r0 = r, p(n, 0.0), v(n, 0.0), s(n), t(n);
    double rho = 1.0, alpha = 1.0, omega = 1.0;

    std::vector<double> best_x = res.x;
    auto [init_l2, init_inf] = orig_norms(r);
    double best_l2 = init_l2;
    (void)init_inf;

    auto scaled_apply = [&](const std::vector<double>& x) {
        std::vector<double> y = A.apply(x);
        for (size_t i = 0; i < n; ++i) y[i] /= diag[i];
        return y;
    };

    for (int it = 0; it < max_iter; ++it) {
        auto [l2, linf] = orig_norms(r);
        res.history.push_back(l2);
        if (l2 < best_l2) {
            best_l2 = l2;
            best_x = res.x;
        }
        if (l2 <= target_l2 && linf <= abs_tol_inf) {
            // guard against recurrence drift
            r = scaled_residual(res.x);
            auto [tl2, tli] = orig_norms(r);
            if (tl2 <= 2.0 * target_l2 && tli <= 2.0 * abs_tol_inf) {
                res.iterations = it;
                res.converged = true;
                res.residual_l2 = tl2;
                res.residual_inf = tli;
                return res;
            }
            r0 = r;
            rho = alpha = omega = 1.0;
            std::fill(p.begin(), p.end(), 0.0);
            std::fill(v.begin(), v.end(), 0.0);
        }

        const double rho_new = detail::dot(r0, r);
        if (std::abs(rho_new) < 1e-300) {  // breakdown: restart from current residual
            r = scaled_residual(res.x);
            r0 = r;
            rho = alpha = omega = 1.0;
            std::fill(p.begin(), p.end(), 0.0);
            std::fill(v.begin(), v.end(), 0.0);
            continue;
        }
        const double beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for (size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
        v = scaled_apply(p);
        const double r0v = detail::dot(r0, v);
        if (std::abs(r0v) < 1e-300) {
            r = scaled_residual(res.x);
            r0 = r;
            rho = alpha = omega = 1.0;
            std::fill(p.begin(), p.end(), 0.0);
            std::fill(v.begin(), v.end(), 0.0);
            continue;
        }
        alpha = rho / r0v;
        for (size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
        t = scaled_apply(s);
        const double tt = detail::dot(t, t);
        omega = tt > 0.0 ? detail::dot(t, s) / tt : 0.0;
        for (size_t i = 0; i < n; ++i) res.x[i] += alpha * p[i] + omega * s[i];
        for (size_t i = 0; i < n; ++i) r[i] = s[i] - omega * t[i];
    }

    res.x = best_x;
    r = scaled_residual(res.x);
    auto [fl2, fli] = orig_norms(r);
    res.residual_l2 = fl2;
    res.residual_inf = fli;
    res.iterations = static_cast<int>(res.history.size());
    res.converged = fl2 <= target_l2 && fli <= abs_tol_inf;
    return res;
}

}  // namespace mdsim
