#pragma once

// =============================================================================
// Damped least squares (Gauss-Newton with adaptive damping).
//
// Jacobians come from forward finite differences with a per-parameter
// relative step. A trial step is accepted only if it does not increase the
// cost, so the accepted-cost sequence is monotone. Residual callbacks may
// report a parameter vector as invalid (e.g. beyond the oscillation
// threshold); such steps are rejected and the damping raised, which is how
// hard parameter constraints enter.
//
// Convergence carries the usual three-way semantics: gtol (scale-invariant
// cosine measure max_j |g_j| / (||J_j||_2 ||r||_2) below tolerance), xtol
// (computed or accepted step below the relative step tolerance near the
// Gauss-Newton regime), or ftol (accepted relative cost improvement below
// tolerance). All three certify a stationary point at the achievable
// numerical resolution; a run that exhausts its iterations or stalls against
// rejected steps reports converged = false.
// =============================================================================

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "kiparc/errors.hpp"

namespace kiparc {

/// Residual callback: fill `out` with residuals at `params` and return true,
/// or return false when the parameters are outside the model's domain.
using ResidualFn = std::function<bool(std::span<const double>, std::vector<double>&)>;

struct LeastSquaresOptions {
    int max_iterations = 200;
    double gradient_tolerance = 1e-6;   // cosine measure
    double step_tolerance = 1e-13;      // relative step size
    double cost_tolerance = 1e-14;      // relative cost improvement
    double initial_damping = 1e-3;
    double fd_relative_step = 1e-6;
};

struct LeastSquaresSummary {
    std::vector<double> parameters;
    std::vector<double> standard_errors;  // sqrt(diag(inv(J^T J)) * cost/(m-n))
    double cost{0.0};                     // sum of squared residuals
    double residual_norm{0.0};
    int iterations{0};
    bool converged{false};
    std::vector<double> cost_history;     // initial cost plus each accepted cost
    double condition_number{0.0};         // cond(J) at the solution
};

namespace detail {

/// Jacobi eigenvalue iteration for a small symmetric matrix (row-major).
inline std::vector<double> symmetric_eigenvalues(std::vector<double> a, std::size_t n) {
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
        if (off < 1e-300) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (apq == 0.0) continue;
                const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a[i * n + i];
    return eig;
}

/// In-place Cholesky solve of A x = b for a small SPD matrix; false when the
/// factorization breaks down.
inline bool cholesky_solve(std::vector<double> a, std::size_t n, std::vector<double> b,
                           std::vector<double>& x) {
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        if (!(d > 0.0)) return false;
        const double ljj = std::sqrt(d);
        a[j * n + j] = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) v -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = v / ljj;
        }
    }
    // forward then backward substitution
    for (std::size_t i = 0; i < n; ++i) {
        double v = b[i];
        for (std::size_t k = 0; k < i; ++k) v -= a[i * n + k] * b[k];
        b[i] = v / a[i * n + i];
    }
    x.assign(n, 0.0);
    for (std::size_t ii = n; ii-- > 0;) {
        double v = b[ii];
        for (std::size_t k = ii + 1; k < n; ++k) v -= a[k * n + ii] * x[k];
        x[ii] = v / a[ii * n + ii];
    }
    return true;
}

/// diag(inv(A)) by solving against unit vectors; NaN columns on breakdown.
inline std::vector<double> inverse_diagonal(const std::vector<double>& a, std::size_t n) {
    std::vector<double> diag(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> e(n, 0.0), col;
        e[j] = 1.0;
        if (cholesky_solve(a, n, e, col)) diag[j] = col[j];
    }
    return diag;
}

} // namespace detail

inline LeastSquaresSummary minimize_least_squares(const ResidualFn& residual,
                                                  std::vector<double> params,
                                                  const LeastSquaresOptions& opts = {}) {
    const std::size_t n = params.size();
    detail::require(n > 0, "at least one parameter required");

    std::vector<double> r;
    if (!residual(params, r))
        throw DomainError("initial parameter guess outside the model domain");
    const std::size_t m = r.size();
    detail::require(m > 0, "residual vector must be nonempty");

    auto cost_of = [](const std::vector<double>& v) {
        double c = 0.0;
        for (double x : v) c += x * x;
        return c;
    };

    LeastSquaresSummary out;
    double cost = cost_of(r);
    out.cost_history.push_back(cost);

    std::vector<double> jac(m * n);          // column-major: jac[j*m + i]
    std::vector<double> grad(n), a(n * n), a_damped(n * n), step, r_try, r_probe;
    double lambda = opts.initial_damping;

    auto build_jacobian = [&](const std::vector<double>& p, const std::vector<double>& r0) {
        std::vector<double> probe = p;
        for (std::size_t j = 0; j < n; ++j) {
            const double h = opts.fd_relative_step * (std::abs(p[j]) + 1.0);
            probe[j] = p[j] + h;
            double used = h;
            if (!residual(probe, r_probe)) {
                probe[j] = p[j] - h;  // backward fallback near a domain edge
                if (!residual(probe, r_probe)) return false;
                used = -h;
            }
            for (std::size_t i = 0; i < m; ++i) jac[j * m + i] = (r_probe[i] - r0[i]) / used;
            probe[j] = p[j];
        }
        return true;
    };

    auto cosine_measure = [&](const std::vector<double>& r0) {
        const double rnorm = std::sqrt(cost_of(r0));
        if (rnorm == 0.0) return 0.0;
        double worst = 0.0;
        bool any_column = false;
        for (std::size_t j = 0; j < n; ++j) {
            double g = 0.0, col2 = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                g += jac[j * m + i] * r0[i];
                col2 += jac[j * m + i] * jac[j * m + i];
            }
            if (col2 > 0.0) {
                any_column = true;
                worst = std::max(worst, std::abs(g) / (std::sqrt(col2) * rnorm));
            }
        }
        // a residual the model cannot move at all is not a converged fit
        if (!any_column) return std::numeric_limits<double>::infinity();
        return worst;
    };

    auto relative_step = [&](const std::vector<double>& dp, const std::vector<double>& p) {
        double max_step = 0.0, max_param = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            max_step = std::max(max_step, std::abs(dp[j]));
            max_param = std::max(max_param, std::abs(p[j]));
        }
        return max_step / (1.0 + max_param);
    };

    bool converged = false;
    int iter = 0;
    for (; iter < opts.max_iterations && !converged; ++iter) {
        if (!build_jacobian(params, r)) break;

        if (cosine_measure(r) <= opts.gradient_tolerance) {
            converged = true;
            break;
        }

        for (std::size_t j = 0; j < n; ++j) {
            double g = 0.0;
            for (std::size_t i = 0; i < m; ++i) g += jac[j * m + i] * r[i];
            grad[j] = g;
        }
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t k = j; k < n; ++k) {
                double v = 0.0;
                for (std::size_t i = 0; i < m; ++i) v += jac[j * m + i] * jac[k * m + i];
                a[j * n + k] = a[k * n + j] = v;
            }
        }

        const double lambda_entering = lambda;
        bool accepted = false;
        double new_cost = cost;
        for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
            a_damped = a;
            for (std::size_t j = 0; j < n; ++j) {
                const double d = a[j * n + j];
                a_damped[j * n + j] = d + lambda * (d > 0.0 ? d : 1.0);
            }
            std::vector<double> neg_grad(n);
            for (std::size_t j = 0; j < n; ++j) neg_grad[j] = -grad[j];
            if (detail::cholesky_solve(a_damped, n, neg_grad, step)) {
                // parameter resolution reached: an undamped near-optimum step
                // smaller than step_tolerance cannot move the fit (xtol)
                if (attempt == 0 && lambda_entering <= 1.0 &&
                    relative_step(step, params) <= opts.step_tolerance) {
                    converged = true;
                    break;
                }
                std::vector<double> trial = params;
                for (std::size_t j = 0; j < n; ++j) trial[j] += step[j];
                if (residual(trial, r_try)) {
                    const double trial_cost = cost_of(r_try);
                    if (trial_cost <= cost) {
                        params = std::move(trial);
                        r = r_try;
                        new_cost = trial_cost;
                        accepted = true;
                        lambda = std::max(lambda / 3.0, 1e-14);
                        break;
                    }
                }
            }
            lambda *= 10.0;
            if (lambda > 1e14) break;
        }
        if (converged) break;
        if (!accepted) break;  // stalled; convergence judged below

        out.cost_history.push_back(new_cost);
        const double improvement = cost - new_cost;
        cost = new_cost;
        // xtol / ftol on the accepted step
        if (relative_step(step, params) <= opts.step_tolerance) {
            converged = true;
            break;
        }
        if (improvement <= opts.cost_tolerance * std::max(cost, 1e-300)) {
            converged = true;
            break;
        }
    }

    if (!converged && build_jacobian(params, r))
        converged = cosine_measure(r) <= opts.gradient_tolerance;

    out.parameters = params;
    out.cost = cost;
    out.residual_norm = std::sqrt(cost);
    out.iterations = iter;
    out.converged = converged;

    // normal-equations matrix at the solution, for uncertainties and conditioning
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = j; k < n; ++k) {
            double v = 0.0;
            for (std::size_t i = 0; i < m; ++i) v += jac[j * m + i] * jac[k * m + i];
            a[j * n + k] = a[k * n + j] = v;
        }
    }
    const std::vector<double> eig = detail::symmetric_eigenvalues(a, n);
    double eig_min = std::numeric_limits<double>::infinity(), eig_max = 0.0;
    for (double e : eig) {
        eig_min = std::min(eig_min, e);
        eig_max = std::max(eig_max, e);
    }
    out.condition_number = eig_min > 0.0 ? std::sqrt(eig_max / eig_min)
                                         : std::numeric_limits<double>::infinity();

    const double variance = m > n ? cost / static_cast<double>(m - n) : 0.0;
    const std::vector<double> inv_diag = detail::inverse_diagonal(a, n);
    out.standard_errors.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double v = inv_diag[j] * variance;
        out.standard_errors[j] = v >= 0.0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

} // namespace kiparc
