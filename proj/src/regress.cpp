#include "tbshare/regress.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tbshare/errors.hpp"

namespace tbshare {

namespace {

constexpr double kRankTolerance = 1e-10;

// Householder factorization of col-major `a` (k columns, length n).
// On return a[j][i] for i <= j holds R (via rdiag for the diagonal) and the
// sub-diagonal part of each column holds the reflector, with its leading
// element in vhead[j].
struct Householder {
    std::size_t n = 0, k = 0;
    std::vector<std::vector<double>> a;
    std::vector<double> rdiag;
    std::vector<double> vhead;
    std::vector<double> vnorm2;

    void factor(std::vector<std::vector<double>> cols) {
        a = std::move(cols);
        k = a.size();
        n = k ? a[0].size() : 0;
        rdiag.assign(k, 0.0);
        vhead.assign(k, 0.0);
        vnorm2.assign(k, 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            double norm = 0.0;
            for (std::size_t i = j; i < n; ++i) norm += a[j][i] * a[j][i];
            norm = std::sqrt(norm);
            if (norm == 0.0) {
                rdiag[j] = 0.0;
                continue;
            }
            const double alpha = (a[j][j] > 0.0) ? -norm : norm;
            vhead[j] = a[j][j] - alpha;
            double v2 = vhead[j] * vhead[j];
            for (std::size_t i = j + 1; i < n; ++i) v2 += a[j][i] * a[j][i];
            vnorm2[j] = v2;
            rdiag[j] = alpha;
            if (v2 == 0.0) continue;
            for (std::size_t c = j + 1; c < k; ++c) {
                double dot = vhead[j] * a[c][j];
                for (std::size_t i = j + 1; i < n; ++i) dot += a[j][i] * a[c][i];
                const double f = 2.0 * dot / v2;
                a[c][j] -= f * vhead[j];
                for (std::size_t i = j + 1; i < n; ++i) a[c][i] -= f * a[j][i];
            }
        }
    }

    // Applies Q' in place to a length-n vector.
    void apply_qt(std::vector<double>& y) const {
        for (std::size_t j = 0; j < k; ++j) {
            if (vnorm2[j] == 0.0) continue;
            double dot = vhead[j] * y[j];
            for (std::size_t i = j + 1; i < n; ++i) dot += a[j][i] * y[i];
            const double f = 2.0 * dot / vnorm2[j];
            y[j] -= f * vhead[j];
            for (std::size_t i = j + 1; i < n; ++i) y[i] -= f * a[j][i];
        }
    }

    // Applies Q in place (reflectors in reverse order).
    void apply_q(std::vector<double>& y) const {
        for (std::size_t jj = k; jj-- > 0;) {
            if (vnorm2[jj] == 0.0) continue;
            double dot = vhead[jj] * y[jj];
            for (std::size_t i = jj + 1; i < n; ++i) dot += a[jj][i] * y[i];
            const double f = 2.0 * dot / vnorm2[jj];
            y[jj] -= f * vhead[jj];
            for (std::size_t i = jj + 1; i < n; ++i) y[i] -= f * a[jj][i];
        }
    }

    double r(std::size_t row, std::size_t col) const {
        if (row == col) return rdiag[row];
        return a[col][row]; // row < col
    }

    void check_rank(const std::vector<std::string>* names) const {
        double dmax = 0.0;
        for (std::size_t j = 0; j < k; ++j) dmax = std::max(dmax, std::fabs(rdiag[j]));
        const double tol = kRankTolerance * dmax;
        std::vector<std::size_t> bad;
        for (std::size_t j = 0; j < k; ++j)
            if (std::fabs(rdiag[j]) <= tol) bad.push_back(j);
        if (bad.empty()) return;
        std::ostringstream msg;
        msg << "rank-deficient design, collinear columns:";
        for (std::size_t j : bad) {
            msg << ' ';
            if (names && j < names->size())
                msg << (*names)[j];
            else
                msg << "#" << j;
        }
        throw EstimationError(msg.str());
    }

    // Solves R x = b (upper triangular back substitution).
    std::vector<double> solve_r(const std::vector<double>& b) const {
        std::vector<double> x(k, 0.0);
        for (std::size_t ii = k; ii-- > 0;) {
            double s = b[ii];
            for (std::size_t c = ii + 1; c < k; ++c) s -= r(ii, c) * x[c];
            x[ii] = s / rdiag[ii];
        }
        return x;
    }

    // (X'X)^-1 = R^-1 R^-T from the triangular inverse.
    std::vector<std::vector<double>> xtx_inverse() const {
        // rinv[c][r]: column-major R^-1, upper triangular.
        std::vector<std::vector<double>> rinv(k, std::vector<double>(k, 0.0));
        for (std::size_t c = 0; c < k; ++c) {
            std::vector<double> e(k, 0.0);
            e[c] = 1.0;
            auto x = solve_r(e);
            for (std::size_t row = 0; row < k; ++row) rinv[c][row] = x[row];
        }
        std::vector<std::vector<double>> inv(k, std::vector<double>(k, 0.0));
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) {
                double s = 0.0;
                for (std::size_t m = std::max(i, j); m < k; ++m)
                    s += rinv[m][i] * rinv[m][j];
                inv[i][j] = s;
            }
        return inv;
    }
};

} // namespace

void DesignMatrix::add_column(std::string name, std::vector<double> values, bool is_constant) {
    if (is_constant) {
        constant_column = columns.size();
        ++constant_flags_;
    }
    names.push_back(std::move(name));
    columns.push_back(std::move(values));
}

void DesignMatrix::check() const {
    if (columns.empty()) throw ValidationError("design has no columns");
    const std::size_t nn = response.size();
    for (std::size_t j = 0; j < columns.size(); ++j)
        if (columns[j].size() != nn)
            throw ValidationError("design column '" + names[j] + "' length differs from response");
    if (nn <= columns.size())
        throw ValidationError("need n > k, got n = " + std::to_string(nn) +
                              ", k = " + std::to_string(columns.size()));
    for (std::size_t i = 0; i < names.size(); ++i)
        for (std::size_t j = i + 1; j < names.size(); ++j)
            if (names[i] == names[j])
                throw ValidationError("duplicate design column name '" + names[i] + "'");
    if (constant_flags_ != 1)
        throw ValidationError("design must flag exactly one constant column");
}

std::size_t FitResult::index_of(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j)
        if (names[j] == name) return j;
    throw EstimationError("no coefficient named '" + name + "' in fit");
}

FitResult ols_fit(const DesignMatrix& design) {
    design.check();
    const std::size_t n = design.n();
    const std::size_t k = design.k();

    Householder qr;
    qr.factor(design.columns);
    qr.check_rank(&design.names);

    std::vector<double> qty = design.response;
    qr.apply_qt(qty);
    qty.resize(k);
    std::vector<double> beta = qr.solve_r(qty);

    FitResult fit;
    fit.names = design.names;
    fit.coefficients = beta;
    fit.n = n;
    fit.k = k;
    fit.fitted.assign(n, 0.0);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < n; ++i)
            fit.fitted[i] += design.columns[j][i] * beta[j];
    fit.residuals.assign(n, 0.0);
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        fit.residuals[i] = design.response[i] - fit.fitted[i];
        ssr += fit.residuals[i] * fit.residuals[i];
    }
    fit.ssr = ssr;
    fit.sigma2 = ssr / static_cast<double>(n - k);
    fit.xtx_inverse = qr.xtx_inverse();

    const double df = static_cast<double>(n - k);
    fit.standard_errors.assign(k, 0.0);
    fit.t_stats.assign(k, 0.0);
    fit.p_values.assign(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        const double var = fit.sigma2 * fit.xtx_inverse[j][j];
        const double se = std::sqrt(std::max(var, 0.0));
        fit.standard_errors[j] = se;
        double t;
        if (se > 0.0) {
            t = beta[j] / se;
        } else if (beta[j] == 0.0) {
            t = std::numeric_limits<double>::quiet_NaN();
        } else {
            t = beta[j] > 0.0 ? std::numeric_limits<double>::infinity()
                              : -std::numeric_limits<double>::infinity();
        }
        fit.t_stats[j] = t;
        fit.p_values[j] = student_t_two_sided_p(t, df);
    }

    double ymean = 0.0;
    for (double y : design.response) ymean += y;
    ymean /= static_cast<double>(n);
    double tss = 0.0;
    for (double y : design.response) tss += (y - ymean) * (y - ymean);
    double r2;
    if (tss > 0.0)
        r2 = 1.0 - ssr / tss;
    else
        r2 = (ssr == 0.0) ? 1.0 : 0.0;
    fit.r_squared = std::clamp(r2, 0.0, 1.0);
    fit.adj_r_squared =
        1.0 - (1.0 - fit.r_squared) * static_cast<double>(n - 1) / static_cast<double>(n - k);
    return fit;
}

std::string significance_stars(double p_value) {
    if (std::isnan(p_value)) return "";
    if (p_value < 0.01) return "***";
    if (p_value < 0.05) return "**";
    if (p_value < 0.10) return "*";
    return "";
}

namespace {

// Continued fraction for the regularized incomplete beta (Lentz).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 3e-16;
    constexpr double kFpMin = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

} // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0))
        throw ValidationError("incomplete_beta: a and b must be positive");
    if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double lbt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x);
    const double bt = std::exp(lbt);
    if (x < (a + 1.0) / (a + b + 2.0))
        return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
    if (!(df > 0.0)) throw ValidationError("student_t: df must be positive");
    if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
    if (std::isinf(t)) return 0.0;
    if (t == 0.0) return 1.0;
    const double x = df / (df + t * t);
    return incomplete_beta(df / 2.0, 0.5, x);
}

double student_t_cdf(double t, double df) {
    if (!(df > 0.0)) throw ValidationError("student_t: df must be positive");
    if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
    if (std::isinf(t)) return t > 0.0 ? 1.0 : 0.0;
    const double half_p2 = student_t_two_sided_p(t, df) / 2.0;
    return t >= 0.0 ? 1.0 - half_p2 : half_p2;
}

double student_t_quantile(double p, double df) {
    if (!(df > 0.0)) throw ValidationError("student_t: df must be positive");
    if (!(p > 0.0) || !(p < 1.0))
        throw ValidationError("student_t_quantile: p must lie in (0, 1)");
    if (p == 0.5) return 0.0;

    double lo = -1.0, hi = 1.0;
    while (student_t_cdf(lo, df) > p && lo > -1e300) lo *= 2.0;
    while (student_t_cdf(hi, df) < p && hi < 1e300) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (student_t_cdf(mid, df) < p)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

std::pair<double, double> fitted_value_ci(const FitResult& fit,
                                          const std::vector<double>& row, double level) {
    if (row.size() != fit.k)
        throw ValidationError("fitted_value_ci: row has " + std::to_string(row.size()) +
                              " values, design has " + std::to_string(fit.k) + " columns");
    if (!(level > 0.0) || !(level < 1.0))
        throw ValidationError("fitted_value_ci: level must lie in (0, 1)");
    double pred = 0.0;
    for (std::size_t j = 0; j < fit.k; ++j) pred += row[j] * fit.coefficients[j];
    double quad = 0.0;
    for (std::size_t i = 0; i < fit.k; ++i)
        for (std::size_t j = 0; j < fit.k; ++j)
            quad += row[i] * fit.xtx_inverse[i][j] * row[j];
    const double var = fit.sigma2 * std::max(quad, 0.0);
    const double tcrit = student_t_quantile(0.5 * (1.0 + level), static_cast<double>(fit.df()));
    const double half = tcrit * std::sqrt(var);
    return {pred - half, pred + half};
}

std::vector<std::vector<double>> thin_q(const std::vector<std::vector<double>>& columns,
                                        const std::vector<std::string>* names) {
    Householder qr;
    qr.factor(columns);
    qr.check_rank(names);
    std::vector<std::vector<double>> q(qr.k);
    for (std::size_t j = 0; j < qr.k; ++j) {
        std::vector<double> e(qr.n, 0.0);
        e[j] = 1.0;
        qr.apply_q(e);
        q[j] = std::move(e);
    }
    return q;
}

double projection_ssr(const std::vector<std::vector<double>>& q, const std::vector<double>& y) {
    const std::size_t k = q.size();
    std::vector<double> coef(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        double d = 0.0;
        const auto& col = q[j];
        for (std::size_t i = 0; i < y.size(); ++i) d += col[i] * y[i];
        coef[j] = d;
    }
    double ssr = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double r = y[i];
        for (std::size_t j = 0; j < k; ++j) r -= coef[j] * q[j][i];
        ssr += r * r;
    }
    return ssr;
}

} // namespace tbshare
