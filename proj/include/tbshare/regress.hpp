#ifndef TBSHARE_REGRESS_HPP
#define TBSHARE_REGRESS_HPP

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace tbshare {

// Canonical design-column names shared across modules.
inline constexpr const char* kColConst = "const";
inline constexpr const char* kColShift = "shift_high";
inline constexpr const char* kColShareLow = "share_low";
inline constexpr const char* kColShareHigh = "share_high";
inline constexpr const char* kColShare = "share";
inline constexpr const char* kColTrend = "trend";
inline constexpr const char* kColResid = "resid";

// Column-major design matrix with named regressors and a flagged constant.
struct DesignMatrix {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns; // columns[j] has length n
    std::vector<double> response;
    std::size_t constant_column = 0;

    std::size_t n() const { return response.size(); }
    std::size_t k() const { return columns.size(); }

    void add_column(std::string name, std::vector<double> values, bool is_constant = false);

    // Throws ValidationError if invariants fail: n > k, unique names,
    // exactly one constant column, equal column lengths.
    void check() const;

private:
    int constant_flags_ = 0;
};

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> coefficients;
    std::vector<double> standard_errors;
    std::vector<double> t_stats;
    std::vector<double> p_values;
    double r_squared = 0.0;
    double adj_r_squared = 0.0;
    double ssr = 0.0;
    double sigma2 = 0.0; // ssr / (n - k)
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<double> fitted;
    std::vector<double> residuals;
    std::vector<std::vector<double>> xtx_inverse; // k x k

    std::size_t df() const { return n - k; }
    // Index of a named coefficient; throws EstimationError if absent.
    std::size_t index_of(const std::string& name) const;
    double coef(const std::string& name) const { return coefficients[index_of(name)]; }
    double se(const std::string& name) const { return standard_errors[index_of(name)]; }
};

// Least squares via Householder QR. Classical homoskedastic inference:
// se_j = sqrt(sigma2 * [(X'X)^-1]_jj), two-sided Student-t p-values with
// n - k degrees of freedom. Throws EstimationError on rank deficiency
// (smallest |R_jj| < 1e-10 * largest) naming the offending columns.
FitResult ols_fit(const DesignMatrix& design);

// "***" p<0.01, "**" p<0.05, "*" p<0.10, else ""; NaN -> "".
std::string significance_stars(double p_value);

// Student-t distribution via the regularized incomplete beta function.
double student_t_cdf(double t, double df);
double student_t_quantile(double p, double df);
double student_t_two_sided_p(double t, double df);

// Regularized incomplete beta I_x(a, b), exposed for tests.
double incomplete_beta(double a, double b, double x);

// Pointwise CI for x'beta at `row` (one value per design column).
std::pair<double, double> fitted_value_ci(const FitResult& fit,
                                          const std::vector<double>& row,
                                          double level);

// Thin Q of the Householder QR of the columns (orthonormal basis of the
// column span). Used by the threshold module's projection engine.
// Throws EstimationError on rank deficiency.
std::vector<std::vector<double>> thin_q(const std::vector<std::vector<double>>& columns,
                                        const std::vector<std::string>* names = nullptr);

// Squared norm of y - Q(Q'y) given a thin Q from thin_q().
double projection_ssr(const std::vector<std::vector<double>>& q, const std::vector<double>& y);

} // namespace tbshare

#endif
