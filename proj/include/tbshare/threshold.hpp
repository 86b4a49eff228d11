#ifndef TBSHARE_THRESHOLD_HPP
#define TBSHARE_THRESHOLD_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tbshare/dataset.hpp"
#include "tbshare/regress.hpp"

namespace tbshare {

struct ThresholdSpec {
    std::string threshold_variable = "market_share"; // only supported choice
    double trim_fraction = 0.15;                     // in [0, 0.5)
    bool include_intercept_shift = true;
    bool refined_grid = true;     // add interior points between observed values
    int refined_points = 99;      // evenly spaced interior points per gap
    std::optional<std::vector<double>> candidate_grid; // explicit override

    // Minimum observations per regime: max(ceil(trim*n), p+1) where p is the
    // number of regime-specific coefficients (slope plus optional shift).
    std::size_t min_regime_size(std::size_t n) const;
};

struct SsrPoint {
    double tau = 0.0;
    double ssr = 0.0;
};

struct ThresholdFit {
    double tau = 0.0;
    FitResult fit;              // regime model at tau
    FitResult linear_fit;       // nested linear model
    double ssr_threshold = 0.0; // projection-engine value at tau
    double ssr_linear = 0.0;
    double lr_statistic = 0.0;  // n*(ssr_linear - ssr_threshold)/ssr_threshold
    double bootstrap_p = 1.0;
    std::vector<int> regime_assignment; // 0 low (S <= tau), 1 high
    std::vector<SsrPoint> ssr_profile;  // every admissible candidate, ascending
    std::vector<double> lr_replicates;  // bootstrap LR*, indexed by replication
    double share_min = 0.0;
    double share_max = 0.0;
    std::string response_name;
    bool has_intercept_shift = true;

    double low_slope() const { return fit.coef(kColShareLow); }
    double high_slope() const { return fit.coef(kColShareHigh); }
    double intercept_shift() const { return has_intercept_shift ? fit.coef(kColShift) : 0.0; }
};

// Regime design at tau: const, shift (optional), S*I(S<=tau), S*I(S>tau),
// trend, residual. Throws EstimationError for an empty regime or a tau
// outside the trimmed admissible range.
DesignMatrix regime_design(const DerivedPanel& panel, const std::string& response,
                           double tau, const ThresholdSpec& spec);

// Linear (no-threshold) counterpart: const, S, trend, residual.
DesignMatrix linear_design(const DerivedPanel& panel, const std::string& response);

// Admissible candidate thresholds, ascending (observed values plus refined
// interior points when enabled, or the explicit grid filtered for
// admissibility). Throws EstimationError when empty.
std::vector<double> candidate_thresholds(const DerivedPanel& panel, const ThresholdSpec& spec);

// SSR-minimizing tau over the candidates plus the full profile.
// Ties break toward the smallest tau.
std::pair<double, std::vector<SsrPoint>> grid_search(const DerivedPanel& panel,
                                                     const std::string& response,
                                                     const ThresholdSpec& spec);

// Observed LR plus bootstrap p-value. Fixed-regressor residual bootstrap
// under the linear null; each replication re-runs the grid search. The
// replication stream depends only on (seed, replication index), so any
// thread count gives identical results.
std::pair<double, double> lr_linearity_test(const DerivedPanel& panel,
                                            const std::string& response,
                                            const ThresholdSpec& spec,
                                            int replications, std::uint64_t seed,
                                            int threads = 1);

ThresholdFit threshold_fit(const DerivedPanel& panel, const std::string& response,
                           const ThresholdSpec& spec, int replications,
                           std::uint64_t seed, int threads = 1);

} // namespace tbshare

#endif
