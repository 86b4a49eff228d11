#ifndef TBSHARE_ANALYSIS_HPP
#define TBSHARE_ANALYSIS_HPP

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tbshare/dataset.hpp"
#include "tbshare/regress.hpp"
#include "tbshare/threshold.hpp"

namespace tbshare {

struct ImpactQuery {
    double semi_elasticity = 0.0; // fitted beta
    double delta_share = 0.0;     // change in S, decimal fraction
    double baseline_yield = 0.0;  // percent per annum, > 0
};

struct ImpactReport {
    double relative_change = 0.0;     // approx change in ln(yield)
    double bps_change = 0.0;          // first-order, basis points
    double counterfactual_yield = 0.0; // percent, exact exponential
    double annual_savings = 0.0;      // USD per year, positive when yields fall
};

// First-order yield change in basis points: beta * dS * yield * 100.
double bps_impact(const ImpactQuery& query);

// (bps_reduction / 1e4) * outstanding.
double annual_savings(double bps_reduction, double outstanding);

// Piecewise-constant semi-elasticity beta(s) implied by a fit: a single
// slope for linear fits, regime slopes split at tau for threshold fits.
struct SlopeSchedule {
    std::optional<double> tau;
    double low_slope = 0.0;
    double high_slope = 0.0;
    std::optional<std::pair<double, double>> support; // admissible share range

    // Signed integral of beta(s) ds from `from` to `to`.
    double integrate(double from, double to) const;
};

// Uses the "share" coefficient; throws EstimationError if absent.
SlopeSchedule slope_schedule(const FitResult& fit);
SlopeSchedule slope_schedule(const ThresholdFit& fit);

// actual_yield * exp(-integral of beta(s) from reference to actual).
// Throws ValidationError when a share lies outside the schedule's support.
double counterfactual_yield(const SlopeSchedule& schedule, double actual_share,
                            double reference_share, double actual_yield);

// Full report for a move from reference_share to reference_share+delta_share.
ImpactReport impact_report(const SlopeSchedule& schedule, double reference_share,
                           double delta_share, double baseline_yield,
                           double outstanding);

enum class TableLayout { Baseline, Threshold };

using AnyFit = std::variant<FitResult, ThresholdFit>;

struct RenderedTable {
    std::string text;
    nlohmann::json json; // {"models": [...]}
};

// Publication-style table: coefficients with SEs in parentheses and
// significance stars, fixed row order, R-squared block. The JSON mirror
// carries full precision. Throws ValidationError when the fit kinds do not
// match the layout.
RenderedTable render_table(const std::vector<AnyFit>& fits, TableLayout layout,
                           const std::vector<std::string>& model_names);

// Round half away from zero to `digits` decimals (table display rule).
double round_half_away(double x, int digits);

// Scatter of (share, log yield) with regime fit lines, 95% CI bands,
// and a dashed vertical rule at tau. Self-contained SVG document.
std::string render_regime_figure(const ThresholdFit& fit, const DerivedPanel& panel);

// Text rendering of summary_stats output (moments plus correlations).
std::string render_summary(const SummaryStats& stats);

// Reference envelopes for the 2022Q1-2025Q1 sample window; returns messages
// for variables outside their envelope, empty when consistent.
std::vector<std::string> envelope_findings(const SummaryStats& stats);

} // namespace tbshare

#endif
