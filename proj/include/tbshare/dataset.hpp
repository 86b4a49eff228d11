#ifndef TBSHARE_DATASET_HPP
#define TBSHARE_DATASET_HPP

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tbshare {

// One raw panel period as read from the CSV.
struct Observation {
    int period_index = 0;
    std::string date_label;
    double tether_holdings = 0.0;    // USD
    double tbills_outstanding = 0.0; // USD
    double yield_1m = 0.0;           // percent per annum
    double yield_3m = 0.0;           // percent per annum
};

// CSV header the loader requires, in order.
extern const char* const kCsvHeader;

// What to do with the first period, whose outstanding change is undefined.
enum class FirstPeriodPolicy { BackfillZero, DropFirst };

// Design-matrix-ready derived variables, one entry per retained period.
struct DerivedPanel {
    std::vector<int> period_index;
    std::vector<std::string> date_label;
    std::vector<double> market_share;          // decimal fraction
    std::vector<double> log_yield_1m;          // ln(yield in percent)
    std::vector<double> log_yield_3m;
    std::vector<double> time_trend;            // period_index as double
    std::vector<double> tbill_change;          // USD first difference
    std::vector<double> tbill_change_ihs;
    std::vector<double> tbill_change_residual; // OLS residual x 1000

    std::size_t size() const { return market_share.size(); }

    // Accepts "1m", "3m", "log_yield_1m", "log_yield_3m".
    const std::vector<double>& response(const std::string& name) const;
};

// Parse only: structural CSV problems (bad header, field count, unparseable
// numbers) throw ValidationError with the line number. No invariant checks.
std::vector<Observation> parse_panel_csv(std::istream& in);

// Invariant checks on parsed observations (sorted copy is checked):
// consecutive period_index from 1, holdings/outstanding/yield constraints.
// Each finding names the offending period. Empty means clean.
std::vector<std::string> validate_panel(const std::vector<Observation>& obs);

// Parse + sort + validate; throws ValidationError listing every finding.
std::vector<Observation> load_panel(std::istream& in);

double market_share(double holdings, double outstanding);

// Inverse hyperbolic sine, ln(x + sqrt(x^2 + 1)).
double ihs(double x);

// Residuals (x1000) from regressing ihs_changes on const, trend, share.
std::vector<double> residualize_issuance(const std::vector<double>& ihs_changes,
                                         const std::vector<double>& time_trend,
                                         const std::vector<double>& share);

DerivedPanel derive_panel(const std::vector<Observation>& obs,
                          FirstPeriodPolicy policy = FirstPeriodPolicy::BackfillZero);

struct VariableStats {
    std::string name;
    double mean = 0.0;
    double sd = 0.0; // sample standard deviation (n-1)
    double min = 0.0;
    double max = 0.0;
};

// Moments plus lower-triangular Pearson correlations over the six derived
// variables, in the fixed order of `variable_order`. corr[i][j] is defined
// for j < i; a zero-variance variable yields disengaged (nullopt) entries.
struct SummaryStats {
    std::vector<VariableStats> variables;
    std::vector<std::vector<std::optional<double>>> corr;

    static const std::vector<std::string>& variable_order();
};

SummaryStats summary_stats(const DerivedPanel& panel);

// Pearson correlation; nullopt if either input has zero variance.
std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b);

} // namespace tbshare

#endif
