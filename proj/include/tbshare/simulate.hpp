#ifndef TBSHARE_SIMULATE_HPP
#define TBSHARE_SIMULATE_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "tbshare/dataset.hpp"

namespace tbshare {

// Synthetic panel with a planted threshold in the share-yield relation.
// The generator reproduces the derivation pipeline (backfilled first-period
// change, IHS in millions, residualization) so a downstream fit sees exactly
// the regressors the yields were built from.
struct SimConfig {
    std::uint64_t seed = 1;
    int n = 40;
    double planted_tau = 0.010;
    double low_slope = -1.7;
    double high_slope = -6.3;
    double intercept_shift = 0.15;
    double noise_sd = 0.01;
    double alpha = 0.7;         // low-regime intercept of log yield
    double trend_coef = 0.03;
    double resid_coef = 1e-4;
    double share_min = 0.005;
    double share_max = 0.016;
    double outstanding_base = 5.5e12;  // USD
    double outstanding_drift = 45e9;   // mean per-period increment, USD
    double drift_jitter = 0.1;         // increment = drift*(1 + jitter*u)

    // 3-month response reuses the regimes with scaled parameters.
    double slope_scale_3m = 0.9;
    double shift_scale_3m = 0.95;
    double alpha_offset_3m = 0.05;
};

// Throws ValidationError for n < 10, noise_sd < 0, or an inconsistent config.
std::vector<Observation> simulate_panel(const SimConfig& config);

// Writes the documented CSV schema. Numbers use %.17g so a round trip
// through the loader is exact.
void write_panel_csv(const std::vector<Observation>& obs, std::ostream& out);

// Generator parameters echoed for oracle comparison.
nlohmann::json sim_sidecar(const SimConfig& config);

} // namespace tbshare

#endif
