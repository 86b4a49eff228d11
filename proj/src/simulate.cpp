#include "tbshare/simulate.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <system_error>

#include "tbshare/errors.hpp"
#include "tbshare/rng.hpp"

namespace tbshare {

namespace {

std::string shortest(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw IoError("number formatting failed");
    return std::string(buf, ptr);
}

std::string quarter_label(int period) {
    const int q = (period - 1) % 4;
    const int year = 2022 + (period - 1) / 4;
    return std::to_string(year) + "Q" + std::to_string(q + 1);
}

void check_config(const SimConfig& c) {
    if (c.n < 10) throw ValidationError("simulate: n must be >= 10");
    if (!(c.noise_sd >= 0.0)) throw ValidationError("simulate: noise_sd must be >= 0");
    if (!(c.share_min > 0.0) || !(c.share_max < 1.0) || c.share_min > c.share_max)
        throw ValidationError("simulate: share range must satisfy 0 < min <= max < 1");
    if (!(c.planted_tau > 0.0) || !(c.planted_tau < 1.0))
        throw ValidationError("simulate: planted_tau must lie in (0, 1)");
    if (!(c.outstanding_base > 0.0))
        throw ValidationError("simulate: outstanding_base must be > 0");
    if (!(c.outstanding_drift >= 0.0) || !(c.drift_jitter >= 0.0) || c.drift_jitter >= 1.0)
        throw ValidationError("simulate: drift must be >= 0 with jitter in [0, 1)");
}

} // namespace

std::vector<Observation> simulate_panel(const SimConfig& config) {
    check_config(config);
    const std::size_t n = static_cast<std::size_t>(config.n);
    Rng rng(config.seed);

    // Draw order is fixed: shares, outstanding increments, then the two
    // noise vectors. Changing it would silently change every seeded panel.
    std::vector<double> share(n);
    for (auto& s : share) s = rng.uniform(config.share_min, config.share_max);
    share[n / 2] = config.planted_tau; // guarantees an observed candidate at the break

    std::vector<double> outstanding(n);
    outstanding[0] = config.outstanding_base;
    for (std::size_t i = 1; i < n; ++i) {
        const double u = rng.uniform(-1.0, 1.0);
        outstanding[i] =
            outstanding[i - 1] + config.outstanding_drift * (1.0 + config.drift_jitter * u);
    }

    std::vector<double> z1(n), z3(n);
    for (auto& z : z1) z = rng.normal();
    for (auto& z : z3) z = rng.normal();

    // Mirror the derivation pipeline so the planted coefficients act on the
    // exact regressors a downstream fit will see.
    std::vector<double> trend(n), change(n, 0.0), ihs_m(n);
    for (std::size_t i = 0; i < n; ++i) trend[i] = static_cast<double>(i + 1);
    for (std::size_t i = 1; i < n; ++i) change[i] = outstanding[i] - outstanding[i - 1];
    for (std::size_t i = 0; i < n; ++i) ihs_m[i] = ihs(change[i] / 1e6);
    const std::vector<double> resid = residualize_issuance(ihs_m, trend, share);

    std::vector<Observation> obs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool high = share[i] > config.planted_tau;
        const double base1 = config.alpha +
                             (high ? config.high_slope : config.low_slope) * share[i] +
                             (high ? config.intercept_shift : 0.0) +
                             config.trend_coef * trend[i] + config.resid_coef * resid[i];
        const double base3 =
            config.alpha + config.alpha_offset_3m +
            config.slope_scale_3m * (high ? config.high_slope : config.low_slope) * share[i] +
            (high ? config.shift_scale_3m * config.intercept_shift : 0.0) +
            config.trend_coef * trend[i] + config.resid_coef * resid[i];
        Observation& o = obs[i];
        o.period_index = static_cast<int>(i + 1);
        o.date_label = quarter_label(o.period_index);
        o.tbills_outstanding = outstanding[i];
        o.tether_holdings = share[i] * outstanding[i];
        o.yield_1m = std::exp(base1 + config.noise_sd * z1[i]);
        o.yield_3m = std::exp(base3 + config.noise_sd * z3[i]);
    }
    return obs;
}

void write_panel_csv(const std::vector<Observation>& obs, std::ostream& out) {
    out << kCsvHeader << '\n';
    for (const auto& o : obs) {
        out << o.period_index << ',' << o.date_label << ',' << shortest(o.tether_holdings)
            << ',' << shortest(o.tbills_outstanding) << ',' << shortest(o.yield_1m) << ','
            << shortest(o.yield_3m) << '\n';
    }
    if (!out) throw IoError("failed writing panel CSV");
}

nlohmann::json sim_sidecar(const SimConfig& c) {
    return nlohmann::json{
        {"generator",
         {{"seed", c.seed},
          {"n", c.n},
          {"planted_tau", c.planted_tau},
          {"low_slope", c.low_slope},
          {"high_slope", c.high_slope},
          {"intercept_shift", c.intercept_shift},
          {"noise_sd", c.noise_sd},
          {"alpha", c.alpha},
          {"trend_coef", c.trend_coef},
          {"resid_coef", c.resid_coef},
          {"share_min", c.share_min},
          {"share_max", c.share_max},
          {"outstanding_base", c.outstanding_base},
          {"outstanding_drift", c.outstanding_drift},
          {"drift_jitter", c.drift_jitter},
          {"slope_scale_3m", c.slope_scale_3m},
          {"shift_scale_3m", c.shift_scale_3m},
          {"alpha_offset_3m", c.alpha_offset_3m}}},
        {"notes",
         {"log yield = alpha + slope(regime)*share + shift*I(high) + trend_coef*t + "
          "resid_coef*R + noise_sd*z, regimes split at planted_tau with low regime "
          "share <= tau",
          "the middle observation's share is forced to planted_tau so the break sits "
          "on an observed candidate",
          "R is the scaled residual the derivation pipeline recomputes (first-period "
          "change backfilled with 0, IHS on changes in millions)",
          "draw order: shares, outstanding increments, 1m noise, 3m noise"}}};
}

} // namespace tbshare
