#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "tbshare/errors.hpp"
#include "tbshare/regress.hpp"
#include "tbshare/rng.hpp"
#include "tbshare/threshold.hpp"

using namespace tbshare;

namespace {

struct PanelParams {
    int n = 40;
    double tau = 0.010;
    double low_slope = -1.7;
    double high_slope = -6.3;
    double shift = 0.15;
    double alpha = 0.7;
    double trend_coef = 0.03;
    double resid_coef = 0.2;
    double noise_sd = 0.0;
    std::uint64_t seed = 9;
};

// Shares evenly spaced with the planted tau forced onto the grid, so the
// noiseless optimum is an observed value.
DerivedPanel planted_panel(const PanelParams& pp) {
    Rng rng(pp.seed);
    DerivedPanel p;
    const int n = pp.n;
    std::vector<double> shares(n);
    for (int i = 0; i < n; ++i)
        shares[i] = 0.005 + (0.016 - 0.005) * double(i) / double(n - 1);
    shares[n / 2] = pp.tau;
    std::sort(shares.begin(), shares.end());
    for (int i = 0; i < n; ++i) {
        const double s = shares[i];
        const double t = double(i + 1);
        const double r = rng.normal() * 0.04;
        const bool low = s <= pp.tau;
        double y1 = pp.alpha + (low ? pp.low_slope * s : pp.shift + pp.high_slope * s) +
                    pp.trend_coef * t + pp.resid_coef * r;
        double y3 = y1 + 0.05;
        if (pp.noise_sd > 0.0) {
            y1 += rng.normal() * pp.noise_sd;
            y3 += rng.normal() * pp.noise_sd;
        }
        p.period_index.push_back(i + 1);
        p.date_label.push_back("P" + std::to_string(i + 1));
        p.market_share.push_back(s);
        p.log_yield_1m.push_back(y1);
        p.log_yield_3m.push_back(y3);
        p.time_trend.push_back(t);
        p.tbill_change.push_back(0.0);
        p.tbill_change_ihs.push_back(0.0);
        p.tbill_change_residual.push_back(r);
    }
    return p;
}

bool is_observed(const DerivedPanel& p, double tau) {
    for (double s : p.market_share)
        if (s == tau) return true;
    return false;
}

} // namespace

TEST_CASE("min_regime_size combines the trim floor and the parameter floor") {
    ThresholdSpec spec;
    spec.trim_fraction = 0.15;
    CHECK(spec.min_regime_size(40) == 6);
    CHECK(spec.min_regime_size(13) == 3); // ceil(1.95) = 2 < p+1 = 3
    spec.trim_fraction = 0.0;
    CHECK(spec.min_regime_size(40) == 3);
    spec.include_intercept_shift = false;
    CHECK(spec.min_regime_size(40) == 2);
    spec.trim_fraction = 0.5;
    CHECK_THROWS_AS(spec.min_regime_size(40), ValidationError);
    spec.trim_fraction = -0.1;
    CHECK_THROWS_AS(spec.min_regime_size(40), ValidationError);
}

TEST_CASE("regime_design splits the share column exactly") {
    auto panel = planted_panel({});
    ThresholdSpec spec;
    auto d = regime_design(panel, "log_yield_1m", 0.010, spec);
    REQUIRE(d.names == std::vector<std::string>{kColConst, kColShift, kColShareLow,
                                                kColShareHigh, kColTrend, kColResid});
    const auto& low = d.columns[2];
    const auto& high = d.columns[3];
    const auto& shift = d.columns[1];
    for (std::size_t i = 0; i < panel.size(); ++i) {
        CHECK(low[i] + high[i] == panel.market_share[i]);
        CHECK((low[i] == 0.0 || high[i] == 0.0));
        const bool is_low = panel.market_share[i] <= 0.010;
        CHECK(shift[i] == (is_low ? 0.0 : 1.0));
        CHECK((is_low ? low[i] : high[i]) == panel.market_share[i]);
    }
}

TEST_CASE("regime_design rejects empty regimes and inadmissible taus") {
    auto panel = planted_panel({});
    ThresholdSpec spec;
    CHECK_THROWS_WITH_AS(regime_design(panel, "log_yield_1m", 0.001, spec),
                         doctest::Contains("empty regime"), EstimationError);
    CHECK_THROWS_WITH_AS(regime_design(panel, "log_yield_1m", 0.020, spec),
                         doctest::Contains("empty regime"), EstimationError);
    // Both regimes populated but the low one is below the trimmed minimum.
    CHECK_THROWS_WITH_AS(regime_design(panel, "log_yield_1m", panel.market_share[1], spec),
                         doctest::Contains("admissible"), EstimationError);
}

TEST_CASE("candidate_thresholds respects trimming on both sides") {
    auto panel = planted_panel({});
    ThresholdSpec spec;
    spec.refined_grid = false;
    auto taus = candidate_thresholds(panel, spec);
    REQUIRE(!taus.empty());
    CHECK(std::is_sorted(taus.begin(), taus.end()));
    const auto m = spec.min_regime_size(panel.size());
    for (double tau : taus) {
        std::size_t low = 0;
        for (double s : panel.market_share)
            if (s <= tau) ++low;
        CHECK(low >= m);
        CHECK(panel.size() - low >= m);
        CHECK(is_observed(panel, tau));
    }
    // n=40, m=6: admissible observed values are order statistics 6..34.
    CHECK(taus.size() == 40 - 2 * 6 + 1);
}

TEST_CASE("refined grid adds interior points whose ssr matches the left observed value") {
    PanelParams pp;
    pp.noise_sd = 0.01;
    auto panel = planted_panel(pp);
    ThresholdSpec spec;
    auto [tau, profile] = grid_search(panel, "log_yield_1m", spec);
    std::set<double> observed(panel.market_share.begin(), panel.market_share.end());
    std::size_t interior = 0;
    double last_observed_ssr = 0.0;
    bool seen_observed = false;
    for (const auto& pt : profile) {
        if (observed.count(pt.tau)) {
            last_observed_ssr = pt.ssr;
            seen_observed = true;
        } else {
            ++interior;
            REQUIRE(seen_observed);
            CHECK(pt.ssr == last_observed_ssr); // same partition, same projection
        }
    }
    CHECK(interior > 0);
    CHECK(is_observed(panel, tau)); // interior ties lose to the observed left edge
}

TEST_CASE("grid_search matches a brute-force refit at every candidate") {
    PanelParams pp;
    pp.n = 36;
    pp.noise_sd = 0.015;
    pp.seed = 21;
    auto panel = planted_panel(pp);
    ThresholdSpec spec;
    spec.refined_grid = false;
    auto [tau, profile] = grid_search(panel, "log_yield_1m", spec);
    double best_ssr = std::numeric_limits<double>::infinity();
    double best_tau = 0.0;
    for (const auto& pt : profile) {
        auto fit = ols_fit(regime_design(panel, "log_yield_1m", pt.tau, spec));
        CHECK(pt.ssr == doctest::Approx(fit.ssr).epsilon(1e-9));
        if (fit.ssr < best_ssr) {
            best_ssr = fit.ssr;
            best_tau = pt.tau;
        }
    }
    CHECK(tau == best_tau);
}

TEST_CASE("noiseless planted break is recovered exactly") {
    PanelParams pp;
    auto panel = planted_panel(pp);
    ThresholdSpec spec;
    auto fit = threshold_fit(panel, "log_yield_1m", spec, 49, 11);
    CHECK(fit.tau == pp.tau);
    CHECK(fit.low_slope() == doctest::Approx(pp.low_slope).epsilon(1e-7));
    CHECK(fit.high_slope() == doctest::Approx(pp.high_slope).epsilon(1e-7));
    CHECK(fit.intercept_shift() == doctest::Approx(pp.shift).epsilon(1e-7));
    CHECK(fit.fit.coef(kColTrend) == doctest::Approx(pp.trend_coef).epsilon(1e-7));
    CHECK(fit.fit.coef(kColResid) == doctest::Approx(pp.resid_coef).epsilon(1e-6));
    CHECK(fit.ssr_threshold <= 1e-18);
    CHECK(fit.lr_statistic > 1e3);
    CHECK(fit.bootstrap_p <= 0.05);
    for (std::size_t i = 0; i < panel.size(); ++i)
        CHECK(fit.regime_assignment[i] == (panel.market_share[i] <= fit.tau ? 0 : 1));
    CHECK(fit.share_min == panel.market_share.front());
    CHECK(fit.share_max == panel.market_share.back());
    CHECK(fit.response_name == "log_yield_1m");
}

TEST_CASE("threshold model nests the linear model") {
    PanelParams pp;
    pp.noise_sd = 0.02;
    pp.seed = 5;
    auto panel = planted_panel(pp);
    ThresholdSpec spec;
    auto fit = threshold_fit(panel, "log_yield_3m", spec, 60, 3);
    CHECK(fit.ssr_threshold <= fit.ssr_linear * (1.0 + 1e-12));
    CHECK(fit.lr_statistic >= 0.0);
    for (double lr : fit.lr_replicates) CHECK(lr >= 0.0);
    CHECK(fit.linear_fit.names ==
          std::vector<std::string>{kColConst, kColShare, kColTrend, kColResid});
    CHECK(fit.bootstrap_p > 0.0);
    CHECK(fit.bootstrap_p <= 1.0);
    // p = (1 + #{LR* >= LR}) / (1 + B)
    int ge = 0;
    for (double lr : fit.lr_replicates)
        if (lr >= fit.lr_statistic) ++ge;
    CHECK(fit.bootstrap_p == doctest::Approx((1.0 + ge) / 61.0).epsilon(1e-12));
    CHECK(fit.lr_replicates.size() == 60);
}

TEST_CASE("tie-break picks the smallest tau attaining the minimum ssr") {
    PanelParams pp;
    pp.noise_sd = 0.02;
    pp.seed = 13;
    auto panel = planted_panel(pp);
    ThresholdSpec spec;
    auto [tau, profile] = grid_search(panel, "log_yield_1m", spec);
    double min_ssr = std::numeric_limits<double>::infinity();
    for (const auto& pt : profile) min_ssr = std::min(min_ssr, pt.ssr);
    for (const auto& pt : profile) {
        if (pt.ssr == min_ssr) {
            CHECK(tau == pt.tau);
            break;
        }
    }
}

TEST_CASE("bootstrap is deterministic and schedule independent") {
    PanelParams pp;
    pp.noise_sd = 0.015;
    pp.seed = 2;
    auto panel = planted_panel(pp);
    ThresholdSpec spec;
    auto serial = threshold_fit(panel, "log_yield_1m", spec, 80, 42, 1);
    auto again = threshold_fit(panel, "log_yield_1m", spec, 80, 42, 1);
    auto parallel = threshold_fit(panel, "log_yield_1m", spec, 80, 42, 4);
    REQUIRE(serial.lr_replicates.size() == 80);
    CHECK(serial.lr_replicates == again.lr_replicates);
    CHECK(serial.lr_replicates == parallel.lr_replicates);
    CHECK(serial.bootstrap_p == parallel.bootstrap_p);
    CHECK(serial.tau == parallel.tau);

    auto other_seed = threshold_fit(panel, "log_yield_1m", spec, 80, 43, 1);
    CHECK(serial.lr_replicates != other_seed.lr_replicates);
}

TEST_CASE("intercept shift can be disabled") {
    PanelParams pp;
    pp.shift = 0.0;
    auto panel = planted_panel(pp);
    ThresholdSpec spec;
    spec.include_intercept_shift = false;
    auto fit = threshold_fit(panel, "log_yield_1m", spec, 30, 1);
    CHECK(fit.tau == pp.tau);
    CHECK(fit.low_slope() == doctest::Approx(pp.low_slope).epsilon(1e-7));
    CHECK(fit.high_slope() == doctest::Approx(pp.high_slope).epsilon(1e-7));
    CHECK(fit.intercept_shift() == 0.0);
    CHECK(!fit.has_intercept_shift);
    CHECK(std::find(fit.fit.names.begin(), fit.fit.names.end(), kColShift) ==
          fit.fit.names.end());
}

TEST_CASE("explicit candidate grids are filtered for admissibility") {
    auto panel = planted_panel({});
    ThresholdSpec spec;
    spec.candidate_grid = std::vector<double>{0.012, 0.009, 0.0005, 0.012};
    auto taus = candidate_thresholds(panel, spec);
    CHECK(taus == std::vector<double>{0.009, 0.012});

    ThresholdSpec hopeless;
    hopeless.candidate_grid = std::vector<double>{0.0001, 0.9};
    CHECK_THROWS_WITH_AS(candidate_thresholds(panel, hopeless),
                         doctest::Contains("no admissible"), EstimationError);
}

TEST_CASE("lr_linearity_test agrees with the full fit") {
    PanelParams pp;
    pp.noise_sd = 0.02;
    pp.seed = 31;
    auto panel = planted_panel(pp);
    ThresholdSpec spec;
    auto [lr, p] = lr_linearity_test(panel, "log_yield_1m", spec, 50, 17);
    auto fit = threshold_fit(panel, "log_yield_1m", spec, 50, 17);
    CHECK(lr == fit.lr_statistic);
    CHECK(p == fit.bootstrap_p);
}

TEST_CASE("threshold machinery rejects unusable inputs") {
    auto panel = planted_panel({});
    ThresholdSpec spec;
    spec.threshold_variable = "time_trend";
    CHECK_THROWS_AS(threshold_fit(panel, "log_yield_1m", spec, 10, 1), ValidationError);

    ThresholdSpec ok;
    CHECK_THROWS_AS(threshold_fit(panel, "log_yield_1m", ok, 0, 1), ValidationError);
    CHECK_THROWS_AS(threshold_fit(panel, "log_yield_1m", ok, 10, 1, 0), ValidationError);
    CHECK_THROWS_AS(threshold_fit(panel, "no_such_response", ok, 10, 1), ValidationError);

    PanelParams tiny;
    tiny.n = 5;
    auto small = planted_panel(tiny);
    CHECK_THROWS_AS(threshold_fit(small, "log_yield_1m", ok, 10, 1), EstimationError);
}
