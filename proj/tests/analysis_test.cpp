#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "tbshare/analysis.hpp"
#include "tbshare/errors.hpp"
#include "tbshare/rng.hpp"
#include "tbshare/threshold.hpp"

using namespace tbshare;

namespace {

DerivedPanel test_panel(int n, double noise_sd, std::uint64_t seed) {
    Rng rng(seed);
    DerivedPanel p;
    const double tau = 0.010;
    std::vector<double> shares(n);
    for (int i = 0; i < n; ++i)
        shares[i] = 0.005 + (0.016 - 0.005) * double(i) / double(n - 1);
    shares[n / 2] = tau;
    std::sort(shares.begin(), shares.end());
    for (int i = 0; i < n; ++i) {
        const double s = shares[i];
        const double t = double(i + 1);
        const double r = rng.normal() * 0.04;
        double y = 0.7 + (s <= tau ? -1.7 * s : 0.15 - 6.3 * s) + 0.03 * t + 0.2 * r;
        if (noise_sd > 0.0) y += rng.normal() * noise_sd;
        p.period_index.push_back(i + 1);
        p.date_label.push_back("P" + std::to_string(i + 1));
        p.market_share.push_back(s);
        p.log_yield_1m.push_back(y);
        p.log_yield_3m.push_back(y + 0.05);
        p.time_trend.push_back(t);
        p.tbill_change.push_back(4.5e10 + 1e9 * std::sin(double(i)));
        p.tbill_change_ihs.push_back(11.41 + 0.005 * std::sin(double(i)));
        p.tbill_change_residual.push_back(r);
    }
    return p;
}

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
    std::size_t count = 0, pos = 0;
    while ((pos = hay.find(needle, pos)) != std::string::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

std::string attr_value(const std::string& element, const std::string& attr) {
    const auto key = attr + "=\"";
    const auto start = element.find(key);
    REQUIRE(start != std::string::npos);
    const auto end = element.find('"', start + key.size());
    return element.substr(start + key.size(), end - start - key.size());
}

std::string element_around(const std::string& svg, std::size_t pos) {
    REQUIRE(pos != std::string::npos);
    const auto start = svg.rfind('<', pos);
    const auto end = svg.find('>', pos);
    return svg.substr(start, end - start + 1);
}

std::string element_at(const std::string& svg, const std::string& marker) {
    return element_around(svg, svg.find(marker));
}

} // namespace

TEST_CASE("bps_impact matches hand-computed values") {
    CHECK(bps_impact({-1.730, 0.001, 4.24}) == doctest::Approx(-0.73352).epsilon(1e-12));
    CHECK(bps_impact({-6.264, 0.001, 4.24}) == doctest::Approx(-2.655936).epsilon(1e-12));
    CHECK(bps_impact({-3.795, 0.01, 4.16}) == doctest::Approx(-15.7872).epsilon(1e-12));
    CHECK(bps_impact({-3.795, 0.0, 4.16}) == 0.0);
    CHECK(bps_impact({2.0, 0.01, 5.0}) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK_THROWS_AS(bps_impact({-1.0, 0.01, 0.0}), ValidationError);
    CHECK_THROWS_AS(bps_impact({-1.0, 0.01, -4.0}), ValidationError);
}

TEST_CASE("annual_savings scales bps onto the outstanding stock") {
    CHECK(annual_savings(24.0, 6.2e12) == doctest::Approx(14.88e9).epsilon(1e-12));
    CHECK(annual_savings(16.0, 6.2e12) == doctest::Approx(9.92e9).epsilon(1e-12));
    CHECK(annual_savings(0.0, 6.2e12) == 0.0);
    CHECK(annual_savings(-10.0, 1e12) == doctest::Approx(-1e9).epsilon(1e-12));
    CHECK(annual_savings(1.0, 0.0) == 0.0);
    CHECK_THROWS_AS(annual_savings(1.0, -1.0), ValidationError);
}

TEST_CASE("slope schedule integrates piecewise across the threshold") {
    SlopeSchedule sch;
    sch.tau = 0.010;
    sch.low_slope = -1.7;
    sch.high_slope = -6.3;
    CHECK(sch.integrate(0.008, 0.012) ==
          doctest::Approx(-1.7 * 0.002 - 6.3 * 0.002).epsilon(1e-12));
    CHECK(sch.integrate(0.012, 0.008) ==
          doctest::Approx(1.7 * 0.002 + 6.3 * 0.002).epsilon(1e-12));
    CHECK(sch.integrate(0.006, 0.009) == doctest::Approx(-1.7 * 0.003).epsilon(1e-12));
    CHECK(sch.integrate(0.011, 0.014) == doctest::Approx(-6.3 * 0.003).epsilon(1e-12));
    CHECK(sch.integrate(0.010, 0.010) == 0.0);

    SlopeSchedule lin;
    lin.low_slope = -3.795;
    lin.high_slope = -3.795;
    CHECK(lin.integrate(0.0, 0.01) == doctest::Approx(-0.03795).epsilon(1e-12));
}

TEST_CASE("counterfactual yield strips the share effect exactly") {
    SlopeSchedule lin;
    lin.low_slope = -3.795;
    lin.high_slope = -3.795;
    // Removing one point of share raises the yield: 4.16 * exp(0.03795).
    CHECK(counterfactual_yield(lin, 0.0107, 0.0007, 4.16) ==
          doctest::Approx(4.320905878079424).epsilon(1e-12));
    CHECK(counterfactual_yield(lin, 0.0107, 0.0107, 4.16) == doctest::Approx(4.16));
    CHECK_THROWS_AS(counterfactual_yield(lin, 0.01, 0.0, 0.0), ValidationError);
}

TEST_CASE("counterfactual yield enforces the support range") {
    SlopeSchedule sch;
    sch.tau = 0.010;
    sch.low_slope = -1.7;
    sch.high_slope = -6.3;
    sch.support = std::make_pair(0.005, 0.016);
    CHECK_NOTHROW(counterfactual_yield(sch, 0.016, 0.005, 4.0));
    CHECK_THROWS_WITH_AS(counterfactual_yield(sch, 0.02, 0.005, 4.0),
                         doctest::Contains("admissible share range"), ValidationError);
    CHECK_THROWS_WITH_AS(counterfactual_yield(sch, 0.012, 0.001, 4.0),
                         doctest::Contains("admissible share range"), ValidationError);
}

TEST_CASE("impact_report ties the pieces together coherently") {
    SlopeSchedule sch;
    sch.tau = 0.010;
    sch.low_slope = -1.7;
    sch.high_slope = -6.3;
    auto rep = impact_report(sch, 0.008, 0.004, 4.24, 6.2e12);
    const double integral = -1.7 * 0.002 - 6.3 * 0.002;
    CHECK(rep.relative_change == doctest::Approx(integral).epsilon(1e-12));
    CHECK(rep.bps_change == doctest::Approx(integral * 4.24 * 100.0).epsilon(1e-12));
    CHECK(rep.counterfactual_yield == doctest::Approx(4.24 * std::exp(-integral)).epsilon(1e-12));
    CHECK(rep.annual_savings ==
          doctest::Approx(-rep.bps_change / 1e4 * 6.2e12).epsilon(1e-12));
    // Negative slopes and a positive share move: yields fall, savings accrue.
    CHECK(rep.bps_change < 0.0);
    CHECK(rep.counterfactual_yield > 4.24);
    CHECK(rep.annual_savings > 0.0);

    auto rev = impact_report(sch, 0.012, -0.004, 4.24, 6.2e12);
    CHECK(rev.relative_change == doctest::Approx(-integral).epsilon(1e-12));
    CHECK(rev.annual_savings < 0.0);
}

TEST_CASE("first-order bps stays near the exact exponential for small moves") {
    SlopeSchedule lin;
    for (double beta : {-6.0, -2.0, 1.5}) {
        lin.low_slope = beta;
        lin.high_slope = beta;
        for (double ds : {0.001, 0.004, 0.008}) {
            if (std::fabs(beta * ds) > 0.05) continue;
            auto rep = impact_report(lin, 0.005, ds, 4.0, 1e12);
            const double exact_rel = rep.counterfactual_yield / 4.0 - 1.0;
            // counterfactual removes the move, so compare against -relative.
            CHECK(std::fabs(exact_rel - (-rep.relative_change)) <
                  0.03 * std::fabs(rep.relative_change));
        }
    }
}

TEST_CASE("slope_schedule extraction from fits") {
    auto panel = test_panel(40, 0.01, 3);
    auto lin = ols_fit(linear_design(panel, "log_yield_1m"));
    auto sch = slope_schedule(lin);
    CHECK(!sch.tau.has_value());
    CHECK(sch.low_slope == lin.coef(kColShare));
    CHECK(sch.high_slope == sch.low_slope);
    CHECK(!sch.support.has_value());

    ThresholdSpec spec;
    auto tfit = threshold_fit(panel, "log_yield_1m", spec, 19, 1);
    auto tsch = slope_schedule(tfit);
    REQUIRE(tsch.tau.has_value());
    CHECK(*tsch.tau == tfit.tau);
    CHECK(tsch.low_slope == tfit.low_slope());
    CHECK(tsch.high_slope == tfit.high_slope());
    REQUIRE(tsch.support.has_value());
    CHECK(tsch.support->first == tfit.share_min);
    CHECK(tsch.support->second == tfit.share_max);
}

TEST_CASE("round_half_away rounds halves away from zero") {
    CHECK(round_half_away(2.5, 0) == 3.0);
    CHECK(round_half_away(-2.5, 0) == -3.0);
    CHECK(round_half_away(1.25, 1) == doctest::Approx(1.3));
    CHECK(round_half_away(-1.25, 1) == doctest::Approx(-1.3));
    CHECK(round_half_away(1.0 / 3.0, 3) == doctest::Approx(0.333));
    CHECK(round_half_away(0.6789, 2) == doctest::Approx(0.68));
    CHECK(round_half_away(-0.0005, 3) == doctest::Approx(-0.001));
    CHECK(round_half_away(0.0, 3) == 0.0);
    CHECK(std::isnan(round_half_away(std::nan(""), 2)));
}

TEST_CASE("render_table text mirrors the JSON at three decimals") {
    auto panel = test_panel(40, 0.01, 7);
    auto lin1 = ols_fit(linear_design(panel, "log_yield_1m"));
    auto lin3 = ols_fit(linear_design(panel, "log_yield_3m"));
    auto rt = render_table({lin1, lin3}, TableLayout::Baseline, {"(1)", "(2)"});

    REQUIRE(rt.json.contains("models"));
    REQUIRE(rt.json["models"].size() == 2);
    const auto& coefs = rt.json["models"][0]["coefficients"];
    double share_est = 0.0, share_se = 0.0;
    for (const auto& c : coefs) {
        if (c["name"] == "share") {
            share_est = c["estimate"].get<double>();
            share_se = c["se"].get<double>();
        }
    }
    CHECK(share_est == lin1.coef(kColShare));
    CHECK(share_se == lin1.se(kColShare));
    CHECK(rt.json["models"][0]["model"] == "(1)");
    CHECK(rt.json["models"][0]["n"] == 40);
    CHECK(rt.json["models"][0]["r2"].get<double>() == lin1.r_squared);

    // Locate the Market Share row and parse its first cell.
    const auto pos = rt.text.find("Market Share");
    REQUIRE(pos != std::string::npos);
    const auto line_start = rt.text.rfind('\n', pos) + 1;
    const auto line_end = rt.text.find('\n', pos);
    const std::string line = rt.text.substr(line_start, line_end - line_start);
    std::string cell = line.substr(30, 14);
    cell.erase(std::remove(cell.begin(), cell.end(), '*'), cell.end());
    CHECK(std::stod(cell) == doctest::Approx(round_half_away(share_est, 3)).epsilon(1e-12));

    const auto se_start = line_end + 1;
    const auto se_end = rt.text.find('\n', se_start);
    const std::string se_line = rt.text.substr(se_start, se_end - se_start);
    std::string se_cell = se_line.substr(30, 14);
    const auto lp = se_cell.find('(');
    const auto rp = se_cell.find(')');
    REQUIRE(lp != std::string::npos);
    REQUIRE(rp != std::string::npos);
    CHECK(std::stod(se_cell.substr(lp + 1, rp - lp - 1)) ==
          doctest::Approx(round_half_away(share_se, 3)).epsilon(1e-12));

    CHECK(rt.text.find("R-squared") != std::string::npos);
    CHECK(rt.text.find("Constant") != std::string::npos);
    CHECK(rt.text.find("(1)") != std::string::npos);
    CHECK(rt.text.find("Threshold") == std::string::npos);
}

TEST_CASE("render_table JSON survives a serialization round trip") {
    auto panel = test_panel(40, 0.01, 11);
    ThresholdSpec spec;
    auto tfit = threshold_fit(panel, "log_yield_1m", spec, 19, 2);
    auto rt = render_table({tfit}, TableLayout::Threshold, {"threshold"});
    const std::string dumped = rt.json.dump();
    const auto parsed = nlohmann::json::parse(dumped);
    CHECK(parsed == rt.json);
    const auto& m = parsed["models"][0];
    CHECK(m["threshold"]["tau"].get<double>() == tfit.tau);
    CHECK(m["threshold"]["lr"].get<double>() == tfit.lr_statistic);
    CHECK(m["threshold"]["p_boot"].get<double>() == tfit.bootstrap_p);
    CHECK(m["support"]["share_min"].get<double>() == tfit.share_min);
    CHECK(m["support"]["share_max"].get<double>() == tfit.share_max);
    CHECK(rt.text.find("Threshold (% Market Share)") != std::string::npos);
    CHECK(rt.text.find("LR Statistic") != std::string::npos);
    CHECK(rt.text.find("Bootstrap p-value") != std::string::npos);
    CHECK(rt.text.find("Market Share (Low Regime)") != std::string::npos);
    CHECK(rt.text.find("Market Share (High Regime)") != std::string::npos);
}

TEST_CASE("render_table rejects mismatched fit kinds") {
    auto panel = test_panel(40, 0.01, 5);
    auto lin = ols_fit(linear_design(panel, "log_yield_1m"));
    CHECK_THROWS_WITH_AS(render_table({lin}, TableLayout::Threshold, {"x"}),
                         doctest::Contains("does not match"), ValidationError);
    CHECK_THROWS_AS(render_table({}, TableLayout::Baseline, {}), ValidationError);
    CHECK_THROWS_AS(render_table({lin}, TableLayout::Baseline, {"a", "b"}), ValidationError);
}

TEST_CASE("regime figure carries exactly the documented elements") {
    auto panel = test_panel(40, 0.01, 13);
    ThresholdSpec spec;
    auto tfit = threshold_fit(panel, "log_yield_1m", spec, 19, 4);
    const std::string svg = render_regime_figure(tfit, panel);

    CHECK(count_occurrences(svg, "<path ") == 2);
    CHECK(count_occurrences(svg, "class=\"fit-low\"") == 1);
    CHECK(count_occurrences(svg, "class=\"fit-high\"") == 1);
    CHECK(count_occurrences(svg, "<polygon ") == 2);
    CHECK(count_occurrences(svg, "class=\"ci-low\"") == 1);
    CHECK(count_occurrences(svg, "class=\"ci-high\"") == 1);
    CHECK(count_occurrences(svg, "class=\"threshold\"") == 1);
    CHECK(count_occurrences(svg, "<circle ") == panel.size());
    CHECK(count_occurrences(svg, "class=\"obs\"") == panel.size());
    CHECK(svg.find("Market Share (%)") != std::string::npos);
    CHECK(svg.find("Log Yield (ln of %)") != std::string::npos);

    // The threshold rule is vertical and spans the plot area.
    const std::string rule = element_at(svg, "class=\"threshold\"");
    CHECK(attr_value(rule, "x1") == attr_value(rule, "x2"));
    CHECK(attr_value(rule, "y1") == "24.00");
    CHECK(attr_value(rule, "y2") == "456.00");
    const double rule_x = std::stod(attr_value(rule, "x1"));
    CHECK(rule_x > 80.0);
    CHECK(rule_x < 776.0);

    // Circles are ordered with the shares.
    const std::string first_circle = element_at(svg, "class=\"obs\"");
    const std::string last_circle = element_around(svg, svg.rfind("class=\"obs\""));
    CHECK(std::stod(attr_value(first_circle, "cx")) <
          std::stod(attr_value(last_circle, "cx")));
}

TEST_CASE("regime figure bands collapse when the fit is exact") {
    auto panel = test_panel(40, 0.0, 1);
    ThresholdSpec spec;
    auto tfit = threshold_fit(panel, "log_yield_1m", spec, 19, 6);
    const std::string svg = render_regime_figure(tfit, panel);
    const std::string poly = element_at(svg, "class=\"ci-low\"");
    const std::string pts = attr_value(poly, "points");
    const auto first = pts.substr(0, pts.find(' '));
    const auto last = pts.substr(pts.rfind(' ') + 1);
    CHECK(first == last); // upper and lower edges coincide pointwise
}

TEST_CASE("render_summary prints moments and the correlation triangle") {
    auto panel = test_panel(40, 0.01, 17);
    auto stats = summary_stats(panel);
    const std::string out = render_summary(stats);
    CHECK(out.find("Log 1-Month Yield") != std::string::npos);
    CHECK(out.find("Log 3-Month Yield") != std::string::npos);
    CHECK(out.find("Market Share") != std::string::npos);
    CHECK(out.find("Time Trend") != std::string::npos);
    CHECK(out.find("T-Bill Changes IHS") != std::string::npos);
    CHECK(out.find("T-Bill Changes Residual") != std::string::npos);
    CHECK(out.find("Pairwise correlations") != std::string::npos);
    CHECK(out.find("Mean") != std::string::npos);
    CHECK(out.find("undef") == std::string::npos);

    SummaryStats broken = stats;
    for (auto& row : broken.corr)
        for (auto& c : row) c = std::nullopt;
    CHECK(render_summary(broken).find("undef") != std::string::npos);
}

TEST_CASE("envelope findings flag only out-of-range variables") {
    SummaryStats stats;
    auto add = [&](const char* name, double mn, double mx) {
        VariableStats v;
        v.name = name;
        v.mean = (mn + mx) / 2.0;
        v.sd = 0.1;
        v.min = mn;
        v.max = mx;
        stats.variables.push_back(v);
    };
    add("log_yield_1m", -0.65, 1.71);
    add("log_yield_3m", -0.46, 1.70);
    add("market_share", 0.0057, 0.0160);
    add("time_trend", 1.0, 13.0);
    add("tbill_change_ihs", 11.40, 11.42);
    add("tbill_change_residual", -0.07, 0.05);
    CHECK(envelope_findings(stats).empty());

    stats.variables[2].max = 0.05;
    auto notes = envelope_findings(stats);
    REQUIRE(notes.size() == 1);
    CHECK(notes[0].find("Market Share") != std::string::npos);
    CHECK(notes[0].find("outside the reference envelope") != std::string::npos);

    stats.variables[2].max = 0.0160;
    stats.variables[4].min = 10.0;
    notes = envelope_findings(stats);
    REQUIRE(notes.size() == 1);
    CHECK(notes[0].find("IHS") != std::string::npos);

    // Tolerances absorb rounding-level excursions.
    stats.variables[4].min = 11.397;
    stats.variables[4].max = 11.423;
    CHECK(envelope_findings(stats).empty());
}
