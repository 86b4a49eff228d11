#include "tbshare/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "tbshare/errors.hpp"

namespace tbshare {

double bps_impact(const ImpactQuery& query) {
    if (!(query.baseline_yield > 0.0))
        throw ValidationError("bps_impact: baseline_yield must be > 0");
    return query.semi_elasticity * query.delta_share * query.baseline_yield * 100.0;
}

double annual_savings(double bps_reduction, double outstanding) {
    if (!(outstanding >= 0.0))
        throw ValidationError("annual_savings: outstanding must be >= 0");
    return bps_reduction / 1e4 * outstanding;
}

double SlopeSchedule::integrate(double from, double to) const {
    if (from > to) return -integrate(to, from);
    if (!tau) return (to - from) * low_slope;
    const double t = *tau;
    double acc = 0.0;
    if (from < t) acc += (std::min(to, t) - from) * low_slope;
    if (to > t) acc += (to - std::max(from, t)) * high_slope;
    return acc;
}

SlopeSchedule slope_schedule(const FitResult& fit) {
    SlopeSchedule s;
    s.low_slope = fit.coef(kColShare);
    s.high_slope = s.low_slope;
    return s;
}

SlopeSchedule slope_schedule(const ThresholdFit& fit) {
    SlopeSchedule s;
    s.tau = fit.tau;
    s.low_slope = fit.low_slope();
    s.high_slope = fit.high_slope();
    s.support = std::make_pair(fit.share_min, fit.share_max);
    return s;
}

namespace {

void check_support(const SlopeSchedule& schedule, double share, const char* what) {
    if (!schedule.support) return;
    const auto [lo, hi] = *schedule.support;
    const double slack = 1e-12 * std::max(std::fabs(lo), std::fabs(hi));
    if (share < lo - slack || share > hi + slack) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "%s %.6g outside the admissible share range [%.6g, %.6g]", what, share,
                      lo, hi);
        throw ValidationError(buf);
    }
}

} // namespace

double counterfactual_yield(const SlopeSchedule& schedule, double actual_share,
                            double reference_share, double actual_yield) {
    if (!(actual_yield > 0.0))
        throw ValidationError("counterfactual_yield: actual_yield must be > 0");
    check_support(schedule, reference_share, "reference_share");
    check_support(schedule, actual_share, "actual_share");
    const double integral = schedule.integrate(reference_share, actual_share);
    return actual_yield * std::exp(-integral);
}

ImpactReport impact_report(const SlopeSchedule& schedule, double reference_share,
                           double delta_share, double baseline_yield, double outstanding) {
    if (!(baseline_yield > 0.0))
        throw ValidationError("impact_report: baseline_yield must be > 0");
    const double actual_share = reference_share + delta_share;
    ImpactReport rep;
    rep.relative_change = schedule.integrate(reference_share, actual_share);
    rep.bps_change = rep.relative_change * baseline_yield * 100.0;
    rep.counterfactual_yield =
        counterfactual_yield(schedule, actual_share, reference_share, baseline_yield);
    rep.annual_savings = annual_savings(-rep.bps_change, outstanding);
    return rep;
}

double round_half_away(double x, int digits) {
    if (std::isnan(x) || std::isinf(x)) return x;
    double scale = 1.0;
    for (int i = 0; i < digits; ++i) scale *= 10.0;
    return std::copysign(std::floor(std::fabs(x) * scale + 0.5) / scale, x);
}

namespace {

std::string fmt3(double x) {
    if (std::isnan(x)) return "";
    char buf[64];
    if (std::isinf(x)) {
        std::snprintf(buf, sizeof(buf), "%sinf", x > 0 ? "" : "-");
        return buf;
    }
    std::snprintf(buf, sizeof(buf), "%.3f", round_half_away(x, 3));
    return buf;
}

std::string display_label(const std::string& col) {
    if (col == kColShare) return "Market Share";
    if (col == kColShareLow) return "Market Share (Low Regime)";
    if (col == kColShareHigh) return "Market Share (High Regime)";
    if (col == kColShift) return "Intercept Shift (High Regime)";
    if (col == kColTrend) return "Time Trend";
    if (col == kColResid) return "T-Bill Change Residual";
    if (col == kColConst) return "Constant";
    return col;
}

const std::vector<std::string>& canonical_row_order() {
    static const std::vector<std::string> order = {
        kColShare, kColShareLow, kColShareHigh, kColShift, kColTrend, kColResid, kColConst};
    return order;
}

struct Cell {
    std::string coef;
    std::string se;
};

constexpr int kLabelWidth = 30;
constexpr int kCellWidth = 14;

void append_row(std::string& out, const std::string& label,
                const std::vector<std::string>& cells) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-*s", kLabelWidth, label.c_str());
    out += buf;
    for (const auto& c : cells) {
        std::snprintf(buf, sizeof(buf), "%*s", kCellWidth, c.c_str());
        out += buf;
    }
    out += '\n';
}

nlohmann::json fit_to_json(const FitResult& fit, const std::string& name) {
    nlohmann::json coefs = nlohmann::json::array();
    for (std::size_t j = 0; j < fit.k; ++j) {
        coefs.push_back({{"name", fit.names[j]},
                         {"estimate", fit.coefficients[j]},
                         {"se", fit.standard_errors[j]},
                         {"t", fit.t_stats[j]},
                         {"p", fit.p_values[j]},
                         {"stars", significance_stars(fit.p_values[j])}});
    }
    return nlohmann::json{{"model", name},
                          {"coefficients", std::move(coefs)},
                          {"r2", fit.r_squared},
                          {"adj_r2", fit.adj_r_squared},
                          {"n", fit.n}};
}

} // namespace

RenderedTable render_table(const std::vector<AnyFit>& fits, TableLayout layout,
                           const std::vector<std::string>& model_names) {
    if (fits.empty()) throw ValidationError("render_table: no fits");
    if (model_names.size() != fits.size())
        throw ValidationError("render_table: one model name per fit required");
    for (const auto& f : fits) {
        const bool is_threshold = std::holds_alternative<ThresholdFit>(f);
        if (is_threshold != (layout == TableLayout::Threshold))
            throw ValidationError("render_table: fit kind does not match the table layout");
    }

    std::vector<const FitResult*> cols;
    std::vector<const ThresholdFit*> tfits(fits.size(), nullptr);
    for (std::size_t i = 0; i < fits.size(); ++i) {
        if (layout == TableLayout::Threshold) {
            tfits[i] = &std::get<ThresholdFit>(fits[i]);
            cols.push_back(&tfits[i]->fit);
        } else {
            cols.push_back(&std::get<FitResult>(fits[i]));
        }
    }

    // Union of coefficient names in canonical order, then first appearance.
    std::vector<std::string> rows;
    auto add_row = [&rows](const std::string& name) {
        if (std::find(rows.begin(), rows.end(), name) == rows.end()) rows.push_back(name);
    };
    for (const auto& name : canonical_row_order())
        for (const auto* c : cols)
            if (std::find(c->names.begin(), c->names.end(), name) != c->names.end())
                add_row(name);
    for (const auto* c : cols)
        for (const auto& name : c->names) add_row(name);

    std::string text;
    append_row(text, "", model_names);
    {
        std::vector<std::string> rule(cols.size(), std::string(kCellWidth - 2, '-'));
        append_row(text, std::string(kLabelWidth - 2, '-'), rule);
    }
    for (const auto& rname : rows) {
        std::vector<std::string> coef_cells, se_cells;
        for (const auto* c : cols) {
            auto it = std::find(c->names.begin(), c->names.end(), rname);
            if (it == c->names.end()) {
                coef_cells.emplace_back("");
                se_cells.emplace_back("");
                continue;
            }
            const auto j = static_cast<std::size_t>(it - c->names.begin());
            coef_cells.push_back(fmt3(c->coefficients[j]) +
                                 significance_stars(c->p_values[j]));
            se_cells.push_back("(" + fmt3(c->standard_errors[j]) + ")");
        }
        append_row(text, display_label(rname), coef_cells);
        append_row(text, "", se_cells);
    }

    if (layout == TableLayout::Threshold) {
        std::vector<std::string> tau_cells, lr_cells, p_cells;
        for (const auto* t : tfits) {
            tau_cells.push_back(fmt3(t->tau * 100.0)); // displayed as percent
            lr_cells.push_back(fmt3(t->lr_statistic));
            p_cells.push_back(fmt3(t->bootstrap_p));
        }
        append_row(text, "Threshold (% Market Share)", tau_cells);
        append_row(text, "LR Statistic", lr_cells);
        append_row(text, "Bootstrap p-value", p_cells);
    }

    std::vector<std::string> r2_cells, adj_cells, n_cells;
    for (const auto* c : cols) {
        r2_cells.push_back(fmt3(c->r_squared));
        adj_cells.push_back(fmt3(c->adj_r_squared));
        n_cells.push_back(std::to_string(c->n));
    }
    append_row(text, "R-squared", r2_cells);
    append_row(text, "Adj. R-squared", adj_cells);
    append_row(text, "N", n_cells);

    nlohmann::json models = nlohmann::json::array();
    for (std::size_t i = 0; i < fits.size(); ++i) {
        nlohmann::json m = fit_to_json(*cols[i], model_names[i]);
        if (layout == TableLayout::Threshold) {
            const ThresholdFit* t = tfits[i];
            m["threshold"] = {{"tau", t->tau},
                              {"lr", t->lr_statistic},
                              {"p_boot", t->bootstrap_p}};
            m["support"] = {{"share_min", t->share_min}, {"share_max", t->share_max}};
        }
        models.push_back(std::move(m));
    }

    RenderedTable out;
    out.text = std::move(text);
    out.json = nlohmann::json{{"models", std::move(models)}};
    return out;
}

namespace {

std::string svg_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

} // namespace

std::string render_regime_figure(const ThresholdFit& fit, const DerivedPanel& panel) {
    const auto& shares = panel.market_share;
    const auto& ys = panel.response(fit.response_name);
    const std::size_t n = panel.size();

    const double trend_mean = mean_of(panel.time_trend);
    const double resid_mean = mean_of(panel.tbill_change_residual);

    auto model_row = [&](double s, bool high) {
        std::vector<double> row(fit.fit.k, 0.0);
        for (std::size_t j = 0; j < fit.fit.k; ++j) {
            const std::string& name = fit.fit.names[j];
            if (name == kColConst)
                row[j] = 1.0;
            else if (name == kColShift)
                row[j] = high ? 1.0 : 0.0;
            else if (name == kColShareLow)
                row[j] = high ? 0.0 : s;
            else if (name == kColShareHigh)
                row[j] = high ? s : 0.0;
            else if (name == kColTrend)
                row[j] = trend_mean;
            else if (name == kColResid)
                row[j] = resid_mean;
        }
        return row;
    };

    const double smin = fit.share_min, smax = fit.share_max;
    constexpr int kLinePoints = 50;
    struct Band {
        std::vector<double> s, mid, lo, hi;
    };
    auto trace = [&](double from, double to, bool high) {
        Band b;
        for (int i = 0; i < kLinePoints; ++i) {
            const double s = from + (to - from) * static_cast<double>(i) /
                                        static_cast<double>(kLinePoints - 1);
            auto row = model_row(s, high);
            double pred = 0.0;
            for (std::size_t j = 0; j < fit.fit.k; ++j) pred += row[j] * fit.fit.coefficients[j];
            auto [cl, ch] = fitted_value_ci(fit.fit, row, 0.95);
            b.s.push_back(s);
            b.mid.push_back(pred);
            b.lo.push_back(cl);
            b.hi.push_back(ch);
        }
        return b;
    };
    const Band low = trace(smin, fit.tau, false);
    const Band high = trace(fit.tau, smax, true);

    double ymin = ys[0], ymax = ys[0];
    for (double v : ys) {
        ymin = std::min(ymin, v);
        ymax = std::max(ymax, v);
    }
    for (const Band* b : {&low, &high})
        for (std::size_t i = 0; i < b->s.size(); ++i) {
            ymin = std::min({ymin, b->lo[i]});
            ymax = std::max({ymax, b->hi[i]});
        }
    double xpad = (smax - smin) * 0.06;
    double ypad = (ymax - ymin) * 0.08;
    if (xpad == 0.0) xpad = 1e-6;
    if (ypad == 0.0) ypad = 1e-6;
    const double x0 = smin - xpad, x1 = smax + xpad;
    const double y0 = ymin - ypad, y1 = ymax + ypad;

    constexpr double kW = 800.0, kH = 520.0;
    constexpr double kL = 80.0, kR = 24.0, kT = 24.0, kB = 64.0;
    auto X = [&](double s) { return kL + (s - x0) / (x1 - x0) * (kW - kL - kR); };
    auto Y = [&](double v) { return kH - kB - (v - y0) / (y1 - y0) * (kH - kT - kB); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 520\" "
           "font-family=\"sans-serif\" font-size=\"13\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"520\" fill=\"white\"/>\n";

    // Axes and ticks.
    svg << "<line class=\"axis\" x1=\"" << svg_num(kL) << "\" y1=\"" << svg_num(kH - kB)
        << "\" x2=\"" << svg_num(kW - kR) << "\" y2=\"" << svg_num(kH - kB)
        << "\" stroke=\"black\"/>\n";
    svg << "<line class=\"axis\" x1=\"" << svg_num(kL) << "\" y1=\"" << svg_num(kT)
        << "\" x2=\"" << svg_num(kL) << "\" y2=\"" << svg_num(kH - kB)
        << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double fx = x0 + (x1 - x0) * i / 5.0;
        const double px = X(fx);
        svg << "<line class=\"tick\" x1=\"" << svg_num(px) << "\" y1=\"" << svg_num(kH - kB)
            << "\" x2=\"" << svg_num(px) << "\" y2=\"" << svg_num(kH - kB + 6)
            << "\" stroke=\"black\"/>\n";
        char lab[32];
        std::snprintf(lab, sizeof(lab), "%.3f", fx * 100.0);
        svg << "<text x=\"" << svg_num(px) << "\" y=\"" << svg_num(kH - kB + 22)
            << "\" text-anchor=\"middle\">" << lab << "</text>\n";
        const double fy = y0 + (y1 - y0) * i / 5.0;
        const double py = Y(fy);
        svg << "<line class=\"tick\" x1=\"" << svg_num(kL - 6) << "\" y1=\"" << svg_num(py)
            << "\" x2=\"" << svg_num(kL) << "\" y2=\"" << svg_num(py)
            << "\" stroke=\"black\"/>\n";
        std::snprintf(lab, sizeof(lab), "%.2f", fy);
        svg << "<text x=\"" << svg_num(kL - 10) << "\" y=\"" << svg_num(py + 4)
            << "\" text-anchor=\"end\">" << lab << "</text>\n";
    }
    svg << "<text x=\"" << svg_num((kL + kW - kR) / 2.0) << "\" y=\"" << svg_num(kH - 16)
        << "\" text-anchor=\"middle\">Market Share (%)</text>\n";
    svg << "<text x=\"20\" y=\"" << svg_num((kT + kH - kB) / 2.0)
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
        << svg_num((kT + kH - kB) / 2.0) << ")\">Log Yield (ln of %)</text>\n";

    // CI bands: upper edge forward, lower edge reversed.
    auto band_points = [&](const Band& b) {
        std::string pts;
        for (std::size_t i = 0; i < b.s.size(); ++i)
            pts += svg_num(X(b.s[i])) + "," + svg_num(Y(b.hi[i])) + " ";
        for (std::size_t i = b.s.size(); i-- > 0;)
            pts += svg_num(X(b.s[i])) + "," + svg_num(Y(b.lo[i])) + " ";
        pts.pop_back();
        return pts;
    };
    svg << "<polygon class=\"ci-low\" points=\"" << band_points(low)
        << "\" fill=\"#4a7bd9\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    svg << "<polygon class=\"ci-high\" points=\"" << band_points(high)
        << "\" fill=\"#d94a4a\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";

    // Fitted lines.
    auto path_d = [&](const Band& b) {
        std::string d = "M " + svg_num(X(b.s[0])) + " " + svg_num(Y(b.mid[0]));
        for (std::size_t i = 1; i < b.s.size(); ++i)
            d += " L " + svg_num(X(b.s[i])) + " " + svg_num(Y(b.mid[i]));
        return d;
    };
    svg << "<path class=\"fit-low\" d=\"" << path_d(low)
        << "\" fill=\"none\" stroke=\"#2155c4\" stroke-width=\"2.5\"/>\n";
    svg << "<path class=\"fit-high\" d=\"" << path_d(high)
        << "\" fill=\"none\" stroke=\"#c42121\" stroke-width=\"2.5\"/>\n";

    // Threshold rule.
    svg << "<line class=\"threshold\" x1=\"" << svg_num(X(fit.tau)) << "\" y1=\""
        << svg_num(kT) << "\" x2=\"" << svg_num(X(fit.tau)) << "\" y2=\""
        << svg_num(kH - kB)
        << "\" stroke=\"#2e8b57\" stroke-width=\"2\" stroke-dasharray=\"7,5\"/>\n";

    // Observations.
    for (std::size_t i = 0; i < n; ++i)
        svg << "<circle class=\"obs\" cx=\"" << svg_num(X(shares[i])) << "\" cy=\""
            << svg_num(Y(ys[i])) << "\" r=\"4\" fill=\"#777777\" fill-opacity=\"0.75\"/>\n";

    svg << "</svg>\n";
    return svg.str();
}

namespace {

std::string summary_display_name(const std::string& var) {
    if (var == "log_yield_1m") return "Log 1-Month Yield";
    if (var == "log_yield_3m") return "Log 3-Month Yield";
    if (var == "market_share") return "Market Share";
    if (var == "time_trend") return "Time Trend";
    if (var == "tbill_change_ihs") return "T-Bill Changes IHS";
    if (var == "tbill_change_residual") return "T-Bill Changes Residual";
    return var;
}

} // namespace

std::string render_summary(const SummaryStats& stats) {
    std::ostringstream out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-28s%12s%12s%12s%12s", "Variable", "Mean", "SD", "Min",
                  "Max");
    out << buf << '\n' << std::string(76, '-') << '\n';
    for (const auto& v : stats.variables) {
        std::snprintf(buf, sizeof(buf), "%-28s%12.4f%12.4f%12.4f%12.4f",
                      summary_display_name(v.name).c_str(), v.mean, v.sd, v.min, v.max);
        out << buf << '\n';
    }
    out << "\nPairwise correlations (lower triangle)\n";
    std::snprintf(buf, sizeof(buf), "%-28s", "");
    out << buf;
    for (std::size_t j = 0; j + 1 < stats.variables.size(); ++j) {
        std::snprintf(buf, sizeof(buf), "%8s", ("(" + std::to_string(j + 1) + ")").c_str());
        out << buf;
    }
    out << '\n';
    for (std::size_t i = 0; i < stats.variables.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%-28s",
                      ("(" + std::to_string(i + 1) + ") " +
                       summary_display_name(stats.variables[i].name))
                          .c_str());
        out << buf;
        for (std::size_t j = 0; j < i; ++j) {
            if (stats.corr[i][j])
                std::snprintf(buf, sizeof(buf), "%8.2f", *stats.corr[i][j]);
            else
                std::snprintf(buf, sizeof(buf), "%8s", "undef");
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

namespace {

struct Envelope {
    const char* var;
    double lo;
    double hi;
    double tol;
};

// Observed ranges for the 2022Q1-2025Q1 quarterly reference window.
const Envelope kEnvelopes[] = {
    {"log_yield_1m", -0.65, 1.71, 0.005},
    {"log_yield_3m", -0.46, 1.70, 0.005},
    {"market_share", 0.0057, 0.0160, 0.00005},
    {"time_trend", 1.0, 13.0, 0.5},
    {"tbill_change_ihs", 11.40, 11.42, 0.005},
    {"tbill_change_residual", -0.07, 0.05, 0.005},
};

} // namespace

std::vector<std::string> envelope_findings(const SummaryStats& stats) {
    std::vector<std::string> notes;
    for (const auto& env : kEnvelopes) {
        const VariableStats* v = nullptr;
        for (const auto& cand : stats.variables)
            if (cand.name == env.var) v = &cand;
        if (!v) continue;
        if (v->min < env.lo - env.tol || v->max > env.hi + env.tol) {
            char buf[200];
            std::snprintf(buf, sizeof(buf),
                          "%s range [%.4f, %.4f] outside the reference envelope [%.4f, %.4f]",
                          summary_display_name(env.var).c_str(), v->min, v->max, env.lo,
                          env.hi);
            notes.emplace_back(buf);
        }
    }
    return notes;
}

} // namespace tbshare
