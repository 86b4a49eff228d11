#include "tbshare/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "tbshare/errors.hpp"
#include "tbshare/rng.hpp"

namespace tbshare {

std::size_t ThresholdSpec::min_regime_size(std::size_t n) const {
    if (!(trim_fraction >= 0.0) || trim_fraction >= 0.5)
        throw ValidationError("trim_fraction must lie in [0, 0.5)");
    const std::size_t regime_params = include_intercept_shift ? 2 : 1;
    const auto trimmed =
        static_cast<std::size_t>(std::ceil(trim_fraction * static_cast<double>(n)));
    return std::max<std::size_t>(trimmed, regime_params + 1);
}

namespace {

std::vector<std::vector<double>> regime_columns(const DerivedPanel& panel, double tau,
                                                bool with_shift,
                                                std::vector<std::string>* names_out) {
    const std::size_t n = panel.size();
    const auto& s = panel.market_share;
    std::vector<std::vector<double>> cols;
    std::vector<std::string> names;
    cols.emplace_back(n, 1.0);
    names.emplace_back(kColConst);
    if (with_shift) {
        std::vector<double> shift(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) shift[i] = s[i] > tau ? 1.0 : 0.0;
        cols.push_back(std::move(shift));
        names.emplace_back(kColShift);
    }
    std::vector<double> lo(n, 0.0), hi(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (s[i] > tau)
            hi[i] = s[i];
        else
            lo[i] = s[i];
    }
    cols.push_back(std::move(lo));
    names.emplace_back(kColShareLow);
    cols.push_back(std::move(hi));
    names.emplace_back(kColShareHigh);
    cols.push_back(panel.time_trend);
    names.emplace_back(kColTrend);
    cols.push_back(panel.tbill_change_residual);
    names.emplace_back(kColResid);
    if (names_out) *names_out = std::move(names);
    return cols;
}

void check_spec(const DerivedPanel& panel, const ThresholdSpec& spec) {
    if (spec.threshold_variable != "market_share")
        throw ValidationError("unsupported threshold variable '" + spec.threshold_variable + "'");
    if (panel.size() == 0) throw ValidationError("empty panel");
    if (spec.refined_grid && spec.refined_points < 1)
        throw ValidationError("refined_points must be >= 1");
}

// Shared state for grid search and the bootstrap: thin Q factors for the
// linear design and for each distinct low/high partition, plus the mapping
// from candidate tau to partition.
struct GridEngine {
    std::size_t n = 0;
    std::vector<double> taus;            // admissible candidates, ascending
    std::vector<std::size_t> tau_part;   // candidate -> index into partitions
    std::vector<std::size_t> part_low;   // low-regime count per partition
    std::vector<std::vector<std::vector<double>>> part_q; // thin Q per partition
    std::vector<std::vector<double>> linear_q;

    double linear_ssr(const std::vector<double>& y) const {
        return projection_ssr(linear_q, y);
    }

    // Minimum SSR over partitions plus the smallest candidate tau reaching
    // it. Partitions are visited in ascending-tau order with strict
    // improvement, so ties break toward the smallest tau.
    std::pair<double, double> threshold_min(const std::vector<double>& y) const {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_part = 0;
        std::vector<double> part_ssr(part_q.size());
        for (std::size_t p = 0; p < part_q.size(); ++p) {
            part_ssr[p] = projection_ssr(part_q[p], y);
            if (part_ssr[p] < best) {
                best = part_ssr[p];
                best_part = p;
            }
        }
        for (std::size_t c = 0; c < taus.size(); ++c)
            if (tau_part[c] == best_part) return {taus[c], best};
        return {taus.front(), best};
    }

    std::vector<double> partition_ssrs(const std::vector<double>& y) const {
        std::vector<double> out(part_q.size());
        for (std::size_t p = 0; p < part_q.size(); ++p) out[p] = projection_ssr(part_q[p], y);
        return out;
    }
};

GridEngine build_engine(const DerivedPanel& panel, const std::string& response,
                        const ThresholdSpec& spec) {
    check_spec(panel, spec);
    GridEngine eng;
    eng.n = panel.size();

    {
        DesignMatrix lin = linear_design(panel, response);
        lin.check();
        eng.linear_q = thin_q(lin.columns, &lin.names);
    }

    std::vector<double> sorted_shares = panel.market_share;
    std::sort(sorted_shares.begin(), sorted_shares.end());
    const std::size_t n = eng.n;
    const std::size_t m = spec.min_regime_size(n);

    auto low_count = [&](double tau) {
        return static_cast<std::size_t>(
            std::upper_bound(sorted_shares.begin(), sorted_shares.end(), tau) -
            sorted_shares.begin());
    };
    auto admissible = [&](double tau) {
        const std::size_t lo = low_count(tau);
        return lo >= m && n - lo >= m;
    };

    std::vector<double> candidates;
    if (spec.candidate_grid) {
        candidates = *spec.candidate_grid;
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    } else {
        std::vector<double> uniq = sorted_shares;
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        candidates = uniq;
        if (spec.refined_grid) {
            const int steps = spec.refined_points + 1;
            for (std::size_t i = 0; i + 1 < uniq.size(); ++i) {
                const double gap = uniq[i + 1] - uniq[i];
                for (int j = 1; j <= spec.refined_points; ++j)
                    candidates.push_back(uniq[i] + gap * static_cast<double>(j) /
                                                       static_cast<double>(steps));
            }
            std::sort(candidates.begin(), candidates.end());
            candidates.erase(std::unique(candidates.begin(), candidates.end()),
                             candidates.end());
        }
    }

    std::vector<std::size_t> part_of_candidate;
    for (double tau : candidates) {
        if (!admissible(tau)) continue;
        const std::size_t lo = low_count(tau);
        std::size_t part;
        auto it = std::find(eng.part_low.begin(), eng.part_low.end(), lo);
        if (it == eng.part_low.end()) {
            std::vector<std::string> names;
            auto cols = regime_columns(panel, tau, spec.include_intercept_shift, &names);
            std::vector<std::vector<double>> q;
            try {
                q = thin_q(cols, &names);
            } catch (const EstimationError&) {
                continue; // degenerate partition, e.g. identical shares in a regime
            }
            eng.part_low.push_back(lo);
            eng.part_q.push_back(std::move(q));
            part = eng.part_q.size() - 1;
        } else {
            part = static_cast<std::size_t>(it - eng.part_low.begin());
        }
        eng.taus.push_back(tau);
        eng.tau_part.push_back(part);
    }
    if (eng.taus.empty())
        throw EstimationError("no admissible threshold candidates after trimming");
    return eng;
}

double lr_from_ssrs(std::size_t n, double ssr_linear, double ssr_threshold) {
    if (ssr_threshold == 0.0)
        return ssr_linear == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    const double lr =
        static_cast<double>(n) * (ssr_linear - ssr_threshold) / ssr_threshold;
    return std::max(lr, 0.0);
}

std::vector<double> bootstrap_lrs(const GridEngine& eng, const std::vector<double>& fitted,
                                  const std::vector<double>& residuals, int replications,
                                  std::uint64_t seed, int threads) {
    const std::size_t n = eng.n;
    std::vector<double> lrs(replications, 0.0);
    auto run_range = [&](int begin, int end) {
        std::vector<double> ystar(n);
        for (int r = begin; r < end; ++r) {
            Rng rng(replication_seed(seed, static_cast<std::uint64_t>(r)));
            for (std::size_t i = 0; i < n; ++i)
                ystar[i] = fitted[i] + residuals[rng.uniform_below(n)];
            const double sl = eng.linear_ssr(ystar);
            const double st = eng.threshold_min(ystar).second;
            lrs[r] = lr_from_ssrs(n, sl, st);
        }
    };
    const int t = std::max(1, std::min(threads, replications));
    if (t == 1) {
        run_range(0, replications);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (replications + t - 1) / t;
        for (int w = 0; w < t; ++w) {
            const int b = w * chunk;
            const int e = std::min(replications, b + chunk);
            if (b >= e) break;
            pool.emplace_back(run_range, b, e);
        }
        for (auto& th : pool) th.join();
    }
    return lrs;
}

} // namespace

DesignMatrix linear_design(const DerivedPanel& panel, const std::string& response) {
    const std::size_t n = panel.size();
    DesignMatrix d;
    d.add_column(kColConst, std::vector<double>(n, 1.0), true);
    d.add_column(kColShare, panel.market_share);
    d.add_column(kColTrend, panel.time_trend);
    d.add_column(kColResid, panel.tbill_change_residual);
    d.response = panel.response(response);
    return d;
}

DesignMatrix regime_design(const DerivedPanel& panel, const std::string& response,
                           double tau, const ThresholdSpec& spec) {
    check_spec(panel, spec);
    const auto& s = panel.market_share;
    const std::size_t n = panel.size();
    std::size_t lo = 0;
    for (double v : s)
        if (v <= tau) ++lo;
    if (lo == 0) throw EstimationError("empty regime: no observations at or below tau");
    if (lo == n) throw EstimationError("empty regime: no observations above tau");
    const std::size_t m = spec.min_regime_size(n);
    if (lo < m || n - lo < m)
        throw EstimationError("tau outside admissible range: regime sizes " +
                              std::to_string(lo) + "/" + std::to_string(n - lo) +
                              " below the trimmed minimum " + std::to_string(m));

    std::vector<std::string> names;
    auto cols = regime_columns(panel, tau, spec.include_intercept_shift, &names);
    DesignMatrix d;
    for (std::size_t j = 0; j < cols.size(); ++j)
        d.add_column(names[j], std::move(cols[j]), names[j] == kColConst);
    d.response = panel.response(response);
    return d;
}

std::vector<double> candidate_thresholds(const DerivedPanel& panel, const ThresholdSpec& spec) {
    GridEngine eng = build_engine(panel, "1m", spec);
    return eng.taus;
}

std::pair<double, std::vector<SsrPoint>> grid_search(const DerivedPanel& panel,
                                                     const std::string& response,
                                                     const ThresholdSpec& spec) {
    GridEngine eng = build_engine(panel, response, spec);
    const auto& y = panel.response(response);
    const auto part_ssr = eng.partition_ssrs(y);
    std::vector<SsrPoint> profile(eng.taus.size());
    double best = std::numeric_limits<double>::infinity();
    double best_tau = eng.taus.front();
    for (std::size_t c = 0; c < eng.taus.size(); ++c) {
        profile[c].tau = eng.taus[c];
        profile[c].ssr = part_ssr[eng.tau_part[c]];
        if (profile[c].ssr < best) {
            best = profile[c].ssr;
            best_tau = profile[c].tau;
        }
    }
    return {best_tau, std::move(profile)};
}

std::pair<double, double> lr_linearity_test(const DerivedPanel& panel,
                                            const std::string& response,
                                            const ThresholdSpec& spec, int replications,
                                            std::uint64_t seed, int threads) {
    if (replications < 1) throw ValidationError("replications must be >= 1");
    if (threads < 1) throw ValidationError("threads must be >= 1");
    GridEngine eng = build_engine(panel, response, spec);
    const auto& y = panel.response(response);
    const double ssr_lin = eng.linear_ssr(y);
    const double ssr_thr = eng.threshold_min(y).second;
    const double lr = lr_from_ssrs(eng.n, ssr_lin, ssr_thr);

    FitResult lin = ols_fit(linear_design(panel, response));
    const auto lrs = bootstrap_lrs(eng, lin.fitted, lin.residuals, replications, seed, threads);
    int exceed = 0;
    for (double v : lrs)
        if (v >= lr) ++exceed;
    const double p = (1.0 + exceed) / (1.0 + static_cast<double>(replications));
    return {lr, p};
}

ThresholdFit threshold_fit(const DerivedPanel& panel, const std::string& response,
                           const ThresholdSpec& spec, int replications,
                           std::uint64_t seed, int threads) {
    if (replications < 1) throw ValidationError("replications must be >= 1");
    if (threads < 1) throw ValidationError("threads must be >= 1");
    GridEngine eng = build_engine(panel, response, spec);
    const auto& y = panel.response(response);

    ThresholdFit out;
    out.response_name = response;
    out.has_intercept_shift = spec.include_intercept_shift;

    const auto part_ssr = eng.partition_ssrs(y);
    out.ssr_profile.resize(eng.taus.size());
    double best = std::numeric_limits<double>::infinity();
    double best_tau = eng.taus.front();
    for (std::size_t c = 0; c < eng.taus.size(); ++c) {
        out.ssr_profile[c].tau = eng.taus[c];
        out.ssr_profile[c].ssr = part_ssr[eng.tau_part[c]];
        if (out.ssr_profile[c].ssr < best) {
            best = out.ssr_profile[c].ssr;
            best_tau = out.ssr_profile[c].tau;
        }
    }
    out.tau = best_tau;
    out.ssr_threshold = best;
    out.ssr_linear = eng.linear_ssr(y);
    out.lr_statistic = lr_from_ssrs(eng.n, out.ssr_linear, out.ssr_threshold);

    out.fit = ols_fit(regime_design(panel, response, out.tau, spec));
    out.linear_fit = ols_fit(linear_design(panel, response));

    out.lr_replicates = bootstrap_lrs(eng, out.linear_fit.fitted, out.linear_fit.residuals,
                                      replications, seed, threads);
    int exceed = 0;
    for (double v : out.lr_replicates)
        if (v >= out.lr_statistic) ++exceed;
    out.bootstrap_p = (1.0 + exceed) / (1.0 + static_cast<double>(replications));

    out.regime_assignment.resize(panel.size());
    for (std::size_t i = 0; i < panel.size(); ++i)
        out.regime_assignment[i] = panel.market_share[i] > out.tau ? 1 : 0;
    out.share_min = *std::min_element(panel.market_share.begin(), panel.market_share.end());
    out.share_max = *std::max_element(panel.market_share.begin(), panel.market_share.end());
    return out;
}

} // namespace tbshare
