#include "tbshare/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <sstream>

#include "tbshare/errors.hpp"
#include "tbshare/regress.hpp"

namespace tbshare {

const char* const kCsvHeader =
    "period_index,date_label,tether_holdings_usd,tbills_outstanding_usd,yield_1m_pct,yield_3m_pct";

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string strip_ws(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& field, int line_no, const char* what) {
    const std::string s = strip_ws(field);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ValidationError("line " + std::to_string(line_no) + ": malformed " +
                              std::string(what) + " value '" + field + "'");
    return v;
}

int parse_int(const std::string& field, int line_no, const char* what) {
    const std::string s = strip_ws(field);
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ValidationError("line " + std::to_string(line_no) + ": malformed " +
                              std::string(what) + " value '" + field + "'");
    return v;
}

std::string period_tag(const Observation& o) {
    return "period " + std::to_string(o.period_index) +
           (o.date_label.empty() ? "" : " (" + o.date_label + ")");
}

} // namespace

std::vector<Observation> parse_panel_csv(std::istream& in) {
    if (!in) throw IoError("cannot read CSV stream");
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty CSV input, missing header");
    if (strip_ws(line) != kCsvHeader)
        throw ValidationError("line 1: header must be exactly '" + std::string(kCsvHeader) + "'");

    std::vector<Observation> obs;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (strip_ws(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 6)
            throw ValidationError("line " + std::to_string(line_no) + ": expected 6 fields, got " +
                                  std::to_string(fields.size()));
        Observation o;
        o.period_index = parse_int(fields[0], line_no, "period_index");
        o.date_label = strip_ws(fields[1]);
        o.tether_holdings = parse_double(fields[2], line_no, "tether_holdings_usd");
        o.tbills_outstanding = parse_double(fields[3], line_no, "tbills_outstanding_usd");
        o.yield_1m = parse_double(fields[4], line_no, "yield_1m_pct");
        o.yield_3m = parse_double(fields[5], line_no, "yield_3m_pct");
        obs.push_back(std::move(o));
    }
    return obs;
}

std::vector<std::string> validate_panel(const std::vector<Observation>& input) {
    std::vector<std::string> findings;
    if (input.empty()) {
        findings.push_back("panel has no observations");
        return findings;
    }
    std::vector<Observation> obs = input;
    std::stable_sort(obs.begin(), obs.end(),
                     [](const Observation& a, const Observation& b) {
                         return a.period_index < b.period_index;
                     });
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const Observation& o = obs[i];
        if (!std::isfinite(o.tether_holdings) || o.tether_holdings < 0.0)
            findings.push_back(period_tag(o) + ": tether_holdings_usd must be >= 0");
        if (!std::isfinite(o.tbills_outstanding) || o.tbills_outstanding <= 0.0)
            findings.push_back(period_tag(o) + ": tbills_outstanding_usd must be > 0");
        else if (o.tether_holdings > o.tbills_outstanding)
            findings.push_back(period_tag(o) + ": holdings exceed outstanding");
        if (!std::isfinite(o.yield_1m) || o.yield_1m <= 0.0)
            findings.push_back(period_tag(o) + ": non-positive yield yield_1m_pct");
        if (!std::isfinite(o.yield_3m) || o.yield_3m <= 0.0)
            findings.push_back(period_tag(o) + ": non-positive yield yield_3m_pct");
        if (i > 0 && obs[i - 1].period_index == o.period_index)
            findings.push_back(period_tag(o) + ": duplicate period_index");
    }
    if (obs.front().period_index != 1)
        findings.push_back("period_index must start at 1, found " +
                           std::to_string(obs.front().period_index));
    for (std::size_t i = 1; i < obs.size(); ++i) {
        int gap = obs[i].period_index - obs[i - 1].period_index;
        if (gap > 1)
            findings.push_back("non-consecutive period_index between " +
                               std::to_string(obs[i - 1].period_index) + " and " +
                               std::to_string(obs[i].period_index));
    }
    return findings;
}

std::vector<Observation> load_panel(std::istream& in) {
    std::vector<Observation> obs = parse_panel_csv(in);
    std::sort(obs.begin(), obs.end(),
              [](const Observation& a, const Observation& b) {
                  return a.period_index < b.period_index;
              });
    auto findings = validate_panel(obs);
    if (!findings.empty()) {
        std::ostringstream msg;
        msg << "panel validation failed:";
        for (const auto& f : findings) msg << "\n  " << f;
        throw ValidationError(msg.str());
    }
    return obs;
}

double market_share(double holdings, double outstanding) {
    if (!(outstanding > 0.0))
        throw ValidationError("market_share: outstanding must be > 0");
    if (!(holdings >= 0.0) || holdings > outstanding)
        throw ValidationError("market_share: holdings must lie in [0, outstanding]");
    return holdings / outstanding;
}

double ihs(double x) {
    return std::asinh(x);
}

std::vector<double> residualize_issuance(const std::vector<double>& ihs_changes,
                                         const std::vector<double>& time_trend,
                                         const std::vector<double>& share) {
    const std::size_t n = ihs_changes.size();
    if (time_trend.size() != n || share.size() != n)
        throw ValidationError("residualize_issuance: input vectors differ in length");
    if (n < 4)
        throw ValidationError("residualize_issuance: need at least 4 observations");

    DesignMatrix d;
    d.add_column(kColConst, std::vector<double>(n, 1.0), true);
    d.add_column(kColTrend, time_trend);
    d.add_column(kColShare, share);
    d.response = ihs_changes;
    FitResult fit = ols_fit(d);

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fit.residuals[i] * 1000.0;
    return out;
}

DerivedPanel derive_panel(const std::vector<Observation>& input, FirstPeriodPolicy policy) {
    auto findings = validate_panel(input);
    if (!findings.empty()) {
        std::ostringstream msg;
        msg << "panel validation failed:";
        for (const auto& f : findings) msg << "\n  " << f;
        throw ValidationError(msg.str());
    }
    if (input.size() < 5)
        throw ValidationError("derive_panel: need at least 5 observations, got " +
                              std::to_string(input.size()));

    std::vector<Observation> obs = input;
    std::sort(obs.begin(), obs.end(),
              [](const Observation& a, const Observation& b) {
                  return a.period_index < b.period_index;
              });

    std::vector<double> change(obs.size(), 0.0);
    for (std::size_t i = 1; i < obs.size(); ++i)
        change[i] = obs[i].tbills_outstanding - obs[i - 1].tbills_outstanding;

    std::size_t first = (policy == FirstPeriodPolicy::DropFirst) ? 1 : 0;
    if (obs.size() - first < 5)
        throw ValidationError("derive_panel: fewer than 5 observations after dropping the first period");

    DerivedPanel p;
    for (std::size_t i = first; i < obs.size(); ++i) {
        const Observation& o = obs[i];
        p.period_index.push_back(o.period_index);
        p.date_label.push_back(o.date_label);
        p.market_share.push_back(market_share(o.tether_holdings, o.tbills_outstanding));
        p.log_yield_1m.push_back(std::log(o.yield_1m));
        p.log_yield_3m.push_back(std::log(o.yield_3m));
        p.time_trend.push_back(static_cast<double>(o.period_index));
        p.tbill_change.push_back(change[i]);
        // Changes are measured in millions of USD for the IHS scale.
        p.tbill_change_ihs.push_back(ihs(change[i] / 1e6));
    }
    p.tbill_change_residual = residualize_issuance(p.tbill_change_ihs, p.time_trend, p.market_share);
    return p;
}

const std::vector<double>& DerivedPanel::response(const std::string& name) const {
    if (name == "1m" || name == "log_yield_1m") return log_yield_1m;
    if (name == "3m" || name == "log_yield_3m") return log_yield_3m;
    throw ValidationError("unknown response '" + name + "', expected 1m or 3m");
}

const std::vector<std::string>& SummaryStats::variable_order() {
    static const std::vector<std::string> order = {
        "log_yield_1m", "log_yield_3m", "market_share",
        "time_trend",   "tbill_change_ihs", "tbill_change_residual"};
    return order;
}

namespace {

VariableStats moments(const std::string& name, const std::vector<double>& v) {
    VariableStats s;
    s.name = name;
    const std::size_t n = v.size();
    double sum = 0.0;
    s.min = v[0];
    s.max = v[0];
    for (double x : v) {
        sum += x;
        s.min = std::min(s.min, x);
        s.max = std::max(s.max, x);
    }
    s.mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = (n > 1) ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    return s;
}

} // namespace

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty())
        throw ValidationError("pearson: input vectors differ in length or are empty");
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
    double r = sab / std::sqrt(saa * sbb);
    return std::clamp(r, -1.0, 1.0);
}

SummaryStats summary_stats(const DerivedPanel& panel) {
    if (panel.size() == 0) throw ValidationError("summary_stats: empty panel");
    const std::vector<const std::vector<double>*> vars = {
        &panel.log_yield_1m, &panel.log_yield_3m, &panel.market_share,
        &panel.time_trend,   &panel.tbill_change_ihs, &panel.tbill_change_residual};
    const auto& names = SummaryStats::variable_order();

    SummaryStats out;
    for (std::size_t i = 0; i < vars.size(); ++i)
        out.variables.push_back(moments(names[i], *vars[i]));
    out.corr.resize(vars.size());
    for (std::size_t i = 0; i < vars.size(); ++i) {
        out.corr[i].resize(i);
        for (std::size_t j = 0; j < i; ++j)
            out.corr[i][j] = pearson(*vars[i], *vars[j]);
    }
    return out;
}

} // namespace tbshare
