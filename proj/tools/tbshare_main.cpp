// tbshare: derived-variable construction, baseline and threshold regressions,
// and economic impact arithmetic for quarterly T-bill share panels.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tbshare/analysis.hpp"
#include "tbshare/dataset.hpp"
#include "tbshare/errors.hpp"
#include "tbshare/regress.hpp"
#include "tbshare/simulate.hpp"
#include "tbshare/threshold.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitEstimation = 3;
constexpr int kExitIo = 4;

void print_error_json(const std::string& kind, const std::string& message) {
    json err{{"error", {{"kind", kind}, {"message", message}}}};
    std::cerr << err.dump(2) << "\n";
}

std::vector<tbshare::Observation> read_panel_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw tbshare::IoError("cannot open input file '" + path + "'");
    return tbshare::load_panel(in);
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw tbshare::IoError("cannot open output file '" + path.string() + "'");
    out << content;
    if (!out) throw tbshare::IoError("failed writing '" + path.string() + "'");
}

struct FitOptions {
    std::string input;
    std::string response = "both";
    std::string model = "both";
    double trim = 0.15;
    bool no_intercept_shift = false;
    bool no_refined_grid = false;
    int refined_points = 99;
    int replications = 500;
    std::uint64_t seed = 1;
    int threads = 1;
    bool drop_first = false;
    std::string output_dir = ".";
    std::vector<std::string> formats = {"text", "json", "svg", "csv"};
};

bool wants(const FitOptions& o, const std::string& f) {
    for (const auto& x : o.formats)
        if (x == f) return true;
    return false;
}

std::vector<std::string> responses_of(const std::string& r) {
    if (r == "both") return {"1m", "3m"};
    return {r};
}

tbshare::DerivedPanel derive_from_file(const std::string& path, bool drop_first) {
    auto obs = read_panel_file(path);
    return tbshare::derive_panel(obs, drop_first ? tbshare::FirstPeriodPolicy::DropFirst
                                                 : tbshare::FirstPeriodPolicy::BackfillZero);
}

int cmd_validate(const std::string& input, bool drop_first) {
    std::ifstream in(input, std::ios::binary);
    if (!in) throw tbshare::IoError("cannot open input file '" + input + "'");
    auto obs = tbshare::parse_panel_csv(in);
    auto findings = tbshare::validate_panel(obs);
    if (!findings.empty()) {
        std::cout << "validation findings:\n";
        for (const auto& f : findings) std::cout << "  " << f << "\n";
        json rep{{"findings", findings}};
        std::cerr << rep.dump(2) << "\n";
        return kExitValidation;
    }
    auto panel = tbshare::derive_panel(obs, drop_first
                                                ? tbshare::FirstPeriodPolicy::DropFirst
                                                : tbshare::FirstPeriodPolicy::BackfillZero);
    auto stats = tbshare::summary_stats(panel);
    std::cout << "panel OK: " << obs.size() << " observations\n\n";
    std::cout << tbshare::render_summary(stats);
    auto env = tbshare::envelope_findings(stats);
    if (env.empty()) {
        std::cout << "\nnote: summary statistics fall within the 2022Q1-2025Q1 reference "
                     "envelopes\n";
    } else {
        std::cout << "\noutside the 2022Q1-2025Q1 reference envelopes:\n";
        for (const auto& e : env) std::cout << "  " << e << "\n";
    }
    return 0;
}

int cmd_fit(const FitOptions& opt) {
    const auto panel = derive_from_file(opt.input, opt.drop_first);
    const fs::path outdir(opt.output_dir);
    if (!outdir.empty()) fs::create_directories(outdir);

    const bool run_baseline = opt.model == "baseline" || opt.model == "both";
    const bool run_threshold = opt.model == "threshold" || opt.model == "both";
    const std::size_t n = panel.size();

    if (run_baseline) {
        int col = 0;
        for (const auto& resp : responses_of(opt.response)) {
            std::vector<tbshare::AnyFit> fits;
            std::vector<std::string> names;
            const auto& y = panel.response(resp);

            tbshare::DesignMatrix d1;
            d1.add_column(tbshare::kColConst, std::vector<double>(n, 1.0), true);
            d1.add_column(tbshare::kColShare, panel.market_share);
            d1.response = y;
            fits.emplace_back(tbshare::ols_fit(d1));
            names.push_back("(" + std::to_string(++col) + ") " + resp);

            tbshare::DesignMatrix d2;
            d2.add_column(tbshare::kColConst, std::vector<double>(n, 1.0), true);
            d2.add_column(tbshare::kColShare, panel.market_share);
            d2.add_column(tbshare::kColTrend, panel.time_trend);
            d2.response = y;
            fits.emplace_back(tbshare::ols_fit(d2));
            names.push_back("(" + std::to_string(++col) + ") " + resp);

            tbshare::DesignMatrix d3;
            d3.add_column(tbshare::kColConst, std::vector<double>(n, 1.0), true);
            d3.add_column(tbshare::kColShare, panel.market_share);
            d3.add_column(tbshare::kColTrend, panel.time_trend);
            d3.add_column(tbshare::kColResid, panel.tbill_change_residual);
            d3.response = y;
            fits.emplace_back(tbshare::ols_fit(d3));
            names.push_back("(" + std::to_string(++col) + ") " + resp);

            auto table = tbshare::render_table(fits, tbshare::TableLayout::Baseline, names);
            if (wants(opt, "text")) {
                std::cout << "Baseline models, " << resp << " response\n";
                std::cout << table.text << "\n";
            }
            if (wants(opt, "json"))
                write_text_file(outdir / ("baseline_" + resp + ".json"),
                                table.json.dump(2) + "\n");
        }
    }

    if (run_threshold) {
        tbshare::ThresholdSpec spec;
        spec.trim_fraction = opt.trim;
        spec.include_intercept_shift = !opt.no_intercept_shift;
        spec.refined_grid = !opt.no_refined_grid;
        spec.refined_points = opt.refined_points;

        std::vector<tbshare::AnyFit> fits;
        std::vector<std::string> names;
        std::vector<tbshare::ThresholdFit> tf;
        for (const auto& resp : responses_of(opt.response)) {
            tf.push_back(tbshare::threshold_fit(panel, resp, spec, opt.replications, opt.seed,
                                                opt.threads));
            fits.emplace_back(tf.back());
            names.push_back("(" + std::to_string(names.size() + 1) + ") " + resp);
        }
        auto table = tbshare::render_table(fits, tbshare::TableLayout::Threshold, names);
        if (wants(opt, "text")) {
            std::cout << "Threshold models\n";
            std::cout << table.text << "\n";
        }
        if (wants(opt, "json")) {
            for (std::size_t i = 0; i < tf.size(); ++i) {
                std::vector<tbshare::AnyFit> one{tf[i]};
                std::vector<std::string> one_name{names[i]};
                auto single =
                    tbshare::render_table(one, tbshare::TableLayout::Threshold, one_name);
                write_text_file(outdir / ("threshold_" + tf[i].response_name + ".json"),
                                single.json.dump(2) + "\n");
            }
        }
        if (wants(opt, "csv")) {
            for (const auto& f : tf) {
                std::ostringstream csv;
                csv << "tau,ssr\n";
                char buf[64];
                for (const auto& pt : f.ssr_profile) {
                    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", pt.tau, pt.ssr);
                    csv << buf;
                }
                write_text_file(outdir / ("threshold_profile_" + f.response_name + ".csv"),
                                csv.str());
            }
        }
        if (wants(opt, "svg")) {
            for (const auto& f : tf)
                write_text_file(outdir / ("threshold_figure_" + f.response_name + ".svg"),
                                tbshare::render_regime_figure(f, panel));
        }
        if (wants(opt, "text")) {
            for (const auto& f : tf) {
                std::printf("%s: tau = %.5f (%.3f%% share), LR = %.3f, bootstrap p = %.4f\n",
                            f.response_name.c_str(), f.tau, f.tau * 100.0, f.lr_statistic,
                            f.bootstrap_p);
            }
        }
    }
    return 0;
}

int cmd_simulate(const tbshare::SimConfig& cfg, const std::string& output) {
    auto obs = tbshare::simulate_panel(cfg);
    const fs::path out_path(output);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw tbshare::IoError("cannot open output file '" + output + "'");
    tbshare::write_panel_csv(obs, out);
    out.close();
    write_text_file(out_path.string() + ".json", tbshare::sim_sidecar(cfg).dump(2) + "\n");
    std::cout << "wrote " << obs.size() << " periods to " << output << "\n";
    return 0;
}

tbshare::SlopeSchedule schedule_from_json(const json& model) {
    auto coef_of = [&](const std::string& name) -> const json* {
        for (const auto& c : model.at("coefficients")) {
            if (c.at("name").get<std::string>() == name) return &c;
        }
        return nullptr;
    };
    tbshare::SlopeSchedule s;
    if (model.contains("threshold")) {
        const auto* lo = coef_of(tbshare::kColShareLow);
        const auto* hi = coef_of(tbshare::kColShareHigh);
        if (!lo || !hi)
            throw tbshare::ValidationError("fit JSON lacks regime slope coefficients");
        s.tau = model.at("threshold").at("tau").get<double>();
        s.low_slope = lo->at("estimate").get<double>();
        s.high_slope = hi->at("estimate").get<double>();
        if (model.contains("support"))
            s.support = std::make_pair(model.at("support").at("share_min").get<double>(),
                                       model.at("support").at("share_max").get<double>());
    } else {
        const auto* b = coef_of(tbshare::kColShare);
        if (!b) throw tbshare::ValidationError("fit JSON lacks a market-share coefficient");
        s.low_slope = b->at("estimate").get<double>();
        s.high_slope = s.low_slope;
    }
    return s;
}

int cmd_impact(const std::string& fit_path, const std::string& model_name, double delta_share,
               double baseline_yield, double outstanding, double reference_share,
               bool reference_set, const std::string& output_dir) {
    std::ifstream in(fit_path, std::ios::binary);
    if (!in) throw tbshare::IoError("cannot open fit JSON '" + fit_path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw tbshare::ValidationError("malformed fit JSON: " + std::string(e.what()));
    }
    if (!doc.contains("models") || !doc.at("models").is_array() || doc.at("models").empty())
        throw tbshare::ValidationError("fit JSON has no models");
    const json* model = nullptr;
    if (model_name.empty()) {
        model = &doc.at("models").front();
    } else {
        for (const auto& m : doc.at("models"))
            if (m.at("model").get<std::string>() == model_name) model = &m;
        if (!model)
            throw tbshare::ValidationError("no model named '" + model_name + "' in fit JSON");
    }

    auto schedule = schedule_from_json(*model);
    double reference = reference_share;
    if (!reference_set) reference = schedule.tau ? *schedule.tau : 0.0;

    auto rep = tbshare::impact_report(schedule, reference, delta_share, baseline_yield,
                                      outstanding);
    std::printf("reference share           %10.5f (%.3f%%)\n", reference, reference * 100.0);
    std::printf("delta share               %10.5f (%.3f%%)\n", delta_share,
                delta_share * 100.0);
    std::printf("relative yield change     %10.5f (approx. change in log yield)\n",
                rep.relative_change);
    std::printf("impact                    %10.2f bps\n", rep.bps_change);
    std::printf("baseline yield            %10.4f %%\n", baseline_yield);
    std::printf("counterfactual yield      %10.4f %%\n", rep.counterfactual_yield);
    std::printf("annual savings            %10.2f USD billion\n", rep.annual_savings / 1e9);

    json out{{"impact",
              {{"reference_share", reference},
               {"delta_share", delta_share},
               {"baseline_yield", baseline_yield},
               {"outstanding", outstanding},
               {"relative_change", rep.relative_change},
               {"bps_change", rep.bps_change},
               {"counterfactual_yield", rep.counterfactual_yield},
               {"annual_savings", rep.annual_savings}}}};
    const fs::path outdir(output_dir);
    if (!outdir.empty()) fs::create_directories(outdir);
    write_text_file(outdir / "impact.json", out.dump(2) + "\n");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"T-bill market share and yield analysis toolkit"};
    app.set_config("--config", "", "Read options from a key=value config file");
    app.require_subcommand(1);

    std::string output_dir = ".";

    // validate
    auto* validate = app.add_subcommand("validate", "Check a panel CSV and print summary stats");
    std::string v_input;
    bool v_drop_first = false;
    validate->add_option("--input,-i,input", v_input, "Panel CSV path")->required();
    validate->add_flag("--drop-first-period", v_drop_first,
                       "Drop the first period instead of backfilling its change with 0");

    // fit
    auto* fit = app.add_subcommand("fit", "Estimate baseline and threshold models");
    FitOptions fopt;
    fit->add_option("--input,-i,input", fopt.input, "Panel CSV path")->required();
    fit->add_option("--response", fopt.response, "Response maturity: 1m, 3m, both")
        ->check(CLI::IsMember({"1m", "3m", "both"}))
        ->capture_default_str();
    fit->add_option("--model", fopt.model, "Model family: baseline, threshold, both")
        ->check(CLI::IsMember({"baseline", "threshold", "both"}))
        ->capture_default_str();
    fit->add_option("--trim", fopt.trim, "Trim fraction per regime")->capture_default_str();
    fit->add_flag("--no-intercept-shift", fopt.no_intercept_shift,
                  "Drop the high-regime intercept shift column");
    fit->add_flag("--no-refined-grid", fopt.no_refined_grid,
                  "Search observed share values only");
    fit->add_option("--refined-points", fopt.refined_points,
                    "Interior grid points between consecutive observed shares")
        ->capture_default_str();
    fit->add_option("--replications", fopt.replications, "Bootstrap replications")
        ->capture_default_str();
    fit->add_option("--seed", fopt.seed, "Bootstrap seed")->capture_default_str();
    fit->add_option("--threads", fopt.threads, "Bootstrap worker threads")
        ->capture_default_str();
    fit->add_flag("--drop-first-period", fopt.drop_first,
                  "Drop the first period instead of backfilling its change with 0");
    fit->add_option("--output-dir,-o", fopt.output_dir, "Directory for report files")
        ->envname("TBSHARE_OUTPUT_DIR")
        ->capture_default_str();
    fit->add_option("--formats", fopt.formats,
                    "Outputs to produce: text, json, svg, csv (comma separated)")
        ->delimiter(',')
        ->check(CLI::IsMember({"text", "json", "svg", "csv"}));

    // simulate
    auto* sim = app.add_subcommand("simulate", "Write a synthetic panel with a planted break");
    tbshare::SimConfig scfg;
    std::string s_output = "panel.csv";
    sim->add_option("--seed", scfg.seed, "Generator seed")->capture_default_str();
    sim->add_option("--n", scfg.n, "Number of periods")->capture_default_str();
    sim->add_option("--tau", scfg.planted_tau, "Planted threshold (share fraction)")
        ->capture_default_str();
    sim->add_option("--low-slope", scfg.low_slope, "Low-regime semi-elasticity")
        ->capture_default_str();
    sim->add_option("--high-slope", scfg.high_slope, "High-regime semi-elasticity")
        ->capture_default_str();
    sim->add_option("--shift", scfg.intercept_shift, "High-regime intercept shift")
        ->capture_default_str();
    sim->add_option("--noise-sd", scfg.noise_sd, "Log-yield noise standard deviation")
        ->capture_default_str();
    sim->add_option("--alpha", scfg.alpha, "Low-regime intercept")->capture_default_str();
    sim->add_option("--trend-coef", scfg.trend_coef, "Time-trend coefficient")
        ->capture_default_str();
    sim->add_option("--resid-coef", scfg.resid_coef, "Issuance-residual coefficient")
        ->capture_default_str();
    sim->add_option("--share-min", scfg.share_min, "Share draw lower bound")
        ->capture_default_str();
    sim->add_option("--share-max", scfg.share_max, "Share draw upper bound")
        ->capture_default_str();
    sim->add_option("--output", s_output, "Output CSV path (sidecar JSON adds .json)")
        ->capture_default_str();

    // impact
    auto* impact = app.add_subcommand("impact", "Economic interpretation of a fitted model");
    std::string i_fit, i_model;
    double i_delta = 0.001, i_yield = 4.24, i_outstanding = 6.2e12, i_reference = 0.0;
    impact->add_option("--fit,-f,fit", i_fit, "Fit JSON produced by the fit command")
        ->required();
    impact->add_option("--model", i_model, "Model name inside the fit JSON (default: first)");
    impact->add_option("--delta-share", i_delta, "Share change, decimal fraction")
        ->capture_default_str();
    impact->add_option("--baseline-yield", i_yield, "Baseline yield, percent")
        ->capture_default_str();
    impact->add_option("--outstanding", i_outstanding, "Outstanding T-bills, USD")
        ->capture_default_str();
    auto* ref_opt = impact->add_option("--reference-share", i_reference,
                                       "Reference share (default: fitted threshold, else 0)");
    impact->add_option("--output-dir,-o", output_dir, "Directory for impact.json")
        ->envname("TBSHARE_OUTPUT_DIR")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitValidation;
    }

    try {
        if (app.got_subcommand(validate)) return cmd_validate(v_input, v_drop_first);
        if (app.got_subcommand(fit)) return cmd_fit(fopt);
        if (app.got_subcommand(sim)) return cmd_simulate(scfg, s_output);
        if (app.got_subcommand(impact))
            return cmd_impact(i_fit, i_model, i_delta, i_yield, i_outstanding, i_reference,
                              ref_opt->count() > 0, output_dir);
    } catch (const tbshare::ValidationError& e) {
        print_error_json("validation", e.what());
        return kExitValidation;
    } catch (const tbshare::EstimationError& e) {
        print_error_json("estimation", e.what());
        return kExitEstimation;
    } catch (const tbshare::IoError& e) {
        print_error_json("io", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        print_error_json("internal", e.what());
        return 1;
    }
    return 0;
}
