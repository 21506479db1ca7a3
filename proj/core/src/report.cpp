// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "gridcal/csv.hpp"
#include "gridcal/error.hpp"
#include "gridcal/experiments.hpp"
#include "gridcal/svg.hpp"

namespace gridcal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kConeChannels = 3;

std::vector<std::string> sorted_subdirs(const fs::path& dir) {
    std::vector<std::string> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory()) out.push_back(entry.path().filename().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> column_values(const CsvTable& table, std::string_view name) {
    const std::size_t c = table.column(name);
    std::vector<double> out;
    for (const auto& row : table.rows) out.push_back(parse_number(row.at(c)));
    return out;
}

struct LongSeries {
    std::vector<double> times;
    std::vector<std::string> channels;
    std::map<std::string, std::vector<double>> values;  // channel -> per time
    std::map<std::string, std::vector<double>> sigma;
};

// Long-format table with columns time, channel and one value column (plus sigma for cones).
LongSeries read_long(const fs::path& path, std::string_view value_column, bool with_sigma) {
    const CsvTable table = read_csv(path);
    const std::size_t tc = table.column("time");
    const std::size_t cc = table.column("channel");
    const std::size_t vc = table.column(value_column);
    const std::size_t sc = with_sigma ? table.column("sigma") : 0;
    LongSeries out;
    std::set<std::string> seen;
    for (const auto& row : table.rows) {
        const double t = parse_number(row.at(tc));
        if (out.times.empty() || out.times.back() != t) out.times.push_back(t);
        const std::string& ch = row.at(cc);
        if (seen.insert(ch).second) out.channels.push_back(ch);
        out.values[ch].push_back(parse_number(row.at(vc)));
        if (with_sigma) out.sigma[ch].push_back(parse_number(row.at(sc)));
    }
    return out;
}

void write_plot(const fs::path& path, const std::string& svg_text, std::vector<fs::path>& written) {
    write_text(path, svg_text);
    written.push_back(path);
}

void rmse_plot(const fs::path& src, const std::string& id, const fs::path& out, std::vector<fs::path>& written) {
    const CsvTable table = read_csv(src);
    const std::vector<double> t = column_values(table, "time");
    svg::LinePlot plot{"Observation RMSE, " + id, "time [s]", "RMSE", {}, {}};
    plot.series.push_back({"prior mean", t, column_values(table, "prior"), svg::palette(1), true});
    plot.series.push_back({"MAP", t, column_values(table, "map"), svg::palette(0), false});
    write_plot(out / ("rmse-" + id + ".svg"), svg::render(plot), written);
}

void parameter_plot(const fs::path& src, const std::string& id, const fs::path& out, std::vector<fs::path>& written) {
    const json j = json::parse(read_text(src));
    const auto theta = j.at("theta_map").get<std::vector<double>>();
    const auto sigma = j.at("marginal_sigmas").get<std::vector<double>>();
    const auto lower_box = j.at("lower").get<std::vector<double>>();
    const auto upper_box = j.at("upper").get<std::vector<double>>();
    svg::BarPlot plot;
    plot.title = "Parameter estimate, " + id;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        plot.labels.push_back("θ" + std::to_string(i));
        plot.value.push_back(theta[i]);
        plot.lower.push_back(std::max(lower_box[i], theta[i] - 2.0 * sigma[i]));
        plot.upper.push_back(std::min(upper_box[i], theta[i] + 2.0 * sigma[i]));
    }
    if (j.contains("theta_true")) plot.truth = j.at("theta_true").get<std::vector<double>>();
    if (j.contains("prior_mean")) plot.prior = j.at("prior_mean").get<std::vector<double>>();
    write_plot(out / ("parameters-" + id + ".svg"), svg::render(plot), written);
}

void cone_plot(const fs::path& cone_csv, const fs::path& truth_csv, const std::string& id, const fs::path& out,
               std::vector<fs::path>& written) {
    const LongSeries cone = read_long(cone_csv, "mean", true);
    std::optional<LongSeries> truth;
    if (fs::exists(truth_csv)) {
        LongSeries t = read_long(truth_csv, "value", false);
        if (t.channels == cone.channels && t.times == cone.times) truth = std::move(t);
    }
    // Channels with the largest excursion of the cone mean; ties keep file order.
    std::vector<std::pair<double, std::size_t>> spread;
    for (std::size_t i = 0; i < cone.channels.size(); ++i) {
        const auto& v = cone.values.at(cone.channels[i]);
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        spread.emplace_back(-(*hi - *lo), i);
    }
    std::sort(spread.begin(), spread.end());
    svg::LinePlot plot{"Uncertainty cone (mean ±2σ), " + id, "time [s]", "value", {}, {}};
    for (std::size_t n = 0; n < std::min(kConeChannels, spread.size()); ++n) {
        const std::string& ch = cone.channels[spread[n].second];
        const auto& mean = cone.values.at(ch);
        const auto& sigma = cone.sigma.at(ch);
        svg::Band band{cone.times, {}, {}, svg::palette(n)};
        for (std::size_t k = 0; k < mean.size(); ++k) {
            band.lower.push_back(mean[k] - 2.0 * sigma[k]);
            band.upper.push_back(mean[k] + 2.0 * sigma[k]);
        }
        plot.bands.push_back(std::move(band));
        plot.series.push_back({ch + " mean", cone.times, mean, svg::palette(n), false});
        if (truth) plot.series.push_back({ch + " truth", cone.times, truth->values.at(ch), svg::palette(n), true});
    }
    write_plot(out / ("cone-" + id + ".svg"), svg::render(plot), written);
}

void prediction_plots(const fs::path& summary_csv, const fs::path& out, std::vector<fs::path>& written) {
    const CsvTable table = read_csv(summary_csv);
    const std::size_t cal_c = table.column("calibration");
    const std::size_t pred_c = table.column("prediction");
    const std::size_t lam_c = table.column("lambda");
    const std::size_t cov_c = table.column("coverage");
    const std::size_t rmse_c = table.column("mean_rmse");

    std::vector<std::string> rows;
    std::vector<std::string> cols;
    std::vector<double> lambdas;
    for (const auto& r : table.rows) {
        if (std::find(rows.begin(), rows.end(), r.at(cal_c)) == rows.end()) rows.push_back(r.at(cal_c));
        if (std::find(cols.begin(), cols.end(), r.at(pred_c)) == cols.end()) cols.push_back(r.at(pred_c));
        const double l = parse_number(r.at(lam_c));
        if (std::find(lambdas.begin(), lambdas.end(), l) == lambdas.end()) lambdas.push_back(l);
    }
    std::sort(lambdas.begin(), lambdas.end());
    const auto index_of = [](const std::vector<std::string>& v, const std::string& s) {
        return static_cast<std::size_t>(std::find(v.begin(), v.end(), s) - v.begin());
    };

    CsvTable summary;
    summary.header = {"lambda", "mean_coverage", "mean_coverage_error", "mean_rmse"};
    std::vector<double> mean_cov;
    std::vector<double> mean_err;
    for (double lambda : lambdas) {
        const double nan = std::nan("");
        std::vector<std::vector<double>> cov(rows.size(), std::vector<double>(cols.size(), nan));
        std::vector<std::vector<double>> rm(rows.size(), std::vector<double>(cols.size(), nan));
        double cov_sum = 0.0;
        double rmse_sum = 0.0;
        std::size_t n = 0;
        for (const auto& r : table.rows) {
            if (parse_number(r.at(lam_c)) != lambda) continue;
            const std::size_t i = index_of(rows, r.at(cal_c));
            const std::size_t j = index_of(cols, r.at(pred_c));
            cov[i][j] = parse_number(r.at(cov_c));
            rm[i][j] = parse_number(r.at(rmse_c));
            cov_sum += cov[i][j];
            rmse_sum += rm[i][j];
            ++n;
        }
        const std::string tag = "lambda" + format_number(lambda);
        write_plot(out / ("coverage-" + tag + ".svg"),
                   svg::render(svg::HeatTable{"Coverage [%], λ = " + format_number(lambda), rows, cols, cov, 0.0, 100.0}),
                   written);
        double rmse_max = 0.0;
        for (const auto& r : rm) {
            for (double v : r) {
                if (std::isfinite(v)) rmse_max = std::max(rmse_max, v);
            }
        }
        write_plot(out / ("rmse-matrix-" + tag + ".svg"),
                   svg::render(svg::HeatTable{"Mean RMSE, λ = " + format_number(lambda), rows, cols, rm, 0.0,
                                              rmse_max > 0.0 ? rmse_max : 1.0}),
                   written);

        CsvTable matrix;
        matrix.header.push_back("calibration");
        for (const std::string& c : cols) matrix.header.push_back(c);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::vector<std::string> row{rows[i]};
            for (double v : cov[i]) row.push_back(format_number(v));
            matrix.rows.push_back(std::move(row));
        }
        write_csv(out / ("coverage-" + tag + ".csv"), matrix);
        written.push_back(out / ("coverage-" + tag + ".csv"));

        const double m = n ? cov_sum / static_cast<double>(n) : std::nan("");
        mean_cov.push_back(m);
        mean_err.push_back(100.0 - m);
        summary.rows.push_back({format_number(lambda), format_number(m), format_number(100.0 - m),
                                format_number(n ? rmse_sum / static_cast<double>(n) : std::nan(""))});
    }
    write_csv(out / "coverage-summary.csv", summary);
    written.push_back(out / "coverage-summary.csv");
    svg::LinePlot plot{"Mean coverage against inflation", "λ", "percent", {}, {}};
    plot.series.push_back({"coverage", lambdas, mean_cov, svg::palette(0), false});
    plot.series.push_back({"coverage error", lambdas, mean_err, svg::palette(1), true});
    write_plot(out / "coverage-vs-lambda.svg", svg::render(plot), written);
}

void tlm_plot(const fs::path& src, const fs::path& out, std::vector<fs::path>& written) {
    const CsvTable table = read_csv(src);
    const std::vector<double> t = column_values(table, "time");
    svg::LinePlot plot{"Observation RMSE by calibration mode", "time [s]", "RMSE", {}, {}};
    for (std::size_t c = 1; c < table.header.size(); ++c) {
        plot.series.push_back({table.header[c], t, column_values(table, table.header[c]), svg::palette(c - 1), c > 1});
    }
    write_plot(out / "tlm-rmse.svg", svg::render(plot), written);
}

}  // namespace

std::vector<fs::path> emit_report(const fs::path& dir) {
    const std::vector<std::string> ids = sorted_subdirs(dir / "inversion");
    const bool has_predictions = fs::exists(dir / "predictions" / "summary.csv");
    const bool has_tlm = fs::exists(dir / "tlm" / "rmse.csv");
    if (!fs::exists(dir / "config.json") || (ids.empty() && !has_predictions && !has_tlm)) {
        throw ValidationError("report: no run artifacts in " + dir.string() +
                              "; expected config.json and at least one of inversion/<id>/rmse.csv, "
                              "posterior/<id>/posterior.json, posterior/<id>/cone.csv, predictions/summary.csv, "
                              "tlm/rmse.csv");
    }
    std::vector<std::string> missing;
    for (const std::string& id : ids) {
        for (const fs::path& p : {dir / "inversion" / id / "rmse.csv", dir / "posterior" / id / "posterior.json",
                                  dir / "posterior" / id / "cone.csv"}) {
            if (!fs::exists(p)) missing.push_back(fs::relative(p, dir).string());
        }
    }
    if (!missing.empty()) {
        std::string list;
        for (const std::string& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw ValidationError("report: missing artifacts: " + list);
    }

    const fs::path out = dir / "report";
    fs::create_directories(out);
    std::vector<fs::path> written;
    for (const std::string& id : ids) {
        rmse_plot(dir / "inversion" / id / "rmse.csv", id, out, written);
        parameter_plot(dir / "posterior" / id / "posterior.json", id, out, written);
        cone_plot(dir / "posterior" / id / "cone.csv", dir / "obs" / id / "truth.csv", id, out, written);
    }
    if (has_predictions) prediction_plots(dir / "predictions" / "summary.csv", out, written);
    if (has_tlm) tlm_plot(dir / "tlm" / "rmse.csv", out, written);
    return written;
}

}  // namespace gridcal
