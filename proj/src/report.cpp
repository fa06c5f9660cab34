#include "kmex/report.hpp"

#include <json.hpp>

#include <cmath>
#include <sstream>

namespace kmex {

namespace {

using nlohmann::json;

json curve_to_json(const ROCurve& curve) {
    return json{{"mode", to_string(curve.mode)},
                {"fractions", curve.fractions},
                {"mean", curve.mean},
                {"stddev", curve.stddev}};
}

ROCurve curve_from_json(const json& j) {
    ROCurve curve;
    curve.mode = j.at("mode").get<std::string>() == "relevance"
                     ? ROCurve::Mode::relevance_ordered
                     : ROCurve::Mode::random_baseline;
    curve.fractions = j.at("fractions").get<std::vector<double>>();
    curve.mean = j.at("mean").get<std::vector<double>>();
    curve.stddev = j.at("stddev").get<std::vector<double>>();
    return curve;
}

json radar_to_json(const RadarScores& radar) {
    return json{{"transparency", radar.transparency},
                {"acc_faithfulness", radar.acc_faithfulness},
                {"expl_faithfulness", radar.expl_faithfulness},
                {"expl_robustness", radar.expl_robustness},
                {"diversity", radar.diversity}};
}

RadarScores radar_from_json(const json& j) {
    RadarScores radar;
    radar.transparency = j.at("transparency").get<double>();
    radar.acc_faithfulness = j.at("acc_faithfulness").get<double>();
    radar.expl_faithfulness = j.at("expl_faithfulness").get<double>();
    radar.expl_robustness = j.at("expl_robustness").get<double>();
    radar.diversity = j.at("diversity").get<double>();
    return radar;
}

json run_to_json(const MetricReport& run) {
    json j;
    j["seed"] = run.seed;
    j["accuracy"] = {{"base", run.accuracy.base_percent},
                     {"sem", run.accuracy.sem_percent},
                     {"delta", run.accuracy.delta_points}};
    j["d_tsp"] = run.d_tsp;
    j["d_dvs"] = run.d_dvs;
    j["d_fdl"] = {{"mean", run.d_fdl_mean},
                  {"std", run.d_fdl_std},
                  {"per_image", run.d_fdl_per_image}};
    j["auroc"] = {{"mean", run.auroc_mean},
                  {"std", run.auroc_std},
                  {"random_mean", run.auroc_random_mean},
                  {"random_std", run.auroc_random_std}};
    json curves = json::object();
    for (std::size_t i = 0; i < run.curves.size(); ++i) {
        curves[run.curve_labels[i]] = curve_to_json(run.curves[i]);
    }
    j["curves"] = curves;
    if (run.has_attributes) {
        j["attributes"] = {{"captured", run.captured_attribute_count},
                           {"correlation_mae", run.attribute_mae}};
    }
    j["radar"] = radar_to_json(run.radar);
    return j;
}

MetricReport run_from_json(const json& j) {
    MetricReport run;
    run.seed = j.at("seed").get<std::uint64_t>();
    run.accuracy.base_percent = j.at("accuracy").at("base").get<double>();
    run.accuracy.sem_percent = j.at("accuracy").at("sem").get<double>();
    run.accuracy.delta_points = j.at("accuracy").at("delta").get<double>();
    run.d_tsp = j.at("d_tsp").get<double>();
    run.d_dvs = j.at("d_dvs").get<double>();
    run.d_fdl_mean = j.at("d_fdl").at("mean").get<double>();
    run.d_fdl_std = j.at("d_fdl").at("std").get<double>();
    run.d_fdl_per_image = j.at("d_fdl").at("per_image").get<std::vector<double>>();
    run.auroc_mean = j.at("auroc").at("mean").get<double>();
    run.auroc_std = j.at("auroc").at("std").get<double>();
    run.auroc_random_mean = j.at("auroc").at("random_mean").get<double>();
    run.auroc_random_std = j.at("auroc").at("random_std").get<double>();
    for (const auto& [label, cj] : j.at("curves").items()) {
        run.curve_labels.push_back(label);
        run.curves.push_back(curve_from_json(cj));
    }
    if (j.contains("attributes")) {
        run.has_attributes = true;
        run.captured_attribute_count = j["attributes"].at("captured").get<int>();
        run.attribute_mae = j["attributes"].at("correlation_mae").get<double>();
    }
    run.radar = radar_from_json(j.at("radar"));
    return run;
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

json aggregate_to_json(const AggregateReport& report) {
    const auto collect = [&](auto getter) {
        std::vector<double> values;
        for (const auto& run : report.runs) values.push_back(getter(run));
        return mean_std(values);
    };
    json mean, stddev;
    const auto put = [&](const std::string& key, auto getter) {
        const auto [m, s] = collect(getter);
        mean[key] = m;
        stddev[key] = s;
    };
    put("acc_base", [](const MetricReport& r) { return r.accuracy.base_percent; });
    put("acc_sem", [](const MetricReport& r) { return r.accuracy.sem_percent; });
    put("acc_delta", [](const MetricReport& r) { return r.accuracy.delta_points; });
    put("d_tsp", [](const MetricReport& r) { return r.d_tsp; });
    put("d_dvs", [](const MetricReport& r) { return r.d_dvs; });
    put("d_fdl", [](const MetricReport& r) { return r.d_fdl_mean; });
    put("auroc", [](const MetricReport& r) { return r.auroc_mean; });
    put("auroc_random", [](const MetricReport& r) { return r.auroc_random_mean; });
    if (report.first().has_attributes) {
        put("captured_attributes",
            [](const MetricReport& r) { return static_cast<double>(r.captured_attribute_count); });
        put("attribute_mae", [](const MetricReport& r) { return r.attribute_mae; });
    }
    return json{{"mean", mean}, {"std", stddev}};
}

}  // namespace

std::pair<double, double> aggregate_scalar(const AggregateReport& report,
                                           double (*field)(const MetricReport&)) {
    std::vector<double> values;
    for (const auto& run : report.runs) values.push_back(field(run));
    return mean_std(values);
}

RadarScores aggregate_radar(const AggregateReport& report) {
    const auto mean_of = [&](double (*field)(const MetricReport&)) {
        return aggregate_scalar(report, field).first;
    };
    return radar_summary(mean_of([](const MetricReport& r) { return r.d_tsp; }),
                         mean_of([](const MetricReport& r) { return r.accuracy.base_percent; }),
                         mean_of([](const MetricReport& r) { return r.accuracy.sem_percent; }),
                         mean_of([](const MetricReport& r) { return r.d_fdl_mean; }),
                         mean_of([](const MetricReport& r) { return r.auroc_mean; }),
                         mean_of([](const MetricReport& r) { return r.d_dvs; }));
}

std::string report_to_json(const AggregateReport& report) {
    require(!report.runs.empty(), "report: no runs");
    json j;
    j["format"] = "kmex-report";
    j["version"] = 1;
    j["config"] = report.config;
    j["config_hash"] = report.config_hash;
    std::vector<std::uint64_t> seeds;
    for (const auto& run : report.runs) seeds.push_back(run.seed);
    j["seeds"] = seeds;
    json runs = json::array();
    for (const auto& run : report.runs) runs.push_back(run_to_json(run));
    j["runs"] = runs;
    j["aggregate"] = aggregate_to_json(report);
    j["radar"] = radar_to_json(aggregate_radar(report));
    return j.dump(2) + "\n";
}

AggregateReport report_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        fail("report: invalid JSON: ", e.what());
    }
    require(j.value("format", "") == "kmex-report", "report: not a kmex report");
    require(j.value("version", 0) == 1, "report: unsupported version");
    AggregateReport report;
    report.config = j.at("config").get<std::map<std::string, std::string>>();
    report.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& rj : j.at("runs")) report.runs.push_back(run_from_json(rj));
    require(!report.runs.empty(), "report: no runs");
    return report;
}

std::string curves_to_csv(const AggregateReport& report) {
    require(!report.runs.empty(), "curves: no runs");
    std::ostringstream os;
    os << "curve,fraction,mean,std\n";
    for (std::size_t c = 0; c < report.first().curve_labels.size(); ++c) {
        const std::string& label = report.first().curve_labels[c];
        const auto& fractions = report.first().curves[c].fractions;
        for (std::size_t i = 0; i < fractions.size(); ++i) {
            // Pool mean/std over all runs' image populations via moments.
            double m1 = 0.0, m2 = 0.0;
            for (const auto& run : report.runs) {
                const auto& curve = run.curves[c];
                m1 += curve.mean[i];
                m2 += curve.stddev[i] * curve.stddev[i] + curve.mean[i] * curve.mean[i];
            }
            m1 /= static_cast<double>(report.runs.size());
            m2 /= static_cast<double>(report.runs.size());
            const double var = std::max(0.0, m2 - m1 * m1);
            os << label << ',' << fractions[i] << ',' << m1 << ',' << std::sqrt(var)
               << '\n';
        }
    }
    return os.str();
}

std::string summary_table(const std::vector<std::pair<std::string, AggregateReport>>& reports) {
    std::ostringstream os;
    os << "model                 acc_base  acc_sem   d_tsp   d_dvs   d_fdl   auroc\n";
    for (const auto& [name, report] : reports) {
        const auto get = [&](double (*field)(const MetricReport&)) {
            return aggregate_scalar(report, field);
        };
        const auto acc_b = get([](const MetricReport& r) { return r.accuracy.base_percent; });
        const auto acc_s = get([](const MetricReport& r) { return r.accuracy.sem_percent; });
        const auto tsp = get([](const MetricReport& r) { return r.d_tsp; });
        const auto dvs = get([](const MetricReport& r) { return r.d_dvs; });
        const auto fdl = get([](const MetricReport& r) { return r.d_fdl_mean; });
        const auto roc = get([](const MetricReport& r) { return r.auroc_mean; });
        char line[256];
        std::snprintf(line, sizeof(line),
                      "%-20s  %7.2f  %7.2f  %6.3f  %6.3f  %6.3f  %6.3f\n", name.c_str(),
                      acc_b.first, acc_s.first, tsp.first, dvs.first, fdl.first, roc.first);
        os << line;
    }
    return os.str();
}

std::string config_hash(const std::map<std::string, std::string>& config) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& [key, value] : config) {
        h = fnv1a64(key, h);
        h = fnv1a64("=", h);
        h = fnv1a64(value, h);
        h = fnv1a64("\n", h);
    }
    return hex64(h);
}

}  // namespace kmex
