#pragma once

#include "kmex/metrics.hpp"

#include <map>
#include <string>
#include <vector>

namespace kmex {

/// Every metric of one evaluated model for one seed.
struct MetricReport {
    std::uint64_t seed = 0;
    AccuracyResult accuracy;
    double d_tsp = 0.0;
    double d_dvs = 0.0;
    double d_fdl_mean = 0.0;
    double d_fdl_std = 0.0;
    std::vector<double> d_fdl_per_image;
    double auroc_mean = 0.0;
    double auroc_std = 0.0;
    double auroc_random_mean = 0.0;
    double auroc_random_std = 0.0;
    std::vector<std::string> curve_labels;  // e.g. "kmex_relevance"
    std::vector<ROCurve> curves;            // parallel to curve_labels
    bool has_attributes = false;
    int captured_attribute_count = 0;
    double attribute_mae = 0.0;
    RadarScores radar;
};

/// Multi-seed evaluation: per-seed runs plus mean/std aggregation.
struct AggregateReport {
    std::vector<MetricReport> runs;
    std::map<std::string, std::string> config;  // resolved config, sorted by key
    std::string config_hash;

    const MetricReport& first() const { return runs.front(); }
};

/// Mean and population std of a per-run scalar.
std::pair<double, double> aggregate_scalar(const AggregateReport& report,
                                           double (*field)(const MetricReport&));

/// Radar scores computed from the aggregate means.
RadarScores aggregate_radar(const AggregateReport& report);

/// Deterministic JSON serialization (sorted keys, shortest round-trip
/// numbers): equal configs and seeds produce byte-identical files.
std::string report_to_json(const AggregateReport& report);

/// curves.csv: one row per (model_mode, fraction, mean, std), pooled over
/// the images of every run.
std::string curves_to_csv(const AggregateReport& report);

/// Plain-text summary table for one or more named reports.
std::string summary_table(const std::vector<std::pair<std::string, AggregateReport>>& reports);

AggregateReport report_from_json(const std::string& json_text);

/// Stable hash of a resolved configuration: FNV-1a over sorted
/// "key=value" pairs, so field order never affects the hash.
std::string config_hash(const std::map<std::string, std::string>& config);

}  // namespace kmex
