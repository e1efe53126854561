#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ergo/backend.hpp"
#include "ergo/dataset.hpp"
#include "ergo/pipeline.hpp"

namespace ergo::evalharness {

enum class EvalMode { coarse_to_fine, oracle_region, no_crop };

EvalMode parse_mode(const std::string& name); // throws ConfigError on unknown names
std::string mode_name(EvalMode mode);

struct HarnessOptions {
    EvalMode mode = EvalMode::coarse_to_fine;
    int parallelism = 4;
    /// Echoed into every report for provenance.
    nlohmann::json config_metadata = nlohmann::json::object();
};

struct EvalReport {
    std::string mode;
    std::vector<pipeline::PipelineTrace> traces;
    long total = 0;
    long correct = 0;
    double accuracy = 0.0;
    double mean_total_tokens = 0.0;
    double mean_latency_seconds = 0.0;
    std::optional<double> mean_coverage;
    /// Predicted-region area ratios, 10 bins over [0,1] (last bin closed).
    std::array<long, 10> area_ratio_histogram{};
    nlohmann::json config_metadata = nlohmann::json::object();

    nlohmann::json to_json() const;
};

/// Runs every sample through the pipeline in the requested mode and
/// aggregates accuracy, token and latency statistics plus coverage when
/// ground-truth boxes exist. Per-sample failures are flagged and counted as
/// incorrect; the run itself never aborts on them.
EvalReport run_benchmark(const std::vector<dataset::Sample>& samples,
                         const pipeline::PipelineConfig& cfg, backend::Backend& be,
                         const HarnessOptions& options = {});

struct MaskedCoverageResult {
    struct PerSample {
        std::string sample_id;
        double unmasked = 0.0;
        double masked = 0.0;
    };
    std::vector<PerSample> per_sample;
    double unmasked_mean = 0.0;
    double masked_mean = 0.0;

    nlohmann::json to_json() const;
};

/// Region prediction twice per sample: on the unmodified image and on the
/// image with every GT box blacked out; reports the mean coverage score for
/// both conditions. Requires GT boxes on every sample.
MaskedCoverageResult masked_coverage_experiment(const std::vector<dataset::Sample>& samples,
                                                const pipeline::PipelineConfig& cfg,
                                                backend::Backend& be, int parallelism = 4);

struct AreaRatioStats {
    std::array<long, 10> bins{};
    long counted = 0;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

/// GT-region share of the image per sample, binned into [0,0.1),...,[0.9,1].
/// Multi-box samples use the union's bounding rectangle. Samples without GT
/// boxes are skipped with a warning.
AreaRatioStats area_ratio_stats(const std::vector<dataset::Sample>& samples);

/// Bin index for a ratio in [0,1]: floor(ratio*10), last bin closed.
int histogram_bin(double ratio);

/// Bounding rectangle of a non-empty set of boxes in one space.
geometry::BBox union_rect(const std::vector<geometry::BBox>& boxes);

enum class ReportFormat { json, csv, plot_csv };
ReportFormat parse_report_format(const std::string& name); // throws ConfigError

/// json: the full report. csv: flat aggregates. plot_csv: one
/// `constraint_tokens,total_tokens_mean,accuracy` row for token/accuracy
/// curves. CSV outputs start with a single `# config=...` comment line.
std::string emit_report(const EvalReport& report, ReportFormat format);

} // namespace ergo::evalharness
