#include "ergo/evalharness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "ergo/protocol.hpp"

namespace ergo::evalharness {

EvalMode parse_mode(const std::string& name) {
    if (name == "coarse_to_fine") return EvalMode::coarse_to_fine;
    if (name == "oracle_region") return EvalMode::oracle_region;
    if (name == "no_crop") return EvalMode::no_crop;
    throw ConfigError("unknown eval mode '" + name +
                      "' (expected coarse_to_fine, oracle_region or no_crop)");
}

std::string mode_name(EvalMode mode) {
    switch (mode) {
        case EvalMode::coarse_to_fine: return "coarse_to_fine";
        case EvalMode::oracle_region: return "oracle_region";
        default: return "no_crop";
    }
}

int histogram_bin(double ratio) {
    const int bin = static_cast<int>(ratio * 10.0);
    return std::clamp(bin, 0, 9);
}

geometry::BBox union_rect(const std::vector<geometry::BBox>& boxes) {
    if (boxes.empty()) throw MissingGroundTruthError("union_rect: empty box set");
    geometry::BBox u = boxes.front();
    for (const geometry::BBox& b : boxes) {
        if (b.space != u.space) throw SpaceMismatchError("union_rect: mixed coordinate spaces");
        u.x1 = std::min(u.x1, b.x1);
        u.y1 = std::min(u.y1, b.y1);
        u.x2 = std::max(u.x2, b.x2);
        u.y2 = std::max(u.y2, b.y2);
    }
    return u;
}

namespace {

int clamp_threads(int parallelism) {
    return std::max(1, parallelism);
}

double now_or_real(const pipeline::PipelineConfig& cfg) {
    return cfg.now_seconds ? cfg.now_seconds()
                           : std::chrono::duration<double>(
                                 std::chrono::steady_clock::now().time_since_epoch())
                                 .count();
}

/// Stage-2-only run used by oracle_region mode: the GT box stands in for the
/// predicted region, so no stage-1 completion is issued. The stage-1
/// assistant turn is synthesized locally to keep the stage-2 template
/// unchanged.
pipeline::PipelineTrace run_oracle_region(const dataset::Sample& sample,
                                          const pipeline::PipelineConfig& cfg,
                                          backend::Backend& be) {
    const double t0 = now_or_real(cfg);
    pipeline::PipelineTrace trace;
    trace.sample_id = sample.id;
    trace.question = sample.question;
    trace.flags.push_back("oracle_region");

    if (sample.gt_boxes.empty()) {
        throw MissingGroundTruthError("oracle_region: sample '" + sample.id +
                                      "' has no gt boxes");
    }

    imaging::RasterImage orig = imaging::decode_image(sample.image_path);
    trace.orig_space = orig.space();
    const geometry::BBox gt = union_rect(sample.gt_boxes);

    const imaging::RasterImage coarse = imaging::downsample(orig, cfg.coarse_constraint);
    trace.coarse_space = coarse.space();
    trace.coarse_tokens = imaging::token_count(coarse.width, coarse.height);

    // Synthetic assistant turn carrying the GT region in the coordinates the
    // model would have used (the coarse view), falling back to original
    // coordinates if the box collapses under scaling.
    const auto display = geometry::scale_box(gt, trace.orig_space, trace.coarse_space);
    const geometry::BBox shown = display ? *display : gt;
    protocol::StageOutput synthetic;
    synthetic.zooms.push_back({static_cast<double>(shown.x1), static_cast<double>(shown.y1),
                               static_cast<double>(shown.x2), static_cast<double>(shown.y2)});
    trace.stage1_text = protocol::emit_output(synthetic);
    trace.region = gt;

    const imaging::RasterImage cropped = imaging::crop(orig, gt);
    const imaging::RasterImage sent = imaging::downsample(
        cropped, cfg.crop_constraint.value_or(imaging::PixelConstraint::unbounded()));
    trace.crop_space = sent.space();
    trace.crop_tokens = imaging::token_count(sent.width, sent.height);
    trace.crop_image = sent;

    std::vector<backend::ChatMessage> history = pipeline::build_stage1_messages(sample, coarse, cfg);
    history.push_back(backend::ChatMessage::text("assistant", trace.stage1_text));
    const auto stage2 = pipeline::build_stage2_messages(std::move(history), sent,
                                                        sample.question, cfg);
    trace.stage2_text = be.complete({sample.id, 2, "policy"}, stage2);
    const protocol::StageOutput out = protocol::parse_output(*trace.stage2_text);
    if (out.answer) {
        trace.final_answer = out.answer;
    } else {
        trace.flags.push_back("answer_missing");
    }
    trace.total_tokens = trace.coarse_tokens + trace.crop_tokens;
    trace.latency_seconds = now_or_real(cfg) - t0;
    return trace;
}

/// Coarse-only baseline: one completion, the direct answer is final.
pipeline::PipelineTrace run_no_crop(const dataset::Sample& sample,
                                    const pipeline::PipelineConfig& cfg, backend::Backend& be) {
    const double t0 = now_or_real(cfg);
    pipeline::PipelineTrace trace;
    trace.sample_id = sample.id;
    trace.question = sample.question;
    trace.flags.push_back("no_crop");

    imaging::RasterImage orig = imaging::decode_image(sample.image_path);
    trace.orig_space = orig.space();
    const imaging::RasterImage coarse = imaging::downsample(orig, cfg.coarse_constraint);
    trace.coarse_space = coarse.space();
    trace.coarse_tokens = imaging::token_count(coarse.width, coarse.height);

    const auto messages = pipeline::build_stage1_messages(sample, coarse, cfg);
    trace.stage1_text = be.complete({sample.id, 1, "policy"}, messages);
    const protocol::StageOutput out = protocol::parse_output(trace.stage1_text);
    if (out.answer) {
        trace.final_answer = out.answer;
    } else {
        trace.flags.push_back("answer_missing");
    }
    trace.total_tokens = trace.coarse_tokens;
    trace.latency_seconds = now_or_real(cfg) - t0;
    return trace;
}

} // namespace

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["mode"] = mode;
    j["total"] = total;
    j["correct"] = correct;
    j["accuracy"] = accuracy;
    j["mean_total_tokens"] = mean_total_tokens;
    j["mean_latency_seconds"] = mean_latency_seconds;
    j["mean_coverage"] =
        mean_coverage ? nlohmann::json(*mean_coverage) : nlohmann::json(nullptr);
    j["area_ratio_histogram"] = area_ratio_histogram;
    j["config"] = config_metadata;
    nlohmann::json traces_json = nlohmann::json::array();
    for (const auto& t : traces) traces_json.push_back(t.to_json());
    j["traces"] = std::move(traces_json);
    return j;
}

EvalReport run_benchmark(const std::vector<dataset::Sample>& samples,
                         const pipeline::PipelineConfig& cfg, backend::Backend& be,
                         const HarnessOptions& options) {
    if (samples.empty()) throw DatasetError("run_benchmark: empty dataset");
    cfg.validate();

    EvalReport report;
    report.mode = mode_name(options.mode);
    report.config_metadata = options.config_metadata;
    report.traces.resize(samples.size());

    const int threads = clamp_threads(options.parallelism);
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::size_t i = 0; i < samples.size(); ++i) {
        try {
            switch (options.mode) {
                case EvalMode::coarse_to_fine:
                    report.traces[i] = pipeline::run_sample(samples[i], cfg, be);
                    break;
                case EvalMode::oracle_region:
                    report.traces[i] = run_oracle_region(samples[i], cfg, be);
                    break;
                case EvalMode::no_crop:
                    report.traces[i] = run_no_crop(samples[i], cfg, be);
                    break;
            }
        } catch (const std::exception& e) {
            pipeline::PipelineTrace failed;
            failed.sample_id = samples[i].id;
            failed.question = samples[i].question;
            failed.flags.push_back(std::string("sample_failed: ") + e.what());
            report.traces[i] = std::move(failed);
        }
    }

    // Serialized fold over the per-sample results.
    report.total = static_cast<long>(samples.size());
    double token_sum = 0.0;
    double latency_sum = 0.0;
    double coverage_sum = 0.0;
    long coverage_n = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const pipeline::PipelineTrace& t = report.traces[i];
        if (t.final_answer && protocol::match_answer(*t.final_answer, samples[i].gt_answer)) {
            ++report.correct;
        }
        token_sum += static_cast<double>(t.total_tokens);
        latency_sum += t.latency_seconds;
        if (t.region) {
            ++report.area_ratio_histogram[histogram_bin(
                geometry::area_ratio(*t.region, t.orig_space))];
        }
        if (!samples[i].gt_boxes.empty()) {
            std::vector<geometry::BBox> preds;
            if (t.region) preds.push_back(*t.region);
            coverage_sum += geometry::coverage_score(preds, samples[i].gt_boxes);
            ++coverage_n;
        }
    }
    report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.total);
    report.mean_total_tokens = token_sum / static_cast<double>(report.total);
    report.mean_latency_seconds = latency_sum / static_cast<double>(report.total);
    if (coverage_n > 0) {
        report.mean_coverage = coverage_sum / static_cast<double>(coverage_n);
    }
    return report;
}

nlohmann::json MaskedCoverageResult::to_json() const {
    nlohmann::json j;
    j["unmasked_mean"] = unmasked_mean;
    j["masked_mean"] = masked_mean;
    nlohmann::json rows = nlohmann::json::array();
    for (const PerSample& p : per_sample) {
        rows.push_back({{"sample_id", p.sample_id}, {"unmasked", p.unmasked}, {"masked", p.masked}});
    }
    j["per_sample"] = std::move(rows);
    return j;
}

MaskedCoverageResult masked_coverage_experiment(const std::vector<dataset::Sample>& samples,
                                                const pipeline::PipelineConfig& cfg,
                                                backend::Backend& be, int parallelism) {
    if (samples.empty()) throw DatasetError("masked_coverage_experiment: empty dataset");
    cfg.validate();
    for (const dataset::Sample& s : samples) {
        if (s.gt_boxes.empty()) {
            throw MissingGroundTruthError("masked_coverage_experiment: sample '" + s.id +
                                          "' has no gt boxes");
        }
    }

    MaskedCoverageResult result;
    result.per_sample.resize(samples.size());
    std::vector<std::exception_ptr> errors(samples.size());

    const int threads = clamp_threads(parallelism);
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::size_t i = 0; i < samples.size(); ++i) {
        try {
            const dataset::Sample& sample = samples[i];
            imaging::RasterImage orig = imaging::decode_image(sample.image_path);

            imaging::RasterImage masked = orig;
            for (const geometry::BBox& b : sample.gt_boxes) {
                masked = imaging::mask_region(masked, b);
            }

            auto predict = [&](const imaging::RasterImage& image, const std::string& role_tag) {
                const imaging::RasterImage coarse = imaging::downsample(image, cfg.coarse_constraint);
                const auto messages = pipeline::build_stage1_messages(sample, coarse, cfg);
                const std::string text = be.complete({sample.id, 1, role_tag}, messages);
                const protocol::StageOutput out = protocol::parse_output(text);
                std::vector<geometry::BBox> preds;
                for (const auto& z : out.zooms) {
                    const auto in_coarse =
                        geometry::clamp_and_validate(z[0], z[1], z[2], z[3], coarse.space());
                    if (!in_coarse) continue;
                    if (auto scaled = geometry::scale_box(*in_coarse, coarse.space(), orig.space())) {
                        preds.push_back(*scaled);
                    }
                }
                return geometry::coverage_score(preds, sample.gt_boxes);
            };

            result.per_sample[i] = {sample.id, predict(orig, "policy"),
                                    predict(masked, "policy-masked")};
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    double u = 0.0, m = 0.0;
    for (const auto& p : result.per_sample) {
        u += p.unmasked;
        m += p.masked;
    }
    result.unmasked_mean = u / static_cast<double>(result.per_sample.size());
    result.masked_mean = m / static_cast<double>(result.per_sample.size());
    return result;
}

nlohmann::json AreaRatioStats::to_json() const {
    nlohmann::json j;
    j["bins"] = bins;
    j["counted"] = counted;
    j["warnings"] = warnings;
    // Multi-box samples contribute the ratio of their union's bounding
    // rectangle; recorded here so reports are self-describing.
    j["multi_box_rule"] = "union_bounding_rect";
    return j;
}

AreaRatioStats area_ratio_stats(const std::vector<dataset::Sample>& samples) {
    AreaRatioStats stats;
    for (const dataset::Sample& s : samples) {
        if (s.gt_boxes.empty()) {
            stats.warnings.push_back("sample '" + s.id + "' has no gt boxes; skipped");
            continue;
        }
        const geometry::BBox u = union_rect(s.gt_boxes);
        ++stats.bins[histogram_bin(geometry::area_ratio(u, u.space))];
        ++stats.counted;
    }
    return stats;
}

ReportFormat parse_report_format(const std::string& name) {
    if (name == "json") return ReportFormat::json;
    if (name == "csv") return ReportFormat::csv;
    if (name == "plot_csv") return ReportFormat::plot_csv;
    throw ConfigError("unknown report format '" + name + "' (expected json, csv or plot_csv)");
}

namespace {

std::string csv_number(double v) {
    return nlohmann::json(v).dump();
}

} // namespace

std::string emit_report(const EvalReport& report, ReportFormat format) {
    switch (format) {
        case ReportFormat::json:
            return report.to_json().dump(2) + "\n";
        case ReportFormat::csv: {
            std::ostringstream out;
            out << "# config=" << report.config_metadata.dump() << "\n";
            out << "mode,samples,correct,accuracy,mean_total_tokens,mean_latency_seconds,"
                   "mean_coverage\n";
            out << report.mode << "," << report.total << "," << report.correct << ","
                << csv_number(report.accuracy) << "," << csv_number(report.mean_total_tokens)
                << "," << csv_number(report.mean_latency_seconds) << ","
                << (report.mean_coverage ? csv_number(*report.mean_coverage) : "") << "\n";
            return out.str();
        }
        case ReportFormat::plot_csv: {
            std::ostringstream out;
            out << "# config=" << report.config_metadata.dump() << "\n";
            out << "constraint_tokens,total_tokens_mean,accuracy\n";
            const nlohmann::json n = report.config_metadata.value(
                "pipeline", nlohmann::json::object()).value("coarse_max_tokens", nlohmann::json());
            out << (n.is_number() ? n.dump() : "") << ","
                << csv_number(report.mean_total_tokens) << "," << csv_number(report.accuracy)
                << "\n";
            return out.str();
        }
    }
    throw ConfigError("unknown report format");
}

} // namespace ergo::evalharness
