#include "nste/envelope_design.hpp"

#include "nste/errors.hpp"
#include "nste/image_io.hpp"
#include "nste/imaging.hpp"
#include "nste/report.hpp"
#include "nste/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace nste {

namespace fs = std::filesystem;

namespace {

nlohmann::json triple_json(const MetricsTriple& m) { return {{"psnr", m.psnr}, {"rmse", m.rmse}, {"ssim", m.ssim}}; }

MetricsTriple mean_metrics(const std::vector<ImagePlane>& preds, const std::vector<PairedSample>& samples) {
    std::vector<std::string> ids;
    std::vector<ImagePlane> targets;
    for (const auto& s : samples) {
        ids.push_back(s.id);
        targets.push_back(s.target);
    }
    return evaluate_predictions(ids, preds, preds, targets).mean_model;
}

std::vector<ImagePlane> registered(const std::vector<PairedSample>& samples, Size content) {
    std::vector<ImagePlane> out;
    for (const auto& s : samples) {
        out.push_back(s.pose ? register_capture(s.captured, *s.pose, content) : resize_bilinear(s.captured, content));
    }
    return out;
}

std::string level_name(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v;
    if (n <= 1 || hi == lo) return {lo};
    for (int i = 0; i < n; ++i) v.push_back(lo + (hi - lo) * i / (n - 1));
    return v;
}

int odd_at_least(double v, int lo) {
    int k = static_cast<int>(std::lround(v));
    if (k % 2 == 0) ++k;
    return std::max(k, lo);
}

}  // namespace

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::safe: return "safe";
        case Verdict::unsafe: return "unsafe";
        default: return "inconclusive";
    }
}

// ---------------------------------------------------------------------------
// budget

AuditBudget AuditBudget::full() {
    AuditBudget b;
    b.pairs = 500;
    b.iterations = 4000;
    b.resolution = Resolution::paper;
    return b;
}

nlohmann::json AuditBudget::to_json() const {
    return {{"pairs", pairs},
            {"iterations", iterations},
            {"batch_size", batch_size},
            {"resolution", to_string(resolution)},
            {"seed", seed},
            {"threshold", threshold},
            {"skip_training_when_visible", skip_training_when_visible}};
}

AuditBudget AuditBudget::from_json(const nlohmann::json& doc) {
    AuditBudget b;
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "pairs") b.pairs = value.get<int>();
            else if (key == "iterations") b.iterations = value.get<int>();
            else if (key == "batch_size") b.batch_size = value.get<int>();
            else if (key == "resolution") b.resolution = resolution_from_string(value.get<std::string>());
            else if (key == "seed") b.seed = value.get<std::uint64_t>();
            else if (key == "threshold") b.threshold = value.get<double>();
            else if (key == "skip_training_when_visible") b.skip_training_when_visible = value.get<bool>();
            else throw ConfigError("audit budget: unknown key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("audit budget: ") + e.what());
    }
    b.validate();
    return b;
}

void AuditBudget::validate() const {
    if (pairs < 100 || iterations < 200) {
        throw ConfigError("audit budget below smoke-test size (needs >= 100 pairs and >= 200 iterations)");
    }
    if (batch_size < 1) throw ConfigError("audit budget: batch_size must be >= 1");
    if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("audit budget: threshold must be in (0, 1]");
}

nlohmann::json SafetyVerdict::to_json() const {
    nlohmann::json j{{"envelope", envelope.to_json()},
                     {"pose_jitter", pose_jitter},
                     {"attack_metrics", triple_json(attack_metrics)},
                     {"baseline_metrics", triple_json(baseline_metrics)},
                     {"trained_metrics", trained_metrics ? triple_json(*trained_metrics) : nlohmann::json(nullptr)},
                     {"threshold", threshold},
                     {"verdict", to_string(verdict)},
                     {"reason", reason},
                     {"seed", seed},
                     {"evidence", evidence}};
    return j;
}

// ---------------------------------------------------------------------------
// audit

SafetyVerdict audit_envelope(const EnvelopeConfig& envelope, const AuditBudget& budget, const fs::path& run_dir,
                             double pose_jitter) {
    budget.validate();
    SafetyVerdict v;
    v.envelope = envelope;
    v.pose_jitter = pose_jitter;
    v.threshold = budget.threshold;
    v.seed = budget.seed;

    const DatasetManifest manifest =
        make_manifest_for(envelope, budget.resolution, budget.seed, budget.pairs, "audit", pose_jitter);
    v.envelope = manifest.envelope;
    fs::create_directories(run_dir);
    const fs::path data_dir = build_dataset(manifest, run_dir / "data");
    const LoadedDataset data = load_dataset(data_dir);
    const Size content = manifest.content.size;

    const std::vector<ImagePlane> baseline_preds = registered(data.test, content);
    v.baseline_metrics = mean_metrics(baseline_preds, data.test);

    std::optional<std::vector<ImagePlane>> recovered;
    if (budget.skip_training_when_visible && v.baseline_metrics.ssim >= budget.threshold) {
        v.attack_metrics = v.baseline_metrics;
        v.verdict = Verdict::unsafe;
        v.reason = "unaided capture already reveals the content (baseline SSIM " + format_fixed(v.baseline_metrics.ssim) +
                   " >= threshold " + format_fixed(budget.threshold) + "); attack training skipped";
    } else {
        TrainConfig tc;
        tc.iterations = budget.iterations;
        tc.batch_size = budget.batch_size;
        tc.seed = budget.seed;
        tc.variant = ModelVariant::full;
        TrainOptions opts;
        opts.run_dir = run_dir / "attack";
        try {
            const TrainState st = train(data.train, tc, opts);
            MetricsReport rep = evaluate(st.params, ModelVariant::full, data.test);
            write_text(run_dir / "attack" / "metrics.json", rep.to_json().dump(2) + "\n");
            write_text(run_dir / "attack" / "metrics.csv", rep.to_csv());
            v.trained_metrics = rep.mean_model;
            std::vector<ImagePlane> preds;
            for (const auto& s : data.test) preds.push_back(model_forward(s.captured, st.params, ModelVariant::full).J_hat);
            recovered = std::move(preds);
            const bool trained_stronger = v.trained_metrics->ssim >= v.baseline_metrics.ssim;
            v.attack_metrics = trained_stronger ? *v.trained_metrics : v.baseline_metrics;
            v.verdict = v.attack_metrics.ssim >= budget.threshold ? Verdict::unsafe : Verdict::safe;
            v.reason = std::string(trained_stronger ? "trained attack" : "unaided capture") + " reaches SSIM " +
                       format_fixed(v.attack_metrics.ssim) + (v.verdict == Verdict::unsafe ? " >= " : " < ") +
                       "threshold " + format_fixed(budget.threshold);
        } catch (const TrainingDiverged& e) {
            v.verdict = Verdict::inconclusive;
            v.attack_metrics = v.baseline_metrics;
            v.reason = std::string("attack training diverged: ") + e.what();
        }
    }

    // captured | registered capture | recovered | ground truth
    std::vector<std::vector<ImagePlane>> rows;
    for (std::size_t i = 0; i < std::min<std::size_t>(4, data.test.size()); ++i) {
        std::vector<ImagePlane> row{resize_bilinear(data.test[i].captured, content), baseline_preds[i]};
        if (recovered) row.push_back((*recovered)[i]);
        row.push_back(data.test[i].target);
        rows.push_back(std::move(row));
    }
    write_png(run_dir / "evidence.png", make_grid(rows, {96, 96}));
    v.evidence.push_back("evidence.png");
    write_text(run_dir / "verdict.json", v.to_json().dump(2) + "\n");
    return v;
}

// ---------------------------------------------------------------------------
// sweep

SweepSpec SweepSpec::nine_setup() {
    SweepSpec s;
    s.base = preset_envelope("easy");
    s.axes = {{"blur.kernel_size", {1, 9, 17}}, {"k_t", {0.8, 0.4, 0.1}}, {"k_A", {0.3, 0.6, 1.0}}};
    return s;
}

SweepSpec SweepSpec::five_axis() {
    SweepSpec s = nine_setup();
    s.axes.push_back({"L", {1.0, 0.7, 0.4}});
    s.axes.push_back({"pose_jitter", {0.0, 0.05, 0.1}});
    s.axes.push_back({"noise.gaussian_sigma", {0.01, 0.03, 0.06}});
    return s;
}

nlohmann::json SweepSpec::to_json() const {
    nlohmann::json axes_j = nlohmann::json::array();
    for (const auto& a : axes) axes_j.push_back({{"parameter", a.parameter}, {"levels", a.levels}});
    return {{"base", base.to_json()}, {"base_pose_jitter", base_pose_jitter}, {"axes", axes_j}};
}

SweepSpec SweepSpec::from_json(const nlohmann::json& doc) {
    SweepSpec s;
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "base") s.base = EnvelopeConfig::from_json(value);
            else if (key == "base_pose_jitter") s.base_pose_jitter = value.get<double>();
            else if (key == "axes") {
                for (const auto& a : value) s.axes.push_back({a.at("parameter").get<std::string>(), a.at("levels").get<std::vector<double>>()});
            } else {
                throw ConfigError("sweep spec: unknown key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("sweep spec: ") + e.what());
    }
    s.validate();
    return s;
}

void SweepSpec::validate() const {
    if (axes.empty()) throw ConfigError("sweep spec: no axes");
    for (const auto& a : axes) {
        if (std::find(kSweepParameters.begin(), kSweepParameters.end(), a.parameter) == kSweepParameters.end()) {
            throw ConfigError("sweep spec: parameter '" + a.parameter + "' cannot be swept");
        }
        if (a.levels.empty()) throw ConfigError("sweep spec: axis '" + a.parameter + "' has no levels");
        if (a.parameter == "blur.kernel_size") {
            for (double l : a.levels) {
                if (l < 1 || l != std::floor(l) || static_cast<long>(l) % 2 == 0) {
                    throw ConfigError("sweep spec: kernel size levels must be odd integers");
                }
            }
        }
    }
}

std::pair<EnvelopeConfig, double> apply_sweep_level(const EnvelopeConfig& base, double base_jitter,
                                                    const std::string& parameter, double level) {
    EnvelopeConfig e = base;
    double jitter = base_jitter;
    if (parameter == "blur.kernel_size") {
        if (level != std::floor(level)) throw ConfigError("sweep: kernel size levels must be integers");
        e.kernel_size = static_cast<int>(level);
    } else if (parameter == "k_t") {
        e.k_t = level;
    } else if (parameter == "k_A") {
        e.k_A = level;
    } else if (parameter == "L") {
        e.L = level;
    } else if (parameter == "pose_jitter") {
        jitter = level;
    } else if (parameter == "noise.gaussian_sigma") {
        e.gaussian_sigma = level;
    } else {
        throw ConfigError("sweep: parameter '" + parameter + "' cannot be swept");
    }
    return {e, jitter};
}

nlohmann::json SweepReport::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : points) {
        arr.push_back({{"axis", p.axis},
                       {"level", p.level},
                       {"envelope", p.envelope.to_json()},
                       {"pose_jitter", p.pose_jitter},
                       {"baseline", triple_json(p.baseline)},
                       {"verdict", p.verdict ? p.verdict->to_json() : nlohmann::json(nullptr)},
                       {"error", p.error}});
    }
    return {{"points", arr}};
}

std::string SweepReport::to_csv() const {
    std::ostringstream os;
    os << "axis,level,baseline_psnr,baseline_rmse,baseline_ssim,attack_ssim,verdict,error\n";
    for (const auto& p : points) {
        os << p.axis << ',' << level_name(p.level) << ',' << format_fixed(p.baseline.psnr, 6) << ','
           << format_fixed(p.baseline.rmse, 6) << ',' << format_fixed(p.baseline.ssim, 6) << ','
           << (p.verdict ? format_fixed(p.verdict->attack_metrics.ssim, 6) : "") << ','
           << (p.verdict ? to_string(p.verdict->verdict) : "") << ',' << '"' << p.error << '"' << '\n';
    }
    return os.str();
}

SweepReport parameter_sweep(const SweepSpec& spec, const AuditBudget& budget, const fs::path& out_dir,
                            const SweepOptions& options) {
    spec.validate();
    budget.validate();
    fs::create_directories(out_dir);
    SweepReport report;
    for (const auto& axis : spec.axes) {
        std::vector<ImagePlane> strip_cap, strip_reg;
        ChartSeries base_series{"unaided capture", {}, {}}, attack_series{"attack", {}, {}};
        for (double level : axis.levels) {
            SweepPoint pt;
            pt.axis = axis.parameter;
            pt.level = level;
            try {
                std::tie(pt.envelope, pt.pose_jitter) =
                    apply_sweep_level(spec.base, spec.base_pose_jitter, axis.parameter, level);
                const fs::path dir = out_dir / (axis.parameter + "_" + level_name(level));
                const DatasetManifest m =
                    make_manifest_for(pt.envelope, budget.resolution, budget.seed, budget.pairs, "sweep", pt.pose_jitter);
                pt.envelope = m.envelope;
                if (options.audit) {
                    pt.verdict = audit_envelope(pt.envelope, budget, dir, pt.pose_jitter);
                    pt.baseline = pt.verdict->baseline_metrics;
                } else {
                    std::vector<PairedSample> test;
                    for (int i : m.test_indices) test.push_back(simulate_pair(m, i));
                    pt.baseline = mean_metrics(registered(test, m.content.size), test);
                }
                const PairedSample first = simulate_pair(m, m.test_indices.front());
                strip_cap.push_back(first.captured);
                strip_reg.push_back(register_capture(first.captured, *first.pose, m.content.size));
                base_series.x.push_back(level);
                base_series.y.push_back(pt.baseline.ssim);
                if (pt.verdict) {
                    attack_series.x.push_back(level);
                    attack_series.y.push_back(pt.verdict->attack_metrics.ssim);
                }
            } catch (const std::exception& e) {
                pt.error = e.what();
            }
            report.points.push_back(std::move(pt));
        }
        if (!strip_cap.empty()) {
            write_png(out_dir / ("strip_" + axis.parameter + ".png"),
                      make_grid({strip_cap, strip_reg}, {strip_cap.front().width(), strip_cap.front().height()}));
        }
        std::vector<ChartSeries> series{base_series};
        if (!attack_series.x.empty()) series.push_back(attack_series);
        write_text(out_dir / ("curve_" + axis.parameter + ".svg"),
                   svg_line_chart("SSIM vs " + axis.parameter, axis.parameter, "SSIM", series, budget.threshold));
    }
    write_text(out_dir / "sweep.json", report.to_json().dump(2) + "\n");
    write_text(out_dir / "sweep.csv", report.to_csv());
    return report;
}

// ---------------------------------------------------------------------------
// design search

nlohmann::json DesignRanges::to_json() const {
    return {{"start", start.to_json()},   {"k_A_min", k_A_min},       {"k_A_max", k_A_max},
            {"k_t_min", k_t_min},         {"k_t_max", k_t_max},       {"kernel_min", kernel_min},
            {"kernel_max", kernel_max},   {"levels", levels}};
}

DesignRanges DesignRanges::from_json(const nlohmann::json& doc) {
    DesignRanges r;
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "start") r.start = EnvelopeConfig::from_json(value);
            else if (key == "k_A_min") r.k_A_min = value.get<double>();
            else if (key == "k_A_max") r.k_A_max = value.get<double>();
            else if (key == "k_t_min") r.k_t_min = value.get<double>();
            else if (key == "k_t_max") r.k_t_max = value.get<double>();
            else if (key == "kernel_min") r.kernel_min = value.get<int>();
            else if (key == "kernel_max") r.kernel_max = value.get<int>();
            else if (key == "levels") r.levels = value.get<int>();
            else throw ConfigError("design ranges: unknown key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("design ranges: ") + e.what());
    }
    r.validate();
    return r;
}

void DesignRanges::validate() const {
    if (k_A_min > k_A_max || k_t_min > k_t_max || kernel_min > kernel_max) {
        throw ConfigError("design ranges: empty range (min > max)");
    }
    if (kernel_min < 1 || kernel_max % 2 == 0 || kernel_min % 2 == 0) {
        throw ConfigError("design ranges: kernel sizes must be odd and >= 1");
    }
    if (k_A_min < 0.0 || k_A_max > 1.0 || k_t_min <= 0.0 || k_t_max > 1.0) {
        throw ConfigError("design ranges: k_A must lie in [0, 1] and k_t in (0, 1]");
    }
    if (levels < 1) throw ConfigError("design ranges: levels must be >= 1");
}

nlohmann::json DesignResult::to_json() const {
    nlohmann::json trail_j = nlohmann::json::array();
    for (const auto& v : trail) trail_j.push_back(v.to_json());
    return {{"found", found},
            {"design", design.to_json()},
            {"verdict", verdict ? verdict->to_json() : nlohmann::json(nullptr)},
            {"trail", trail_j},
            {"message", message}};
}

DesignResult recommend_design(const DesignRanges& ranges, const AuditBudget& budget, const fs::path& out_dir) {
    ranges.validate();
    budget.validate();
    DesignResult result;
    EnvelopeConfig cur = ranges.start;
    cur.k_A = std::clamp(cur.k_A, ranges.k_A_min, ranges.k_A_max);
    cur.k_t = std::clamp(cur.k_t, ranges.k_t_min, ranges.k_t_max);
    cur.kernel_size = std::clamp(cur.kernel_size, ranges.kernel_min, ranges.kernel_max);
    if (cur.kernel_size % 2 == 0) ++cur.kernel_size;

    int step = 0;
    auto try_design = [&](const EnvelopeConfig& e) {
        char name[32];
        std::snprintf(name, sizeof name, "step_%02d", step++);
        SafetyVerdict v = audit_envelope(e, budget, out_dir / name);
        result.trail.push_back(v);
        if (v.verdict == Verdict::safe) {
            result.found = true;
            result.design = v.envelope;
            result.verdict = v;
            result.message = "safe design found after " + std::to_string(step) + " audit(s)";
        }
        return result.found;
    };

    if (!try_design(cur)) {
        // Lever 1: more reflective surface.
        for (double a : linspace(ranges.k_A_min, ranges.k_A_max, ranges.levels)) {
            if (a <= cur.k_A) continue;
            cur.k_A = a;
            if (try_design(cur)) break;
        }
    }
    if (!result.found) {
        // Lever 2: thicker envelope (lower transmittance).
        auto levels = linspace(ranges.k_t_min, ranges.k_t_max, ranges.levels);
        std::reverse(levels.begin(), levels.end());
        for (double t : levels) {
            if (t >= cur.k_t) continue;
            cur.k_t = t;
            if (try_design(cur)) break;
        }
    }
    if (!result.found) {
        // Lever 3: larger content-envelope distance (wider blur).
        for (double k : linspace(ranges.kernel_min, ranges.kernel_max, ranges.levels)) {
            const int ks = std::min(odd_at_least(k, ranges.kernel_min), ranges.kernel_max);
            if (ks <= cur.kernel_size) continue;
            cur.kernel_size = ks;
            if (try_design(cur)) break;
        }
    }
    if (!result.found) {
        result.design = cur;
        result.message = "no safe design in range";
    }
    write_text(out_dir / "design.json", result.to_json().dump(2) + "\n");
    return result;
}

}  // namespace nste
