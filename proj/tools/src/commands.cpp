#include "nste_cli/commands.hpp"

#include "nste/benchmark_runner.hpp"
#include "nste/checkpoint.hpp"
#include "nste/dataset.hpp"
#include "nste/envelope_design.hpp"
#include "nste/errors.hpp"
#include "nste/hashing.hpp"
#include "nste/image_io.hpp"
#include "nste/imaging.hpp"
#include "nste/report.hpp"
#include "nste/run_manifest.hpp"
#include "nste/training.hpp"

#include <cstdlib>
#include <iostream>
#include <random>

namespace nste::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path require_path(const json& config, const char* key) {
    if (!config.contains(key)) throw ConfigError(std::string("missing '") + key + "'");
    fs::path p = config.at(key).get<std::string>();
    if (!fs::exists(p)) throw ConfigError(std::string(key) + " not found: " + p.string());
    return p;
}

void check_hash(const RunManifest& m, const std::string& key, const std::string& actual) {
    if (m.input_hashes.contains(key) && m.input_hashes.at(key).get<std::string>() != actual) {
        throw ConfigError("input '" + key + "' changed since the run was recorded (hash mismatch)");
    }
}

std::function<void(int, const LossBreakdown&)> progress_printer(int total) {
    return [total](int it, const LossBreakdown& l) {
        if (it == 1 || it % 100 == 0 || it == total) {
            std::cerr << "iter " << it << "/" << total << "  loss " << format_fixed(l.total) << " (recon "
                      << format_fixed(l.recon) << ", J " << format_fixed(l.j_term) << ", A " << format_fixed(l.a_term)
                      << ")\n";
        }
    };
}

void write_metrics(const fs::path& dir, const MetricsReport& rep) {
    write_text(dir / "metrics.json", rep.to_json().dump(2) + "\n");
    write_text(dir / "metrics.csv", rep.to_csv());
}

void write_eval_grid(const fs::path& path, const ModelParameters& params, ModelVariant variant,
                     const std::vector<PairedSample>& test) {
    std::vector<std::vector<ImagePlane>> rows;
    const Size content = params.geometry.content;
    for (std::size_t i = 0; i < std::min<std::size_t>(4, test.size()); ++i) {
        const auto trace = model_forward(test[i].captured, params, variant);
        rows.push_back({resize_bilinear(test[i].captured, content), trace.warped_input, trace.J_hat, test[i].target});
    }
    write_png(path, make_grid(rows, {96, 96}));
}

Outcome run_generate(const json& cfg, const fs::path& dir, RunManifest& m) {
    const DatasetManifest dm = DatasetManifest::from_json(cfg.at("manifest"));
    const fs::path out = build_dataset(dm, dir);
    const std::string hash = dataset_hash(out);
    write_text(dir / "dataset.json", json{{"setup_id", dm.setup_id}, {"pairs", dm.pair_count}, {"hash", hash}}.dump(2) + "\n");
    m.seeds = {{"dataset", dm.envelope.seed}, {"content", dm.content_seed}};
    return {kOk, "dataset written to " + out.string() + " (sha256 " + hash + ")"};
}

Outcome run_train(const json& cfg, const fs::path& dir, RunManifest& m, const RunManifest* previous) {
    const fs::path data_dir = require_path(cfg, "dataset");
    const TrainConfig tc = TrainConfig::from_json(cfg.at("train"));
    const std::string hash = dataset_hash(data_dir);
    if (previous) check_hash(*previous, "dataset", hash);
    m.input_hashes["dataset"] = hash;
    m.seeds = {{"train", tc.seed}};
    const LoadedDataset data = load_dataset(data_dir);
    TrainOptions opts;
    opts.run_dir = dir;
    opts.on_iteration = progress_printer(tc.iterations);
    const TrainState st = train(data.train, tc, opts);
    const MetricsReport rep = evaluate(st.params, tc.variant, data.test);
    write_metrics(dir, rep);
    write_eval_grid(dir / "examples.png", st.params, tc.variant, data.test);
    return {kOk, "trained " + to_string(tc.variant) + ": test SSIM " + format_fixed(rep.mean_model.ssim) +
                     " (warped input " + format_fixed(rep.mean_baseline.ssim) + ")"};
}

Outcome run_eval(const json& cfg, const fs::path& dir, RunManifest& m, const RunManifest* previous) {
    const fs::path data_dir = require_path(cfg, "dataset");
    const fs::path ckpt = require_path(cfg, "checkpoint");
    const std::string dhash = dataset_hash(data_dir), chash = sha256_file(ckpt);
    if (previous) {
        check_hash(*previous, "dataset", dhash);
        check_hash(*previous, "checkpoint", chash);
    }
    m.input_hashes["dataset"] = dhash;
    m.input_hashes["checkpoint"] = chash;
    std::optional<ModelVariant> expected;
    if (cfg.contains("variant") && !cfg.at("variant").is_null()) expected = variant_from_string(cfg.at("variant"));
    const Checkpoint ck = load_checkpoint(ckpt, expected);
    const LoadedDataset data = load_dataset(data_dir);
    const auto& g = ck.params.geometry;
    for (const auto* split : {&data.train, &data.test}) {
        for (const auto& s : *split) {
            if (!(s.target.size() == g.content) || !(s.captured.size() == g.capture)) {
                throw DimensionMismatch("dataset resolution (content " + std::to_string(s.target.width()) + "x" +
                                        std::to_string(s.target.height()) + ", capture " +
                                        std::to_string(s.captured.width()) + "x" + std::to_string(s.captured.height()) +
                                        ") does not match the checkpoint (content " + std::to_string(g.content.width) +
                                        "x" + std::to_string(g.content.height) + ", capture " +
                                        std::to_string(g.capture.width) + "x" + std::to_string(g.capture.height) + ")");
            }
        }
    }
    const MetricsReport rep = evaluate(ck.params, ck.params.variant, data.test);
    write_metrics(dir, rep);
    write_eval_grid(dir / "examples.png", ck.params, ck.params.variant, data.test);
    return {kOk, to_string(ck.params.variant) + ": test SSIM " + format_fixed(rep.mean_model.ssim) + ", PSNR " +
                     format_fixed(rep.mean_model.psnr) + ", RMSE " + format_fixed(rep.mean_model.rmse)};
}

Outcome run_audit(const json& cfg, const fs::path& dir, RunManifest& m) {
    const EnvelopeConfig env = EnvelopeConfig::from_json(cfg.at("envelope"));
    const AuditBudget budget = AuditBudget::from_json(cfg.at("budget"));
    const double jitter = cfg.value("pose_jitter", 0.05);
    m.seeds = {{"audit", budget.seed}};
    const SafetyVerdict v = audit_envelope(env, budget, dir, jitter);
    const std::string msg = "verdict: " + to_string(v.verdict) + " (attack SSIM " + format_fixed(v.attack_metrics.ssim) +
                            ", threshold " + format_fixed(v.threshold) + "); " + v.reason;
    return {v.verdict == Verdict::inconclusive ? kInconclusive : kOk, msg};
}

Outcome run_sweep(const json& cfg, const fs::path& dir, RunManifest& m) {
    const SweepSpec spec = SweepSpec::from_json(cfg.at("spec"));
    const AuditBudget budget = AuditBudget::from_json(cfg.at("budget"));
    SweepOptions opts;
    opts.audit = cfg.value("audit", true);
    m.seeds = {{"sweep", budget.seed}};
    const SweepReport rep = parameter_sweep(spec, budget, dir, opts);
    int failed = 0;
    for (const auto& p : rep.points) failed += p.error.empty() ? 0 : 1;
    return {failed ? kRuntime : kOk, std::to_string(rep.points.size()) + " setups, " + std::to_string(failed) + " failed"};
}

Outcome run_design(const json& cfg, const fs::path& dir, RunManifest& m) {
    const DesignRanges ranges = DesignRanges::from_json(cfg.at("ranges"));
    const AuditBudget budget = AuditBudget::from_json(cfg.at("budget"));
    m.seeds = {{"design", budget.seed}};
    const DesignResult r = recommend_design(ranges, budget, dir);
    return {kOk, r.message};
}

Outcome run_report(const json& cfg, const fs::path& dir, RunManifest& m, const RunManifest* previous) {
    std::vector<fs::path> datasets;
    for (const auto& d : cfg.at("datasets")) {
        fs::path p = d.get<std::string>();
        if (!fs::exists(p)) throw ConfigError("dataset not found: " + p.string());
        const std::string h = dataset_hash(p);
        const std::string key = "dataset:" + p.string();
        if (previous) check_hash(*previous, key, h);
        m.input_hashes[key] = h;
        datasets.push_back(p);
    }
    std::vector<ModelVariant> variants;
    for (const auto& v : cfg.at("variants")) variants.push_back(variant_from_string(v.get<std::string>()));
    BenchmarkOptions opts;
    opts.out_dir = dir;
    opts.train = TrainConfig::from_json(cfg.at("train"));
    opts.allow_train = cfg.value("allow_train", true);
    if (cfg.contains("checkpoint_root") && !cfg.at("checkpoint_root").is_null()) {
        opts.checkpoint_root = fs::path(cfg.at("checkpoint_root").get<std::string>());
    }
    m.seeds = {{"train", opts.train.seed}};
    const BenchmarkReport rep = run_benchmark(datasets, variants, opts);
    return {kOk, "benchmark over " + std::to_string(rep.setups.size()) + " setup(s) written to " + dir.string()};
}

Outcome dispatch(const std::string& sub, const json& config, const fs::path& dir, const RunManifest* previous) {
    fs::create_directories(dir);
    RunManifest m;
    m.subcommand = sub;
    m.config = config;
    m.tool_version = version();
    m.started_at = utc_timestamp();
    Outcome out;
    if (sub == "generate") out = run_generate(config, dir, m);
    else if (sub == "train") out = run_train(config, dir, m, previous);
    else if (sub == "eval") out = run_eval(config, dir, m, previous);
    else if (sub == "audit") out = run_audit(config, dir, m);
    else if (sub == "sweep") out = run_sweep(config, dir, m);
    else if (sub == "design") out = run_design(config, dir, m);
    else if (sub == "report") out = run_report(config, dir, m, previous);
    else throw ConfigError("unknown subcommand '" + sub + "'");
    m.finished_at = utc_timestamp();
    write_run_manifest(dir, m);
    return out;
}

}  // namespace

Outcome execute(const std::string& subcommand, const json& config, const fs::path& run_dir) {
    return dispatch(subcommand, config, run_dir, nullptr);
}

Outcome rerun(const fs::path& manifest_path, const fs::path& run_dir) {
    const RunManifest m = read_run_manifest(manifest_path);
    return dispatch(m.subcommand, m.config, run_dir, &m);
}

fs::path output_root() {
    if (const char* env = std::getenv("NSTE_OUTPUT_ROOT"); env && *env) return env;
    return "nste_runs";
}

fs::path default_run_dir(const std::string& subcommand, std::uint64_t seed) {
    std::string ts = utc_timestamp();
    std::erase(ts, ':');
    return output_root() / (subcommand + "-" + ts + "-" + std::to_string(seed));
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

int report_error(const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const VariantMismatch*>(&e) ||
        dynamic_cast<const DimensionMismatch*>(&e) || dynamic_cast<const nlohmann::json::exception*>(&e)) {
        return kUsage;
    }
    if (const auto* d = dynamic_cast<const TrainingDiverged*>(&e)) {
        std::cerr << "training diverged at iteration " << d->iteration()
                  << (d->last_checkpoint().empty() ? std::string(" (no checkpoint yet)")
                                                   : "; last good checkpoint: " + d->last_checkpoint())
                  << "\n";
    }
    return kRuntime;
}

}  // namespace nste::cli
