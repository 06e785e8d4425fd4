// nste: generate datasets, train and evaluate the attack, audit envelopes.
#include "nste_cli/commands.hpp"

#include "nste/dataset.hpp"
#include "nste/envelope_design.hpp"
#include "nste/errors.hpp"
#include "nste/model.hpp"
#include "nste/run_manifest.hpp"
#include "nste/training.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nste;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

/// Merges `overrides` into `base` key by key (one level deep for objects).
void merge(json& base, const json& overrides) {
    for (const auto& [k, v] : overrides.items()) {
        if (v.is_object() && base.contains(k) && base[k].is_object()) merge(base[k], v);
        else base[k] = v;
    }
}

struct Common {
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string config;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--out", c.out, "Run directory (default: $NSTE_OUTPUT_ROOT/<subcommand>-<time>-<seed>)");
    app->add_option("--seed", c.seed, "Seed for every stochastic component (drawn and recorded when omitted)");
    app->add_option("--config", c.config, "JSON config; command-line flags override its keys")->check(CLI::ExistingFile);
}

/// Flag value if given on the command line, else the config key, else the default.
template <typename T>
T pick(const CLI::App* app, const char* flag, const T& flag_value, const json& config, const char* key) {
    if (app->count(flag) > 0) return flag_value;
    if (config.contains(key)) return config.at(key).get<T>();
    return flag_value;
}

std::uint64_t seed_from(const Common& c, const json& config) {
    if (c.seed) return *c.seed;
    if (config.contains("seed")) return config.at("seed").get<std::uint64_t>();
    return cli::resolve_seed(std::nullopt);
}

json config_of(const Common& c) { return c.config.empty() ? json::object() : read_json_file(c.config); }

fs::path run_dir_for(const std::string& sub, const Common& c, std::uint64_t seed) {
    return c.out.empty() ? cli::default_run_dir(sub, seed) : fs::path(c.out);
}

int finish(const cli::Outcome& o, const fs::path& dir) {
    std::cout << o.summary << "\n" << "run directory: " << dir.string() << "\n";
    return o.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural-STE: see-through-envelope attack and envelope safety audits"};
    app.set_version_flag("--version", std::string(version()));
    app.require_subcommand(1);

    // generate ---------------------------------------------------------------
    Common gen_c;
    std::string gen_preset = "easy", gen_resolution = "desk", gen_setup;
    std::optional<int> gen_pairs;
    auto* gen = app.add_subcommand("generate", "Simulate a paired dataset for an envelope preset");
    add_common(gen, gen_c);
    gen->add_option("--preset", gen_preset, "easy | medium | hard | paper-safe | identity");
    gen->add_option("--resolution", gen_resolution, "desk (64px content, 160x120 capture) | paper (256px, 320x240)");
    gen->add_option("--pairs", gen_pairs, "Number of pairs (default 500)");
    gen->add_option("--setup-id", gen_setup, "Setup id (default: preset name)");

    // train ------------------------------------------------------------------
    Common tr_c;
    std::string tr_dataset, tr_variant;
    std::optional<int> tr_iters, tr_batch;
    std::optional<double> tr_lr;
    auto* tr = app.add_subcommand("train", "Train one model variant on a dataset");
    add_common(tr, tr_c);
    tr->add_option("--dataset", tr_dataset, "Dataset directory (setup_<id>)")->required();
    tr->add_option("--variant", tr_variant, "full | black_box | no_warp | no_refine | no_A_constraint | no_J_constraint");
    tr->add_option("--iterations", tr_iters);
    tr->add_option("--batch-size", tr_batch);
    tr->add_option("--lr", tr_lr);

    // eval -------------------------------------------------------------------
    Common ev_c;
    std::string ev_dataset, ev_ckpt, ev_variant;
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset's test split");
    add_common(ev, ev_c);
    ev->add_option("--dataset", ev_dataset)->required();
    ev->add_option("--checkpoint", ev_ckpt)->required();
    ev->add_option("--variant", ev_variant, "Expected variant; a mismatch is an error");

    // audit ------------------------------------------------------------------
    Common au_c;
    std::string au_preset = "easy", au_envelope, au_resolution;
    std::optional<int> au_pairs, au_iters;
    std::optional<double> au_threshold;
    bool au_full = false, au_always_train = false;
    auto* au = app.add_subcommand("audit", "Attack an envelope and classify it safe or unsafe");
    add_common(au, au_c);
    au->add_option("--preset", au_preset, "Envelope preset to audit");
    au->add_option("--envelope", au_envelope, "Envelope JSON (overrides --preset)")->check(CLI::ExistingFile);
    au->add_option("--pairs", au_pairs);
    au->add_option("--iterations", au_iters);
    au->add_option("--threshold", au_threshold, "SSIM threshold (default 0.35)");
    au->add_option("--resolution", au_resolution);
    au->add_flag("--full-budget", au_full, "500 pairs / 4000 iterations at paper resolution");
    au->add_flag("--always-train", au_always_train, "Train the attack even when the capture is already legible");

    // sweep ------------------------------------------------------------------
    Common sw_c;
    std::string sw_spec;
    bool sw_five = false, sw_no_audit = false;
    std::optional<int> sw_pairs, sw_iters;
    auto* sw = app.add_subcommand("sweep", "Audit one-parameter variations of a base envelope");
    add_common(sw, sw_c);
    sw->add_option("--spec", sw_spec, "Sweep spec JSON (default: nine setups over kernel size, k_t, k_A)")
        ->check(CLI::ExistingFile);
    sw->add_flag("--five-axis", sw_five, "Sweep all parameters (kernel size, k_t, k_A, L, pose jitter, noise)");
    sw->add_flag("--no-audit", sw_no_audit, "Only measure the unaided capture (no training)");
    sw->add_option("--pairs", sw_pairs);
    sw->add_option("--iterations", sw_iters);

    // design -----------------------------------------------------------------
    Common de_c;
    std::string de_ranges;
    auto* de = app.add_subcommand("design", "Search the parameter ranges for a safe envelope");
    add_common(de, de_c);
    de->add_option("--ranges", de_ranges, "Design ranges JSON")->required()->check(CLI::ExistingFile);

    // report -----------------------------------------------------------------
    Common rp_c;
    std::vector<std::string> rp_datasets, rp_variants{"full", "no_refine"};
    std::string rp_ckroot;
    bool rp_no_train = false;
    std::optional<int> rp_iters;
    auto* rp = app.add_subcommand("report", "Compare variants side by side over datasets");
    add_common(rp, rp_c);
    rp->add_option("--dataset", rp_datasets, "Dataset directories")->required();
    rp->add_option("--variant", rp_variants, "Variants to compare");
    rp->add_option("--checkpoint-root", rp_ckroot, "Look up <root>/<setup>/<variant>/final.ckpt");
    rp->add_flag("--no-train", rp_no_train, "Fail instead of training when a checkpoint is missing");
    rp->add_option("--iterations", rp_iters);

    // rerun ------------------------------------------------------------------
    std::string re_manifest, re_out;
    auto* re = app.add_subcommand("rerun", "Repeat a run from its run_manifest.json");
    re->add_option("manifest", re_manifest, "run_manifest.json or its run directory")->required();
    re->add_option("--out", re_out, "New run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : cli::kUsage;
    }

    try {
        if (*gen) {
            const json c = config_of(gen_c);
            const std::string preset = pick(gen, "--preset", gen_preset, c, "preset");
            const std::string res = pick(gen, "--resolution", gen_resolution, c, "resolution");
            const int pairs = gen_pairs ? *gen_pairs : c.value("pairs", 500);
            const std::string setup = pick(gen, "--setup-id", gen_setup, c, "setup_id");
            const std::uint64_t seed = seed_from(gen_c, c);
            DatasetManifest m = make_manifest(preset, resolution_from_string(res), seed, pairs, setup);
            if (c.contains("envelope")) m.envelope = EnvelopeConfig::from_json(c["envelope"], m.envelope);
            if (c.contains("pose_jitter")) m.pose_jitter = c["pose_jitter"].get<double>();
            m.validate();
            const auto dir = run_dir_for("generate", gen_c, seed);
            return finish(cli::execute("generate", {{"manifest", m.to_json()}}, dir), dir);
        }
        if (*tr) {
            const json c = config_of(tr_c);
            json t = TrainConfig{}.to_json();
            merge(t, c);
            if (!tr_variant.empty()) t["variant"] = tr_variant;
            if (tr_iters) t["iterations"] = *tr_iters;
            if (tr_batch) t["batch_size"] = *tr_batch;
            if (tr_lr) t["lr"] = *tr_lr;
            const std::uint64_t seed = seed_from(tr_c, c);
            t["seed"] = seed;
            (void)TrainConfig::from_json(t);  // validate before starting
            const auto dir = run_dir_for("train", tr_c, seed);
            const json cfg{{"dataset", fs::absolute(tr_dataset).string()}, {"train", t}};
            return finish(cli::execute("train", cfg, dir), dir);
        }
        if (*ev) {
            json cfg{{"dataset", fs::absolute(ev_dataset).string()},
                     {"checkpoint", fs::absolute(ev_ckpt).string()},
                     {"variant", ev_variant.empty() ? json(nullptr) : json(ev_variant)}};
            const auto dir = run_dir_for("eval", ev_c, 0);
            return finish(cli::execute("eval", cfg, dir), dir);
        }
        if (*au) {
            const json c = config_of(au_c);
            AuditBudget b = au_full ? AuditBudget::full() : AuditBudget{};
            if (c.contains("budget")) b = AuditBudget::from_json([&] { json j = b.to_json(); merge(j, c["budget"]); return j; }());
            if (au_pairs) b.pairs = *au_pairs;
            if (au_iters) b.iterations = *au_iters;
            if (au_threshold) b.threshold = *au_threshold;
            if (!au_resolution.empty()) b.resolution = resolution_from_string(au_resolution);
            if (au_always_train) b.skip_training_when_visible = false;
            b.seed = seed_from(au_c, c);
            b.validate();
            EnvelopeConfig env = preset_envelope(pick(au, "--preset", au_preset, c, "preset"));
            if (c.contains("envelope")) env = EnvelopeConfig::from_json(c["envelope"], env);
            if (!au_envelope.empty()) env = EnvelopeConfig::from_json(read_json_file(au_envelope), env);
            const json cfg{{"envelope", env.to_json()}, {"budget", b.to_json()}, {"pose_jitter", c.value("pose_jitter", 0.05)}};
            const auto dir = run_dir_for("audit", au_c, b.seed);
            return finish(cli::execute("audit", cfg, dir), dir);
        }
        if (*sw) {
            const json c = config_of(sw_c);
            SweepSpec spec = sw_five ? SweepSpec::five_axis() : SweepSpec::nine_setup();
            if (!sw_spec.empty()) spec = SweepSpec::from_json(read_json_file(sw_spec));
            else if (c.contains("spec")) spec = SweepSpec::from_json(c["spec"]);
            AuditBudget b;
            if (c.contains("budget")) b = AuditBudget::from_json(c["budget"]);
            if (sw_pairs) b.pairs = *sw_pairs;
            if (sw_iters) b.iterations = *sw_iters;
            b.seed = seed_from(sw_c, c);
            b.validate();
            const json cfg{{"spec", spec.to_json()}, {"budget", b.to_json()}, {"audit", !sw_no_audit && c.value("audit", true)}};
            const auto dir = run_dir_for("sweep", sw_c, b.seed);
            return finish(cli::execute("sweep", cfg, dir), dir);
        }
        if (*de) {
            const json c = config_of(de_c);
            const DesignRanges ranges = DesignRanges::from_json(read_json_file(de_ranges));
            AuditBudget b;
            if (c.contains("budget")) b = AuditBudget::from_json(c["budget"]);
            b.seed = seed_from(de_c, c);
            b.validate();
            const json cfg{{"ranges", ranges.to_json()}, {"budget", b.to_json()}};
            const auto dir = run_dir_for("design", de_c, b.seed);
            return finish(cli::execute("design", cfg, dir), dir);
        }
        if (*rp) {
            const json c = config_of(rp_c);
            json t = TrainConfig{}.to_json();
            merge(t, c);
            if (rp_iters) t["iterations"] = *rp_iters;
            const std::uint64_t seed = seed_from(rp_c, c);
            t["seed"] = seed;
            json ds = json::array();
            for (const auto& d : rp_datasets) ds.push_back(fs::absolute(d).string());
            const json cfg{{"datasets", ds},
                           {"variants", rp_variants},
                           {"train", t},
                           {"allow_train", !rp_no_train},
                           {"checkpoint_root", rp_ckroot.empty() ? json(nullptr) : json(fs::absolute(rp_ckroot).string())}};
            const auto dir = run_dir_for("report", rp_c, seed);
            return finish(cli::execute("report", cfg, dir), dir);
        }
        if (*re) {
            return finish(cli::rerun(re_manifest, re_out), re_out);
        }
    } catch (const std::exception& e) {
        return cli::report_error(e);
    }
    return cli::kUsage;
}
