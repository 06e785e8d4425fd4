#include "nste/benchmark_runner.hpp"

#include "nste/checkpoint.hpp"
#include "nste/image_io.hpp"
#include "nste/imaging.hpp"
#include "nste/report.hpp"

#include <sstream>

namespace nste {

namespace fs = std::filesystem;

namespace {

nlohmann::json triple_json(const MetricsTriple& m) { return {{"psnr", m.psnr}, {"rmse", m.rmse}, {"ssim", m.ssim}}; }

constexpr const char* kBaselineRow = "captured (no model)";

}  // namespace

MetricsTriple baseline_metrics(std::span<const PairedSample> samples, Size content) {
    std::vector<std::string> ids;
    std::vector<ImagePlane> preds, targets;
    for (const auto& s : samples) {
        ids.push_back(s.id);
        preds.push_back(s.pose ? register_capture(s.captured, *s.pose, content) : resize_bilinear(s.captured, content));
        targets.push_back(s.target);
    }
    return evaluate_predictions(ids, preds, preds, targets).mean_model;
}

nlohmann::json BenchmarkReport::to_json() const {
    nlohmann::json setups_j = nlohmann::json::array();
    for (const auto& s : setups) {
        nlohmann::json v = nlohmann::json::object();
        for (const auto& [name, m] : s.variants) v[name] = triple_json(m);
        setups_j.push_back({{"setup_id", s.setup_id}, {"baseline", triple_json(s.baseline)}, {"variants", v}});
    }
    nlohmann::json means = nlohmann::json::object();
    for (const auto& [name, m] : variant_means) means[name] = triple_json(m);
    return {{"variants", variants},
            {"setups", setups_j},
            {"mean", {{"baseline", triple_json(baseline_mean)}, {"variants", means}}},
            {"paper_reference",
             {{"note", "physical captures; context only"},
              {"neural_ste", triple_json(kPaperNeuralSte)},
              {"cam_captured", triple_json(kPaperCamCaptured)}}}};
}

std::string BenchmarkReport::to_csv() const {
    std::ostringstream os;
    os << "row,psnr,rmse,ssim\n";
    auto line = [&](const std::string& name, const MetricsTriple& m) {
        os << name << ',' << format_fixed(m.psnr, 6) << ',' << format_fixed(m.rmse, 6) << ',' << format_fixed(m.ssim, 6) << '\n';
    };
    line("baseline", baseline_mean);
    for (const auto& v : variants) line(v, variant_means.at(v));
    return os.str();
}

std::string BenchmarkReport::to_markdown(const std::vector<std::string>& grid_images) const {
    const std::vector<std::string> header{"", "PSNR", "RMSE", "SSIM"};
    auto table_for = [&](const MetricsTriple& base, const std::map<std::string, MetricsTriple>& vals) {
        std::vector<std::vector<std::string>> rows;
        auto cells = metric_cells(base);
        cells.insert(cells.begin(), kBaselineRow);
        rows.push_back(cells);
        for (const auto& v : variants) {
            auto c = metric_cells(vals.at(v));
            c.insert(c.begin(), v);
            rows.push_back(c);
        }
        return markdown_table(header, rows);
    };
    std::ostringstream os;
    os << "# Benchmark\n\n## Averaged over " << setups.size() << " setup(s)\n\n" << table_for(baseline_mean, variant_means);
    for (const auto& s : setups) os << "\n## Setup " << s.setup_id << "\n\n" << table_for(s.baseline, s.variants);
    if (!grid_images.empty()) {
        os << "\n## Examples\n\nColumns: capture, registered capture, one column per variant, ground truth.\n\n";
        for (const auto& g : grid_images) os << "![" << g << "](" << g << ")\n\n";
    }
    os << "\n---\n\nPaper (real data, three physical setups; shown for context, not comparable to synthetic "
          "results): Neural-STE "
       << format_fixed(kPaperNeuralSte.psnr) << " / " << format_fixed(kPaperNeuralSte.rmse) << " / "
       << format_fixed(kPaperNeuralSte.ssim) << ", cam-captured " << format_fixed(kPaperCamCaptured.psnr) << " / "
       << format_fixed(kPaperCamCaptured.rmse) << " / " << format_fixed(kPaperCamCaptured.ssim)
       << " (PSNR / RMSE / SSIM).\n";
    return os.str();
}

BenchmarkReport run_benchmark(const std::vector<fs::path>& datasets, const std::vector<ModelVariant>& variants,
                              const BenchmarkOptions& options) {
    if (datasets.empty()) throw std::invalid_argument("run_benchmark: no datasets");
    if (variants.empty()) throw std::invalid_argument("run_benchmark: no variants");
    fs::create_directories(options.out_dir);
    BenchmarkReport rep;
    for (auto v : variants) rep.variants.push_back(to_string(v));
    std::vector<std::string> grids;

    for (const auto& dir : datasets) {
        const LoadedDataset data = load_dataset(dir);
        SetupResult sr;
        sr.setup_id = data.manifest ? data.manifest->setup_id : dir.filename().string();
        const Size content = data.test.front().target.size();
        sr.baseline = baseline_metrics(data.test, content);

        std::vector<std::vector<ImagePlane>> rows(std::min<std::size_t>(3, data.test.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& s = data.test[i];
            rows[i].push_back(resize_bilinear(s.captured, content));
            rows[i].push_back(s.pose ? register_capture(s.captured, *s.pose, content) : resize_bilinear(s.captured, content));
        }
        for (auto variant : variants) {
            const std::string name = to_string(variant);
            std::optional<ModelParameters> params;
            if (options.checkpoint_root) {
                const fs::path ck = *options.checkpoint_root / sr.setup_id / name / "final.ckpt";
                if (fs::exists(ck)) params = load_checkpoint(ck, variant).params;
            }
            if (!params) {
                if (!options.allow_train) {
                    throw MissingCheckpoint("no checkpoint for setup '" + sr.setup_id + "', variant '" + name +
                                            "' and training is not allowed");
                }
                TrainConfig tc = options.train;
                tc.variant = variant;
                TrainOptions to;
                to.run_dir = options.out_dir / "runs" / sr.setup_id / name;
                params = train(data.train, tc, to).params;
            }
            const MetricsReport m = evaluate(*params, variant, data.test);
            sr.variants[name] = m.mean_model;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                rows[i].push_back(model_forward(data.test[i].captured, *params, variant).J_hat);
            }
        }
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i].push_back(data.test[i].target);
        const std::string grid = "grid_" + sr.setup_id + ".png";
        write_png(options.out_dir / grid, make_grid(rows, {96, 96}));
        grids.push_back(grid);
        rep.setups.push_back(std::move(sr));
    }

    const double n = static_cast<double>(rep.setups.size());
    for (const auto& s : rep.setups) {
        rep.baseline_mean.psnr += s.baseline.psnr / n;
        rep.baseline_mean.rmse += s.baseline.rmse / n;
        rep.baseline_mean.ssim += s.baseline.ssim / n;
        for (const auto& [name, m] : s.variants) {
            auto& acc = rep.variant_means[name];
            acc.psnr += m.psnr / n;
            acc.rmse += m.rmse / n;
            acc.ssim += m.ssim / n;
        }
    }
    write_text(options.out_dir / "benchmark.json", rep.to_json().dump(2) + "\n");
    write_text(options.out_dir / "benchmark.csv", rep.to_csv());
    write_text(options.out_dir / "benchmark.md", rep.to_markdown(grids));
    return rep;
}

}  // namespace nste
