#include "nste/training.hpp"

#include "nste/checkpoint.hpp"
#include "nste/errors.hpp"
#include "nste/hashing.hpp"
#include "nste/kernels/loss_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace nste {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json triple_json(const MetricsTriple& m) { return {{"psnr", m.psnr}, {"rmse", m.rmse}, {"ssim", m.ssim}}; }

struct TensorPair {
    nn::Tensor captured;
    nn::Tensor target;
};

/// Forward + loss + backward for one sample; gradients scaled by `scale`.
LossBreakdown sample_step(const NeuralSte& net, const ModelParameters& params, const TensorPair& s,
                          const LossWeights& w, double scale, nn::GradSet& grads, SampleCache& cache) {
    const VariantTraits tr = traits(net.variant());
    net.forward(params, s.captured, cache);
    const int h = cache.jhat.h, wd = cache.jhat.w;
    const std::size_t n = cache.jhat.size();
    if (s.target.h != h || s.target.w != wd) throw DimensionMismatch("training: target size differs from model output");

    TraceGrads up;
    up.d_jhat.reshape_like(cache.jhat);
    LossBreakdown lb;
    const double l1 = kernels::mean_abs_diff(s.target.data(), cache.jhat.data(), n, up.d_jhat.data(), w.recon * scale);
    const double ss =
        kernels::ssim_planar(s.target.data(), cache.jhat.data(), kChannels, h, wd, up.d_jhat.data(), -w.recon * scale);
    lb.recon = w.recon * (l1 + 1.0 - ss);
    if (tr.dehaze && tr.j_constraint) {
        up.d_jc.reshape_like(cache.jc);
        lb.j_term = w.j_constraint *
                    kernels::mean_sq_diff(s.target.data(), cache.jc.data(), n, static_cast<float*>(nullptr),
                                          up.d_jc.data(), w.j_constraint * scale);
    }
    if (tr.dehaze && tr.a_constraint) {
        up.d_A.reshape_like(cache.A);
        up.d_warped.reshape_like(cache.warped);
        lb.a_term = w.a_constraint * kernels::mean_sq_diff(cache.warped.data(), cache.A.data(), n, up.d_warped.data(),
                                                           up.d_A.data(), w.a_constraint * scale);
    }
    lb.total = lb.recon + lb.j_term + lb.a_term;
    net.backward(params, cache, up, grads);
    return lb;
}

TensorPair to_pair(const PairedSample& s) { return {to_tensor(s.captured), to_tensor(s.target)}; }

bool grads_finite(const nn::GradSet& g) {
    for (const auto& v : g)
        for (float x : v)
            if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// TrainConfig

nlohmann::json TrainConfig::to_json() const {
    return {{"lr", lr},
            {"weight_decay", weight_decay},
            {"iterations", iterations},
            {"batch_size", batch_size},
            {"seed", seed},
            {"variant", to_string(variant)},
            {"loss_weights",
             {{"recon", loss_weights.recon}, {"j_constraint", loss_weights.j_constraint},
              {"a_constraint", loss_weights.a_constraint}}},
            {"checkpoint_interval", checkpoint_interval}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& doc) { return from_json(doc, TrainConfig{}); }

TrainConfig TrainConfig::from_json(const nlohmann::json& doc, const TrainConfig& base) {
    if (!doc.is_object()) throw ConfigError("train config: expected an object");
    TrainConfig c = base;
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "lr") c.lr = value.get<double>();
            else if (key == "weight_decay") c.weight_decay = value.get<double>();
            else if (key == "iterations") c.iterations = value.get<int>();
            else if (key == "batch_size") c.batch_size = value.get<int>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "variant") c.variant = variant_from_string(value.get<std::string>());
            else if (key == "checkpoint_interval") c.checkpoint_interval = value.get<int>();
            else if (key == "loss_weights") {
                for (const auto& [k, v] : value.items()) {
                    if (k == "recon") c.loss_weights.recon = v.get<double>();
                    else if (k == "j_constraint") c.loss_weights.j_constraint = v.get<double>();
                    else if (k == "a_constraint") c.loss_weights.a_constraint = v.get<double>();
                    else throw ConfigError("train config: unknown loss weight '" + k + "'");
                }
            } else {
                throw ConfigError("train config: unknown key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    if (c.iterations < 0 || c.batch_size < 1 || c.checkpoint_interval < 1 || c.lr < 0 || c.weight_decay < 0) {
        throw ConfigError("train config: iterations >= 0, batch_size >= 1, checkpoint_interval >= 1, lr and "
                          "weight_decay >= 0 required");
    }
    return c;
}

std::string TrainConfig::hash() const { return sha256_hex(to_json().dump()); }

// ---------------------------------------------------------------------------
// losses

LossBreakdown total_loss(const ForwardTrace& trace, const ImagePlane& J, const LossWeights& w, ModelVariant variant) {
    const VariantTraits tr = traits(variant);
    LossBreakdown lb;
    lb.recon = w.recon * recon_loss(J, trace.J_hat);
    if (tr.dehaze && tr.j_constraint) {
        if (!trace.J_coarse) throw std::invalid_argument("total_loss: J constraint active but trace has no J_coarse");
        require_same_shape(J, *trace.J_coarse, "total_loss(J_coarse)");
        lb.j_term = w.j_constraint * mse(J, *trace.J_coarse);
    }
    if (tr.dehaze && tr.a_constraint) {
        if (!trace.A_pred) throw std::invalid_argument("total_loss: A constraint active but trace has no A_pred");
        require_same_shape(*trace.A_pred, trace.warped_input, "total_loss(A)");
        lb.a_term = w.a_constraint * mse(*trace.A_pred, trace.warped_input);
    }
    lb.total = lb.recon + lb.j_term + lb.a_term;
    return lb;
}

double LossHistory::smoothed_total(int iteration, int window) const {
    const int end = std::min<int>(iteration, static_cast<int>(per_iteration.size()));
    const int begin = std::max(0, end - window);
    if (end <= begin) return 0.0;
    double s = 0.0;
    for (int i = begin; i < end; ++i) s += per_iteration[i].total;
    return s / (end - begin);
}

std::string LossHistory::to_csv() const {
    std::ostringstream os;
    os << "iteration,total,recon,j_term,a_term\n";
    for (std::size_t i = 0; i < per_iteration.size(); ++i) {
        const auto& l = per_iteration[i];
        os << (i + 1) << ',' << fmt(l.total) << ',' << fmt(l.recon) << ',' << fmt(l.j_term) << ',' << fmt(l.a_term)
           << '\n';
    }
    return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// training

ModelGeometry geometry_for(std::span<const PairedSample> data) {
    if (data.empty()) throw std::invalid_argument("dataset is empty");
    ModelGeometry g;
    g.content = data.front().target.size();
    g.capture = data.front().captured.size();
    for (const auto& s : data) {
        if (!(s.target.size() == g.content) || !(s.captured.size() == g.capture)) {
            throw DimensionMismatch("dataset: all pairs must share target and capture resolutions");
        }
    }
    return g;
}

LossBreakdown loss_and_gradient(const NeuralSte& net, const ModelParameters& params,
                                std::span<const PairedSample* const> batch, const LossWeights& weights,
                                nn::GradSet& grads) {
    grads = params.params.zeros_like();
    LossBreakdown sum;
    SampleCache cache;
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const PairedSample* s : batch) {
        const auto lb = sample_step(net, params, to_pair(*s), weights, scale, grads, cache);
        sum.total += lb.total * scale;
        sum.recon += lb.recon * scale;
        sum.j_term += lb.j_term * scale;
        sum.a_term += lb.a_term * scale;
    }
    return sum;
}

TrainState train(std::span<const PairedSample> dataset, const TrainConfig& config, const TrainOptions& options) {
    const ModelGeometry geometry = geometry_for(dataset);
    const NeuralSte net(config.variant, geometry);

    TrainState state;
    state.params = options.initial ? *options.initial : net.init(config.seed);
    net.check(state.params);
    state.optimizer = Adam(state.params.params, {config.lr, 0.9, 0.999, 1e-8, config.weight_decay});

    std::vector<TensorPair> tensors;
    tensors.reserve(dataset.size());
    for (const auto& s : dataset) tensors.push_back(to_pair(s));

    const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), dataset.size());
    std::mt19937_64 shuffle_rng(config.seed ^ 0xD1B54A32D192ED03ULL);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::size_t cursor = 0;

    std::filesystem::path ckpt_dir;
    std::string last_good;
    if (options.run_dir) {
        ckpt_dir = *options.run_dir / "checkpoints";
        std::filesystem::create_directories(ckpt_dir);
    }
    const std::string config_hash = config.hash();

    nn::GradSet grads = state.params.params.zeros_like();
    SampleCache cache;
    const double scale = 1.0 / static_cast<double>(batch);
    for (int it = 1; it <= config.iterations; ++it) {
        for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0f);
        LossBreakdown lb;
        for (std::size_t b = 0; b < batch; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), shuffle_rng);
                cursor = 0;
            }
            const auto idx = order[cursor++];
            LossBreakdown s;
            try {
                s = sample_step(net, state.params, tensors[idx], config.loss_weights, scale, grads, cache);
            } catch (const NonFiniteError& e) {
                throw TrainingDiverged(std::string("training diverged: ") + e.what() + " at iteration " +
                                           std::to_string(it),
                                       it, last_good);
            }
            if (options.on_sample) options.on_sample(it, cache);
            lb.total += s.total * scale;
            lb.recon += s.recon * scale;
            lb.j_term += s.j_term * scale;
            lb.a_term += s.a_term * scale;
        }
        if (!std::isfinite(lb.total) || !grads_finite(grads)) {
            throw TrainingDiverged("training diverged: non-finite loss at iteration " + std::to_string(it), it,
                                   last_good);
        }
        state.optimizer.step(state.params.params, grads);
        if (!state.params.params.all_finite()) {
            throw TrainingDiverged("training diverged: non-finite weights at iteration " + std::to_string(it), it,
                                   last_good);
        }
        state.iteration = it;
        state.loss_history.per_iteration.push_back(lb);
        if (options.on_iteration) options.on_iteration(it, lb);

        if (options.run_dir && (it % config.checkpoint_interval == 0 || it == config.iterations)) {
            char name[64];
            std::snprintf(name, sizeof name, "iter_%06d.ckpt", it);
            const auto path = ckpt_dir / name;
            save_checkpoint(path, {state.params, state.optimizer, it, config_hash});
            last_good = path.string();
            write_text(*options.run_dir / "loss.csv", state.loss_history.to_csv());
        }
    }
    if (options.run_dir) {
        save_checkpoint(*options.run_dir / "final.ckpt", {state.params, state.optimizer, state.iteration, config_hash});
        write_text(*options.run_dir / "loss.csv", state.loss_history.to_csv());
    }
    return state;
}

// ---------------------------------------------------------------------------
// evaluation

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json images = nlohmann::json::array();
    for (const auto& r : rows) {
        images.push_back({{"id", r.id}, {"model", triple_json(r.model)}, {"baseline", triple_json(r.baseline)}});
    }
    return {{"variant", variant},
            {"metadata", metadata},
            {"images", images},
            {"mean", triple_json(mean_model)},
            {"baseline_mean", triple_json(mean_baseline)}};
}

std::string MetricsReport::to_csv() const {
    std::ostringstream os;
    os << "id,psnr,rmse,ssim,baseline_psnr,baseline_rmse,baseline_ssim\n";
    auto line = [&](const std::string& id, const MetricsTriple& m, const MetricsTriple& b) {
        os << id << ',' << fmt(m.psnr) << ',' << fmt(m.rmse) << ',' << fmt(m.ssim) << ',' << fmt(b.psnr) << ','
           << fmt(b.rmse) << ',' << fmt(b.ssim) << '\n';
    };
    for (const auto& r : rows) line(r.id, r.model, r.baseline);
    line("mean", mean_model, mean_baseline);
    return os.str();
}

MetricsReport evaluate_predictions(std::span<const std::string> ids, std::span<const ImagePlane> predictions,
                                   std::span<const ImagePlane> baselines, std::span<const ImagePlane> targets) {
    if (targets.empty()) throw std::invalid_argument("evaluate: empty test set");
    if (predictions.size() != targets.size() || baselines.size() != targets.size() || ids.size() != targets.size()) {
        throw DimensionMismatch("evaluate: predictions, baselines and targets must have equal counts");
    }
    MetricsReport rep;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        ImageMetrics m{ids[i], compute_metrics(predictions[i], targets[i]), compute_metrics(baselines[i], targets[i])};
        rep.mean_model.psnr += m.model.psnr;
        rep.mean_model.rmse += m.model.rmse;
        rep.mean_model.ssim += m.model.ssim;
        rep.mean_baseline.psnr += m.baseline.psnr;
        rep.mean_baseline.rmse += m.baseline.rmse;
        rep.mean_baseline.ssim += m.baseline.ssim;
        rep.rows.push_back(std::move(m));
    }
    const double n = static_cast<double>(targets.size());
    for (auto* t : {&rep.mean_model, &rep.mean_baseline}) {
        t->psnr /= n;
        t->rmse /= n;
        t->ssim /= n;
    }
    return rep;
}

MetricsReport evaluate(const ModelParameters& params, ModelVariant variant, std::span<const PairedSample> test_set) {
    if (test_set.empty()) throw std::invalid_argument("evaluate: empty test set");
    if (params.variant != variant) {
        throw VariantMismatch("evaluate: parameters are for '" + to_string(params.variant) + "'");
    }
    const NeuralSte net(variant, params.geometry);
    net.check(params);
    std::vector<std::string> ids;
    std::vector<ImagePlane> preds, bases, targets;
    SampleCache cache;
    for (const auto& s : test_set) {
        if (!(s.target.size() == params.geometry.content)) {
            throw DimensionMismatch("evaluate: test target resolution does not match the checkpoint's content size");
        }
        net.forward(params, to_tensor(s.captured), cache);
        auto tr = net.to_trace(cache);
        ids.push_back(s.id);
        preds.push_back(std::move(tr.J_hat));
        bases.push_back(std::move(tr.warped_input));
        targets.push_back(s.target);
    }
    auto rep = evaluate_predictions(ids, preds, bases, targets);
    rep.variant = to_string(variant);
    return rep;
}

}  // namespace nste
