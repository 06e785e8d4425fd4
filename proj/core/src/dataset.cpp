#include "nste/dataset.hpp"

#include "nste/errors.hpp"
#include "nste/hashing.hpp"
#include "nste/image_io.hpp"
#include "nste/imaging.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace nste {

namespace fs = std::filesystem;

namespace {

std::string pair_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d", index);
    return buf;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const fs::path& p) {
    try {
        return nlohmann::json::parse(read_file(p));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(p.string() + ": " + e.what());
    }
}

std::string image_hash(const ImagePlane& img) {
    std::string bytes;
    bytes.reserve(img.numel());
    for (double v : img.data()) bytes.push_back(static_cast<char>(to_byte(v)));
    return sha256_hex(bytes);
}

}  // namespace

std::string to_string(Resolution r) { return r == Resolution::desk ? "desk" : "paper"; }

Resolution resolution_from_string(const std::string& s) {
    if (s == "desk") return Resolution::desk;
    if (s == "paper") return Resolution::paper;
    throw ConfigError("unknown resolution '" + s + "' (expected desk or paper)");
}

Size content_size(Resolution r) { return r == Resolution::desk ? Size{64, 64} : Size{256, 256}; }
Size capture_size(Resolution r) { return r == Resolution::desk ? Size{160, 120} : Size{320, 240}; }

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"easy", "medium", "hard", "paper-safe", "identity"};
    return names;
}

EnvelopeConfig preset_envelope(const std::string& preset) {
    EnvelopeConfig e;
    e.gaussian_sigma = 0.01;
    e.poisson_scale = 2000.0;
    if (preset == "easy") {
        e.L = 1.0;
        e.kernel_size = 3;
        e.k_t = 0.8;
        e.k_A = 0.3;
    } else if (preset == "medium") {
        e.L = 0.9;
        e.kernel_size = 5;
        e.k_t = 0.5;
        e.k_A = 0.4;
    } else if (preset == "hard") {
        e.L = 0.7;
        e.kernel_size = 7;
        e.k_t = 0.3;
        e.k_A = 0.5;
    } else if (preset == "paper-safe") {
        e.L = 1.0;
        e.kernel_size = 17;
        e.k_t = 0.1;
        e.k_A = 1.0;
    } else if (preset == "identity") {
        e.L = 1.0;
        e.kernel_size = 1;
        e.k_t = 1.0;
        e.k_A = 0.0;
        e.gaussian_sigma = 0.0;
        e.poisson_scale = 0.0;
        e.texture = TextureKind::uniform;
    } else {
        throw ConfigError("unknown preset '" + preset + "'");
    }
    return e;
}

Homography base_pose(Size content, Size capture) {
    const double side = 0.8 * std::min(capture.width, capture.height);
    const double sx = side / content.width, sy = side / content.height;
    const double ox = 0.5 * (capture.width - side), oy = 0.5 * (capture.height - side);
    // pixel centers: x_cap + 0.5 = ox + sx * (x + 0.5)
    return Homography::translation(ox + 0.5 * sx - 0.5, oy + 0.5 * sy - 0.5).compose(Homography::scaling(sx, sy));
}

// ---------------------------------------------------------------------------
// manifest

nlohmann::json DatasetManifest::to_json() const {
    return {{"setup_id", setup_id},
            {"preset", preset},
            {"envelope", envelope.to_json()},
            {"content", content.to_json()},
            {"content_seed", content_seed},
            {"capture", {{"width", capture.width}, {"height", capture.height}}},
            {"pair_count", pair_count},
            {"pose_jitter", pose_jitter},
            {"pair_seeds", pair_seeds},
            {"split", {{"train", train_indices}, {"test", test_indices}}}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& doc) {
    DatasetManifest m;
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "setup_id") m.setup_id = value.get<std::string>();
            else if (key == "preset") m.preset = value.get<std::string>();
            else if (key == "envelope") m.envelope = EnvelopeConfig::from_json(value);
            else if (key == "content") m.content = ContentSpec::from_json(value);
            else if (key == "content_seed") m.content_seed = value.get<std::uint64_t>();
            else if (key == "capture") m.capture = {value.at("width").get<int>(), value.at("height").get<int>()};
            else if (key == "pair_count") m.pair_count = value.get<int>();
            else if (key == "pose_jitter") m.pose_jitter = value.get<double>();
            else if (key == "pair_seeds") m.pair_seeds = value.get<std::vector<std::uint64_t>>();
            else if (key == "split") {
                m.train_indices = value.at("train").get<std::vector<int>>();
                m.test_indices = value.at("test").get<std::vector<int>>();
            } else {
                throw ConfigError("dataset manifest: unknown key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("dataset manifest: ") + e.what());
    }
    m.validate();
    return m;
}

void DatasetManifest::validate() const {
    if (pair_count < 1) throw ConfigError("dataset manifest: pair_count must be >= 1");
    if (static_cast<int>(pair_seeds.size()) != pair_count) {
        throw ConfigError("dataset manifest: pair_seeds must have pair_count entries");
    }
    if (capture.width < kMinImageSide || capture.height < kMinImageSide) {
        throw ConfigError("dataset manifest: capture resolution must be at least 8x8");
    }
    if (pose_jitter < 0.0 || pose_jitter > 0.25) throw ConfigError("dataset manifest: pose_jitter must be in [0, 0.25]");
    std::vector<int> all(train_indices);
    all.insert(all.end(), test_indices.begin(), test_indices.end());
    std::sort(all.begin(), all.end());
    std::vector<int> expect(static_cast<std::size_t>(pair_count));
    std::iota(expect.begin(), expect.end(), 0);
    if (all != expect) throw ConfigError("dataset manifest: train/test split must partition the pair indices");
    if (test_indices.empty()) throw ConfigError("dataset manifest: test split is empty");
    (void)envelope.realize(content.size);  // range checks
}

namespace {

DatasetManifest manifest_with(const EnvelopeConfig& optics, Size content, Size capture, const Homography& pose,
                              std::uint64_t seed, int pairs, const std::string& setup_id, double pose_jitter) {
    if (pairs < 2) throw ConfigError("dataset: at least 2 pairs are needed for a train/test split");
    DatasetManifest m;
    m.setup_id = setup_id;
    m.envelope = optics;
    m.content.size = content;
    m.capture = capture;
    m.pose_jitter = pose_jitter;
    const auto hp = pose.params();
    std::copy(hp.begin(), hp.end(), m.envelope.homography.begin());

    std::mt19937_64 rng(seed);
    m.content_seed = rng();
    m.envelope.seed = seed;
    m.pair_count = pairs;
    m.pair_seeds.resize(static_cast<std::size_t>(pairs));
    for (auto& s : m.pair_seeds) s = rng();
    std::vector<int> order(static_cast<std::size_t>(pairs));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const int n_test = std::max(1, pairs / 10);
    m.test_indices.assign(order.begin(), order.begin() + n_test);
    m.train_indices.assign(order.begin() + n_test, order.end());
    std::sort(m.test_indices.begin(), m.test_indices.end());
    std::sort(m.train_indices.begin(), m.train_indices.end());
    m.validate();
    return m;
}

}  // namespace

DatasetManifest make_manifest_for(const EnvelopeConfig& optics, Resolution res, std::uint64_t seed, int pairs,
                                  const std::string& setup_id, double pose_jitter) {
    const Size content = content_size(res), capture = capture_size(res);
    return manifest_with(optics, content, capture, base_pose(content, capture), seed, pairs, setup_id, pose_jitter);
}

DatasetManifest make_manifest(const std::string& preset, Resolution res, std::uint64_t seed, int pairs,
                              const std::string& setup_id) {
    const std::string id = setup_id.empty() ? preset : setup_id;
    DatasetManifest m;
    if (preset == "identity") {
        // Camera looks straight at the page: capture frame == content frame.
        m = manifest_with(preset_envelope(preset), content_size(res), content_size(res), Homography::identity(), seed,
                          pairs, id, 0.0);
    } else {
        m = make_manifest_for(preset_envelope(preset), res, seed, pairs, id);
    }
    m.preset = preset;
    return m;
}

// ---------------------------------------------------------------------------
// pairs

Homography pair_pose(const DatasetManifest& m, int index) {
    if (index < 0 || index >= m.pair_count) throw std::out_of_range("pair index out of range");
    const Homography base = Homography::from_params(m.envelope.homography);
    if (m.pose_jitter == 0.0) return base;
    const double w = m.content.size.width, h = m.content.size.height;
    const std::array<std::array<double, 2>, 4> src{{{-0.5, -0.5}, {w - 0.5, -0.5}, {w - 0.5, h - 0.5}, {-0.5, h - 0.5}}};
    std::mt19937_64 rng(m.pair_seeds[static_cast<std::size_t>(index)] ^ 0x5851F42D4C957F2DULL);
    std::uniform_real_distribution<double> u(-m.pose_jitter, m.pose_jitter);
    std::array<std::array<double, 2>, 4> dst{};
    for (int i = 0; i < 4; ++i) {
        const auto p = base.apply(src[i][0], src[i][1]);
        dst[i] = {p[0] + u(rng) * m.capture.width, p[1] + u(rng) * m.capture.height};
    }
    return Homography::from_correspondences(src, dst);
}

EnvelopeParams pair_envelope(const DatasetManifest& m, int index) {
    EnvelopeConfig cfg = m.envelope;
    const auto hp = pair_pose(m, index).params();
    std::copy(hp.begin(), hp.end(), cfg.homography.begin());
    cfg.seed = m.pair_seeds[static_cast<std::size_t>(index)];
    return cfg.realize(m.content.size);
}

PairedSample simulate_pair(const DatasetManifest& m, int index) {
    PairedSample s;
    s.id = pair_name(index);
    s.target = quantize_8bit(generate_content_image(m.content, content_seed(m.content_seed, static_cast<std::uint64_t>(index))));
    const EnvelopeParams env = pair_envelope(m, index);
    s.captured = quantize_8bit(simulate_capture(s.target, env, m.capture));
    s.pose = env.H;
    return s;
}

ImagePlane register_capture(const ImagePlane& captured, const Homography& pose, Size content) {
    return warp_image(captured, pose.inverse(), content);
}

// ---------------------------------------------------------------------------
// disk

fs::path build_dataset(const DatasetManifest& m, const fs::path& root) {
    m.validate();
    const fs::path final_dir = root / ("setup_" + m.setup_id);
    const fs::path tmp = root / ("setup_" + m.setup_id + ".partial");
    try {
        fs::create_directories(root);
        fs::remove_all(tmp);
        fs::create_directories(tmp / "gt");
        fs::create_directories(tmp / "cap");
        for (int i = 0; i < m.pair_count; ++i) {
            const PairedSample s = simulate_pair(m, i);
            write_png(tmp / "gt" / (s.id + ".png"), s.target);
            write_png(tmp / "cap" / (s.id + ".png"), s.captured);
        }
        write_text(tmp / "manifest.json", m.to_json().dump(2) + "\n");
        const nlohmann::json split{{"train", m.train_indices}, {"test", m.test_indices}};
        write_text(tmp / "split.json", split.dump(2) + "\n");
        fs::remove_all(final_dir);
        fs::rename(tmp, final_dir);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(tmp, ec);
        throw;
    }
    return final_dir;
}

LoadedDataset load_dataset(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("dataset directory not found: " + dir.string());
    LoadedDataset d;
    d.dir = dir;
    std::vector<int> train_idx, test_idx;
    if (fs::exists(dir / "manifest.json")) {
        d.manifest = DatasetManifest::from_json(read_json(dir / "manifest.json"));
        train_idx = d.manifest->train_indices;
        test_idx = d.manifest->test_indices;
    } else {
        if (!fs::exists(dir / "split.json")) {
            throw std::runtime_error(dir.string() + ": neither manifest.json nor split.json present");
        }
        const auto split = read_json(dir / "split.json");
        try {
            train_idx = split.at("train").get<std::vector<int>>();
            test_idx = split.at("test").get<std::vector<int>>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(dir.string() + "/split.json: " + e.what());
        }
    }
    auto load = [&](int i) {
        PairedSample s;
        s.id = pair_name(i);
        s.target = read_png(dir / "gt" / (s.id + ".png"));
        s.captured = read_png(dir / "cap" / (s.id + ".png"));
        if (d.manifest) s.pose = pair_pose(*d.manifest, i);
        return s;
    };
    for (int i : train_idx) d.train.push_back(load(i));
    for (int i : test_idx) d.test.push_back(load(i));
    if (d.test.empty()) throw std::runtime_error(dir.string() + ": empty test split");
    return d;
}

std::string dataset_hash(const fs::path& dir) {
    std::map<std::string, fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files.emplace(fs::relative(e.path(), dir).generic_string(), e.path());
    }
    std::string acc;
    for (const auto& [rel, path] : files) acc += rel + ":" + sha256_file(path) + "\n";
    return sha256_hex(acc);
}

int split_overlap(const LoadedDataset& data) {
    std::set<std::string> train;
    for (const auto& s : data.train) train.insert(image_hash(s.target));
    int n = 0;
    for (const auto& s : data.test) n += train.count(image_hash(s.target)) ? 1 : 0;
    return n;
}

}  // namespace nste
