#include "nste/checkpoint.hpp"

#include "nste/errors.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace nste {

namespace {

constexpr char kMagic[] = "NSTECKPT1\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

void write_floats(std::ofstream& out, const std::vector<float>& v) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void read_floats(std::ifstream& in, std::vector<float>& v, std::size_t n) {
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw std::runtime_error("checkpoint: truncated payload");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    using nlohmann::json;
    const auto& mp = ckpt.params;
    json header;
    header["schema_version"] = mp.schema_version;
    header["variant"] = to_string(mp.variant);
    header["geometry"] = {{"content", {mp.geometry.content.width, mp.geometry.content.height}},
                          {"capture", {mp.geometry.capture.width, mp.geometry.capture.height}},
                          {"regress_downsample", mp.geometry.regress_downsample}};
    header["iteration"] = ckpt.iteration;
    header["config_hash"] = ckpt.config_hash;
    json table = json::array();
    for (const auto& t : mp.params.tensors) table.push_back({{"name", t.name}, {"shape", t.shape}});
    header["tensors"] = table;
    if (ckpt.optimizer) {
        const auto& c = ckpt.optimizer->config();
        header["optimizer"] = {{"type", "adam"},   {"lr", c.lr},   {"beta1", c.beta1},
                               {"beta2", c.beta2}, {"eps", c.eps}, {"weight_decay", c.weight_decay},
                               {"steps", ckpt.optimizer->steps()}};
    }
    const std::string text = header.dump();

    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("checkpoint: cannot write " + tmp.string());
        out.write(kMagic, kMagicLen);
        const std::uint64_t len = text.size();
        out.write(reinterpret_cast<const char*>(&len), sizeof(len));
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& t : mp.params.tensors) write_floats(out, t.values);
        if (ckpt.optimizer) {
            for (const auto& m : ckpt.optimizer->first_moment()) write_floats(out, m);
            for (const auto& v : ckpt.optimizer->second_moment()) write_floats(out, v);
        }
        if (!out) throw std::runtime_error("checkpoint: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<ModelVariant> expected_variant) {
    using nlohmann::json;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
    std::string magic(kMagicLen, '\0');
    in.read(magic.data(), static_cast<std::streamsize>(kMagicLen));
    if (magic != kMagic) throw std::runtime_error("checkpoint: bad magic in " + path.string());
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || len > (1u << 26)) throw std::runtime_error("checkpoint: bad header length");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    const json header = json::parse(text);

    Checkpoint ck;
    auto& mp = ck.params;
    mp.schema_version = header.at("schema_version").get<int>();
    if (mp.schema_version != kModelSchemaVersion) {
        throw VariantMismatch("checkpoint: unsupported schema_version " + std::to_string(mp.schema_version));
    }
    mp.variant = variant_from_string(header.at("variant").get<std::string>());
    if (expected_variant && *expected_variant != mp.variant) {
        throw VariantMismatch("checkpoint variant '" + to_string(mp.variant) + "' does not match requested '" +
                              to_string(*expected_variant) + "'");
    }
    const auto& g = header.at("geometry");
    mp.geometry.content = {g.at("content")[0].get<int>(), g.at("content")[1].get<int>()};
    mp.geometry.capture = {g.at("capture")[0].get<int>(), g.at("capture")[1].get<int>()};
    mp.geometry.regress_downsample = g.at("regress_downsample").get<int>();
    ck.iteration = header.at("iteration").get<std::int64_t>();
    ck.config_hash = header.at("config_hash").get<std::string>();

    for (const auto& entry : header.at("tensors")) {
        nn::ParamTensor t;
        t.name = entry.at("name").get<std::string>();
        t.shape = entry.at("shape").get<std::vector<int>>();
        std::size_t n = 1;
        for (int d : t.shape) n *= static_cast<std::size_t>(d);
        read_floats(in, t.values, n);
        mp.params.tensors.push_back(std::move(t));
    }
    NeuralSte(mp.variant, mp.geometry).check(mp);

    if (header.contains("optimizer")) {
        const auto& o = header.at("optimizer");
        AdamConfig cfg{o.at("lr").get<double>(), o.at("beta1").get<double>(), o.at("beta2").get<double>(),
                       o.at("eps").get<double>(), o.at("weight_decay").get<double>()};
        Adam adam(mp.params, cfg);
        std::vector<std::vector<float>> m(mp.params.tensors.size()), v(mp.params.tensors.size());
        for (std::size_t i = 0; i < m.size(); ++i) read_floats(in, m[i], mp.params.tensors[i].values.size());
        for (std::size_t i = 0; i < v.size(); ++i) read_floats(in, v[i], mp.params.tensors[i].values.size());
        adam.restore(std::move(m), std::move(v), o.at("steps").get<std::int64_t>());
        ck.optimizer = std::move(adam);
    }
    return ck;
}

}  // namespace nste
