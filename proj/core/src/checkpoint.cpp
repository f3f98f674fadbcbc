#include "crossview/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstring>
#include <fstream>

namespace crossview::model {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'C', 'V', 'C', 'K', 'P', 'T', '0', '1'};

json config_json(const GcvitConfig& cfg) {
    json j;
    j["chip_size"] = cfg.chip_size;
    j["patch_size"] = cfg.patch_size;
    j["stage_depths"] = cfg.stage_depths;
    j["stage_dims"] = cfg.stage_dims;
    j["window_sizes"] = cfg.window_sizes;
    j["num_heads"] = cfg.num_heads;
    j["mlp_ratio"] = cfg.mlp_ratio;
    j["focal_gamma"] = cfg.focal_gamma;
    j["alpha_mode"] = cfg.alpha_mode;
    return j;
}

GcvitConfig config_from(const json& j) {
    GcvitConfig cfg;
    cfg.chip_size = j.at("chip_size").get<int>();
    cfg.patch_size = j.at("patch_size").get<int>();
    cfg.stage_depths = j.at("stage_depths").get<std::array<int, 4>>();
    cfg.stage_dims = j.at("stage_dims").get<std::array<int, 4>>();
    cfg.window_sizes = j.at("window_sizes").get<std::array<int, 4>>();
    cfg.num_heads = j.at("num_heads").get<std::array<int, 4>>();
    cfg.mlp_ratio = j.at("mlp_ratio").get<int>();
    cfg.focal_gamma = j.at("focal_gamma").get<float>();
    cfg.alpha_mode = j.at("alpha_mode").get<std::string>();
    return cfg;
}

}  // namespace

std::string config_to_json(const GcvitConfig& cfg) { return config_json(cfg).dump(); }

GcvitConfig config_from_json(const std::string& json_text) {
    return config_from(json::parse(json_text));
}

void save_checkpoint(const std::string& path, const Cgcvit& model, long step,
                     const std::string& rng_state) {
    json header;
    header["config"] = config_json(model.config());
    header["step"] = step;
    header["rng_state"] = rng_state;
    json params = json::array();
    long offset = 0;
    for (const auto& p : model.parameters()) {
        json jp;
        jp["name"] = p.name;
        jp["shape"] = p.tensor->shape;
        jp["offset"] = offset;
        offset += p.tensor->numel();
        params.push_back(std::move(jp));
    }
    header["params"] = std::move(params);
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw nn::NnError("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    const uint64_t header_len = header_text.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& p : model.parameters())
        out.write(reinterpret_cast<const char*>(p.tensor->value.data()),
                  static_cast<std::streamsize>(p.tensor->value.size() * sizeof(float)));
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw nn::NnError("cannot read checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw nn::NnError("not a checkpoint file: " + path);
    uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    const json header = json::parse(header_text);

    LoadedCheckpoint result;
    result.step = header.at("step").get<long>();
    result.rng_state = header.at("rng_state").get<std::string>();
    result.model = std::make_unique<Cgcvit>(config_from(header.at("config")));

    auto& params = result.model->parameters();
    for (const auto& jp : header.at("params")) {
        const std::string name = jp.at("name").get<std::string>();
        auto it = std::find_if(params.begin(), params.end(),
                               [&](const NamedParam& p) { return p.name == name; });
        if (it == params.end())
            throw nn::NnError("checkpoint parameter has no model slot: " + name);
        const auto shape = jp.at("shape").get<nn::Shape>();
        if (shape != it->tensor->shape)
            throw nn::NnError("checkpoint shape mismatch for " + name);
        in.read(reinterpret_cast<char*>(it->tensor->value.data()),
                static_cast<std::streamsize>(it->tensor->value.size() * sizeof(float)));
        if (!in) throw nn::NnError("truncated checkpoint: " + path);
    }
    return result;
}

}  // namespace crossview::model
