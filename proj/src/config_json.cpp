#include "ctrkit/config_json.hpp"

#include "json.hpp"

namespace ctrkit {

using nlohmann::json;

namespace {

const char* const kKnownKeys[] = {
    "batch_size", "learning_rate", "max_epochs", "patience", "seed", "threads",
    "sce_enabled", "sce_balancing_epochs", "sce_steps", "sce_lr", "sce_max_pairs", "sce_gamma",
    "embed_dim", "d_out", "chunks", "depth_deep", "depth_shallow", "stream_deep", "stream_shallow",
    "sa_heads", "mlp_deep", "mlp_shallow",
    "min_freq", "val_fraction",  // CLI-level keys, ignored here
};

json parse(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config: invalid JSON");
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool known = false;
        for (const char* k : kKnownKeys)
            if (key == k) known = true;
        if (!known) throw ConfigError("config: unknown key '" + key + "'");
    }
    return j;
}

}  // namespace

std::string train_config_to_json(const TrainConfig& cfg) {
    json j;
    j["batch_size"] = cfg.batch_size;
    j["learning_rate"] = cfg.learning_rate;
    j["max_epochs"] = cfg.max_epochs;
    j["patience"] = cfg.patience;
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    j["sce_enabled"] = cfg.sce_enabled;
    j["sce_balancing_epochs"] = cfg.sce.balancing_epochs;
    j["sce_steps"] = cfg.sce.steps;
    j["sce_lr"] = cfg.sce.lr;
    j["sce_max_pairs"] = cfg.sce.max_pairs;
    j["sce_gamma"] = cfg.sce.gamma;
    j["embed_dim"] = cfg.model.embed_dim;
    j["d_out"] = cfg.model.d_out;
    j["chunks"] = cfg.model.chunks;
    j["depth_deep"] = cfg.model.depth_deep;
    j["depth_shallow"] = cfg.model.depth_shallow;
    j["stream_deep"] = stream_kind_name(cfg.model.deep_kind);
    j["stream_shallow"] = stream_kind_name(cfg.model.shallow_kind);
    j["sa_heads"] = cfg.model.sa_heads;
    j["mlp_deep"] = cfg.model.mlp_deep;
    j["mlp_shallow"] = cfg.model.mlp_shallow;
    return j.dump();
}

void apply_json_overrides(TrainConfig& cfg, const std::string& json_text) {
    const json j = parse(json_text);
    auto get = [&j](const char* key, auto& dst) {
        if (j.contains(key)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
    };
    get("batch_size", cfg.batch_size);
    get("learning_rate", cfg.learning_rate);
    get("max_epochs", cfg.max_epochs);
    get("patience", cfg.patience);
    get("seed", cfg.seed);
    get("threads", cfg.threads);
    get("sce_enabled", cfg.sce_enabled);
    get("sce_balancing_epochs", cfg.sce.balancing_epochs);
    get("sce_steps", cfg.sce.steps);
    get("sce_lr", cfg.sce.lr);
    get("sce_max_pairs", cfg.sce.max_pairs);
    get("sce_gamma", cfg.sce.gamma);
    get("embed_dim", cfg.model.embed_dim);
    get("d_out", cfg.model.d_out);
    get("chunks", cfg.model.chunks);
    get("depth_deep", cfg.model.depth_deep);
    get("depth_shallow", cfg.model.depth_shallow);
    get("sa_heads", cfg.model.sa_heads);
    get("mlp_deep", cfg.model.mlp_deep);
    get("mlp_shallow", cfg.model.mlp_shallow);
    if (j.contains("stream_deep")) cfg.model.deep_kind = parse_stream_kind(j.at("stream_deep").get<std::string>());
    if (j.contains("stream_shallow"))
        cfg.model.shallow_kind = parse_stream_kind(j.at("stream_shallow").get<std::string>());
}

TrainConfig train_config_from_json(const std::string& json_text) {
    TrainConfig cfg;
    apply_json_overrides(cfg, json_text);
    return cfg;
}

double json_get_double(const std::string& json_text, const std::string& key, double fallback) {
    const json j = parse(json_text);
    return j.contains(key) ? j.at(key).get<double>() : fallback;
}

std::size_t json_get_size(const std::string& json_text, const std::string& key, std::size_t fallback) {
    const json j = parse(json_text);
    return j.contains(key) ? j.at(key).get<std::size_t>() : fallback;
}

}  // namespace ctrkit
