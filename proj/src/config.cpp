#include "interp3d/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "interp3d/metrics.hpp"

namespace interp3d {

using ordered_json = nlohmann::ordered_json;

namespace {

bool is_pow2(int v) { return v >= 1 && (v & (v - 1)) == 0; }

void reject_unknown_keys(const ordered_json& obj, const std::set<std::string>& known,
                         const std::string& origin, std::vector<std::string>& errors) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (known.find(it.key()) == known.end()) {
            errors.push_back(origin + ": unknown field '" + it.key() + "'");
        }
    }
}

ConditionInput descriptor_from_json(const ordered_json& obj, const std::string& origin,
                                    std::vector<std::string>& errors) {
    ConditionInput input;
    if (!obj.is_object()) {
        errors.push_back(origin + ": descriptor must be an object");
        return input;
    }
    reject_unknown_keys(obj, {"seed", "shape_class", "palette"}, origin, errors);
    if (obj.contains("seed")) input.seed = obj["seed"].get<uint64_t>();
    if (obj.contains("shape_class")) input.shape_class = obj["shape_class"].get<std::string>();
    if (obj.contains("palette")) {
        const auto& p = obj["palette"];
        if (!p.is_array() || p.size() != 3) {
            errors.push_back(origin + ": palette must be an array of 3 numbers");
        } else {
            for (int i = 0; i < 3; ++i) input.palette[static_cast<size_t>(i)] = p[static_cast<size_t>(i)].get<float>();
        }
    }
    return input;
}

ordered_json descriptor_to_ordered_json(const ConditionInput& input) {
    ordered_json obj;
    obj["seed"] = input.seed;
    obj["shape_class"] = input.shape_class;
    obj["palette"] = {input.palette[0], input.palette[1], input.palette[2]};
    return obj;
}

static const std::set<std::string> kConfigKeys = {
    "run_id",        "seed",          "source",          "target",
    "frames",        "beta",          "steps",           "grid_resolution",
    "slat_channels", "condition_tokens", "condition_channels", "model_width",
    "blocks",        "s_max",         "tau0",            "stage1_hook",
    "stage2_hook",   "semantic_align", "capture_kv_caches", "hook_layers",
    "views",         "image_size",    "extractor",
    "output_dir",    "cache_spill_dir", "cache_spill_limit_bytes"};

}  // namespace

void MorphConfig::validate() const {
    std::vector<std::string> errors;
    auto check = [&](bool ok, const std::string& msg) {
        if (!ok) errors.push_back(msg);
    };
    check(!run_id.empty() && run_id.find('/') == std::string::npos,
          "run_id: must be a non-empty name without '/'");
    check(frames >= 2, "frames: must be >= 2");
    check(beta > 0.0, "beta: must be positive");
    check(steps >= 1, "steps: must be >= 1");
    check(grid_resolution >= 4 && is_pow2(grid_resolution),
          "grid_resolution: must be a power of two >= 4");
    check(slat_channels >= 4, "slat_channels: must be >= 4");
    check(condition_tokens >= 1, "condition_tokens: must be >= 1");
    check(condition_channels >= 1, "condition_channels: must be >= 1");
    check(model_width >= 4, "model_width: must be >= 4");
    check(blocks >= 1, "blocks: must be >= 1");
    check(s_max >= 1 && is_pow2(s_max), "s_max: must be a power of two >= 1");
    check(tau0 >= -1.0f && tau0 <= 1.0f, "tau0: must be in [-1, 1]");
    check(stage1_hook != HookVariant::texture_fusion,
          "stage1_hook: texture_fusion applies to stage-2 only");
    check(stage2_hook != HookVariant::fused_structure,
          "stage2_hook: fused_structure applies to stage-1 only");
    if (!capture_kv_caches &&
        (stage1_hook != HookVariant::none || stage2_hook != HookVariant::none)) {
        errors.push_back(
            "capture_kv_caches: hooked morphing requires captured source/target K/V caches; "
            "enable capture_kv_caches or set both hooks to none");
    }
    for (int layer : hook_layers) {
        check(layer >= 0 && layer < blocks, "hook_layers: layer index out of range");
    }
    check(workers >= 1, "workers: must be >= 1");
    check(views >= 1, "views: must be >= 1");
    check(image_size >= 8, "image_size: must be >= 8");
    try {
        parse_extractor(extractor, seed);
    } catch (const Error& e) {
        errors.push_back(std::string("extractor: ") + e.what());
    }
    if (!errors.empty()) {
        std::string joined = "invalid config (" + std::to_string(errors.size()) + " problems):";
        for (const auto& e : errors) joined += "\n  - " + e;
        throw ConfigError(joined);
    }
}

MorphConfig parse_config_json(const std::string& json_text, const std::string& origin) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigError(origin + ": JSON parse error: " + e.what());
    }
    // A run manifest embeds the resolved config; accept it directly.
    if (doc.is_object() && doc.contains("tool_version") && doc.contains("config")) {
        doc = doc["config"];
    }
    if (!doc.is_object()) throw ConfigError(origin + ": config must be a JSON object");

    std::vector<std::string> errors;
    reject_unknown_keys(doc, kConfigKeys, origin, errors);

    MorphConfig cfg;
    try {
        auto get_descriptor = [&](const char* key, ConditionInput& out) {
            if (!doc.contains(key)) return;
            const auto& node = doc[key];
            if (node.is_string()) {
                out = load_descriptor(node.get<std::string>());
            } else {
                out = descriptor_from_json(node, std::string(origin) + "." + key, errors);
            }
        };
        if (doc.contains("run_id")) cfg.run_id = doc["run_id"].get<std::string>();
        if (doc.contains("seed")) cfg.seed = doc["seed"].get<uint64_t>();
        get_descriptor("source", cfg.source);
        get_descriptor("target", cfg.target);
        if (doc.contains("frames")) cfg.frames = doc["frames"].get<int>();
        if (doc.contains("beta")) cfg.beta = doc["beta"].get<double>();
        if (doc.contains("steps")) cfg.steps = doc["steps"].get<int>();
        if (doc.contains("grid_resolution")) cfg.grid_resolution = doc["grid_resolution"].get<int>();
        if (doc.contains("slat_channels")) cfg.slat_channels = doc["slat_channels"].get<int>();
        if (doc.contains("condition_tokens")) cfg.condition_tokens = doc["condition_tokens"].get<int>();
        if (doc.contains("condition_channels"))
            cfg.condition_channels = doc["condition_channels"].get<int>();
        if (doc.contains("model_width")) cfg.model_width = doc["model_width"].get<int>();
        if (doc.contains("blocks")) cfg.blocks = doc["blocks"].get<int>();
        if (doc.contains("s_max")) cfg.s_max = doc["s_max"].get<int>();
        if (doc.contains("tau0")) cfg.tau0 = doc["tau0"].get<float>();
        if (doc.contains("stage1_hook"))
            cfg.stage1_hook = parse_hook_variant(doc["stage1_hook"].get<std::string>());
        if (doc.contains("stage2_hook"))
            cfg.stage2_hook = parse_hook_variant(doc["stage2_hook"].get<std::string>());
        if (doc.contains("semantic_align")) cfg.semantic_align = doc["semantic_align"].get<bool>();
        if (doc.contains("capture_kv_caches"))
            cfg.capture_kv_caches = doc["capture_kv_caches"].get<bool>();
        if (doc.contains("hook_layers"))
            cfg.hook_layers = doc["hook_layers"].get<std::vector<int>>();
        if (doc.contains("views")) cfg.views = doc["views"].get<int>();
        if (doc.contains("image_size")) cfg.image_size = doc["image_size"].get<int>();
        if (doc.contains("extractor")) cfg.extractor = doc["extractor"].get<std::string>();
        if (doc.contains("output_dir")) cfg.output_dir = doc["output_dir"].get<std::string>();
        if (doc.contains("cache_spill_dir"))
            cfg.cache_spill_dir = doc["cache_spill_dir"].get<std::string>();
        if (doc.contains("cache_spill_limit_bytes"))
            cfg.cache_spill_limit_bytes = doc["cache_spill_limit_bytes"].get<uint64_t>();
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(origin + ": bad field value: " + e.what());
    }
    if (!errors.empty()) {
        std::string joined = origin + ": invalid config (" + std::to_string(errors.size()) +
                             " problems):";
        for (const auto& e : errors) joined += "\n  - " + e;
        throw ConfigError(joined);
    }
    return cfg;
}

MorphConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_json(buffer.str(), path);
}

std::string config_to_json(const MorphConfig& c) {
    ordered_json doc;
    doc["run_id"] = c.run_id;
    doc["seed"] = c.seed;
    doc["source"] = descriptor_to_ordered_json(c.source);
    doc["target"] = descriptor_to_ordered_json(c.target);
    doc["frames"] = c.frames;
    doc["beta"] = c.beta;
    doc["steps"] = c.steps;
    doc["grid_resolution"] = c.grid_resolution;
    doc["slat_channels"] = c.slat_channels;
    doc["condition_tokens"] = c.condition_tokens;
    doc["condition_channels"] = c.condition_channels;
    doc["model_width"] = c.model_width;
    doc["blocks"] = c.blocks;
    doc["s_max"] = c.s_max;
    doc["tau0"] = c.tau0;
    doc["stage1_hook"] = hook_variant_name(c.stage1_hook);
    doc["stage2_hook"] = hook_variant_name(c.stage2_hook);
    doc["semantic_align"] = c.semantic_align;
    doc["capture_kv_caches"] = c.capture_kv_caches;
    doc["hook_layers"] = c.hook_layers;
    doc["views"] = c.views;
    doc["image_size"] = c.image_size;
    doc["extractor"] = c.extractor;
    doc["output_dir"] = c.output_dir;
    doc["cache_spill_dir"] = c.cache_spill_dir;
    doc["cache_spill_limit_bytes"] = c.cache_spill_limit_bytes;
    return doc.dump(2);
}

void apply_env_overrides(MorphConfig& config) {
    const char* env_seed = std::getenv("INTERP3D_SEED");
    if (env_seed == nullptr || *env_seed == '\0') return;
    try {
        size_t pos = 0;
        const unsigned long long v = std::stoull(env_seed, &pos);
        if (pos != std::string(env_seed).size()) throw std::invalid_argument("trailing chars");
        config.seed = static_cast<uint64_t>(v);
    } catch (const std::exception&) {
        throw ConfigError(std::string("INTERP3D_SEED: not a valid unsigned integer: '") +
                          env_seed + "'");
    }
}

ConditionInput parse_descriptor_json(const std::string& json_text, const std::string& origin) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigError(origin + ": JSON parse error: " + e.what());
    }
    std::vector<std::string> errors;
    ConditionInput input = descriptor_from_json(doc, origin, errors);
    if (!errors.empty()) {
        std::string joined = origin + ": invalid descriptor:";
        for (const auto& e : errors) joined += "\n  - " + e;
        throw ConfigError(joined);
    }
    return input;
}

ConditionInput load_descriptor(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open descriptor file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_descriptor_json(buffer.str(), path);
}

std::string descriptor_to_json(const ConditionInput& input) {
    return descriptor_to_ordered_json(input).dump(2);
}

}  // namespace interp3d
