#include "cellseg/cli/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <vector>

namespace cellseg::cli {

using nlohmann::json;

namespace {

/// Walks a config object, recording which keys were consumed.
class Reader {
 public:
  Reader(const json& node, std::string prefix, std::vector<std::string>& unknown)
      : node_(node), prefix_(std::move(prefix)), unknown_(unknown) {
    if (!node_.is_object()) throw ValidationError("config: '" + where() + "' must be an object");
  }

  ~Reader() = default;

  template <typename T>
  void get(const char* key, T& target) {
    seen_.insert(key);
    if (!node_.contains(key)) return;
    try {
      target = node_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ValidationError("config: '" + path(key) + "' has the wrong type");
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& target) {
    seen_.insert(key);
    if (!node_.contains(key)) return;
    T value{};
    get(key, value);
    target = value;
  }

  bool has(const char* key) const { return node_.contains(key); }

  Reader child(const char* key) {
    seen_.insert(key);
    return Reader(node_.at(key), path(key), unknown_);
  }

  void finish() {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.contains(key)) unknown_.push_back(path(key));
    }
  }

 private:
  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }
  std::string where() const { return prefix_.empty() ? "<root>" : prefix_; }

  const json& node_;
  std::string prefix_;
  std::vector<std::string>& unknown_;
  std::set<std::string> seen_;
};

std::pair<double, double> read_range(const std::vector<double>& v, const char* name) {
  if (v.size() != 2) throw ValidationError(std::string("config: ") + name + " must be [lo, hi]");
  return {v[0], v[1]};
}

}  // namespace

void PipelineConfig::validate() const {
  if (k < 1) throw ValidationError("k must be >= 1");
  if (threads < 1) throw ValidationError("threads must be >= 1");
  if (augment_count < 0) throw ValidationError("augment count must be >= 0");
  w3.validate();
  augment.validate();
  decode.watershed.validate();
  if (decode.threshold) decode.threshold->validate();
  if (decode.min_instance_area < 0) throw ValidationError("min_area must be >= 0");
}

json PipelineConfig::to_json() const {
  json decode_json = {{"strategy", to_string(decode.strategy)},
                      {"tau0", decode.watershed.tau0},
                      {"tau1", decode.watershed.tau1},
                      {"min_area", decode.min_instance_area}};
  if (decode.threshold) {
    decode_json["gamma1"] = decode.threshold->gamma1;
    decode_json["gamma2"] = decode.threshold->gamma2;
  }
  return {
      {"k", k},
      {"seed", seed},
      {"threads", threads},
      {"w3", {{"beta", w3.beta}, {"nu", w3.nu}, {"sigma", w3.sigma}}},
      {"augment",
       {{"mirror", augment.mirror},
        {"rotate", augment.rotate},
        {"warp", augment.warp},
        {"gamma", augment.gamma},
        {"touching", augment.touching},
        {"a_range", {augment.a_min, augment.a_max}},
        {"gamma_range", {augment.gamma_min, augment.gamma_max}},
        {"rotations", augment.rotations},
        {"warp_amplitude", augment.warp_amplitude},
        {"warp_cell", augment.warp_cell},
        {"median_window", augment.median_window},
        {"recompute_weights", augment.recompute_weights},
        {"count", augment_count}}},
      {"decode", decode_json},
      {"io", {{"data", data_dir}, {"out", out_dir}}},
  };
}

PipelineConfig config_from_json(const json& tree) {
  PipelineConfig cfg;
  std::vector<std::string> unknown;
  {
    Reader root(tree, "", unknown);
    root.get("k", cfg.k);
    root.get("seed", cfg.seed);
    root.get("threads", cfg.threads);
    if (root.has("w3")) {
      Reader w3 = root.child("w3");
      w3.get("beta", cfg.w3.beta);
      w3.get("nu", cfg.w3.nu);
      w3.get("sigma", cfg.w3.sigma);
      w3.finish();
    }
    if (root.has("augment")) {
      Reader a = root.child("augment");
      a.get("mirror", cfg.augment.mirror);
      a.get("rotate", cfg.augment.rotate);
      a.get("warp", cfg.augment.warp);
      a.get("gamma", cfg.augment.gamma);
      a.get("touching", cfg.augment.touching);
      std::optional<std::vector<double>> a_range, gamma_range;
      a.get_optional("a_range", a_range);
      a.get_optional("gamma_range", gamma_range);
      if (a_range) std::tie(cfg.augment.a_min, cfg.augment.a_max) = read_range(*a_range, "augment.a_range");
      if (gamma_range) {
        std::tie(cfg.augment.gamma_min, cfg.augment.gamma_max) =
            read_range(*gamma_range, "augment.gamma_range");
      }
      a.get("rotations", cfg.augment.rotations);
      a.get("warp_amplitude", cfg.augment.warp_amplitude);
      a.get("warp_cell", cfg.augment.warp_cell);
      a.get("median_window", cfg.augment.median_window);
      a.get("recompute_weights", cfg.augment.recompute_weights);
      a.get("count", cfg.augment_count);
      a.finish();
    }
    if (root.has("decode")) {
      Reader d = root.child("decode");
      std::string strategy = to_string(cfg.decode.strategy);
      d.get("strategy", strategy);
      cfg.decode.strategy = parse_strategy(strategy);
      std::optional<double> gamma1, gamma2;
      d.get_optional("gamma1", gamma1);
      d.get_optional("gamma2", gamma2);
      if (gamma1.has_value() != gamma2.has_value()) {
        throw ValidationError("config: decode.gamma1 and decode.gamma2 must be given together");
      }
      if (gamma1) cfg.decode.threshold = ThresholdParams{*gamma1, *gamma2};
      d.get("tau0", cfg.decode.watershed.tau0);
      d.get("tau1", cfg.decode.watershed.tau1);
      d.get("min_area", cfg.decode.min_instance_area);
      d.finish();
    }
    if (root.has("io")) {
      Reader io = root.child("io");
      io.get("data", cfg.data_dir);
      io.get("out", cfg.out_dir);
      io.finish();
    }
    root.finish();
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& key : unknown) list += (list.empty() ? "" : ", ") + key;
    throw ValidationError("config: unknown key(s): " + list);
  }
  cfg.seed_explicit = tree.contains("seed");
  cfg.augment.seed = cfg.seed;
  cfg.augment.k = cfg.k;
  cfg.augment.w3 = cfg.w3;
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw FileNotFoundError(path.string());
  std::ifstream in(path);
  json tree;
  try {
    tree = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(tree);
}

std::optional<std::uint64_t> seed_from_environment() {
  const char* value = std::getenv("W3_SEED");
  if (value == nullptr || *value == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const auto seed = std::stoull(value, &used);
    if (used != std::string(value).size()) throw std::invalid_argument("trailing characters");
    return seed;
  } catch (const std::exception&) {
    throw ValidationError(std::string("W3_SEED is not an unsigned integer: ") + value);
  }
}

}  // namespace cellseg::cli
