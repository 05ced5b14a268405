#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ossl/cli.hpp"

namespace ossl::cli {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string join_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

// Typed access to one JSON object; errors carry the dotted field path.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return join_path(path_, key); }

  void reject_unknown(std::initializer_list<const char*> known) const {
    std::set<std::string> k(known.begin(), known.end());
    for (const auto& item : j_.items()) {
      if (!k.count(item.key())) throw ConfigError(field(item.key()), "unknown key");
    }
  }

  const json* find(const std::string& key) const {
    auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  const json& require(const std::string& key) const {
    const json* v = find(key);
    if (!v) throw ConfigError(field(key), "required key is missing");
    return *v;
  }

  std::string str(const std::string& key, std::optional<std::string> fallback = std::nullopt) const {
    const json* v = find(key);
    if (!v) {
      if (fallback) return *fallback;
      throw ConfigError(field(key), "required key is missing");
    }
    if (!v->is_string()) throw ConfigError(field(key), "expected a string");
    return v->get<std::string>();
  }

  std::uint64_t uint(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt) const {
    const json* v = find(key);
    if (!v) {
      if (fallback) return *fallback;
      throw ConfigError(field(key), "required key is missing");
    }
    if (!v->is_number_unsigned()) {
      if (v->is_number_integer()) throw ConfigError(field(key), "must not be negative");
      throw ConfigError(field(key), "expected a non-negative integer");
    }
    return v->get<std::uint64_t>();
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) const {
    const json* v = find(key);
    if (!v) {
      if (fallback) return *fallback;
      throw ConfigError(field(key), "required key is missing");
    }
    if (!v->is_number()) throw ConfigError(field(key), "expected a number");
    return v->get<double>();
  }

  bool boolean(const std::string& key, bool fallback) const {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw ConfigError(field(key), "expected true or false");
    return v->get<bool>();
  }

 private:
  const json& j_;
  std::string path_;
};

template <typename F>
auto wrap_value_error(const std::string& field, F f) -> decltype(f()) {
  try {
    return f();
  } catch (const ValueError& e) {
    throw ConfigError(field, e.what());
  } catch (const DimensionError& e) {
    throw ConfigError(field, e.what());
  }
}

fs::path existing_file(const Fields& f, const std::string& key, const fs::path& base_dir) {
  fs::path p = f.str(key);
  if (p.is_relative()) p = base_dir / p;
  p = p.lexically_normal();
  if (!fs::is_regular_file(p)) throw ConfigError(f.field(key), "file not found: " + p.string());
  return p;
}

InputSpec default_input(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::lenet5: return {1, 28, 28};
    case BackboneKind::densenet40: return {3, 32, 32};
    case BackboneKind::tiny_cnn: return {1, 8, 8};
  }
  return {};
}

ModelConfig parse_model(const json& j) {
  Fields f(j, "model");
  f.reject_unknown({"backbone", "num_classes", "init_seed", "head_hidden", "input"});
  ModelConfig m;
  m.backbone = wrap_value_error(f.field("backbone"), [&] { return parse_backbone_kind(f.str("backbone", "lenet5")); });
  m.num_classes = f.uint("num_classes", 10);
  if (m.num_classes < 2 || m.num_classes > 65535) throw ConfigError(f.field("num_classes"), "must be in [2, 65535]");
  m.init_seed = f.uint("init_seed", 0);
  if (f.find("head_hidden")) {
    m.head_hidden = f.uint("head_hidden");
    if (*m.head_hidden == 0) throw ConfigError(f.field("head_hidden"), "must be positive (or null for a linear head)");
  }
  m.input = default_input(m.backbone);
  if (const json* in = f.find("input")) {
    Fields g(*in, f.field("input"));
    g.reject_unknown({"channels", "height", "width"});
    m.input.channels = g.uint("channels", m.input.channels);
    m.input.height = g.uint("height", m.input.height);
    m.input.width = g.uint("width", m.input.width);
  }
  wrap_value_error(f.field("input"), [&] {
    validate_input_spec(m.backbone, m.input);
    return 0;
  });
  return m;
}

SgdConfig parse_sgd(const json* j) {
  SgdConfig s;
  if (!j) return s;
  Fields f(*j, "sgd");
  f.reject_unknown({"learning_rate", "batch_size", "n_epoch", "shuffle_seed", "mode", "lower_variant"});
  s.learning_rate = f.number("learning_rate", s.learning_rate);
  if (!(s.learning_rate > 0.0) || !std::isfinite(s.learning_rate)) {
    throw ConfigError(f.field("learning_rate"), "must be a positive finite number");
  }
  s.batch_size = f.uint("batch_size", s.batch_size);
  if (s.batch_size == 0) throw ConfigError(f.field("batch_size"), "must be at least 1");
  s.n_epoch = f.uint("n_epoch", s.n_epoch);
  s.shuffle_seed = f.uint("shuffle_seed", s.shuffle_seed);
  s.mode = wrap_value_error(f.field("mode"), [&] { return parse_train_mode(f.str("mode", "ossl")); });
  s.lower_variant =
      wrap_value_error(f.field("lower_variant"), [&] { return parse_lower_variant(f.str("lower_variant", "ah")); });
  return s;
}

void check_name(const std::string& name, const std::string& field) {
  static const std::regex ok("[A-Za-z0-9_.-]+");
  if (!std::regex_match(name, ok)) {
    throw ConfigError(field, "dataset name '" + name + "' must be non-empty and use only letters, digits, '_', '.', '-'");
  }
}

DatasetSpec parse_dataset(const json& j, const std::string& path, const fs::path& base_dir,
                          std::optional<std::string> default_name) {
  Fields f(j, path);
  DatasetSpec d;
  d.format = f.str("format");
  d.name = f.str("name", default_name);
  check_name(d.name, f.field("name"));
  if (d.format == "idx") {
    f.reject_unknown({"name", "format", "images", "labels", "limit", "grayscale", "resize"});
    d.paths = {existing_file(f, "images", base_dir), existing_file(f, "labels", base_dir)};
  } else if (d.format == "cifar") {
    f.reject_unknown({"name", "format", "paths", "limit", "grayscale", "resize"});
    const json& arr = f.require("paths");
    if (!arr.is_array() || arr.empty()) throw ConfigError(f.field("paths"), "expected a non-empty array of paths");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string field = f.field("paths") + "[" + std::to_string(i) + "]";
      if (!arr[i].is_string()) throw ConfigError(field, "expected a string");
      fs::path p = arr[i].get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      p = p.lexically_normal();
      if (!fs::is_regular_file(p)) throw ConfigError(field, "file not found: " + p.string());
      d.paths.push_back(p);
    }
  } else if (d.format == "raw") {
    f.reject_unknown({"name", "format", "path", "limit", "grayscale", "resize"});
    d.paths = {existing_file(f, "path", base_dir)};
  } else if (d.format == "synthetic") {
    f.reject_unknown({"name", "format", "count", "seed", "noise", "limit", "grayscale", "resize"});
    d.count = f.uint("count");
    d.seed = f.uint("seed", 0);
    d.noise = f.number("noise", 0.1);
    if (!(d.noise >= 0.0)) throw ConfigError(f.field("noise"), "must be non-negative");
  } else {
    throw ConfigError(f.field("format"), "unknown format '" + d.format + "' (expected idx, cifar, raw or synthetic)");
  }
  if (f.find("limit")) d.limit = f.uint("limit");
  d.grayscale = f.boolean("grayscale", false);
  d.resize = wrap_value_error(f.field("resize"), [&] { return parse_resize(f.str("resize", "none")); });
  return d;
}

ordered_json dataset_json(const DatasetSpec& d) {
  ordered_json j;
  j["name"] = d.name;
  j["format"] = d.format;
  if (d.format == "idx") {
    j["images"] = d.paths.at(0).string();
    j["labels"] = d.paths.at(1).string();
  } else if (d.format == "cifar") {
    j["paths"] = ordered_json::array();
    for (const auto& p : d.paths) j["paths"].push_back(p.string());
  } else if (d.format == "raw") {
    j["path"] = d.paths.at(0).string();
  } else {
    j["count"] = d.count;
    j["seed"] = d.seed;
    j["noise"] = d.noise;
  }
  j["limit"] = d.limit ? ordered_json(*d.limit) : ordered_json(nullptr);
  j["grayscale"] = d.grayscale;
  j["resize"] = std::string(to_string(d.resize));
  return j;
}

ordered_json config_json(const RunConfig& c, bool with_output_dir) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  ordered_json m;
  m["backbone"] = std::string(to_string(c.model.backbone));
  m["num_classes"] = c.model.num_classes;
  m["init_seed"] = c.model.init_seed;
  m["head_hidden"] = c.model.head_hidden ? ordered_json(*c.model.head_hidden) : ordered_json(nullptr);
  m["input"] = {{"channels", c.model.input.channels},
                {"height", c.model.input.height},
                {"width", c.model.input.width}};
  j["model"] = m;
  ordered_json s;
  s["learning_rate"] = c.sgd.learning_rate;
  s["batch_size"] = c.sgd.batch_size;
  s["n_epoch"] = c.sgd.n_epoch;
  s["shuffle_seed"] = c.sgd.shuffle_seed;
  s["mode"] = std::string(to_string(c.sgd.mode));
  s["lower_variant"] = std::string(to_string(c.sgd.lower_variant));
  j["sgd"] = s;
  j["train_set"] = dataset_json(c.train_set);
  j["test_sets"] = ordered_json::array();
  for (const auto& t : c.test_sets) j["test_sets"].push_back(dataset_json(t));
  if (!c.normalize) {
    j["normalize"] = "none";
  } else if (c.normalize_stats) {
    j["normalize"] = ordered_json::array();
    for (const auto& n : *c.normalize_stats) j["normalize"].push_back({{"mean", n.mean}, {"std", n.std}});
  } else {
    j["normalize"] = "train_stats";
  }
  j["timing"] = c.timing == Timing::wall ? "wall" : "off";
  if (with_output_dir) {
    j["output_dir"] = c.output_dir.empty() ? ordered_json(nullptr) : ordered_json(c.output_dir.string());
  }
  return j;
}

}  // namespace

RunConfig parse_config(const std::string& text, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports "line L, column C" inside what().
    throw ConfigError("<syntax>", e.what());
  }
  Fields f(root, "");
  f.reject_unknown({"schema_version", "model", "sgd", "train_set", "test_sets", "normalize", "timing", "output_dir"});
  const std::uint64_t version = f.uint("schema_version");
  if (version != kSchemaVersion) {
    throw ConfigError("schema_version", "unsupported version " + std::to_string(version) + " (expected " +
                                            std::to_string(kSchemaVersion) + ")");
  }
  RunConfig c;
  c.model = parse_model(f.require("model"));
  c.sgd = parse_sgd(f.find("sgd"));
  c.train_set = parse_dataset(f.require("train_set"), "train_set", base_dir, std::string("train"));
  if (const json* tests = f.find("test_sets")) {
    if (!tests->is_array()) throw ConfigError("test_sets", "expected an array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < tests->size(); ++i) {
      const std::string path = "test_sets[" + std::to_string(i) + "]";
      DatasetSpec d = parse_dataset((*tests)[i], path, base_dir, std::nullopt);
      if (!names.insert(d.name).second) throw ConfigError(path + ".name", "duplicate test-set name '" + d.name + "'");
      c.test_sets.push_back(std::move(d));
    }
  }
  if (const json* n = f.find("normalize")) {
    if (n->is_string()) {
      const std::string s = n->get<std::string>();
      if (s == "none") {
        c.normalize = false;
      } else if (s != "train_stats") {
        throw ConfigError("normalize", "expected \"train_stats\", \"none\" or a list of {mean, std}");
      }
    } else if (n->is_array()) {
      if (n->size() != c.model.input.channels) {
        throw ConfigError("normalize", "needs one {mean, std} entry per input channel (" +
                                           std::to_string(c.model.input.channels) + ")");
      }
      std::vector<ChannelNorm> stats;
      for (std::size_t i = 0; i < n->size(); ++i) {
        Fields g((*n)[i], "normalize[" + std::to_string(i) + "]");
        g.reject_unknown({"mean", "std"});
        ChannelNorm cn{g.number("mean"), g.number("std")};
        if (!(cn.std > 0.0) || !std::isfinite(cn.std) || !std::isfinite(cn.mean)) {
          throw ConfigError(g.field("std"), "std must be positive and finite");
        }
        stats.push_back(cn);
      }
      c.normalize_stats = std::move(stats);
    } else {
      throw ConfigError("normalize", "expected \"train_stats\", \"none\" or a list of {mean, std}");
    }
  }
  const std::string timing = f.str("timing", "wall");
  if (timing == "wall") {
    c.timing = Timing::wall;
  } else if (timing == "off") {
    c.timing = Timing::off;
  } else {
    throw ConfigError("timing", "expected \"wall\" or \"off\"");
  }
  if (f.find("output_dir")) {
    c.output_dir = f.str("output_dir");
    if (c.output_dir.is_relative()) c.output_dir = (base_dir / c.output_dir).lexically_normal();
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), fs::absolute(path).parent_path());
}

std::string resolved_config_json(const RunConfig& cfg) { return config_json(cfg, true).dump(2) + "\n"; }

std::string config_hash(const RunConfig& cfg) {
  const std::string text = config_json(cfg, false).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

LabeledImageSet load_dataset(const DatasetSpec& spec, const ModelConfig& model) {
  LabeledImageSet set;
  if (spec.format == "idx") {
    set = load_idx(spec.paths.at(0), spec.paths.at(1), model.num_classes);
  } else if (spec.format == "cifar") {
    set = load_cifar_bin(spec.paths, model.num_classes);
  } else if (spec.format == "raw") {
    set = load_raw_tensor(spec.paths.at(0));
  } else if (spec.format == "synthetic") {
    set = make_synthetic_blobs(spec.count, model.num_classes, model.input, spec.seed, spec.noise);
  } else {
    throw ValueError("unknown dataset format '" + spec.format + "'");
  }
  if (spec.limit) set = take_first(set, *spec.limit);
  set.name = spec.name;
  return set;
}

PreprocessSpec preprocess_spec(const DatasetSpec& spec, const ModelConfig& model,
                               const std::vector<ChannelNorm>& normalize) {
  PreprocessSpec p;
  p.target = model.input;
  p.grayscale = spec.grayscale;
  p.resize = spec.resize;
  p.normalize = normalize;
  return p;
}

}  // namespace ossl::cli
