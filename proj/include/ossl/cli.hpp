#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ossl/bilevel.hpp"
#include "ossl/data.hpp"
#include "ossl/nn.hpp"

namespace ossl::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumeric = 3;

inline constexpr int kSchemaVersion = 1;

/// Environment variable naming the default parent of output directories.
inline constexpr const char* kOutputRootEnv = "OSSL_OUTPUT_ROOT";

/// A config problem tied to a field path such as "sgd.learning_rate".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct DatasetSpec {
  std::string name;
  std::string format;         // idx | cifar | raw | synthetic
  std::vector<fs::path> paths;  // idx: images, labels; cifar: batch files; raw: one file
  std::optional<std::size_t> limit;
  bool grayscale = false;
  ResizeKind resize = ResizeKind::none;
  // synthetic only
  std::size_t count = 0;
  std::uint64_t seed = 0;
  double noise = 0.1;
};

enum class Timing { wall, off };

struct RunConfig {
  ModelConfig model;
  SgdConfig sgd;
  DatasetSpec train_set;
  std::vector<DatasetSpec> test_sets;
  bool normalize = true;
  std::optional<std::vector<ChannelNorm>> normalize_stats;  // absent: computed from the training set
  Timing timing = Timing::wall;
  fs::path output_dir;  // empty: derived from the environment at run time
};

/// Parses and validates a config document. Relative paths resolve against
/// `base_dir`. Throws ConfigError (field diagnostics) or nlohmann parse errors
/// rethrown as ConfigError with line/column.
RunConfig parse_config(const std::string& text, const fs::path& base_dir);
RunConfig load_config(const fs::path& path);

/// Every default materialized, paths absolute.
std::string resolved_config_json(const RunConfig& cfg);

/// FNV-1a 64 of the resolved config, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

/// Loads the raw images (before preprocessing). Class count comes from the model.
LabeledImageSet load_dataset(const DatasetSpec& spec, const ModelConfig& model);

/// Preprocess spec for a dataset under a run config (normalization supplied by the caller).
PreprocessSpec preprocess_spec(const DatasetSpec& spec, const ModelConfig& model,
                               const std::vector<ChannelNorm>& normalize);

// metrics.csv: epoch,L_ch,L_rh,L_ah,train_acc,<testset>_acc...,wall_ms
std::string metrics_header(const std::vector<std::string>& test_names);
std::string metrics_row(const EpochRecord& e);
void write_metrics_csv(const fs::path& path, const TrainRunRecord& record);
TrainRunRecord read_metrics_csv(const fs::path& path, TrainMode mode);

struct TrainArgs {
  fs::path config;
  std::optional<fs::path> out;
};
struct EvalArgs {
  fs::path checkpoint;
  std::string dataset;
  std::string head = "semantic";
  std::optional<fs::path> config;
};
struct EmbedArgs {
  fs::path checkpoint;
  std::string dataset;
  fs::path out;
  std::optional<fs::path> config;
};
struct TsneArgs {
  fs::path embeddings;
  fs::path out;
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  std::uint64_t seed = 0;
};
struct ReportArgs {
  std::vector<std::string> runs;  // metrics.csv paths, optionally "mode=path"
  std::optional<fs::path> out;    // writes <out>.csv and <out>.txt
};

int cmd_train(const TrainArgs& args);
int cmd_eval(const EvalArgs& args);
int cmd_embed(const EmbedArgs& args);
int cmd_tsne(const TsneArgs& args);
int cmd_report(const ReportArgs& args);

/// Full command line dispatch for the `ossl` tool.
int run(int argc, char** argv);

}  // namespace ossl::cli
