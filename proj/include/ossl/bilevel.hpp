#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ossl/data.hpp"
#include "ossl/losses.hpp"
#include "ossl/nn.hpp"

namespace ossl {

enum class TrainMode { baseline_ch, baseline_ch_rh, ossl };

std::string_view to_string(TrainMode mode);
TrainMode parse_train_mode(std::string_view name);

struct SgdConfig {
  double learning_rate = 0.01;  // shared by both levels
  std::size_t batch_size = 128;
  std::size_t n_epoch = 30;
  std::uint64_t shuffle_seed = 0;
  TrainMode mode = TrainMode::ossl;
  LowerVariant lower_variant = LowerVariant::ah;
};

/// Throws ValueError unless learning_rate > 0 and batch_size >= 1.
void validate(const SgdConfig& cfg);

struct StepReport {
  double loss = 0.0;
  std::optional<double> l_ch, l_rh, l_ah;
  std::size_t correct = 0;                 // semantic-head hits on the batch, before the update
  std::array<double, 4> grad_norm{};       // L2 norm per group; 0 for groups the step does not update
};

// Each step clears gradients, records one objective, runs backward, checks
// every gradient for non-finite values (NonFiniteError names the first one),
// then applies p -= lr * grad to the active, non-frozen groups only.

/// L_ch + L_rh over {backbone, semantic head, rotation head}.
template <typename T>
StepReport upper_step(MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y, const SgdConfig& cfg);

/// L_ch - L_ah over {backbone, auxiliary head}; the semantic head stays fixed
/// but remains in the graph.
template <typename T>
StepReport lower_step(MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y, const SgdConfig& cfg);

/// L_ch over {backbone, semantic head}.
template <typename T>
StepReport baseline_ch_step(MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y,
                            const SgdConfig& cfg);

/// Same update rule as upper_step (L_ch + L_rh over the same three groups).
template <typename T>
StepReport baseline_ch_rh_step(MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y,
                               const SgdConfig& cfg);

/// Groups each update rule writes to.
std::vector<GroupName> upper_groups();
std::vector<GroupName> lower_groups();
std::vector<GroupName> baseline_ch_groups();

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::optional<double> L_ch, L_rh, L_ah;  // sample-weighted epoch means of the pre-update batch losses
  double train_acc = 0.0;                  // running semantic accuracy over the epoch
  std::vector<std::optional<double>> test_acc;  // per registered test set; empty when not evaluated
  std::optional<double> wall_ms;
};

struct TrainRunRecord {
  TrainMode mode = TrainMode::ossl;
  std::string config_hash;
  std::uint64_t init_seed = 0;
  std::uint64_t shuffle_seed = 0;
  std::vector<std::string> test_names;
  std::vector<EpochRecord> epochs;
  std::string checkpoint_path;
};

struct TrainOptions {
  std::filesystem::path checkpoint_path;  // empty: no checkpoint
  bool record_wall_time = true;
  std::string config_hash;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Test sets are evaluated at epochs p >= 49 with p % 10 == 0, and at the final epoch.
bool is_eval_epoch(std::size_t p, std::size_t n_epoch);

/// Runs the configured mode for cfg.n_epoch epochs. Dataset/model mismatches
/// throw before any step; non-finite values throw NonFiniteError.
TrainRunRecord train(MultiHeadModel<float>& model, const LabeledImageSet& train_set,
                     const std::vector<LabeledImageSet>& test_sets, const SgdConfig& cfg,
                     const TrainOptions& options = {});

}  // namespace ossl
