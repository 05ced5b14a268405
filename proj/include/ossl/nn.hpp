#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ossl/tape.hpp"
#include "ossl/tensor.hpp"

namespace ossl {

enum class BackboneKind { lenet5, densenet40, tiny_cnn };
enum class HeadKind { semantic, rotation, auxiliary };

/// The four disjoint parameter partitions of the multi-head network.
enum class GroupName { backbone = 0, semantic_head = 1, rotation_head = 2, auxiliary_head = 3 };

inline constexpr std::array<GroupName, 4> kAllGroups = {GroupName::backbone, GroupName::semantic_head,
                                                         GroupName::rotation_head, GroupName::auxiliary_head};

std::string_view to_string(BackboneKind kind);
std::string_view to_string(HeadKind head);
std::string_view to_string(GroupName group);
BackboneKind parse_backbone_kind(std::string_view name);
HeadKind parse_head(std::string_view name);
GroupName group_of(HeadKind head);

inline constexpr std::size_t kRotationClasses = 4;

struct InputSpec {
  std::size_t channels = 1;
  std::size_t height = 28;
  std::size_t width = 28;
  bool operator==(const InputSpec&) const = default;
};

struct ModelConfig {
  BackboneKind backbone = BackboneKind::lenet5;
  std::size_t num_classes = 10;
  std::uint64_t init_seed = 0;
  std::optional<std::size_t> head_hidden;
  InputSpec input;
  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct ParamGroup {
  GroupName name = GroupName::backbone;
  std::vector<Tensor<T>> params;
  std::vector<std::string> names;  // parallel to params
  bool frozen = false;

  std::size_t numel() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.numel();
    return n;
  }
};

/// Shared backbone plus semantic (C-way), rotation (4-way) and auxiliary
/// (C-way) heads, each a linear map from the backbone feature vector.
///
/// Backbone parameter order (forward_features consumes them in this order):
///   lenet5:     conv1.w conv1.b conv2.w conv2.b fc1.w fc1.b fc2.w fc2.b
///   tiny_cnn:   conv1.w conv1.b conv2.w conv2.b fc.w fc.b
///   densenet40: conv0.w, then per composite layer (affine.scale affine.shift
///               conv.w), per transition (affine.scale affine.shift conv.w),
///               final affine.scale affine.shift
/// Head parameter order: [hidden.w hidden.b] out.w out.b
template <typename T>
class MultiHeadModel {
 public:
  MultiHeadModel(ModelConfig config, std::array<ParamGroup<T>, 4> groups);

  const ModelConfig& config() const noexcept { return config_; }
  const InputSpec& input_spec() const noexcept { return config_.input; }
  std::size_t feature_dim() const noexcept { return feature_dim_; }
  std::size_t head_outputs(HeadKind head) const;

  /// Backbone features [N, D] for images [N, C, H, W].
  Tensor<T> forward_features(Tape<T>& tape, const Tensor<T>& x) const;

  /// Raw logits of one head for features [N, D].
  Tensor<T> forward_head(Tape<T>& tape, const Tensor<T>& features, HeadKind head) const;

  ParamGroup<T>& group(GroupName name) { return groups_[static_cast<std::size_t>(name)]; }
  const ParamGroup<T>& group(GroupName name) const { return groups_[static_cast<std::size_t>(name)]; }
  std::array<ParamGroup<T>, 4>& groups() noexcept { return groups_; }
  const std::array<ParamGroup<T>, 4>& groups() const noexcept { return groups_; }

  std::size_t parameter_count() const;
  void zero_grad();

  /// Deep copy with fresh parameter storage.
  MultiHeadModel clone() const;

  template <typename U>
  MultiHeadModel<U> cast() const {
    std::array<ParamGroup<U>, 4> out;
    for (std::size_t g = 0; g < 4; ++g) {
      out[g].name = groups_[g].name;
      out[g].names = groups_[g].names;
      out[g].frozen = groups_[g].frozen;
      for (const auto& p : groups_[g].params) out[g].params.push_back(p.template cast<U>());
    }
    return MultiHeadModel<U>(config_, std::move(out));
  }

  /// Overwrites every parameter value with `other`'s (converted to T). Shapes must agree.
  template <typename U>
  void copy_params_from(const MultiHeadModel<U>& other) {
    for (std::size_t g = 0; g < 4; ++g) {
      const auto& src = other.groups()[g].params;
      auto& dst = groups_[g].params;
      if (src.size() != dst.size()) throw DimensionError("params", "copy_params_from: group size mismatch");
      for (std::size_t i = 0; i < dst.size(); ++i) {
        if (src[i].shape() != dst[i].shape()) throw DimensionError(groups_[g].names[i], "shape mismatch");
        for (std::size_t j = 0; j < dst[i].numel(); ++j) dst[i][j] = static_cast<T>(src[i][j]);
      }
    }
  }

 private:
  Tensor<T> lenet5_features(Tape<T>& tape, const Tensor<T>& x) const;
  Tensor<T> tiny_cnn_features(Tape<T>& tape, const Tensor<T>& x) const;
  Tensor<T> densenet40_features(Tape<T>& tape, const Tensor<T>& x) const;

  ModelConfig config_;
  std::array<ParamGroup<T>, 4> groups_;
  std::size_t feature_dim_ = 0;
};

/// Deterministic construction from cfg.init_seed: weights uniform in
/// [-sqrt(1/fan_in), sqrt(1/fan_in)], biases zero, affine scales one.
template <typename T>
MultiHeadModel<T> build_model(const ModelConfig& cfg);

/// Backbone feature width for a configuration (84 for lenet5, 448 for densenet40, 32 for tiny_cnn).
std::size_t backbone_feature_dim(BackboneKind kind);

/// Throws DimensionError when the backbone cannot consume the configured input shape.
void validate_input_spec(BackboneKind kind, const InputSpec& input);

// DenseNet-40 layout constants.
inline constexpr std::size_t kDenseGrowth = 12;
inline constexpr std::size_t kDenseBlocks = 3;
inline constexpr std::size_t kDenseLayersPerBlock = 12;
inline constexpr std::size_t kDenseStemChannels = 16;

/// Byte-exact copy of one parameter group.
template <typename T>
struct ParamSnapshot {
  GroupName group = GroupName::backbone;
  std::vector<Shape> shapes;
  std::vector<std::vector<T>> values;
};

template <typename T>
ParamSnapshot<T> snapshot_params(const ParamGroup<T>& group);

/// Throws DimensionError if the group's tensors no longer match the snapshot shapes.
template <typename T>
void restore_params(ParamGroup<T>& group, const ParamSnapshot<T>& snapshot);

/// Bitwise comparison; throws DimensionError on shape drift.
template <typename T>
bool snapshot_equal(const ParamGroup<T>& group, const ParamSnapshot<T>& snapshot);

template <typename T>
std::array<ParamSnapshot<T>, 4> snapshot_all(const MultiHeadModel<T>& model) {
  return {snapshot_params(model.group(GroupName::backbone)), snapshot_params(model.group(GroupName::semantic_head)),
          snapshot_params(model.group(GroupName::rotation_head)),
          snapshot_params(model.group(GroupName::auxiliary_head))};
}

// Checkpoint container: "OSSL", u32 version, model config, then per group
// (name, tensor count, per tensor: name, rank, extents, little-endian f32 data).
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const MultiHeadModel<float>& model);
MultiHeadModel<float> decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source);
void save_checkpoint(const MultiHeadModel<float>& model, const std::filesystem::path& path);
MultiHeadModel<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace ossl
