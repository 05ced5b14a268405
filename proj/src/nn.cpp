#include "ossl/nn.hpp"

#include <cmath>
#include <cstring>

#include "ossl/binary_io.hpp"
#include "ossl/ops.hpp"
#include "ossl/rng.hpp"

namespace ossl {

std::string_view to_string(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::lenet5: return "lenet5";
    case BackboneKind::densenet40: return "densenet40";
    case BackboneKind::tiny_cnn: return "tiny_cnn";
  }
  return "unknown";
}

std::string_view to_string(HeadKind head) {
  switch (head) {
    case HeadKind::semantic: return "semantic";
    case HeadKind::rotation: return "rotation";
    case HeadKind::auxiliary: return "auxiliary";
  }
  return "unknown";
}

std::string_view to_string(GroupName group) {
  switch (group) {
    case GroupName::backbone: return "backbone";
    case GroupName::semantic_head: return "semantic_head";
    case GroupName::rotation_head: return "rotation_head";
    case GroupName::auxiliary_head: return "auxiliary_head";
  }
  return "unknown";
}

BackboneKind parse_backbone_kind(std::string_view name) {
  if (name == "lenet5") return BackboneKind::lenet5;
  if (name == "densenet40") return BackboneKind::densenet40;
  if (name == "tiny_cnn") return BackboneKind::tiny_cnn;
  throw ValueError("unknown backbone '" + std::string(name) + "' (expected lenet5, densenet40 or tiny_cnn)");
}

HeadKind parse_head(std::string_view name) {
  if (name == "semantic") return HeadKind::semantic;
  if (name == "rotation") return HeadKind::rotation;
  if (name == "auxiliary") return HeadKind::auxiliary;
  throw ValueError("unknown head '" + std::string(name) + "' (expected semantic, rotation or auxiliary)");
}

GroupName group_of(HeadKind head) {
  switch (head) {
    case HeadKind::semantic: return GroupName::semantic_head;
    case HeadKind::rotation: return GroupName::rotation_head;
    case HeadKind::auxiliary: return GroupName::auxiliary_head;
  }
  throw ValueError("unknown head");
}

std::size_t backbone_feature_dim(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::lenet5: return 84;
    case BackboneKind::tiny_cnn: return 32;
    case BackboneKind::densenet40:
      return kDenseStemChannels + kDenseBlocks * kDenseLayersPerBlock * kDenseGrowth;
  }
  return 0;
}

void validate_input_spec(BackboneKind kind, const InputSpec& in) {
  const auto describe = [&] {
    return std::to_string(in.channels) + "x" + std::to_string(in.height) + "x" + std::to_string(in.width);
  };
  switch (kind) {
    case BackboneKind::lenet5:
      if ((in.channels == 1 && in.height == 28 && in.width == 28) ||
          (in.channels == 3 && in.height == 32 && in.width == 32)) {
        return;
      }
      throw DimensionError("input_spec", "lenet5 supports 1x28x28 or 3x32x32 inputs, got " + describe());
    case BackboneKind::densenet40:
      if (in.channels == 3 && in.height == 32 && in.width == 32) return;
      throw DimensionError("input_spec", "densenet40 supports 3x32x32 inputs, got " + describe());
    case BackboneKind::tiny_cnn:
      if (in.channels >= 1 && in.height >= 4 && in.width >= 4 && in.height % 4 == 0 && in.width % 4 == 0) return;
      throw DimensionError("input_spec", "tiny_cnn needs height and width divisible by 4, got " + describe());
  }
}

namespace {

/// Collects parameter declarations, then materializes them from the init seed.
template <typename T>
class ParamBuilder {
 public:
  explicit ParamBuilder(std::uint64_t seed) : seed_(seed) {}

  void weight(ParamGroup<T>& g, std::string name, Shape shape, std::size_t fan_in) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    const CounterRng rng(seed_, stream_++);
    std::vector<T> v(shape_numel(shape));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(bound * (2.0 * rng.uniform(i) - 1.0));
    push(g, std::move(name), std::move(shape), std::move(v));
  }

  void constant(ParamGroup<T>& g, std::string name, Shape shape, double value) {
    ++stream_;
    std::vector<T> v(shape_numel(shape), static_cast<T>(value));
    push(g, std::move(name), std::move(shape), std::move(v));
  }

 private:
  static void push(ParamGroup<T>& g, std::string name, Shape shape, std::vector<T> v) {
    g.params.emplace_back(std::move(shape), std::move(v), true);
    g.names.push_back(std::move(name));
  }

  std::uint64_t seed_;
  std::uint64_t stream_ = 0;
};

template <typename T>
void build_head(ParamBuilder<T>& pb, ParamGroup<T>& g, std::size_t in, std::size_t out,
                const std::optional<std::size_t>& hidden) {
  std::size_t width = in;
  if (hidden) {
    pb.weight(g, "hidden.w", Shape{*hidden, in}, in);
    pb.constant(g, "hidden.b", Shape{*hidden}, 0.0);
    width = *hidden;
  }
  pb.weight(g, "out.w", Shape{out, width}, width);
  pb.constant(g, "out.b", Shape{out}, 0.0);
}

}  // namespace

template <typename T>
MultiHeadModel<T> build_model(const ModelConfig& cfg) {
  if (cfg.num_classes < 2) throw ValueError("num_classes must be at least 2, got " + std::to_string(cfg.num_classes));
  if (cfg.head_hidden && *cfg.head_hidden == 0) throw ValueError("head_hidden must be positive when set");
  validate_input_spec(cfg.backbone, cfg.input);

  std::array<ParamGroup<T>, 4> groups;
  for (std::size_t g = 0; g < 4; ++g) groups[g].name = kAllGroups[g];
  auto& bb = groups[0];
  ParamBuilder<T> pb(cfg.init_seed);
  const std::size_t cin = cfg.input.channels;

  switch (cfg.backbone) {
    case BackboneKind::lenet5: {
      const std::size_t side = cfg.input.height == 28 ? 4 : 5;
      pb.weight(bb, "conv1.w", Shape{6, cin, 5, 5}, cin * 25);
      pb.constant(bb, "conv1.b", Shape{6}, 0.0);
      pb.weight(bb, "conv2.w", Shape{16, 6, 5, 5}, 6 * 25);
      pb.constant(bb, "conv2.b", Shape{16}, 0.0);
      pb.weight(bb, "fc1.w", Shape{120, 16 * side * side}, 16 * side * side);
      pb.constant(bb, "fc1.b", Shape{120}, 0.0);
      pb.weight(bb, "fc2.w", Shape{84, 120}, 120);
      pb.constant(bb, "fc2.b", Shape{84}, 0.0);
      break;
    }
    case BackboneKind::tiny_cnn: {
      const std::size_t flat = 8 * (cfg.input.height / 4) * (cfg.input.width / 4);
      pb.weight(bb, "conv1.w", Shape{4, cin, 3, 3}, cin * 9);
      pb.constant(bb, "conv1.b", Shape{4}, 0.0);
      pb.weight(bb, "conv2.w", Shape{8, 4, 3, 3}, 4 * 9);
      pb.constant(bb, "conv2.b", Shape{8}, 0.0);
      pb.weight(bb, "fc.w", Shape{32, flat}, flat);
      pb.constant(bb, "fc.b", Shape{32}, 0.0);
      break;
    }
    case BackboneKind::densenet40: {
      std::size_t c = kDenseStemChannels;
      pb.weight(bb, "conv0.w", Shape{c, cin, 3, 3}, cin * 9);
      for (std::size_t b = 0; b < kDenseBlocks; ++b) {
        for (std::size_t l = 0; l < kDenseLayersPerBlock; ++l) {
          const std::string p = "block" + std::to_string(b + 1) + ".layer" + std::to_string(l + 1) + ".";
          pb.constant(bb, p + "affine.scale", Shape{c}, 1.0);
          pb.constant(bb, p + "affine.shift", Shape{c}, 0.0);
          pb.weight(bb, p + "conv.w", Shape{kDenseGrowth, c, 3, 3}, c * 9);
          c += kDenseGrowth;
        }
        if (b + 1 < kDenseBlocks) {
          const std::string p = "transition" + std::to_string(b + 1) + ".";
          pb.constant(bb, p + "affine.scale", Shape{c}, 1.0);
          pb.constant(bb, p + "affine.shift", Shape{c}, 0.0);
          pb.weight(bb, p + "conv.w", Shape{c, c, 1, 1}, c);
        }
      }
      pb.constant(bb, "final.affine.scale", Shape{c}, 1.0);
      pb.constant(bb, "final.affine.shift", Shape{c}, 0.0);
      break;
    }
  }

  const std::size_t d = backbone_feature_dim(cfg.backbone);
  build_head(pb, groups[1], d, cfg.num_classes, cfg.head_hidden);
  build_head(pb, groups[2], d, kRotationClasses, cfg.head_hidden);
  build_head(pb, groups[3], d, cfg.num_classes, cfg.head_hidden);
  return MultiHeadModel<T>(cfg, std::move(groups));
}

template <typename T>
MultiHeadModel<T>::MultiHeadModel(ModelConfig config, std::array<ParamGroup<T>, 4> groups)
    : config_(std::move(config)), groups_(std::move(groups)), feature_dim_(backbone_feature_dim(config_.backbone)) {
  for (std::size_t g = 0; g < 4; ++g) {
    if (groups_[g].name != kAllGroups[g]) throw ValueError("parameter groups out of canonical order");
    if (groups_[g].names.size() != groups_[g].params.size()) throw ValueError("parameter names/params mismatch");
  }
}

template <typename T>
std::size_t MultiHeadModel<T>::head_outputs(HeadKind head) const {
  return head == HeadKind::rotation ? kRotationClasses : config_.num_classes;
}

template <typename T>
Tensor<T> MultiHeadModel<T>::forward_features(Tape<T>& tape, const Tensor<T>& x) const {
  if (x.rank() != 4) throw DimensionError("x.rank", "forward_features expects [N,C,H,W], got " + shape_str(x.shape()));
  const auto& in = config_.input;
  if (x.dim(1) != in.channels) throw DimensionError("x.C", "input channels do not match the model input spec");
  if (x.dim(2) != in.height) throw DimensionError("x.H", "input height does not match the model input spec");
  if (x.dim(3) != in.width) throw DimensionError("x.W", "input width does not match the model input spec");
  switch (config_.backbone) {
    case BackboneKind::lenet5: return lenet5_features(tape, x);
    case BackboneKind::tiny_cnn: return tiny_cnn_features(tape, x);
    case BackboneKind::densenet40: return densenet40_features(tape, x);
  }
  throw ValueError("unknown backbone");
}

template <typename T>
Tensor<T> MultiHeadModel<T>::lenet5_features(Tape<T>& tape, const Tensor<T>& x) const {
  const auto& p = group(GroupName::backbone).params;
  Tensor<T> h = maxpool2(tape, relu(tape, conv2d(tape, x, p[0], p[1])));
  h = maxpool2(tape, relu(tape, conv2d(tape, h, p[2], p[3])));
  h = relu(tape, linear(tape, flatten(tape, h), p[4], p[5]));
  return relu(tape, linear(tape, h, p[6], p[7]));
}

template <typename T>
Tensor<T> MultiHeadModel<T>::tiny_cnn_features(Tape<T>& tape, const Tensor<T>& x) const {
  const auto& p = group(GroupName::backbone).params;
  Tensor<T> h = maxpool2(tape, relu(tape, conv2d(tape, x, p[0], p[1], 1, 1)));
  h = maxpool2(tape, relu(tape, conv2d(tape, h, p[2], p[3], 1, 1)));
  return relu(tape, linear(tape, flatten(tape, h), p[4], p[5]));
}

template <typename T>
Tensor<T> MultiHeadModel<T>::densenet40_features(Tape<T>& tape, const Tensor<T>& x) const {
  const auto& p = group(GroupName::backbone).params;
  const Tensor<T> none;
  std::size_t i = 0;
  Tensor<T> h = conv2d(tape, x, p[i++], none, 1, 1);
  for (std::size_t b = 0; b < kDenseBlocks; ++b) {
    for (std::size_t l = 0; l < kDenseLayersPerBlock; ++l) {
      Tensor<T> y = relu(tape, channel_affine(tape, h, p[i], p[i + 1]));
      y = conv2d(tape, y, p[i + 2], none, 1, 1);
      i += 3;
      h = concat_channels(tape, std::vector<Tensor<T>>{h, y});
    }
    if (b + 1 < kDenseBlocks) {
      Tensor<T> y = relu(tape, channel_affine(tape, h, p[i], p[i + 1]));
      h = avgpool2(tape, conv2d(tape, y, p[i + 2], none, 1, 0));
      i += 3;
    }
  }
  h = relu(tape, channel_affine(tape, h, p[i], p[i + 1]));
  return global_avgpool(tape, h);
}

template <typename T>
Tensor<T> MultiHeadModel<T>::forward_head(Tape<T>& tape, const Tensor<T>& features, HeadKind head) const {
  if (features.rank() != 2 || features.dim(1) != feature_dim_) {
    throw DimensionError("features.D", "head expects [N," + std::to_string(feature_dim_) + "] features, got " +
                                           shape_str(features.shape()));
  }
  const auto& p = group(group_of(head)).params;
  if (p.size() == 4) {
    const Tensor<T> h = relu(tape, linear(tape, features, p[0], p[1]));
    return linear(tape, h, p[2], p[3]);
  }
  return linear(tape, features, p[0], p[1]);
}

template <typename T>
std::size_t MultiHeadModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& g : groups_) n += g.numel();
  return n;
}

template <typename T>
void MultiHeadModel<T>::zero_grad() {
  for (auto& g : groups_) {
    for (auto& p : g.params) p.zero_grad();
  }
}

template <typename T>
MultiHeadModel<T> MultiHeadModel<T>::clone() const {
  std::array<ParamGroup<T>, 4> out;
  for (std::size_t g = 0; g < 4; ++g) {
    out[g].name = groups_[g].name;
    out[g].names = groups_[g].names;
    out[g].frozen = groups_[g].frozen;
    for (const auto& p : groups_[g].params) out[g].params.push_back(p.clone());
  }
  return MultiHeadModel(config_, std::move(out));
}

template <typename T>
ParamSnapshot<T> snapshot_params(const ParamGroup<T>& group) {
  ParamSnapshot<T> s;
  s.group = group.name;
  for (const auto& p : group.params) {
    s.shapes.push_back(p.shape());
    s.values.emplace_back(p.data().begin(), p.data().end());
  }
  return s;
}

namespace {
template <typename T>
void check_snapshot_shapes(const ParamGroup<T>& group, const ParamSnapshot<T>& s) {
  if (s.group != group.name) throw DimensionError("group", "snapshot belongs to a different parameter group");
  if (s.shapes.size() != group.params.size()) throw DimensionError("params", "parameter count drifted");
  for (std::size_t i = 0; i < s.shapes.size(); ++i) {
    if (s.shapes[i] != group.params[i].shape()) {
      throw DimensionError(group.names[i], "parameter shape drifted from " + shape_str(s.shapes[i]) + " to " +
                                               shape_str(group.params[i].shape()));
    }
  }
}
}  // namespace

template <typename T>
void restore_params(ParamGroup<T>& group, const ParamSnapshot<T>& snapshot) {
  check_snapshot_shapes(group, snapshot);
  for (std::size_t i = 0; i < group.params.size(); ++i) {
    std::copy(snapshot.values[i].begin(), snapshot.values[i].end(), group.params[i].data().begin());
  }
}

template <typename T>
bool snapshot_equal(const ParamGroup<T>& group, const ParamSnapshot<T>& snapshot) {
  check_snapshot_shapes(group, snapshot);
  for (std::size_t i = 0; i < group.params.size(); ++i) {
    const auto d = group.params[i].data();
    if (!d.empty() && std::memcmp(d.data(), snapshot.values[i].data(), d.size() * sizeof(T)) != 0) return false;
  }
  return true;
}

std::vector<std::uint8_t> encode_checkpoint(const MultiHeadModel<float>& model) {
  io::ByteWriter w;
  const auto& cfg = model.config();
  w.raw("OSSL");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(cfg.backbone));
  w.u32(static_cast<std::uint32_t>(cfg.num_classes));
  w.u64(cfg.init_seed);
  w.u32(static_cast<std::uint32_t>(cfg.head_hidden.value_or(0)));
  w.u32(static_cast<std::uint32_t>(cfg.input.channels));
  w.u32(static_cast<std::uint32_t>(cfg.input.height));
  w.u32(static_cast<std::uint32_t>(cfg.input.width));
  w.u32(static_cast<std::uint32_t>(model.groups().size()));
  for (const auto& g : model.groups()) {
    w.str(to_string(g.name));
    w.u32(static_cast<std::uint32_t>(g.params.size()));
    for (std::size_t i = 0; i < g.params.size(); ++i) {
      const auto& p = g.params[i];
      w.str(g.names[i]);
      w.u32(static_cast<std::uint32_t>(p.rank()));
      for (auto d : p.shape()) w.u32(static_cast<std::uint32_t>(d));
      for (float v : p.data()) w.f32(v);
    }
  }
  return w.take();
}

MultiHeadModel<float> decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  io::ByteReader r(source, bytes);
  if (r.raw(4, "magic") != "OSSL") r.fail_at(0, "bad checkpoint magic (expected \"OSSL\")");
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32_le("format version");
  if (version != kCheckpointVersion) {
    r.fail_at(version_at, "unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig cfg;
  const std::size_t kind_at = r.offset();
  const std::uint32_t kind = r.u32_le("backbone kind");
  if (kind > static_cast<std::uint32_t>(BackboneKind::tiny_cnn)) r.fail_at(kind_at, "unknown backbone kind");
  cfg.backbone = static_cast<BackboneKind>(kind);
  cfg.num_classes = r.u32_le("num_classes");
  cfg.init_seed = r.u64_le("init_seed");
  if (const std::uint32_t hidden = r.u32_le("head_hidden"); hidden != 0) cfg.head_hidden = hidden;
  cfg.input.channels = r.u32_le("input channels");
  cfg.input.height = r.u32_le("input height");
  cfg.input.width = r.u32_le("input width");

  MultiHeadModel<float> model = [&] {
    try {
      return build_model<float>(cfg);
    } catch (const std::exception& e) {
      r.fail_at(kind_at, std::string("invalid model config: ") + e.what());
    }
  }();
  const std::size_t groups_at = r.offset();
  if (r.u32_le("group count") != 4) r.fail_at(groups_at, "expected 4 parameter groups");
  for (auto& g : model.groups()) {
    const std::size_t name_at = r.offset();
    if (r.str("group name") != to_string(g.name)) {
      r.fail_at(name_at, "expected group '" + std::string(to_string(g.name)) + "'");
    }
    const std::size_t count_at = r.offset();
    if (r.u32_le("tensor count") != g.params.size()) r.fail_at(count_at, "tensor count does not match model config");
    for (std::size_t i = 0; i < g.params.size(); ++i) {
      const std::size_t tname_at = r.offset();
      if (r.str("tensor name") != g.names[i]) r.fail_at(tname_at, "expected tensor '" + g.names[i] + "'");
      const std::size_t shape_at = r.offset();
      Shape shape(r.u32_le("rank"));
      for (auto& d : shape) d = r.u32_le("extent");
      if (shape != g.params[i].shape()) {
        r.fail_at(shape_at, "shape " + shape_str(shape) + " of '" + g.names[i] + "' does not match " +
                                shape_str(g.params[i].shape()));
      }
      r.need(4 * g.params[i].numel(), "tensor data");
      for (auto& v : g.params[i].data()) v = r.f32_le();
    }
  }
  if (r.remaining() != 0) r.fail("trailing bytes after checkpoint payload");
  return model;
}

void save_checkpoint(const MultiHeadModel<float>& model, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(model));
}

MultiHeadModel<float> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

template class MultiHeadModel<float>;
template class MultiHeadModel<double>;
template MultiHeadModel<float> build_model<float>(const ModelConfig&);
template MultiHeadModel<double> build_model<double>(const ModelConfig&);
template ParamSnapshot<float> snapshot_params(const ParamGroup<float>&);
template ParamSnapshot<double> snapshot_params(const ParamGroup<double>&);
template void restore_params(ParamGroup<float>&, const ParamSnapshot<float>&);
template void restore_params(ParamGroup<double>&, const ParamSnapshot<double>&);
template bool snapshot_equal(const ParamGroup<float>&, const ParamSnapshot<float>&);
template bool snapshot_equal(const ParamGroup<double>&, const ParamSnapshot<double>&);

}  // namespace ossl
