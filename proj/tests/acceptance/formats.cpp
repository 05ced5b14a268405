// Criteria 9-10: t-SNE and file formats.

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>

#include "acceptance.hpp"
#include "gen.hpp"
#include "ossl/data.hpp"
#include "ossl/errors.hpp"
#include "ossl/eval.hpp"
#include "ossl/nn.hpp"
#include "ossl/tsne.hpp"

namespace acceptance {

using namespace ossl;
using testsupport::Gen;
namespace fs = std::filesystem;
using Bytes = std::vector<std::uint8_t>;

namespace {

constexpr double kEntropyTolBits = 1e-5;
constexpr double kSilhouetteMin = 0.8;
constexpr std::size_t kLargeM = 500;
constexpr double kTsneBudgetSeconds = 120.0;

// Gaussian clusters of `per` points in `dim` dimensions, centres spread along the diagonal.
std::vector<double> clusters(std::size_t count, std::size_t per, std::size_t dim, std::uint64_t seed,
                             std::vector<std::size_t>& labels) {
  Gen g(seed);
  std::vector<double> x;
  labels.clear();
  for (std::size_t c = 0; c < count; ++c)
    for (std::size_t i = 0; i < per; ++i) {
      const double centre = 10.0 * static_cast<double>(c) - 5.0;
      for (std::size_t d = 0; d < dim; ++d) x.push_back(centre + g.normal());
      labels.push_back(c);
    }
  return x;
}

double entropy_error(const TsneResult& r, double perplexity) {
  double worst = 0.0;
  for (double h : r.entropy_bits) worst = std::max(worst, std::abs(h - std::log2(perplexity)));
  return worst;
}

// Format checks collect failures by name instead of stopping at the first.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++total_;
    if (!ok) failed_.push_back(what);
  }

  // Expects a FormatError; `offset` < 0 accepts any offset.
  void expect_format_error(const std::function<void()>& f, long offset, const std::string& what) {
    try {
      f();
    } catch (const FormatError& e) {
      expect(offset < 0 || e.offset() == static_cast<std::size_t>(offset),
             what + " (offset " + std::to_string(e.offset()) + ")");
      return;
    } catch (const std::exception& e) {
      expect(false, what + " (wrong error: " + e.what() + ")");
      return;
    }
    expect(false, what + " (no error)");
  }

  std::size_t total() const { return total_; }
  const std::vector<std::string>& failed() const { return failed_; }

 private:
  std::size_t total_ = 0;
  std::vector<std::string> failed_;
};

fs::path work(const std::string& name) {
  const fs::path dir = fs::absolute("acceptance_work/formats");
  fs::create_directories(dir);
  return dir / name;
}

void write(const fs::path& p, const Bytes& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

void be32(Bytes& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

Bytes idx_header(std::uint32_t magic, std::initializer_list<std::uint32_t> dims) {
  Bytes b;
  be32(b, magic);
  for (auto d : dims) be32(b, d);
  return b;
}

void idx_checks(Checks& c) {
  Bytes img = idx_header(0x803, {2, 4, 4});
  for (int i = 0; i < 32; ++i) img.push_back(static_cast<std::uint8_t>(i * 8 + 3));
  Bytes lab = idx_header(0x801, {2});
  lab.push_back(6);
  lab.push_back(1);
  write(work("i.idx"), img);
  write(work("l.idx"), lab);
  const auto s = load_idx(work("i.idx"), work("l.idx"));
  bool exact = s.images.shape() == Shape{2, 1, 4, 4} && s.labels == std::vector<std::uint16_t>{6, 1};
  for (std::size_t i = 0; exact && i < 32; ++i) exact = s.images[i] == static_cast<float>(i * 8 + 3) / 255.0f;
  c.expect(exact, "idx fixture values");

  auto load = [](const Bytes& i, const Bytes& l) {
    return [i, l] {
      write(work("ni.idx"), i);
      write(work("nl.idx"), l);
      load_idx(work("ni.idx"), work("nl.idx"));
    };
  };
  Bytes bad = img;
  bad[3] = 0x04;
  c.expect_format_error(load(bad, lab), 0, "idx bad image magic");
  c.expect_format_error(load(img, img), 0, "idx images file passed as labels");
  Bytes cut = img;
  cut.pop_back();
  c.expect_format_error(load(cut, lab), 16, "idx truncated payload");
  Bytes lab3 = idx_header(0x801, {3});
  lab3.insert(lab3.end(), {0, 1, 2});
  c.expect_format_error(load(img, lab3), 4, "idx count mismatch");

  write(work("zi.idx"), idx_header(0x803, {0, 28, 28}));
  write(work("zl.idx"), idx_header(0x801, {0}));
  c.expect(load_idx(work("zi.idx"), work("zl.idx")).labels.empty(), "idx zero-image file");
}

void cifar_checks(Checks& c) {
  Bytes rec(3073);
  rec[0] = 7;
  for (std::size_t i = 0; i < 3072; ++i) rec[1 + i] = static_cast<std::uint8_t>((i * 7) % 256);
  write(work("c.bin"), rec);
  const auto s = load_cifar_bin({work("c.bin")});
  bool exact = s.images.shape() == Shape{1, 3, 32, 32} && s.labels == std::vector<std::uint16_t>{7};
  for (std::size_t i = 0; exact && i < 3072; ++i) exact = s.images[i] == static_cast<float>((i * 7) % 256) / 255.0f;
  c.expect(exact, "cifar ramp record");
  write(work("e.bin"), {});
  c.expect(load_cifar_bin({work("e.bin")}).labels.empty(), "cifar empty file");
  write(work("s.bin"), Bytes(3072));
  c.expect_format_error([] { load_cifar_bin({work("s.bin")}); }, 0, "cifar 3072-byte file");
  write(work("l.bin"), Bytes(3073 * 2 + 5));
  c.expect_format_error([] { load_cifar_bin({work("l.bin")}); }, 3073 * 2, "cifar trailing partial record");
}

void raw_checks(Checks& c) {
  Gen g(3);
  LabeledImageSet s;
  s.images = g.tensor<float>({3, 2, 5, 5}, 0, 1);
  s.labels = g.labels(3, 10);
  s.class_count = 10;
  save_raw_tensor(s, work("r.raw"));
  const auto back = load_raw_tensor(work("r.raw"));
  c.expect(bitwise_equal(back.images, s.images) && back.labels == s.labels, "raw round trip");

  LabeledImageSet empty;
  empty.images = Tensor<float>(Shape{0, 1, 3, 3});
  empty.class_count = 4;
  c.expect(decode_raw_tensor(encode_raw_tensor(empty), "e").labels.empty(), "raw count=0");

  const Bytes bytes = encode_raw_tensor(s);
  auto decode = [](Bytes b) { return [b] { decode_raw_tensor(b, "raw"); }; };
  Bytes magic = bytes;
  magic[0] = 'X';
  c.expect_format_error(decode(magic), 0, "raw bad magic");
  Bytes version = bytes;
  version[7] = '2';
  c.expect_format_error(decode(version), 0, "raw version mismatch");
  Bytes cut = bytes;
  cut.pop_back();
  c.expect_format_error(decode(cut), 28, "raw truncated payload");
  Bytes longer = bytes;
  longer.push_back(0);
  c.expect_format_error(decode(longer), 28, "raw payload length mismatch");
  c.expect_format_error(decode(Bytes(bytes.begin(), bytes.begin() + 10)), -1, "raw truncated header");
}

void embedding_checks(Checks& c) {
  Embeddings e;
  e.rows = 4;
  e.dim = 3;
  Gen g(5);
  for (int i = 0; i < 12; ++i) e.values.push_back(static_cast<float>(g.uniform()));
  e.labels = {0, 3, 3, 9};
  save_embeddings(e, work("e.emb"));
  const auto back = load_embeddings(work("e.emb"));
  c.expect(back.rows == 4 && back.dim == 3 && back.values == e.values && back.labels == e.labels,
           "embeddings round trip");
  Embeddings none;
  none.dim = 7;
  c.expect(decode_embeddings(encode_embeddings(none), "e").rows == 0, "embeddings empty");

  const Bytes bytes = encode_embeddings(e);
  auto decode = [](Bytes b) { return [b] { decode_embeddings(b, "emb"); }; };
  Bytes magic = bytes;
  magic[0] = 'X';
  c.expect_format_error(decode(magic), 0, "embeddings bad magic");
  Bytes cut = bytes;
  cut.pop_back();
  c.expect_format_error(decode(cut), 16, "embeddings truncated");
  Bytes longer = bytes;
  longer.push_back(0);
  c.expect_format_error(decode(longer), 16, "embeddings length mismatch");
}

void checkpoint_checks(Checks& c) {
  ModelConfig mc;
  mc.backbone = BackboneKind::lenet5;
  mc.init_seed = 8;
  const auto m = build_model<float>(mc);
  save_checkpoint(m, work("m.ossl"));
  const auto back = load_checkpoint(work("m.ossl"));
  bool same = back.config() == m.config();
  for (std::size_t gi = 0; same && gi < 4; ++gi)
    for (std::size_t i = 0; same && i < m.groups()[gi].params.size(); ++i)
      same = bitwise_equal(m.groups()[gi].params[i], back.groups()[gi].params[i]);
  c.expect(same, "checkpoint round trip");

  const Bytes bytes = encode_checkpoint(m);
  c.expect(encode_checkpoint(back) == bytes, "checkpoint re-encode");
  auto decode = [](Bytes b) { return [b] { decode_checkpoint(b, "ckpt"); }; };
  Bytes magic = bytes;
  magic[0] = 'X';
  c.expect_format_error(decode(magic), 0, "checkpoint bad magic");
  Bytes version = bytes;
  version[4] = 9;
  c.expect_format_error(decode(version), 4, "checkpoint version mismatch");
  Bytes cut = bytes;
  cut.resize(bytes.size() - 3);
  c.expect_format_error(decode(cut), -1, "checkpoint truncated");
  Bytes longer = bytes;
  longer.push_back(0);
  c.expect_format_error(decode(longer), static_cast<long>(bytes.size()), "checkpoint trailing bytes");
}

}  // namespace

Outcome tsne_correctness() {
  std::vector<std::size_t> labels;
  const TsneConfig cfg;
  const auto fixture = clusters(2, 50, 10, 1, labels);
  const auto small = tsne(fixture, 100, 10, cfg);
  const double sil = silhouette_score(small.coords, 100, 2, labels);
  const double h_small = entropy_error(small, cfg.perplexity);
  const bool kl_small = small.kl_history.back() < small.kl_history[250];

  std::vector<std::size_t> big_labels;
  const auto big_data = clusters(5, kLargeM / 5, 50, 2, big_labels);
  Stopwatch clock;
  const auto big = tsne(big_data, kLargeM, 50, cfg);
  const double t = clock.seconds();
  const double h_big = entropy_error(big, cfg.perplexity);
  const bool kl_big = big.kl_history.back() < big.kl_history[250];
  const double sil_big = silhouette_score(big.coords, kLargeM, 2, big_labels);

  const bool ok = sil > kSilhouetteMin && h_small <= kEntropyTolBits && h_big <= kEntropyTolBits && kl_small &&
                  kl_big && t < kTsneBudgetSeconds;
  return verdict(ok, "two 50-point clusters in 10-D: silhouette " + fixed(sil, 3) + " (need > " +
                         fixed(kSilhouetteMin, 1) + "), KL[250] " + fixed(small.kl_history[250], 3) + " -> KL[1000] " +
                         fixed(small.kl_history.back(), 3) + "; M = " + std::to_string(kLargeM) +
                         ": max |H - log2 perp| " + sci(std::max(h_small, h_big), 4) + " bits (tol " +
                         sci(kEntropyTolBits) + "), KL[250] " + fixed(big.kl_history[250], 3) + " -> KL[1000] " +
                         fixed(big.kl_history.back(), 3) + ", silhouette " + fixed(sil_big, 3) + ", " + fixed(t, 1) +
                         " s (limit " + fixed(kTsneBudgetSeconds, 0) + " s)");
}

Outcome format_robustness() {
  Checks c;
  idx_checks(c);
  cifar_checks(c);
  raw_checks(c);
  embedding_checks(c);
  checkpoint_checks(c);
  std::string detail = std::to_string(c.total() - c.failed().size()) + "/" + std::to_string(c.total()) +
                       " checks across IDX, CIFAR-binary, OSSLRAW1, OSSLEMB1 and checkpoint";
  for (const auto& f : c.failed()) detail += "; failed: " + f;
  return verdict(c.failed().empty(), detail);
}

}  // namespace acceptance
