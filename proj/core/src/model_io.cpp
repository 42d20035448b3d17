#include "hyspec/model_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>

#include <nlohmann/json.hpp>

#include "hyspec/error.hpp"
#include "hyspec/scene_io.hpp"

namespace hyspec::mae {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr char kMagic[8] = {'H', 'Y', 'S', 'P', 'E', 'C', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kKindMae = 1;
constexpr std::uint32_t kKindAe = 2;

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(const char* p, std::size_t n) { out_.append(p, n); }
  const std::string& str() const { return out_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  Reader(std::string data, fs::path path) : data_(std::move(data)), path_(std::move(path)) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw IoError("truncated checkpoint " + path_.string());
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string data_;
  fs::path path_;
  std::size_t pos_ = 0;
};

fs::path sidecar(const fs::path& path) {
  fs::path p = path;
  p.replace_extension(".json");
  return p;
}

void begin(Writer& w, std::uint32_t kind) {
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kVersion);
  w.u32(kind);
}

void write_params(Writer& w, const std::vector<double>& values) {
  w.u64(values.size());
  for (double v : values) w.f64(v);
}

Reader open(const fs::path& path, std::uint32_t kind) {
  Reader r(read_file(path), path);
  if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw IoError(path.string() + " is not a checkpoint");
  }
  if (const auto v = r.u32(); v != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(v));
  if (const auto k = r.u32(); k != kind) {
    throw IoError(path.string() + " holds a " + (k == kKindMae ? "MAE" : "autoencoder") + " checkpoint");
  }
  return r;
}

void read_params(Reader& r, std::vector<double>& values, const fs::path& path) {
  const std::uint64_t n = r.u64();
  if (n != values.size()) {
    throw IoError("checkpoint " + path.string() + " has " + std::to_string(n) + " parameters, config implies " +
                  std::to_string(values.size()));
  }
  for (double& v : values) v = r.f64();
  if (!r.done()) throw IoError("trailing bytes in checkpoint " + path.string());
}

void curve_metadata(ordered_json& meta, const LossCurve& curve, const std::vector<double>& values) {
  meta["epochs"] = curve.train.empty() ? 0 : curve.train.size() - 1;
  meta["final_train_loss"] = curve.train.empty() ? 0.0 : curve.train.back();
  meta["final_validation_loss"] = curve.validation.empty() ? 0.0 : curve.validation.back();
  meta["parameter_count"] = values.size();
  meta["parameter_checksum"] = nn::checksum(values);
}

}  // namespace

void save_mae(const fs::path& path, const MAEModel& model, const LossCurve& curve) {
  const MAEConfig& c = model.config();
  Writer w;
  begin(w, kKindMae);
  for (std::uint64_t v : {c.token_len, c.embed_dim, c.n_heads, c.encoder_depth, c.decoder_depth, c.decoder_dim,
                          c.decoder_heads, c.mlp_ratio}) {
    w.u64(v);
  }
  for (double v : {c.mask_ratio, c.learning_rate, c.momentum, c.weight_decay, c.clip_norm, c.validation_fraction}) {
    w.f64(v);
  }
  for (std::uint64_t v : {std::uint64_t{c.epochs}, std::uint64_t{c.batch_size}, std::uint64_t{c.eval_samples}, c.seed,
                          std::uint64_t{model.bands()}}) {
    w.u64(v);
  }
  write_params(w, model.parameters().values());

  ordered_json meta;
  meta["kind"] = "mae";
  meta["config"] = {{"token_len", c.token_len},         {"embed_dim", c.embed_dim},
                    {"n_heads", c.n_heads},             {"encoder_depth", c.encoder_depth},
                    {"decoder_depth", c.decoder_depth}, {"decoder_dim", c.decoder_dim},
                    {"decoder_heads", c.decoder_heads}, {"mlp_ratio", c.mlp_ratio},
                    {"mask_ratio", c.mask_ratio},       {"learning_rate", c.learning_rate},
                    {"momentum", c.momentum},           {"weight_decay", c.weight_decay},
                    {"clip_norm", c.clip_norm},         {"epochs", c.epochs},
                    {"batch_size", c.batch_size},       {"validation_fraction", c.validation_fraction},
                    {"eval_samples", c.eval_samples},   {"seed", c.seed}};
  meta["bands"] = model.bands();
  meta["tokens"] = model.token_count();
  curve_metadata(meta, curve, model.parameters().values());
  write_file_atomic(path, w.str());
  write_file_atomic(sidecar(path), meta.dump(2) + "\n");
}

MAEModel load_mae(const fs::path& path) {
  Reader r = open(path, kKindMae);
  MAEConfig c;
  c.token_len = r.u64();
  c.embed_dim = r.u64();
  c.n_heads = r.u64();
  c.encoder_depth = r.u64();
  c.decoder_depth = r.u64();
  c.decoder_dim = r.u64();
  c.decoder_heads = r.u64();
  c.mlp_ratio = r.u64();
  c.mask_ratio = r.f64();
  c.learning_rate = r.f64();
  c.momentum = r.f64();
  c.weight_decay = r.f64();
  c.clip_norm = r.f64();
  c.validation_fraction = r.f64();
  c.epochs = r.u64();
  c.batch_size = r.u64();
  c.eval_samples = r.u64();
  c.seed = r.u64();
  const std::size_t bands = r.u64();
  MAEModel model(c, bands);
  read_params(r, model.parameters().values(), path);
  return model;
}

void save_autoencoder(const fs::path& path, const AEModel& model, const LossCurve& curve) {
  const AEConfig& c = model.config();
  Writer w;
  begin(w, kKindAe);
  w.u64(c.latent_dim);
  w.u64(c.hidden_dim);
  for (double v : {c.learning_rate, c.momentum, c.weight_decay, c.clip_norm, c.validation_fraction}) w.f64(v);
  w.u64(c.epochs);
  w.u64(c.batch_size);
  w.u64(c.seed);
  w.u64(c.identity_init ? 1 : 0);
  w.u64(model.bands());
  write_params(w, model.parameters().values());

  ordered_json meta;
  meta["kind"] = "autoencoder";
  meta["config"] = {{"latent_dim", c.latent_dim},         {"hidden_dim", c.hidden_dim},
                    {"learning_rate", c.learning_rate},   {"momentum", c.momentum},
                    {"weight_decay", c.weight_decay},     {"clip_norm", c.clip_norm},
                    {"epochs", c.epochs},                 {"batch_size", c.batch_size},
                    {"validation_fraction", c.validation_fraction}, {"seed", c.seed},
                    {"identity_init", c.identity_init}};
  meta["bands"] = model.bands();
  curve_metadata(meta, curve, model.parameters().values());
  write_file_atomic(path, w.str());
  write_file_atomic(sidecar(path), meta.dump(2) + "\n");
}

AEModel load_autoencoder(const fs::path& path) {
  Reader r = open(path, kKindAe);
  AEConfig c;
  c.latent_dim = r.u64();
  c.hidden_dim = r.u64();
  c.learning_rate = r.f64();
  c.momentum = r.f64();
  c.weight_decay = r.f64();
  c.clip_norm = r.f64();
  c.validation_fraction = r.f64();
  c.epochs = r.u64();
  c.batch_size = r.u64();
  c.seed = r.u64();
  c.identity_init = r.u64() != 0;
  const std::size_t bands = r.u64();
  AEModel model(c, bands);
  read_params(r, model.parameters().values(), path);
  return model;
}

void write_loss_csv(const fs::path& path, const LossCurve& curve) {
  std::string text = "epoch,train_loss,validation_loss\n";
  char buf[64];
  auto fmt = [&](double v) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };
  for (std::size_t e = 0; e < curve.train.size(); ++e) {
    text += std::to_string(e) + "," + fmt(curve.train[e]) + "," +
            fmt(e < curve.validation.size() ? curve.validation[e] : curve.train[e]) + "\n";
  }
  write_file_atomic(path, text);
}

}  // namespace hyspec::mae
