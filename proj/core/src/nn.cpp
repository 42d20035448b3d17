#include "hyspec/nn.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <numbers>

#include "hyspec/error.hpp"
#include "hyspec/hash.hpp"

namespace hyspec::nn {

Param ParameterStore::add(std::string name, std::size_t rows, std::size_t cols, Init init) {
  Param p{values_.size(), rows, cols};
  values_.resize(values_.size() + p.size(), 0.0);
  entries_.push_back({std::move(name), p, init});
  return p;
}

void ParameterStore::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const auto& e : entries_) {
    double* v = values_.data() + e.param.offset;
    const std::size_t n = e.param.size();
    switch (e.init) {
      case Init::kZero:
        std::fill(v, v + n, 0.0);
        break;
      case Init::kOne:
        std::fill(v, v + n, 1.0);
        break;
      case Init::kXavier: {
        const double a = std::sqrt(6.0 / static_cast<double>(e.param.rows + e.param.cols));
        std::uniform_real_distribution<double> dist(-a, a);
        for (std::size_t i = 0; i < n; ++i) v[i] = dist(rng);
        break;
      }
      case Init::kNormal: {
        std::normal_distribution<double> dist(0.0, 0.02);
        for (std::size_t i = 0; i < n; ++i) v[i] = dist(rng);
        break;
      }
    }
  }
}

const std::string& ParameterStore::name_of(std::size_t index) const {
  for (const auto& e : entries_) {
    if (index >= e.param.offset && index < e.param.offset + e.param.size()) return e.name;
  }
  throw SizeError("parameter index " + std::to_string(index) + " out of range");
}

Linear Linear::create(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out) {
  Linear l;
  l.in = in;
  l.out = out;
  l.weight = store.add(name + ".weight", in, out, Init::kXavier);
  l.bias = store.add(name + ".bias", 1, out, Init::kZero);
  return l;
}

Mat Linear::forward(const ParameterStore& store, const Mat& x) const {
  Mat y = x * store.value(weight);
  y.rowwise() += store.value(bias).row(0);
  return y;
}

Mat Linear::backward(const ParameterStore& store, const Mat& x, const Mat& dy, std::span<double> grad) const {
  grad_of(grad, weight).noalias() += x.transpose() * dy;
  grad_of(grad, bias).row(0) += dy.colwise().sum();
  return dy * store.value(weight).transpose();
}

LayerNorm LayerNorm::create(ParameterStore& store, const std::string& name, std::size_t dim) {
  LayerNorm ln;
  ln.dim = dim;
  ln.gamma = store.add(name + ".gamma", 1, dim, Init::kOne);
  ln.beta = store.add(name + ".beta", 1, dim, Init::kZero);
  return ln;
}

Mat LayerNorm::forward(const ParameterStore& store, const Mat& x, LayerNormCache& cache) const {
  const auto n = x.rows();
  const double d = static_cast<double>(x.cols());
  cache.xhat.resize(n, x.cols());
  cache.inv_std.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = x.row(r).sum() / d;
    const auto centered = x.row(r).array() - mu;
    const double var = centered.square().sum() / d;
    const double inv = 1.0 / std::sqrt(var + kEps);
    cache.inv_std(r) = inv;
    cache.xhat.row(r) = centered * inv;
  }
  Mat y = cache.xhat.array().rowwise() * store.value(gamma).row(0).array();
  y.rowwise() += store.value(beta).row(0);
  return y;
}

Mat LayerNorm::backward(const ParameterStore& store, const LayerNormCache& cache, const Mat& dy,
                        std::span<double> grad) const {
  grad_of(grad, gamma).row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  grad_of(grad, beta).row(0) += dy.colwise().sum();
  const Mat dxhat = dy.array().rowwise() * store.value(gamma).row(0).array();
  const double d = static_cast<double>(dy.cols());
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double s1 = dxhat.row(r).sum();
    const double s2 = dxhat.row(r).dot(cache.xhat.row(r));
    dx.row(r) = (cache.inv_std(r) / d) * (d * dxhat.row(r).array() - s1 - cache.xhat.row(r).array() * s2).matrix();
  }
  return dx;
}

namespace {
constexpr double kGeluC = 0.044715;
const double kGeluK = std::sqrt(2.0 / std::numbers::pi);
}  // namespace

namespace {

// tanh(k (x + c x^3)) through the vectorized exp: tanh(a) = 1 - 2 / (exp(2a) + 1).
Mat gelu_tanh(const Mat& u) {
  const auto x = u.array();
  const Eigen::ArrayXXd inner = kGeluK * (x + kGeluC * x * x * x);
  return (1.0 - 2.0 / ((2.0 * inner).exp() + 1.0)).matrix();
}

}  // namespace

Mat gelu(const Mat& u) {
  return (0.5 * u.array() * (1.0 + gelu_tanh(u).array())).matrix();
}

Mat gelu_backward(const Mat& u, const Mat& dy) {
  const Mat t = gelu_tanh(u);
  const auto x = u.array();
  const auto tt = t.array();
  const auto dt = (1.0 - tt * tt) * kGeluK * (1.0 + 3.0 * kGeluC * x * x);
  return (dy.array() * (0.5 * (1.0 + tt) + 0.5 * x * dt)).matrix();
}

Attention Attention::create(ParameterStore& store, const std::string& name, std::size_t dim, std::size_t heads) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("attention width " + std::to_string(dim) + " not divisible by " + std::to_string(heads) +
                      " heads");
  }
  Attention a;
  a.dim = dim;
  a.heads = heads;
  a.qkv = Linear::create(store, name + ".qkv", dim, 3 * dim);
  a.out = Linear::create(store, name + ".out", dim, dim);
  return a;
}

namespace {

using HeadView = Eigen::Map<const Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using HeadViewMut = Eigen::Map<Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace

// Probabilities are stored one row per (query, key) pair and one column per
// head, so every step vectorizes across heads.
Mat Attention::forward(const ParameterStore& store, const Mat& x, AttentionCache& cache,
                       std::size_t seq_len) const {
  const auto n = x.rows();
  const auto len = static_cast<Eigen::Index>(seq_len == 0 ? static_cast<std::size_t>(n) : seq_len);
  if (len == 0 || n % len != 0) throw SizeError("attention input rows are not a multiple of the sequence length");
  const auto d = static_cast<Eigen::Index>(dim);
  const auto nh = static_cast<Eigen::Index>(heads);
  const auto dh = d / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  cache.x = x;
  cache.seq_len = static_cast<std::size_t>(len);
  cache.qkv = qkv.forward(store, x);
  cache.probs.resize(n * len, nh);
  cache.context = Mat::Zero(n, d);
  Mat& a = cache.probs;
  const Mat& m = cache.qkv;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index base = i - i % len;
    const HeadView q(&m(i, 0), nh, dh);
    for (Eigen::Index j = 0; j < len; ++j) {
      if (dh == 1) {
        a.row(i * len + j) = m.row(i).head(d).cwiseProduct(m.row(base + j).segment(d, d)) * scale;
      } else {
        const HeadView k(&m(base + j, d), nh, dh);
        a.row(i * len + j) = (q * k).rowwise().sum().transpose() * scale;
      }
    }
    auto block = a.middleRows(i * len, len);
    block.rowwise() -= block.colwise().maxCoeff();
  }
  a = a.array().exp();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index base = i - i % len;
    auto block = a.middleRows(i * len, len);
    block.array().rowwise() /= block.colwise().sum().array();
    HeadViewMut ctx(&cache.context(i, 0), nh, dh);
    for (Eigen::Index j = 0; j < len; ++j) {
      if (dh == 1) {
        cache.context.row(i) += m.row(base + j).segment(2 * d, d).cwiseProduct(a.row(i * len + j));
      } else {
        const HeadView v(&m(base + j, 2 * d), nh, dh);
        ctx += v.colwise() * a.row(i * len + j).transpose().array();
      }
    }
  }
  return out.forward(store, cache.context);
}

Mat Attention::backward(const ParameterStore& store, const AttentionCache& cache, const Mat& dy,
                        std::span<double> grad) const {
  const auto n = cache.x.rows();
  const auto len = static_cast<Eigen::Index>(cache.seq_len);
  const auto d = static_cast<Eigen::Index>(dim);
  const auto nh = static_cast<Eigen::Index>(heads);
  const auto dh = d / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Mat dctx = out.backward(store, cache.context, dy, grad);
  const Mat& a = cache.probs;
  const Mat& m = cache.qkv;
  Mat dqkv = Mat::Zero(n, 3 * d);
  Mat da(len, nh);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index base = i - i % len;
    const HeadView dout(&dctx(i, 0), nh, dh);
    const auto probs = a.middleRows(i * len, len);
    for (Eigen::Index j = 0; j < len; ++j) {
      if (dh == 1) {
        da.row(j) = dctx.row(i).cwiseProduct(m.row(base + j).segment(2 * d, d));
        dqkv.row(base + j).segment(2 * d, d) += dctx.row(i).cwiseProduct(probs.row(j));
      } else {
        const HeadView v(&m(base + j, 2 * d), nh, dh);
        da.row(j) = (dout * v).rowwise().sum().transpose();
        HeadViewMut dv(&dqkv(base + j, 2 * d), nh, dh);
        dv += dout.colwise() * probs.row(j).transpose().array();
      }
    }
    const Eigen::RowVectorXd dot = (da.array() * probs.array()).colwise().sum();
    const Mat g = (probs.array() * (da.array().rowwise() - dot.array())) * scale;
    const HeadView q(&m(i, 0), nh, dh);
    HeadViewMut dq(&dqkv(i, 0), nh, dh);
    for (Eigen::Index j = 0; j < len; ++j) {
      if (dh == 1) {
        dqkv.row(i).head(d) += m.row(base + j).segment(d, d).cwiseProduct(g.row(j));
        dqkv.row(base + j).segment(d, d) += m.row(i).head(d).cwiseProduct(g.row(j));
      } else {
        const HeadView k(&m(base + j, d), nh, dh);
        HeadViewMut dk(&dqkv(base + j, d), nh, dh);
        const auto gj = g.row(j).transpose().array();
        dq += k.colwise() * gj;
        dk += q.colwise() * gj;
      }
    }
  }
  return qkv.backward(store, cache.x, dqkv, grad);
}

Block Block::create(ParameterStore& store, const std::string& name, std::size_t dim, std::size_t heads,
                    std::size_t hidden) {
  Block b;
  b.ln1 = LayerNorm::create(store, name + ".ln1", dim);
  b.attn = Attention::create(store, name + ".attn", dim, heads);
  b.ln2 = LayerNorm::create(store, name + ".ln2", dim);
  b.fc1 = Linear::create(store, name + ".fc1", dim, hidden);
  b.fc2 = Linear::create(store, name + ".fc2", hidden, dim);
  return b;
}

Mat Block::forward(const ParameterStore& store, const Mat& x, BlockCache& c, std::size_t seq_len) const {
  c.h1 = ln1.forward(store, x, c.ln1);
  c.x1 = x + attn.forward(store, c.h1, c.attn, seq_len);
  c.h2 = ln2.forward(store, c.x1, c.ln2);
  c.u = fc1.forward(store, c.h2);
  c.gu = gelu(c.u);
  return c.x1 + fc2.forward(store, c.gu);
}

Mat Block::backward(const ParameterStore& store, const BlockCache& c, const Mat& dy, std::span<double> grad) const {
  const Mat dgu = fc2.backward(store, c.gu, dy, grad);
  const Mat dh2 = fc1.backward(store, c.h2, gelu_backward(c.u, dgu), grad);
  const Mat dx1 = dy + ln2.backward(store, c.ln2, dh2, grad);
  const Mat dh1 = attn.backward(store, c.attn, dx1, grad);
  return dx1 + ln1.backward(store, c.ln1, dh1, grad);
}

Mat sinusoidal_encoding(std::size_t positions, std::size_t dim) {
  Mat pe(positions, dim);
  for (std::size_t p = 0; p < positions; ++p) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(dim));
      const double angle = static_cast<double>(p) * freq;
      pe(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i)) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

Sgd::Sgd(std::size_t size, SgdOptions options) : options_(options), velocity_(size, 0.0) {}

void Sgd::step(std::vector<double>& values, std::vector<double>& grad) {
  if (options_.weight_decay != 0.0) {
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += options_.weight_decay * values[i];
  }
  if (options_.clip_norm > 0.0) {
    double sq = 0.0;
    for (double g : grad) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > options_.clip_norm) {
      const double f = options_.clip_norm / norm;
      for (double& g : grad) g *= f;
    }
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    velocity_[i] = options_.momentum * velocity_[i] + grad[i];
    values[i] -= options_.learning_rate * velocity_[i];
  }
}

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string checksum(std::span<const double> values) {
  Fnv1a h;
  for (double v : values) h.add(std::bit_cast<std::uint64_t>(v));
  return h.hex();
}

}  // namespace hyspec::nn
