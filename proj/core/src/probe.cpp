#include "hyspec/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hyspec/error.hpp"
#include "hyspec/hash.hpp"
#include "hyspec/metrics.hpp"
#include "hyspec/nn.hpp"

namespace hyspec::clf {

RowMatrix IdentityExtractor::transform(const RowMatrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != dim_) {
    throw SizeError("identity extractor expects " + std::to_string(dim_) + " columns, got " + std::to_string(x.cols()));
  }
  return x;
}

std::string IdentityExtractor::weights_checksum() const {
  Fnv1a h;
  h.add("identity");
  h.add(static_cast<std::uint64_t>(dim_));
  return h.hex();
}

RandomExtractor::RandomExtractor(RandomKind kind, std::size_t input_dim, std::uint64_t seed, std::size_t width)
    : kind_(kind), input_dim_(input_dim), width_(width) {
  if (input_dim == 0 || width == 0) throw SizeError("random extractor needs positive input and width");
  std::size_t fan1 = input_dim;
  std::size_t fan2 = width;
  std::size_t n1 = input_dim * width;
  std::size_t n2 = width * width;
  if (kind == RandomKind::kConvolutional) {
    const std::size_t l1 = input_dim >= kKernel ? (input_dim - kKernel) / kStride + 1 : 0;
    if (l1 < kKernel) {
      throw SizeError("convolutional extractor needs at least " + std::to_string(kKernel + (kKernel - 1) * kStride) +
                      " bands, got " + std::to_string(input_dim));
    }
    fan1 = kKernel;
    fan2 = kKernel * width;
    n1 = kKernel * width;
    n2 = kKernel * width * width;
  }
  std::mt19937_64 rng(seed);
  auto draw = [&](std::vector<double>& v, std::size_t n, std::size_t fan) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan));
    std::uniform_real_distribution<double> u(-bound, bound);
    v.resize(n);
    for (double& x : v) x = u(rng);
  };
  draw(w1_, n1, fan1);
  draw(b1_, width, fan1);
  draw(w2_, n2, fan2);
  draw(b2_, width, fan2);
}

std::string RandomExtractor::name() const {
  return kind_ == RandomKind::kDense ? "random_dense" : "random_conv";
}

std::string RandomExtractor::weights_checksum() const {
  Fnv1a h;
  for (const auto* v : {&w1_, &b1_, &w2_, &b2_}) h.add(nn::checksum(*v));
  return h.hex();
}

RowMatrix RandomExtractor::transform(const RowMatrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != input_dim_) {
    throw SizeError("random extractor expects " + std::to_string(input_dim_) + " columns, got " +
                    std::to_string(x.cols()));
  }
  const auto w = static_cast<Eigen::Index>(width_);
  RowMatrix out;
  if (kind_ == RandomKind::kDense) {
    const Eigen::Map<const RowMatrix> w1(w1_.data(), x.cols(), w);
    const Eigen::Map<const RowMatrix> w2(w2_.data(), w, w);
    const Eigen::Map<const Eigen::RowVectorXd> b1(b1_.data(), w);
    const Eigen::Map<const Eigen::RowVectorXd> b2(b2_.data(), w);
    RowMatrix h = ((x * w1).rowwise() + b1).cwiseMax(0.0);
    out = ((h * w2).rowwise() + b2).cwiseMax(0.0);
  } else {
    const std::size_t l1 = (input_dim_ - kKernel) / kStride + 1;
    const std::size_t l2 = (l1 - kKernel) / kStride + 1;
    out = RowMatrix::Zero(x.rows(), w);
    // w1: kernel x width; w2: (kernel * width) x width with row k * width + c_in
    const Eigen::Map<const RowMatrix> w1(w1_.data(), static_cast<Eigen::Index>(kKernel), w);
    const Eigen::Map<const RowMatrix> w2(w2_.data(), static_cast<Eigen::Index>(kKernel) * w, w);
    const Eigen::Map<const Eigen::RowVectorXd> b1(b1_.data(), w);
    const Eigen::Map<const Eigen::RowVectorXd> b2(b2_.data(), w);
    RowMatrix patches1(static_cast<Eigen::Index>(l1), static_cast<Eigen::Index>(kKernel));
    RowMatrix patches2(static_cast<Eigen::Index>(l2), static_cast<Eigen::Index>(kKernel) * w);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (std::size_t i = 0; i < l1; ++i) {
        patches1.row(static_cast<Eigen::Index>(i)) =
            x.row(r).segment(static_cast<Eigen::Index>(i * kStride), static_cast<Eigen::Index>(kKernel));
      }
      const RowMatrix h1 = ((patches1 * w1).rowwise() + b1).cwiseMax(0.0);
      for (std::size_t i = 0; i < l2; ++i) {
        for (std::size_t k = 0; k < kKernel; ++k) {
          patches2.row(static_cast<Eigen::Index>(i)).segment(static_cast<Eigen::Index>(k) * w, w) =
              h1.row(static_cast<Eigen::Index>(i * kStride + k));
        }
      }
      const RowMatrix h2 = ((patches2 * w2).rowwise() + b2).cwiseMax(0.0);
      out.row(r) = h2.colwise().mean();
    }
  }
  if (!out.allFinite()) throw DivergenceError(name() + " produced non-finite activations", 0);
  return out;
}

RowMatrix MaeExtractor::transform(const RowMatrix& x) const { return mae::cls_embeddings(model_, x); }

std::string MaeExtractor::weights_checksum() const { return nn::checksum(model_.parameters().values()); }

RowMatrix AeExtractor::transform(const RowMatrix& x) const { return mae::ae_encode(model_, x); }

std::string AeExtractor::weights_checksum() const { return nn::checksum(model_.parameters().values()); }

void ProbeConfig::validate() const {
  std::string problems;
  if (hidden == 0) problems += " hidden must be >= 1;";
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) problems += " learning_rate must be positive;";
  if (!(momentum >= 0.0 && momentum < 1.0)) problems += " momentum must be in [0, 1);";
  if (!(weight_decay >= 0.0)) problems += " weight_decay must be >= 0;";
  if (epochs == 0) problems += " epochs must be >= 1;";
  if (batch_size == 0) problems += " batch_size must be >= 1;";
  if (!problems.empty()) throw ConfigError("invalid probe config:" + problems);
}

namespace {

// Row-wise softmax in place.
void softmax_rows(RowMatrix& z) {
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double m = z.row(r).maxCoeff();
    z.row(r) = (z.row(r).array() - m).exp().matrix();
    z.row(r) /= z.row(r).sum();
  }
}

}  // namespace

ProbeResult mlp_probe(const LabeledSet& train, const LabeledSet& eval, const FeatureExtractor& extractor,
                      const ProbeConfig& config) {
  config.validate();
  if (train.size() == 0) throw FitError("probe needs a non-empty training set");
  if (eval.size() == 0) throw FitError("probe needs a non-empty evaluation set");
  train.validate();
  eval.validate();
  ProbeResult result;
  result.checksum_before = extractor.weights_checksum();

  RowMatrix xtr = extractor.transform(train.features);
  RowMatrix xev = extractor.transform(eval.features);
  const Eigen::RowVectorXd mean = xtr.colwise().mean();
  Eigen::RowVectorXd sd = ((xtr.rowwise() - mean).array().square().colwise().mean()).sqrt().matrix();
  for (Eigen::Index j = 0; j < sd.size(); ++j) {
    if (!(sd[j] > 1e-12)) sd[j] = 1.0;
  }
  xtr = (xtr.rowwise() - mean).array().rowwise() / sd.array();
  xev = (xev.rowwise() - mean).array().rowwise() / sd.array();

  const std::size_t classes = static_cast<std::size_t>(std::max(train.max_label(), eval.max_label()));
  const std::size_t d = static_cast<std::size_t>(xtr.cols());
  nn::ParameterStore store;
  const nn::Linear fc1 = nn::Linear::create(store, "probe.fc1", d, config.hidden);
  const nn::Linear fc2 = nn::Linear::create(store, "probe.fc2", config.hidden, classes);
  store.initialize(config.seed);
  nn::Sgd opt(store.size(), {config.learning_rate, config.momentum, config.weight_decay, 0.0});
  std::vector<double> grad(store.size());

  const std::size_t n = train.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed(config.seed, 1));
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t m = std::min(config.batch_size, n - start);
      nn::Mat xb(static_cast<Eigen::Index>(m), xtr.cols());
      for (std::size_t i = 0; i < m; ++i) xb.row(static_cast<Eigen::Index>(i)) = xtr.row(static_cast<Eigen::Index>(order[start + i]));
      const nn::Mat u = fc1.forward(store, xb);
      const nn::Mat h = nn::gelu(u);
      nn::Mat p = fc2.forward(store, h);
      if (!p.allFinite()) throw DivergenceError("probe logits became non-finite", static_cast<int>(epoch));
      softmax_rows(p);
      nn::Mat dz = p;
      for (std::size_t i = 0; i < m; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const auto c = static_cast<Eigen::Index>(train.labels[order[start + i]] - 1);
        total -= std::log(std::max(p(r, c), 1e-300));
        dz(r, c) -= 1.0;
      }
      dz /= static_cast<double>(m);
      std::fill(grad.begin(), grad.end(), 0.0);
      const nn::Mat dh = fc2.backward(store, h, dz, grad);
      fc1.backward(store, xb, nn::gelu_backward(u, dh), grad);
      opt.step(store.values(), grad);
    }
    const double loss = total / static_cast<double>(n);
    if (!std::isfinite(loss) || !nn::all_finite(store.values())) {
      throw DivergenceError("probe training diverged", static_cast<int>(epoch));
    }
    result.train_loss.push_back(loss);
  }

  const nn::Mat logits = fc2.forward(store, nn::gelu(fc1.forward(store, xev)));
  if (!logits.allFinite()) throw DivergenceError("probe logits became non-finite", static_cast<int>(config.epochs));
  result.predictions.resize(eval.size());
  for (std::size_t i = 0; i < eval.size(); ++i) {
    Eigen::Index best = 0;
    logits.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
    result.predictions[i] = static_cast<int>(best) + 1;
  }
  const auto cm = metrics::ConfusionMatrix::from_labels(eval.labels, result.predictions, classes);
  result.accuracy = metrics::overall_accuracy(cm);
  result.macro_f1 = metrics::macro_f1(cm);
  result.checksum_after = extractor.weights_checksum();
  return result;
}

ChanceEstimate chance_f1_oracle(std::span<const std::size_t> histogram, std::size_t classes, std::size_t trials,
                                std::uint64_t seed) {
  const std::size_t total = std::accumulate(histogram.begin(), histogram.end(), std::size_t{0});
  if (histogram.empty() || total == 0) throw DomainError("chance oracle needs a non-empty histogram");
  if (classes < histogram.size()) {
    throw SizeError("histogram has " + std::to_string(histogram.size()) + " classes but only " +
                    std::to_string(classes) + " can be predicted");
  }
  ChanceEstimate est;
  est.trials = std::max<std::size_t>(trials, 1);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, classes - 1);
  std::vector<std::size_t> tp(classes);
  std::vector<std::size_t> pred(classes);
  std::size_t supported = 0;
  for (std::size_t s : histogram) supported += s > 0 ? 1 : 0;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t t = 0; t < est.trials; ++t) {
    std::fill(tp.begin(), tp.end(), 0);
    std::fill(pred.begin(), pred.end(), 0);
    for (std::size_t k = 0; k < histogram.size(); ++k) {
      for (std::size_t i = 0; i < histogram[k]; ++i) {
        const std::size_t p = pick(rng);
        ++pred[p];
        tp[k] += p == k ? 1 : 0;
      }
    }
    // 2PR / (P + R) == 2 TP / (predicted + support)
    double f1 = 0.0;
    for (std::size_t k = 0; k < histogram.size(); ++k) {
      if (histogram[k] == 0) continue;
      f1 += 2.0 * static_cast<double>(tp[k]) / static_cast<double>(pred[k] + histogram[k]);
    }
    f1 /= static_cast<double>(supported);
    sum += f1;
    sum_sq += f1 * f1;
  }
  const double n = static_cast<double>(est.trials);
  est.mean = sum / n;
  const double var = est.trials > 1 ? std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0)) : 0.0;
  est.standard_error = std::sqrt(var / n);
  return est;
}

}  // namespace hyspec::clf
