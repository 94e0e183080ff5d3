#include "pul/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pul/errors.hpp"

namespace pul {

namespace {

void check_input_dim(const EmbedModel& model, std::size_t got) {
  if (got != static_cast<std::size_t>(model.input_dim))
    throw InvalidInput("input has dimension " + std::to_string(got) + ", model expects " +
                       std::to_string(model.input_dim));
}

// out = relu(W x + b)
void affine_relu(const Matrix& w, const std::vector<double>& b, std::span<const double> x,
                 std::vector<double>& pre, std::vector<double>& post) {
  pre.resize(w.rows);
  post.resize(w.rows);
  for (std::size_t r = 0; r < w.rows; ++r) {
    double acc = b[r];
    const auto row = w.row(r);
    for (std::size_t c = 0; c < w.cols; ++c) acc += row[c] * x[c];
    pre[r] = acc;
    post[r] = acc > 0.0 ? acc : 0.0;
  }
}

struct ForwardCache {
  std::vector<double> x;      // input as doubles
  std::vector<double> z1, h;  // first layer pre/post
  std::vector<double> z2, e;  // second layer pre/post (e aliases h for linear)
  std::vector<double> logits;
  std::vector<double> probs;
};

void forward_embed(const EmbedModel& model, std::span<const float> x, ForwardCache& cache) {
  check_input_dim(model, x.size());
  cache.x.assign(x.begin(), x.end());
  affine_relu(model.w1, model.b1, cache.x, cache.z1, cache.h);
  if (model.arch == EmbedArch::one_hidden) {
    affine_relu(model.w2, model.b2, cache.h, cache.z2, cache.e);
  } else {
    cache.e = cache.h;
  }
}

void forward_logits(const EmbedModel& model, ForwardCache& cache) {
  cache.logits.resize(model.wc.rows);
  for (std::size_t r = 0; r < model.wc.rows; ++r) {
    double acc = model.bc[r];
    const auto row = model.wc.row(r);
    for (std::size_t c = 0; c < model.wc.cols; ++c) acc += row[c] * cache.e[c];
    cache.logits[r] = acc;
  }
  // Stable softmax.
  const double peak = *std::max_element(cache.logits.begin(), cache.logits.end());
  cache.probs.resize(cache.logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < cache.logits.size(); ++i) {
    cache.probs[i] = std::exp(cache.logits[i] - peak);
    sum += cache.probs[i];
  }
  for (double& p : cache.probs) p /= sum;
}

void init_uniform(Matrix& w, std::vector<double>& b, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols));
  for (double& v : w.data) v = rng.uniform(-bound, bound);
  std::fill(b.begin(), b.end(), 0.0);
}

Matrix zeros_like(const Matrix& m) { return Matrix(m.rows, m.cols); }

}  // namespace

EmbedModel make_model(EmbedArch arch, int input_dim, int hidden_dim, int embed_dim,
                      int num_classes) {
  if (input_dim < 1 || embed_dim < 1 || num_classes < 1 ||
      (arch == EmbedArch::one_hidden && hidden_dim < 1))
    throw InvalidInput("model dimensions must be >= 1");
  EmbedModel model;
  model.arch = arch;
  model.input_dim = input_dim;
  model.hidden_dim = arch == EmbedArch::one_hidden ? hidden_dim : 0;
  model.embed_dim = embed_dim;
  model.num_classes = num_classes;
  const auto d = static_cast<std::size_t>(input_dim);
  const auto e = static_cast<std::size_t>(embed_dim);
  const auto c = static_cast<std::size_t>(num_classes);
  if (arch == EmbedArch::one_hidden) {
    const auto h = static_cast<std::size_t>(hidden_dim);
    model.w1 = Matrix(h, d);
    model.b1.assign(h, 0.0);
    model.w2 = Matrix(e, h);
    model.b2.assign(e, 0.0);
  } else {
    model.w1 = Matrix(e, d);
    model.b1.assign(e, 0.0);
  }
  model.wc = Matrix(c, e);
  model.bc.assign(c, 0.0);
  return model;
}

void random_init(EmbedModel& model, Rng& rng) {
  init_uniform(model.w1, model.b1, rng);
  if (model.arch == EmbedArch::one_hidden) init_uniform(model.w2, model.b2, rng);
  init_uniform(model.wc, model.bc, rng);
}

void reinit_classifier(EmbedModel& model, int num_classes, Rng& rng) {
  if (num_classes < 1) throw InvalidInput("num_classes must be >= 1");
  model.num_classes = num_classes;
  model.wc = Matrix(static_cast<std::size_t>(num_classes),
                    static_cast<std::size_t>(model.embed_dim));
  model.bc.assign(static_cast<std::size_t>(num_classes), 0.0);
  init_uniform(model.wc, model.bc, rng);
}

Velocity zero_velocity(const EmbedModel& model) {
  Velocity v;
  v.w1 = zeros_like(model.w1);
  v.b1.assign(model.b1.size(), 0.0);
  v.w2 = zeros_like(model.w2);
  v.b2.assign(model.b2.size(), 0.0);
  v.wc = zeros_like(model.wc);
  v.bc.assign(model.bc.size(), 0.0);
  return v;
}

std::vector<double> forward(const EmbedModel& model, std::span<const float> x) {
  ForwardCache cache;
  forward_embed(model, x, cache);
  return cache.e;
}

Matrix embed_all(const EmbedModel& model, const FloatMatrix& xs) {
  Matrix out(xs.rows, static_cast<std::size_t>(model.embed_dim));
  ForwardCache cache;
  for (std::size_t i = 0; i < xs.rows; ++i) {
    forward_embed(model, xs.row(i), cache);
    std::copy(cache.e.begin(), cache.e.end(), out.row(i).begin());
  }
  return out;
}

std::vector<double> classify(const EmbedModel& model, std::span<const float> x) {
  ForwardCache cache;
  forward_embed(model, x, cache);
  forward_logits(model, cache);
  return cache.probs;
}

GradientSet loss_and_grad(const EmbedModel& model, const FloatMatrix& xs,
                          std::span<const int> labels) {
  if (xs.rows == 0) throw InvalidInput("batch must be non-empty");
  if (labels.size() != xs.rows) throw InvalidInput("labels length must equal batch size");
  for (int y : labels)
    if (y < 0 || y >= model.num_classes)
      throw InvalidInput("label " + std::to_string(y) + " outside [0, " +
                         std::to_string(model.num_classes) + ")");

  GradientSet out;
  out.g.w1 = zeros_like(model.w1);
  out.g.b1.assign(model.b1.size(), 0.0);
  out.g.w2 = zeros_like(model.w2);
  out.g.b2.assign(model.b2.size(), 0.0);
  out.g.wc = zeros_like(model.wc);
  out.g.bc.assign(model.bc.size(), 0.0);

  ForwardCache cache;
  std::vector<double> dlogits, de, dz2, dh, dz1;
  double loss_sum = 0.0;

  for (std::size_t i = 0; i < xs.rows; ++i) {
    forward_embed(model, xs.row(i), cache);
    forward_logits(model, cache);
    const int y = labels[i];
    loss_sum += -std::log(cache.probs[y]);

    // d loss / d logits = p - onehot(y)
    dlogits = cache.probs;
    dlogits[y] -= 1.0;

    for (std::size_t r = 0; r < model.wc.rows; ++r) {
      auto grow = out.g.wc.row(r);
      for (std::size_t c = 0; c < model.wc.cols; ++c) grow[c] += dlogits[r] * cache.e[c];
      out.g.bc[r] += dlogits[r];
    }

    de.assign(model.wc.cols, 0.0);
    for (std::size_t r = 0; r < model.wc.rows; ++r) {
      const auto row = model.wc.row(r);
      for (std::size_t c = 0; c < model.wc.cols; ++c) de[c] += row[c] * dlogits[r];
    }

    if (model.arch == EmbedArch::one_hidden) {
      dz2.resize(de.size());
      for (std::size_t j = 0; j < de.size(); ++j) dz2[j] = cache.z2[j] > 0.0 ? de[j] : 0.0;
      for (std::size_t r = 0; r < model.w2.rows; ++r) {
        auto grow = out.g.w2.row(r);
        for (std::size_t c = 0; c < model.w2.cols; ++c) grow[c] += dz2[r] * cache.h[c];
        out.g.b2[r] += dz2[r];
      }
      dh.assign(model.w2.cols, 0.0);
      for (std::size_t r = 0; r < model.w2.rows; ++r) {
        const auto row = model.w2.row(r);
        for (std::size_t c = 0; c < model.w2.cols; ++c) dh[c] += row[c] * dz2[r];
      }
      dz1.resize(dh.size());
      for (std::size_t j = 0; j < dh.size(); ++j) dz1[j] = cache.z1[j] > 0.0 ? dh[j] : 0.0;
    } else {
      dz1.resize(de.size());
      for (std::size_t j = 0; j < de.size(); ++j) dz1[j] = cache.z1[j] > 0.0 ? de[j] : 0.0;
    }

    for (std::size_t r = 0; r < model.w1.rows; ++r) {
      auto grow = out.g.w1.row(r);
      for (std::size_t c = 0; c < model.w1.cols; ++c) grow[c] += dz1[r] * cache.x[c];
      out.g.b1[r] += dz1[r];
    }
  }

  const double inv_n = 1.0 / static_cast<double>(xs.rows);
  auto scale = [inv_n](auto& container) {
    for (double& v : container) v *= inv_n;
  };
  scale(out.g.w1.data);
  scale(out.g.b1);
  scale(out.g.w2.data);
  scale(out.g.b2);
  scale(out.g.wc.data);
  scale(out.g.bc);
  out.batch_loss = loss_sum * inv_n;
  return out;
}

void sgd_update(EmbedModel& model, const GradientSet& grads, double learning_rate,
                double momentum, Velocity& velocity) {
  auto step = [&](std::vector<double>& params, const std::vector<double>& g,
                  std::vector<double>& vel) {
    if (params.size() != g.size() || params.size() != vel.size())
      throw InvalidInput("gradient/velocity shape does not match the model");
    for (std::size_t i = 0; i < params.size(); ++i) {
      vel[i] = momentum * vel[i] + g[i];
      params[i] -= learning_rate * vel[i];
    }
  };
  step(model.w1.data, grads.g.w1.data, velocity.w1.data);
  step(model.b1, grads.g.b1, velocity.b1);
  step(model.w2.data, grads.g.w2.data, velocity.w2.data);
  step(model.b2, grads.g.b2, velocity.b2);
  step(model.wc.data, grads.g.wc.data, velocity.wc.data);
  step(model.bc, grads.g.bc, velocity.bc);
}

FineTuneResult fine_tune(const EmbedModel& init, const FloatMatrix& xs,
                         std::span<const int> labels, std::span<const std::uint8_t> mask,
                         int num_classes, const SgdConfig& sgd, Rng& rng) {
  if (labels.size() != xs.rows || mask.size() != xs.rows)
    throw InvalidInput("labels and mask must have one entry per sample");
  for (std::size_t i = 0; i < xs.rows; ++i)
    if (mask[i] && (labels[i] < 0 || labels[i] >= num_classes))
      throw InvalidInput("selected sample has label outside [0, num_classes)");

  std::vector<int> selected;
  for (std::size_t i = 0; i < xs.rows; ++i)
    if (mask[i]) selected.push_back(static_cast<int>(i));
  if (selected.empty()) throw EmptyTrainingSet("no samples selected for fine-tuning");

  FineTuneResult result;
  result.model = init;
  reinit_classifier(result.model, num_classes, rng);
  Velocity velocity = zero_velocity(result.model);

  const auto batch_size = static_cast<std::size_t>(sgd.batch_size);
  FloatMatrix batch_x;
  std::vector<int> batch_y;

  for (int epoch = 0; epoch < sgd.epochs_per_iter; ++epoch) {
    rng.shuffle(selected);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < selected.size(); start += batch_size) {
      const std::size_t end = std::min(start + batch_size, selected.size());
      const std::size_t m = end - start;
      batch_x = FloatMatrix(m, xs.cols);
      batch_y.resize(m);
      for (std::size_t b = 0; b < m; ++b) {
        const int idx = selected[start + b];
        const auto src = xs.row(static_cast<std::size_t>(idx));
        std::copy(src.begin(), src.end(), batch_x.row(b).begin());
        batch_y[b] = labels[static_cast<std::size_t>(idx)];
      }
      const GradientSet grads = loss_and_grad(result.model, batch_x, batch_y);
      loss_sum += grads.batch_loss * static_cast<double>(m);
      sgd_update(result.model, grads, sgd.learning_rate, sgd.momentum, velocity);
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(selected.size()));
  }
  return result;
}

}  // namespace pul
