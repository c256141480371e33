#include "sbloss/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "sbloss/error.hpp"

namespace sbloss {

namespace {

constexpr const char* kCheckpointMagic = "SBLOSS-CHECKPOINT";
constexpr int kCheckpointVersion = 1;

void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DomainError(std::string(what) + ": expected length " + std::to_string(want) + ", got " +
                      std::to_string(got));
  }
}

// out[r] = b[r] + sum_c w[r][c] * x[c]
void affine(const double* w, const double* b, std::span<const double> x, std::vector<double>& out) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < out.size(); ++r) {
    double acc = b[r];
    const double* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

}  // namespace

std::size_t RegressorShape::param_count() const {
  return hidden * in_dim + hidden + hidden * hidden + hidden + heads * hidden + heads;
}

Regressor::Regressor(RegressorShape shape) : shape_(shape), params_(shape.param_count(), 0.0) {
  if (shape.in_dim == 0 || shape.hidden == 0 || shape.heads == 0) {
    throw DomainError("regressor dimensions must be positive");
  }
}

Regressor::Regressor(RegressorShape shape, std::vector<double> params)
    : Regressor(shape) {
  check_dim(params.size(), shape.param_count(), "regressor parameters");
  params_ = std::move(params);
}

Regressor Regressor::xavier_uniform(RegressorShape shape, std::uint64_t seed) {
  Regressor model(shape);
  std::mt19937_64 rng(seed);
  auto fill = [&](std::size_t offset, std::size_t fan_out, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < fan_out * fan_in; ++i) model.params_[offset + i] = dist(rng);
  };
  fill(model.w1_offset(), shape.hidden, shape.in_dim);
  fill(model.w2_offset(), shape.hidden, shape.hidden);
  fill(model.w3_offset(), shape.heads, shape.hidden);
  return model;
}

Regressor::Activations Regressor::forward_trace(std::span<const double> features) const {
  check_dim(features.size(), shape_.in_dim, "forward features");
  const double* p = params_.data();
  Activations acts;
  acts.input.assign(features.begin(), features.end());
  acts.hidden1.resize(shape_.hidden);
  acts.hidden2.resize(shape_.hidden);
  acts.output.resize(shape_.heads);

  affine(p + w1_offset(), p + b1_offset(), acts.input, acts.hidden1);
  for (double& h : acts.hidden1) h = std::tanh(h);
  affine(p + w2_offset(), p + b2_offset(), acts.hidden1, acts.hidden2);
  for (double& h : acts.hidden2) h = std::tanh(h);
  affine(p + w3_offset(), p + b3_offset(), acts.hidden2, acts.output);
  return acts;
}

std::vector<double> Regressor::forward(std::span<const double> features) const {
  return forward_trace(features).output;
}

void Regressor::backward(const Activations& acts, std::span<const double> upstream,
                         std::span<double> grads) const {
  check_dim(upstream.size(), shape_.heads, "backward upstream gradient");
  check_dim(grads.size(), params_.size(), "backward gradient buffer");
  check_dim(acts.input.size(), shape_.in_dim, "backward activations");

  const std::size_t in = shape_.in_dim;
  const std::size_t hid = shape_.hidden;
  const double* p = params_.data();
  const double* w2 = p + w2_offset();
  const double* w3 = p + w3_offset();
  double* g = grads.data();

  // heads
  std::vector<double> delta2(hid, 0.0);
  for (std::size_t k = 0; k < shape_.heads; ++k) {
    const double u = upstream[k];
    if (u == 0.0) continue;
    g[b3_offset() + k] += u;
    double* gw3 = g + w3_offset() + k * hid;
    const double* row = w3 + k * hid;
    for (std::size_t j = 0; j < hid; ++j) {
      gw3[j] += u * acts.hidden2[j];
      delta2[j] += u * row[j];
    }
  }
  for (std::size_t j = 0; j < hid; ++j) delta2[j] *= 1.0 - acts.hidden2[j] * acts.hidden2[j];

  // second trunk layer
  std::vector<double> delta1(hid, 0.0);
  for (std::size_t r = 0; r < hid; ++r) {
    const double d = delta2[r];
    g[b2_offset() + r] += d;
    double* gw2 = g + w2_offset() + r * hid;
    const double* row = w2 + r * hid;
    for (std::size_t c = 0; c < hid; ++c) {
      gw2[c] += d * acts.hidden1[c];
      delta1[c] += d * row[c];
    }
  }
  for (std::size_t j = 0; j < hid; ++j) delta1[j] *= 1.0 - acts.hidden1[j] * acts.hidden1[j];

  // first trunk layer
  for (std::size_t r = 0; r < hid; ++r) {
    const double d = delta1[r];
    g[b1_offset() + r] += d;
    double* gw1 = g + w1_offset() + r * in;
    for (std::size_t c = 0; c < in; ++c) gw1[c] += d * acts.input[c];
  }
}

Adam::Adam(std::size_t param_count, AdamOptions options)
    : options_(options), m_(param_count, 0.0), v_(param_count, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  check_dim(params.size(), m_.size(), "adam parameters");
  check_dim(grads.size(), m_.size(), "adam gradients");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw DivergenceError("non-finite gradient at parameter " + std::to_string(i));
    }
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(options_.beta1, t);
  const double correction2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * grads[i];
    v_[i] = options_.beta2 * v_[i] + (1.0 - options_.beta2) * grads[i] * grads[i];
    const double m_hat = m_[i] / correction1;
    const double v_hat = v_[i] / correction2;
    params[i] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.epsilon);
  }
}

void save_checkpoint(const std::string& path, const Regressor& model, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  const auto& shape = model.shape();
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n'
      << "in_dim " << shape.in_dim << '\n'
      << "hidden " << shape.hidden << '\n'
      << "heads " << shape.heads << '\n'
      << "seed " << seed << '\n'
      << "params " << model.params().size() << '\n';
  char buf[64];
  for (double v : model.params()) {
    std::snprintf(buf, sizeof buf, "%a\n", v);
    out << buf;
  }
  if (!out) throw std::runtime_error("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kCheckpointMagic) throw ParseError(path, 1, "not a checkpoint file");
  if (version != kCheckpointVersion) {
    throw ParseError(path, 1, "unsupported checkpoint version " + std::to_string(version));
  }

  auto field = [&](const char* key, std::size_t line) {
    std::string name;
    std::uint64_t value = 0;
    if (!(in >> name >> value) || name != key) {
      throw ParseError(path, line, std::string("expected '") + key + "'");
    }
    return value;
  };
  RegressorShape shape;
  shape.in_dim = field("in_dim", 2);
  shape.hidden = field("hidden", 3);
  shape.heads = field("heads", 4);
  const std::uint64_t seed = field("seed", 5);
  const std::size_t count = field("params", 6);
  if (count != shape.param_count()) throw ParseError(path, 6, "parameter count does not match shape");

  std::vector<double> params(count);
  std::string token;
  for (std::size_t i = 0; i < count; ++i) {
    if (!(in >> token)) throw ParseError(path, 7 + i, "truncated parameter list");
    char* end = nullptr;
    params[i] = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') throw ParseError(path, 7 + i, "bad number '" + token + "'");
  }
  return Checkpoint{Regressor(shape, std::move(params)), seed};
}

}  // namespace sbloss
