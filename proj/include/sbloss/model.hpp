#ifndef SBLOSS_MODEL_HPP
#define SBLOSS_MODEL_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sbloss {

struct RegressorShape {
  std::size_t in_dim = 0;
  std::size_t hidden = 0;
  std::size_t heads = 0;

  std::size_t param_count() const;
  bool operator==(const RegressorShape&) const = default;
};

// Multi-task regressor: in_dim -> hidden -> hidden (tanh, shared) -> one linear head per aspect.
// Parameters live in one flat array laid out as
//   W1[hidden][in_dim] b1[hidden] W2[hidden][hidden] b2[hidden] W3[heads][hidden] b3[heads].
class Regressor {
 public:
  struct Activations {
    std::vector<double> input;
    std::vector<double> hidden1;
    std::vector<double> hidden2;
    std::vector<double> output;
  };

  explicit Regressor(RegressorShape shape);  // all-zero parameters
  Regressor(RegressorShape shape, std::vector<double> params);

  // Xavier-uniform weights, zero biases.
  static Regressor xavier_uniform(RegressorShape shape, std::uint64_t seed);

  const RegressorShape& shape() const { return shape_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  std::vector<double> forward(std::span<const double> features) const;
  Activations forward_trace(std::span<const double> features) const;

  // Accumulates d(sum_k upstream[k] * output[k]) / d(params) into grads.
  void backward(const Activations& acts, std::span<const double> upstream,
                std::span<double> grads) const;

  // Offsets into the flat parameter array.
  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const { return shape_.hidden * shape_.in_dim; }
  std::size_t w2_offset() const { return b1_offset() + shape_.hidden; }
  std::size_t b2_offset() const { return w2_offset() + shape_.hidden * shape_.hidden; }
  std::size_t w3_offset() const { return b2_offset() + shape_.hidden; }
  std::size_t b3_offset() const { return w3_offset() + shape_.heads * shape_.hidden; }

 private:
  RegressorShape shape_;
  std::vector<double> params_;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t param_count, AdamOptions options = {});

  // Bias-corrected Adam update. Throws DivergenceError on a non-finite gradient,
  // leaving params and moments untouched.
  void step(std::span<double> params, std::span<const double> grads);

  std::size_t steps() const { return steps_; }
  const AdamOptions& options() const { return options_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

 private:
  AdamOptions options_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t steps_ = 0;
};

struct Checkpoint {
  Regressor model;
  std::uint64_t seed = 0;
};

// Plain-text, versioned by a magic line; parameters are written as hex floats so
// a load restores them bit for bit.
void save_checkpoint(const std::string& path, const Regressor& model, std::uint64_t seed);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sbloss

#endif  // SBLOSS_MODEL_HPP
