#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "catvil/autodiff.hpp"

namespace catvil {

/// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0);

/// Deterministic random source. Distributions are implemented here rather than
/// taken from <random> so that streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  int uniform_int(int n);
  double normal();
  int poisson(double mean);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0;
};

struct NamedParam {
  std::string name;
  Param* param;
};
using ParamList = std::vector<NamedParam>;

/// Affine map y = x W + b with W stored (in x out).
struct Linear {
  Param weight;
  Param bias;
  bool has_bias = true;

  Linear() = default;
  Linear(int in, int out, bool with_bias = true);

  ad::Var operator()(ad::Graph& g, ad::Var x);
  void init(Rng& rng);
  void collect(ParamList& out, const std::string& prefix);
  int in_dim() const { return static_cast<int>(weight.value.rows()); }
  int out_dim() const { return static_cast<int>(weight.value.cols()); }
};

struct LayerNormParams {
  Param gamma;
  Param beta;

  LayerNormParams() = default;
  explicit LayerNormParams(int dim);

  ad::Var operator()(ad::Graph& g, ad::Var x);
  void collect(ParamList& out, const std::string& prefix);
};

/// Fan-in scaled uniform init U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void init_fan_in_uniform(Param& p, int fan_in, Rng& rng);
void init_normal(Param& p, double stddev, Rng& rng);

std::size_t count_parameters(const ParamList& params);
void zero_grads(const ParamList& params);

}  // namespace catvil
