#include "catvil/params.hpp"

#include <cmath>
#include <stdexcept>

namespace catvil {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

int Rng::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
  return static_cast<int>(uniform() * n);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

int Rng::poisson(double mean) {
  if (mean <= 0) return 0;
  // Knuth's multiplication method; split large means so exp(-mean) stays representable.
  int total = 0;
  while (mean > 0) {
    double chunk = std::min(mean, 500.0);
    mean -= chunk;
    const double limit = std::exp(-chunk);
    double p = 1.0;
    int k = 0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    total += k - 1;
  }
  return total;
}

Linear::Linear(int in, int out, bool with_bias) : weight(in, out), bias(1, out), has_bias(with_bias) {
  if (in < 1 || out < 1) throw std::invalid_argument("Linear: dimensions must be positive");
}

ad::Var Linear::operator()(ad::Graph& g, ad::Var x) {
  ad::Var y = ad::matmul(x, g.param(weight));
  return has_bias ? ad::add_row(y, g.param(bias)) : y;
}

void Linear::init(Rng& rng) {
  init_fan_in_uniform(weight, in_dim(), rng);
  bias.value.setZero();
}

void Linear::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", &weight});
  if (has_bias) out.push_back({prefix + ".bias", &bias});
}

LayerNormParams::LayerNormParams(int dim) : gamma(Matrix::Ones(1, dim)), beta(1, dim) {}

ad::Var LayerNormParams::operator()(ad::Graph& g, ad::Var x) { return ad::layer_norm(x, g.param(gamma), g.param(beta)); }

void LayerNormParams::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".gamma", &gamma});
  out.push_back({prefix + ".beta", &beta});
}

void init_fan_in_uniform(Param& p, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng.uniform(-bound, bound);
}

void init_normal(Param& p, double stddev, Rng& rng) {
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = stddev * rng.normal();
}

std::size_t count_parameters(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += static_cast<std::size_t>(p.param->size());
  return n;
}

void zero_grads(const ParamList& params) {
  for (const auto& p : params) p.param->zero_grad();
}

}  // namespace catvil
