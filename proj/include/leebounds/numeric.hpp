#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace leebounds {

double normal_cdf(double x);
double normal_pdf(double x);
// Inverse of normal_cdf; returns -inf / +inf at 0 / 1.
double normal_quantile(double p);

double logistic(double t);
// log(1 + exp(t)) without overflow.
double log1p_exp(double t);

double weighted_mean(const Eigen::Ref<const Eigen::VectorXd>& v,
                     const Eigen::Ref<const Eigen::VectorXd>& w);

// Weights rescaled to mean one over the given vector.
Eigen::VectorXd unit_mean_weights(const Eigen::Ref<const Eigen::VectorXd>& w);

// SplitMix64 mixing; used to derive independent per-task seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// FNV-1a hash of a byte string (config fingerprints).
std::uint64_t fnv1a64(const std::string& text);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on (0, 1), never exactly 0 or 1.
  double uniform();
  double normal();
  double exponential();
  double logistic_draw();
  bool bernoulli(double p) { return uniform() < p; }
  std::size_t index(std::size_t n);  // uniform on {0, ..., n-1}
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Runs fn(i) for i in [0, n). Results must be written to per-index slots so
// that the outcome does not depend on the number of workers.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace leebounds
