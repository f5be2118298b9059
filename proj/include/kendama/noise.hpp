#pragma once

/**
 * @file noise.hpp
 * @brief Truncated-normal measurement noise and its learned confidence support.
 */

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "kendama/rng.hpp"
#include "kendama/sets.hpp"

namespace kendama::noise {

using Vec2 = Eigen::Vector2d;

class InsufficientSamples : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Normal N(mu, sigma²) truncated to mu ± 3 sigma.
struct TruncNormalAxis {
  static constexpr double kTrunc = 3.0;

  double mu = 0.0;
  double sigma = 0.0;

  double lo() const { return mu - kTrunc * sigma; }
  double hi() const { return mu + kTrunc * sigma; }
  /// Inverse CDF of the truncated law at u ∈ [0, 1].
  double quantile(double u) const;
};

/// Independent x and z axes. The true support is the product of the axis supports.
struct NoiseModel {
  std::array<TruncNormalAxis, 2> axes{TruncNormalAxis{0.0, 0.004}, TruncNormalAxis{0.0, 0.006}};

  sets::Box support() const;
  void validate() const;
};

std::vector<Vec2> sample_noise(const NoiseModel& model, rng::Engine& gen, std::size_t count);

struct AxisInterval {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, n − 1 denominator
  double mu_lo = 0.0;
  double mu_hi = 0.0;
  double sigma_lo = 0.0;
  double sigma_hi = 0.0;
};

/// Estimate V̂(n) of the support, meant to contain it with probability at least 1 − ε.
struct ConfidenceSupport {
  std::size_t n = 0;
  double epsilon = 0.1;
  sets::Box box;
  std::array<AxisInterval, 2> param_cis{};
};

/**
 * Per axis: Student-t interval for μ and chi-square interval for σ, each at
 * level 1 − ε/4, then the box [μ_lo − 3σ_hi, μ_hi + 3σ_hi]. Throws
 * InsufficientSamples below 8 samples, std::invalid_argument for ε ∉ (0, 1).
 */
ConfidenceSupport fit_confidence_support(const std::vector<Vec2>& samples, double epsilon);

/// Fraction of `refits` fresh fits of size n whose box misses part of the true support.
double support_failure_rate(const NoiseModel& model, std::size_t n, double epsilon, int refits, std::uint64_t seed);

nlohmann::json to_json(const ConfidenceSupport& cs);
ConfidenceSupport confidence_support_from_json(const nlohmann::json& j);

nlohmann::json to_json(const NoiseModel& m);
NoiseModel noise_model_from_json(const nlohmann::json& j);

}  // namespace kendama::noise
