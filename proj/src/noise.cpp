#include "kendama/noise.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace kendama::noise {

namespace {

const boost::math::normal& standard_normal_law() {
  static const boost::math::normal law(0.0, 1.0);
  return law;
}

}  // namespace

double TruncNormalAxis::quantile(double u) const {
  if (sigma == 0.0) return mu;
  const auto& law = standard_normal_law();
  const double plo = boost::math::cdf(law, -kTrunc);
  const double phi = boost::math::cdf(law, kTrunc);
  const double p = std::clamp(plo + u * (phi - plo), plo, phi);
  const double z = std::clamp(boost::math::quantile(law, p), -kTrunc, kTrunc);
  return mu + sigma * z;
}

sets::Box NoiseModel::support() const {
  return {Vec2(axes[0].lo(), axes[1].lo()), Vec2(axes[0].hi(), axes[1].hi())};
}

void NoiseModel::validate() const {
  for (const auto& a : axes) {
    if (!std::isfinite(a.mu) || !std::isfinite(a.sigma) || a.sigma < 0.0) {
      throw std::invalid_argument("noise axes need finite mu and sigma >= 0");
    }
  }
}

std::vector<Vec2> sample_noise(const NoiseModel& model, rng::Engine& gen, std::size_t count) {
  std::vector<Vec2> out(count);
  for (auto& v : out) {
    const double u0 = rng::uniform_open01(gen);
    const double u1 = rng::uniform_open01(gen);
    v = Vec2(model.axes[0].quantile(u0), model.axes[1].quantile(u1));
  }
  return out;
}

ConfidenceSupport fit_confidence_support(const std::vector<Vec2>& samples, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1)");
  const std::size_t n = samples.size();
  if (n < 8) throw InsufficientSamples("at least 8 samples are needed to fit a confidence support");

  const double dof = static_cast<double>(n - 1);
  const double alpha = epsilon / 4.0;
  const double t = boost::math::quantile(boost::math::students_t(dof), 1.0 - alpha / 2.0);
  const boost::math::chi_squared chi2(dof);
  const double chi_hi = boost::math::quantile(chi2, 1.0 - alpha / 2.0);
  const double chi_lo = boost::math::quantile(chi2, alpha / 2.0);

  ConfidenceSupport cs;
  cs.n = n;
  cs.epsilon = epsilon;
  for (int k = 0; k < 2; ++k) {
    double mean = 0.0;
    for (const auto& s : samples) mean += s(k);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (const auto& s : samples) ss += (s(k) - mean) * (s(k) - mean);
    const double sd = std::sqrt(ss / dof);

    AxisInterval& ci = cs.param_cis[static_cast<std::size_t>(k)];
    ci.mean = mean;
    ci.sd = sd;
    ci.mu_lo = mean - t * sd / std::sqrt(static_cast<double>(n));
    ci.mu_hi = mean + t * sd / std::sqrt(static_cast<double>(n));
    ci.sigma_lo = sd * std::sqrt(dof / chi_hi);
    ci.sigma_hi = sd * std::sqrt(dof / chi_lo);
    cs.box.lo(k) = ci.mu_lo - TruncNormalAxis::kTrunc * ci.sigma_hi;
    cs.box.hi(k) = ci.mu_hi + TruncNormalAxis::kTrunc * ci.sigma_hi;
  }
  return cs;
}

double support_failure_rate(const NoiseModel& model, std::size_t n, double epsilon, int refits, std::uint64_t seed) {
  if (refits < 1) throw std::invalid_argument("refits must be positive");
  const sets::Box truth = model.support();
  int failures = 0;
  for (int r = 0; r < refits; ++r) {
    rng::Engine gen = rng::make_engine(rng::child_seed(seed, static_cast<std::uint64_t>(r)));
    const ConfidenceSupport cs = fit_confidence_support(sample_noise(model, gen, n), epsilon);
    if (!cs.box.contains_box(truth, 0.0)) ++failures;
  }
  return static_cast<double>(failures) / refits;
}

nlohmann::json to_json(const ConfidenceSupport& cs) {
  nlohmann::json axes = nlohmann::json::array();
  for (const auto& ci : cs.param_cis) {
    axes.push_back({{"mean", ci.mean},
                    {"sd", ci.sd},
                    {"mu_lo", ci.mu_lo},
                    {"mu_hi", ci.mu_hi},
                    {"sigma_lo", ci.sigma_lo},
                    {"sigma_hi", ci.sigma_hi}});
  }
  return {{"n", cs.n}, {"epsilon", cs.epsilon}, {"box", sets::to_json(cs.box)}, {"param_cis", axes}};
}

ConfidenceSupport confidence_support_from_json(const nlohmann::json& j) {
  ConfidenceSupport cs;
  cs.n = j.at("n").get<std::size_t>();
  cs.epsilon = j.at("epsilon").get<double>();
  const sets::ConvexSet box = sets::convex_set_from_json(j.at("box"));
  if (!std::holds_alternative<sets::Box>(box)) throw std::invalid_argument("confidence support must be a box");
  cs.box = std::get<sets::Box>(box);
  if (j.contains("param_cis")) {
    const auto& axes = j.at("param_cis");
    if (!axes.is_array() || axes.size() != 2) throw std::invalid_argument("param_cis must list two axes");
    for (std::size_t k = 0; k < 2; ++k) {
      const auto& a = axes[k];
      cs.param_cis[k] = {a.at("mean").get<double>(),     a.at("sd").get<double>(),
                         a.at("mu_lo").get<double>(),    a.at("mu_hi").get<double>(),
                         a.at("sigma_lo").get<double>(), a.at("sigma_hi").get<double>()};
    }
  }
  return cs;
}

nlohmann::json to_json(const NoiseModel& m) {
  return {{"mu", {m.axes[0].mu, m.axes[1].mu}}, {"sigma", {m.axes[0].sigma, m.axes[1].sigma}}};
}

NoiseModel noise_model_from_json(const nlohmann::json& j) {
  NoiseModel m;
  const auto mu = j.at("mu").get<std::vector<double>>();
  const auto sigma = j.at("sigma").get<std::vector<double>>();
  if (mu.size() != 2 || sigma.size() != 2) throw std::invalid_argument("noise mu and sigma need two entries");
  for (std::size_t k = 0; k < 2; ++k) m.axes[k] = {mu[k], sigma[k]};
  m.validate();
  return m;
}

}  // namespace kendama::noise
