#include "semcom/dp.hpp"

#include <cmath>
#include <numbers>

#include "semcom/errors.hpp"

namespace semcom::dp {

namespace {

void check_budget(const PrivacyBudget& b) {
  if (!(b.epsilon > 0.0)) throw OutOfRangeError("epsilon must be positive");
  if (!(b.delta > 0.0 && b.delta < 1.0)) throw OutOfRangeError("delta must be in (0,1)");
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// log Phi(z), stable in the deep lower tail.
double log_std_normal_cdf(double z) {
  if (z > -34.0) return std::log(std_normal_cdf(z));
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - std::log(-z) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log(series);
}

constexpr double kEpsilonCap = 1000.0;
constexpr int kMaxBisection = 200;

}  // namespace

double NoiseProfile::effective_sigma_channel() const {
  if (sigma_channel == 0.0) return 0.0;
  if (channel_mode == ChannelAccounting::AwgnExact) return sigma_channel;
  if (!(h_min > 0.0)) throw OutOfRangeError("worst-case |h| must be positive");
  return sigma_channel / h_min;
}

double gaussian_mechanism_delta(double epsilon, double sigma, double sensitivity) {
  if (!(sigma > 0.0)) throw OutOfRangeError("sigma must be positive");
  if (!(sensitivity > 0.0)) throw OutOfRangeError("sensitivity must be positive");
  const double a = sensitivity / (2.0 * sigma) - epsilon * sigma / sensitivity;
  const double b = -sensitivity / (2.0 * sigma) - epsilon * sigma / sensitivity;
  const double term1 = std_normal_cdf(a);
  const double log_term2 = epsilon + log_std_normal_cdf(b);
  const double term2 = log_term2 < -745.0 ? 0.0 : std::exp(log_term2);
  return term1 - term2;
}

double analytic_gaussian_sigma(const PrivacyBudget& budget, double sensitivity) {
  check_budget(budget);
  if (!(sensitivity > 0.0)) throw OutOfRangeError("sensitivity must be positive");
  int rounds = 0;
  // Grow an upper bracket that satisfies the condition.
  double hi = sensitivity;
  while (gaussian_mechanism_delta(budget.epsilon, hi, sensitivity) > budget.delta) {
    hi *= 2.0;
    if (++rounds > kMaxBisection) throw NonConvergenceError("no satisfying sigma found");
  }
  double lo = hi / 2.0;
  while (lo > 1e-300 &&
         gaussian_mechanism_delta(budget.epsilon, lo, sensitivity) <= budget.delta) {
    hi = lo;
    lo /= 2.0;
    if (++rounds > kMaxBisection) throw NonConvergenceError("lower bracket not found");
  }
  while ((hi - lo) > 1e-12 * hi) {
    if (++rounds > kMaxBisection) throw NonConvergenceError("bisection stalled");
    const double mid = 0.5 * (lo + hi);
    if (gaussian_mechanism_delta(budget.epsilon, mid, sensitivity) <= budget.delta)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

double sigma_to_budget(double sigma, double sensitivity, double delta) {
  if (!(sigma > 0.0)) throw OutOfRangeError("sigma must be positive");
  if (!(sensitivity > 0.0)) throw OutOfRangeError("sensitivity must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw OutOfRangeError("delta must be in (0,1)");
  if (gaussian_mechanism_delta(kEpsilonCap, sigma, sensitivity) > delta)
    throw BudgetOutOfRangeError("sigma too small for any epsilon <= 1000");
  double lo = 0.0, hi = kEpsilonCap;
  // Shrink quickly first so typical budgets do not pay for the huge range.
  while (hi > 1e-12 &&
         gaussian_mechanism_delta(hi / 2.0, sigma, sensitivity) <= delta) {
    hi /= 2.0;
    lo = 0.0;
  }
  for (int round = 0; round < kMaxBisection && (hi - lo) > 1e-12 * std::max(hi, 1.0);
       ++round) {
    const double mid = 0.5 * (lo + hi);
    if (gaussian_mechanism_delta(mid, sigma, sensitivity) <= delta)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

CompositionResult compose(std::span<const PrivacyBudget> budgets, double delta_hat) {
  if (budgets.empty()) throw EmptyListError("compose needs at least one mechanism");
  if (!(delta_hat > 0.0 && delta_hat < 1.0))
    throw OutOfRangeError("delta_hat must be in (0,1)");
  double sum_eps = 0.0, sum_sq = 0.0, sum_adv = 0.0;
  double keep = 1.0;
  for (const auto& b : budgets) {
    if (b.epsilon < 0.0) throw OutOfRangeError("epsilon must be nonnegative");
    if (b.delta < 0.0 || b.delta > 1.0) throw OutOfRangeError("delta must be in [0,1]");
    sum_eps += b.epsilon;
    sum_sq += b.epsilon * b.epsilon;
    // (e^x - 1)/(e^x + 1) == tanh(x/2), overflow free
    sum_adv += b.epsilon * std::tanh(b.epsilon / 2.0);
    keep *= 1.0 - b.delta;
  }
  CompositionResult res;
  res.terms[0] = sum_eps;
  res.terms[1] = sum_adv + std::sqrt(2.0 * sum_sq *
                                     std::log(std::numbers::e +
                                              std::sqrt(sum_sq) / delta_hat));
  res.terms[2] = sum_adv + std::sqrt(2.0 * sum_sq * std::log(1.0 / delta_hat));
  res.epsilon_hat = std::min({res.terms[0], res.terms[1], res.terms[2]});
  res.delta_total = 1.0 - (1.0 - delta_hat) * keep;
  return res;
}

namespace {

struct FixedSources {
  std::vector<double> sigmas;  // active fixed noise sources
  bool model_active = false;
  bool channel_active = false;
};

FixedSources active_sources(const NoiseProfile& profile) {
  FixedSources fs;
  if (profile.sigma_model > 0.0) {
    fs.sigmas.push_back(profile.sigma_model);
    fs.model_active = true;
  }
  const double chan = profile.effective_sigma_channel();
  if (chan > 0.0) {
    fs.sigmas.push_back(chan);
    fs.channel_active = true;
  }
  return fs;
}

// Budgets of the fixed sources under a per-mechanism delta split; nullopt when
// some source is too weak to certify any epsilon <= 1000.
std::optional<std::vector<PrivacyBudget>> fixed_budgets(const FixedSources& fs,
                                                        double sensitivity,
                                                        double delta_each) {
  std::vector<PrivacyBudget> budgets;
  for (double s : fs.sigmas) {
    try {
      budgets.push_back({sigma_to_budget(s, sensitivity, delta_each), delta_each});
    } catch (const BudgetOutOfRangeError&) {
      return std::nullopt;
    }
  }
  return budgets;
}

}  // namespace

CalibrationResult calibrate(const PrivacyBudget& target, const NoiseProfile& profile,
                            double sensitivity, size_t symbol_count) {
  check_budget(target);
  if (!(sensitivity > 0.0)) sensitivity = sensitivity_bound(symbol_count);
  const FixedSources fs = active_sources(profile);
  const double delta_hat = target.delta / 2.0;

  auto fill_result = [&](CalibrationResult& res,
                         const std::vector<PrivacyBudget>& budgets) {
    size_t k = 0;
    if (fs.model_active) res.eps_model = budgets[k++].epsilon;
    if (fs.channel_active) res.eps_channel = budgets[k++].epsilon;
    if (k < budgets.size()) res.eps_dp = budgets[k].epsilon;
  };

  // First ask whether model and channel noise alone already reach the target.
  if (!fs.sigmas.empty()) {
    const double delta_each = target.delta / (2.0 * static_cast<double>(fs.sigmas.size()));
    if (auto budgets = fixed_budgets(fs, sensitivity, delta_each)) {
      const CompositionResult comp = compose(*budgets, delta_hat);
      if (comp.epsilon_hat <= target.epsilon && comp.delta_total <= target.delta) {
        CalibrationResult res;
        res.sigma_dp = 0.0;
        res.composed = comp;
        res.delta_each = delta_each;
        res.delta_hat = delta_hat;
        fill_result(res, *budgets);
        return res;
      }
    }
  }

  // Otherwise add the privacy mechanism and find the smallest sigma_dp.
  const size_t k = fs.sigmas.size() + 1;
  const double delta_each = target.delta / (2.0 * static_cast<double>(k));
  const auto base = fixed_budgets(fs, sensitivity, delta_each);

  auto attempt = [&](double sigma_dp) -> std::optional<CompositionResult> {
    if (!base) return std::nullopt;
    std::vector<PrivacyBudget> budgets = *base;
    try {
      budgets.push_back({sigma_to_budget(sigma_dp, sensitivity, delta_each), delta_each});
    } catch (const BudgetOutOfRangeError&) {
      return std::nullopt;
    }
    const CompositionResult comp = compose(budgets, delta_hat);
    if (comp.epsilon_hat <= target.epsilon && comp.delta_total <= target.delta)
      return comp;
    return std::nullopt;
  };

  const double sigma_cap = kEpsilonCap * sensitivity;
  if (!attempt(sigma_cap))
    throw UnachievableError(
        "target budget unreachable even at the privacy-noise cap; under "
        "composition accounting extra mechanisms only raise the bound");

  double lo = 0.0, hi = sigma_cap;
  for (int round = 0; round < kMaxBisection && (hi - lo) > 1e-9 * hi; ++round) {
    const double mid = 0.5 * (lo + hi);
    if (attempt(mid))
      hi = mid;
    else
      lo = mid;
  }

  CalibrationResult res;
  res.sigma_dp = hi;
  res.delta_each = delta_each;
  res.delta_hat = delta_hat;
  std::vector<PrivacyBudget> budgets = base ? *base : std::vector<PrivacyBudget>{};
  budgets.push_back({sigma_to_budget(hi, sensitivity, delta_each), delta_each});
  res.composed = compose(budgets, delta_hat);
  fill_result(res, budgets);
  return res;
}

double aggregate_variance_budget(const NoiseProfile& profile, double sigma_dp,
                                 double sensitivity, double delta) {
  const double chan = profile.effective_sigma_channel();
  const double total = std::sqrt(sigma_dp * sigma_dp +
                                 profile.sigma_model * profile.sigma_model +
                                 chan * chan);
  if (!(total > 0.0)) throw OutOfRangeError("no noise to account for");
  return sigma_to_budget(total, sensitivity, delta);
}

signal::ComplexSignal apply_dp_noise(const signal::ComplexSignal& x, double sigma_dp,
                                     Rng& rng) {
  if (sigma_dp < 0.0) throw OutOfRangeError("sigma must be nonnegative");
  if (sigma_dp == 0.0) return x;
  signal::ComplexSignal out;
  out.symbols.reserve(x.symbols.size());
  for (const auto& z : x.symbols)
    out.symbols.emplace_back(z.real() + sigma_dp * rng.gaussian(),
                             z.imag() + sigma_dp * rng.gaussian());
  return out;
}

double sensitivity_bound(size_t symbol_count) {
  if (symbol_count == 0) throw OutOfRangeError("symbol count must be positive");
  return 2.0 * std::sqrt(static_cast<double>(symbol_count));
}

}  // namespace semcom::dp
