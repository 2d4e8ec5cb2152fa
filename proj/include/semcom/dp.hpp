#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "semcom/rng.hpp"
#include "semcom/signal.hpp"

namespace semcom::dp {

struct PrivacyBudget {
  double epsilon = 0.0;  // > 0
  double delta = 0.0;    // in (0, 1)
};

struct MechanismSpec {
  double sigma = 0.0;        // Gaussian std per real coordinate
  double sensitivity = 0.0;  // L2 over the real view of the released vector
};

enum class ChannelAccounting {
  AwgnExact,        // h = 1, channel noise counts at face value
  FadingWorstCase,  // channel noise benefit scaled by the worst-case |h|
};

struct NoiseProfile {
  double sigma_model = 0.0;    // std per real coordinate
  double sigma_channel = 0.0;  // std per real coordinate
  ChannelAccounting channel_mode = ChannelAccounting::AwgnExact;
  double h_min = 1.0;  // worst-case |h| over the block, fading mode only

  // Channel noise as seen on the released vector after the h scaling.
  double effective_sigma_channel() const;
};

// delta achieved by the Gaussian mechanism at (epsilon, sigma, sensitivity):
// Phi(D/(2s) - e s/D) - exp(e) * Phi(-D/(2s) - e s/D), evaluated stably for
// large epsilon.
double gaussian_mechanism_delta(double epsilon, double sigma, double sensitivity);

// Smallest sigma such that the mechanism satisfies the budget, by bisection
// to relative tolerance 1e-12. Throws NonConvergenceError after 200 rounds.
double analytic_gaussian_sigma(const PrivacyBudget& budget, double sensitivity);

// Smallest epsilon in (0, 1000] satisfied by the given sigma. Throws
// BudgetOutOfRangeError when even epsilon = 1000 fails.
double sigma_to_budget(double sigma, double sensitivity, double delta);

struct CompositionResult {
  double epsilon_hat = 0.0;
  double delta_total = 0.0;
  std::array<double, 3> terms{};  // basic sum and the two advanced bounds
};

// Heterogeneous composition: epsilon_hat is the minimum of the three printed
// candidate bounds; delta_total = 1 - (1 - delta_hat) * prod(1 - delta_i).
CompositionResult compose(std::span<const PrivacyBudget> budgets, double delta_hat);

struct CalibrationResult {
  double sigma_dp = 0.0;
  std::optional<double> eps_model;
  std::optional<double> eps_channel;
  std::optional<double> eps_dp;
  CompositionResult composed;
  double delta_each = 0.0;  // per-mechanism delta split
  double delta_hat = 0.0;
};

// Joint model-channel calibration under the composition accounting. Splits
// delta as delta/(2k) per active mechanism and delta/2 for the composition
// slack; returns sigma_dp = 0 when model and channel noise alone meet the
// target, otherwise bisects for the smallest sufficient privacy noise.
// Throws UnachievableError when no sigma_dp in (0, 1000 * sensitivity] works
// (composition can only degrade as mechanisms are added).
CalibrationResult calibrate(const PrivacyBudget& target, const NoiseProfile& profile,
                            double sensitivity, size_t symbol_count);

// Single-mechanism accounting: the released vector carries total std
// sqrt(sigma_dp^2 + sigma_model^2 + effective_sigma_channel^2) per
// coordinate; one Gaussian mechanism, no composition.
double aggregate_variance_budget(const NoiseProfile& profile, double sigma_dp,
                                 double sensitivity, double delta);

// Adds independent N(0, sigma_dp^2) to every real coordinate before the
// channel. No renormalization afterward, so the accounting sigma equals the
// injected sigma; callers report the power overhead instead.
signal::ComplexSignal apply_dp_noise(const signal::ComplexSignal& x, double sigma_dp,
                                     Rng& rng);

// L2 diameter of the set of power-normalized signals with K symbols: 2*sqrt(K).
double sensitivity_bound(size_t symbol_count);

}  // namespace semcom::dp
