#pragma once

#include <complex>
#include <span>
#include <vector>

#include "semcom/rng.hpp"

namespace semcom::signal {

// Baseband symbol vector. Transmit signals are power normalized: mean
// per-symbol power (1/K) * sum |x_k|^2 == 1.
struct ComplexSignal {
  std::vector<std::complex<double>> symbols;

  size_t size() const { return symbols.size(); }
};

double mean_symbol_power(const ComplexSignal& s);

// Scales the signal to unit mean per-symbol power. Throws ZeroPowerError when
// every symbol is zero.
ComplexSignal power_normalize(const ComplexSignal& s);

// N0 = signal_power / 10^(snr_db / 10). Noise per real coordinate has
// variance N0 / 2. snr_db = +inf yields 0.
double snr_db_to_noise_power(double snr_db, double signal_power = 1.0);

enum class FadingKind { Awgn, Rayleigh, Rician };

struct ChannelModel {
  FadingKind kind = FadingKind::Awgn;
  // Ratio of line-of-sight to scattered power; used by Rician only.
  double rician_factor = 2.0;

  bool operator==(const ChannelModel&) const = default;

  static ChannelModel awgn() { return {FadingKind::Awgn, 2.0}; }
  static ChannelModel rayleigh() { return {FadingKind::Rayleigh, 2.0}; }
  static ChannelModel rician(double r) { return {FadingKind::Rician, r}; }
};

// One block-fading draw: a single complex gain held for the whole block, plus
// the noise level. noise_sigma is the std per real coordinate, so noise power
// per complex symbol is 2 * noise_sigma^2.
struct ChannelRealization {
  std::complex<double> gain{1.0, 0.0};
  double noise_sigma = 0.0;
};

// Draws the block gain. AWGN: 1. Rayleigh: CN(0,1). Rician with factor r:
// CN(mu_h, sigma_h^2) with mu_h = sqrt(r/(r+1)), sigma_h = sqrt(1/(r+1)).
// Throws InvalidRicianFactorError when r <= 0.
std::complex<double> draw_gain(const ChannelModel& model, Rng& rng);

struct ChannelOutput {
  ComplexSignal received;
  ChannelRealization realization;
};

// y = h x + n per block. Expects x power normalized; deterministic per rng
// state.
ChannelOutput apply_channel(const ComplexSignal& x, const ChannelModel& model,
                            double snr_db, Rng& rng);

// Zero-forcing with known channel state: y_k / h. Throws SingularGainError
// when |h| < 1e-12.
ComplexSignal equalize(const ComplexSignal& y, const ChannelRealization& real);

// Interleaved real view (re0, im0, re1, im1, ...). This is the payload shape
// the lossy-auth module signs.
std::vector<double> to_real_view(const ComplexSignal& s);
ComplexSignal from_real_view(std::span<const double> reals);

}  // namespace semcom::signal
