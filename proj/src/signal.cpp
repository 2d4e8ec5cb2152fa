#include "semcom/signal.hpp"

#include <cmath>
#include <limits>

#include "semcom/errors.hpp"

namespace semcom::signal {

double mean_symbol_power(const ComplexSignal& s) {
  if (s.symbols.empty()) throw ZeroPowerError("empty signal");
  double acc = 0.0;
  for (const auto& z : s.symbols) acc += std::norm(z);
  return acc / static_cast<double>(s.symbols.size());
}

ComplexSignal power_normalize(const ComplexSignal& s) {
  const double p = mean_symbol_power(s);
  if (p <= 0.0) throw ZeroPowerError("all symbols are zero");
  const double scale = 1.0 / std::sqrt(p);
  ComplexSignal out;
  out.symbols.reserve(s.symbols.size());
  for (const auto& z : s.symbols) out.symbols.push_back(z * scale);
  return out;
}

double snr_db_to_noise_power(double snr_db, double signal_power) {
  if (!(signal_power > 0.0)) throw ZeroPowerError("signal power must be positive");
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  return signal_power / std::pow(10.0, snr_db / 10.0);
}

std::complex<double> draw_gain(const ChannelModel& model, Rng& rng) {
  switch (model.kind) {
    case FadingKind::Awgn:
      return {1.0, 0.0};
    case FadingKind::Rayleigh: {
      // CN(0, 1): each real coordinate N(0, 1/2)
      const double s = std::sqrt(0.5);
      return {s * rng.gaussian(), s * rng.gaussian()};
    }
    case FadingKind::Rician: {
      const double r = model.rician_factor;
      if (!(r > 0.0)) throw InvalidRicianFactorError("rician factor must be positive");
      const double mu = std::sqrt(r / (r + 1.0));
      const double sigma = std::sqrt(1.0 / (r + 1.0));
      const double s = sigma * std::sqrt(0.5);
      return {mu + s * rng.gaussian(), s * rng.gaussian()};
    }
  }
  throw Error("unreachable channel kind");
}

ChannelOutput apply_channel(const ComplexSignal& x, const ChannelModel& model,
                            double snr_db, Rng& rng) {
  ChannelOutput out;
  out.realization.gain = draw_gain(model, rng);
  const double n0 = snr_db_to_noise_power(snr_db);
  out.realization.noise_sigma = std::sqrt(n0 / 2.0);
  out.received.symbols.reserve(x.symbols.size());
  const double sigma = out.realization.noise_sigma;
  for (const auto& z : x.symbols) {
    std::complex<double> n{0.0, 0.0};
    if (sigma > 0.0) n = {sigma * rng.gaussian(), sigma * rng.gaussian()};
    out.received.symbols.push_back(out.realization.gain * z + n);
  }
  return out;
}

ComplexSignal equalize(const ComplexSignal& y, const ChannelRealization& real) {
  if (std::abs(real.gain) < 1e-12) throw SingularGainError("channel gain too small");
  ComplexSignal out;
  out.symbols.reserve(y.symbols.size());
  for (const auto& z : y.symbols) out.symbols.push_back(z / real.gain);
  return out;
}

std::vector<double> to_real_view(const ComplexSignal& s) {
  std::vector<double> out;
  out.reserve(2 * s.symbols.size());
  for (const auto& z : s.symbols) {
    out.push_back(z.real());
    out.push_back(z.imag());
  }
  return out;
}

ComplexSignal from_real_view(std::span<const double> reals) {
  if (reals.size() % 2 != 0) throw ShapeMismatchError("real view length must be even");
  ComplexSignal out;
  out.symbols.reserve(reals.size() / 2);
  for (size_t i = 0; i + 1 < reals.size(); i += 2)
    out.symbols.emplace_back(reals[i], reals[i + 1]);
  return out;
}

}  // namespace semcom::signal
