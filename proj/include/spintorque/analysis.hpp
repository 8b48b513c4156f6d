#pragma once

// Spectral estimation, curve fitting and temperature extraction from angle series.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <fftw3.h>
#include <Eigen/Dense>

#include "spintorque/constants.hpp"
#include "spintorque/errors.hpp"
#include "spintorque/lsq.hpp"
#include "spintorque/model.hpp"

namespace spintorque {

// ---------------------------------------------------------------------------
// Power spectral density

struct Psd {
  std::vector<double> freqs;   // Hz
  std::vector<double> values;  // rad^2/Hz, one-sided
  int segment_count = 0;
  std::string window_name = "hann";
  double resolution_bw = 0.0;  // Hz, equivalent noise bandwidth of the window

  /// Integral over frequency; equals the series variance.
  double integral() const {
    if (freqs.size() < 2) return 0.0;
    const double df = freqs[1] - freqs[0];
    return std::accumulate(values.begin(), values.end(), 0.0) * df;
  }
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// |FFT|^2 of real input (length n), bins 0..n/2.
class RealPowerSpectrum {
 public:
  explicit RealPowerSpectrum(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealPowerSpectrum() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealPowerSpectrum(const RealPowerSpectrum&) = delete;
  RealPowerSpectrum& operator=(const RealPowerSpectrum&) = delete;

  double* input() { return in_; }
  void power(std::vector<double>& out) {
    fftw_execute(plan_);
    out.resize(n_ / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

 private:
  std::size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

inline std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) w[k] = 0.5 - 0.5 * std::cos(constants::two_pi * k / n);  // periodic
  return w;
}

}  // namespace detail

/// Welch estimate: Hann-windowed, mean-removed segments, averaged, one-sided density.
inline Psd welch_psd(const std::vector<double>& x, double sample_interval, std::size_t segment_len,
                     double overlap = 0.5) {
  if (!(sample_interval > 0)) throw ConfigError("welch_psd: sample interval must be positive");
  if (!(overlap >= 0 && overlap < 1)) throw ConfigError("welch_psd: overlap must be in [0, 1)");
  if (segment_len < 4 || segment_len > x.size()) throw TooShort("series shorter than one Welch segment");
  const std::size_t step = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(segment_len * (1.0 - overlap))));
  const std::size_t n_seg = 1 + (x.size() - segment_len) / step;
  const double fs = 1.0 / sample_interval;

  const auto w = detail::hann(segment_len);
  const double s1 = std::accumulate(w.begin(), w.end(), 0.0);
  const double s2 = std::inner_product(w.begin(), w.end(), w.begin(), 0.0);

  detail::RealPowerSpectrum fft(segment_len);
  std::vector<double> acc(segment_len / 2 + 1, 0.0), pw;
  for (std::size_t s = 0; s < n_seg; ++s) {
    const double* seg = x.data() + s * step;
    const double mean = std::accumulate(seg, seg + segment_len, 0.0) / segment_len;
    for (std::size_t k = 0; k < segment_len; ++k) fft.input()[k] = (seg[k] - mean) * w[k];
    fft.power(pw);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += pw[k];
  }

  Psd psd;
  psd.segment_count = static_cast<int>(n_seg);
  psd.resolution_bw = fs * s2 / (s1 * s1);
  psd.freqs.resize(acc.size());
  psd.values.resize(acc.size());
  const double scale = 1.0 / (fs * s2 * static_cast<double>(n_seg));
  for (std::size_t k = 0; k < acc.size(); ++k) {
    psd.freqs[k] = fs * k / segment_len;
    const bool edge = k == 0 || (segment_len % 2 == 0 && k == acc.size() - 1);
    psd.values[k] = acc[k] * scale * (edge ? 1.0 : 2.0);
  }
  return psd;
}

/// Mean of PSDs on identical frequency grids (segment counts add).
inline Psd average_psd(const std::vector<Psd>& parts) {
  if (parts.empty()) throw TooShort("no spectra to average");
  Psd out = parts.front();
  out.segment_count = 0;
  std::fill(out.values.begin(), out.values.end(), 0.0);
  for (const auto& p : parts) {
    if (p.freqs != out.freqs) throw ConfigError("average_psd: frequency grids differ");
    for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] += p.values[k] / parts.size();
    out.segment_count += p.segment_count;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lorentzian PSD fit

/// One-sided thermal libration spectrum 2c / ((w0^2 - w^2)^2 + gamma^2 w^2), w = 2 pi f.
/// With c = 2 gamma k T / I it integrates to k T / (I w0^2).
inline double libration_psd(double f_hz, double omega0, double gamma, double c) {
  const double w = constants::two_pi * f_hz;
  const double d = omega0 * omega0 - w * w;
  return 2.0 * c / (d * d + gamma * gamma * w * w);
}

struct PsdFitInit {
  double omega_phi = 0.0;        // rad/s
  double gamma = 0.0;            // rad/s
  double amplitude_scale = 0.0;  // rad^2/s^3
};

struct PsdFit {
  double omega_phi_hat = 0.0;    // rad/s
  double gamma_hat = 0.0;        // rad/s
  double amplitude_scale = 0.0;  // c = 2 gamma k T / I
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();  // (omega, gamma, ln c)
  double residual_norm = 0.0;    // of the log residuals
  int iterations = 0;
};

/// Weighted (logarithmic) least-squares fit of the thermal libration spectrum.
/// `band_hz` defaults to the peak +- 15 FWHM.
inline PsdFit fit_psd_lorentzian(const Psd& psd, std::optional<PsdFitInit> init = std::nullopt,
                                 std::optional<std::pair<double, double>> band_hz = std::nullopt) {
  if (psd.values.size() < 8) throw TooShort("spectrum too short to fit");
  std::vector<double> sorted(psd.values.begin() + 1, psd.values.end());
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  const auto peak_it = std::max_element(psd.values.begin() + 1, psd.values.end());
  const auto ip = static_cast<std::size_t>(peak_it - psd.values.begin());
  if (!(*peak_it > 5.0 * median)) throw NoPeak("no resolvable peak (peak/median <= 5)");

  if (!init) {
    const double half = 0.5 * *peak_it;
    std::size_t lo = ip, hi = ip;
    while (lo > 1 && psd.values[lo] > half) --lo;
    while (hi + 1 < psd.values.size() && psd.values[hi] > half) ++hi;
    const double df = psd.freqs[1] - psd.freqs[0];
    const double fwhm = std::max(psd.freqs[hi] - psd.freqs[lo], df);
    const double w0 = constants::two_pi * psd.freqs[ip];
    const double g = constants::two_pi * fwhm;
    init = PsdFitInit{w0, g, *peak_it * g * g * w0 * w0 / 2.0};
  }
  if (!band_hz) {
    const double f0 = init->omega_phi / constants::two_pi, fw = init->gamma / constants::two_pi;
    band_hz = std::pair{std::max(f0 - 15.0 * fw, 0.0), f0 + 15.0 * fw};
  }

  std::vector<std::size_t> idx;
  for (std::size_t k = 1; k < psd.freqs.size(); ++k)
    if (psd.freqs[k] >= band_hz->first && psd.freqs[k] <= band_hz->second && psd.values[k] > 0) idx.push_back(k);
  if (idx.size() < 4) throw TooShort("too few spectral bins in the fit band");

  const ResidualFn f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    r.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j)
      r[static_cast<Eigen::Index>(j)] =
          std::log(libration_psd(psd.freqs[idx[j]], x[0], x[1], std::exp(x[2]))) - std::log(psd.values[idx[j]]);
  };
  Eigen::VectorXd x0(3);
  x0 << init->omega_phi, init->gamma, std::log(init->amplitude_scale);
  const LsqResult res = least_squares(f, x0, static_cast<Eigen::Index>(idx.size()));

  PsdFit fit;
  fit.omega_phi_hat = std::abs(res.x[0]);
  fit.gamma_hat = std::abs(res.x[1]);
  fit.amplitude_scale = std::exp(res.x[2]);
  fit.covariance = res.covariance;
  fit.residual_norm = res.residual_norm;
  fit.iterations = res.iterations;
  if (!(fit.gamma_hat > 0)) throw NoConvergence(res.iterations, res.residual_norm);
  return fit;
}

// ---------------------------------------------------------------------------
// Ring-down fit

struct RingdownFit {
  double A1 = 0.0, omega_eff = 0.0, phase1 = 0.0, gamma_eff = 0.0;
  double A2 = 0.0, omega2 = 0.0, phase2 = 0.0, gamma2 = 0.0;
  double A0 = 0.0;
  double residual_norm = 0.0;
  bool phase1_constrained = true;
  bool phase2_constrained = false;
  bool two_modes = false;
  int iterations = 0;

  /// A1 sin(w t + p) e^{-g t / 2} + A2 sin(w2 t + p2) e^{-g2 t / 2} + A0.
  double operator()(double t) const {
    double y = A0;
    if (A1 != 0.0) y += A1 * std::sin(omega_eff * t + (phase1_constrained ? phase1 : 0.0)) * std::exp(-gamma_eff * t / 2);
    if (A2 != 0.0) y += A2 * std::sin(omega2 * t + (phase2_constrained ? phase2 : 0.0)) * std::exp(-gamma2 * t / 2);
    return y;
  }
};

struct RingdownInit {
  double omega1 = 0.0, gamma1 = 0.0;  // rad/s
  double omega2 = 0.0, gamma2 = 0.0;  // used for two-mode fits
};

namespace detail {

/// Peak frequencies of the zero-padded, Hann-windowed periodogram (rad/s), strongest first.
inline std::vector<double> spectral_peaks(const std::vector<double>& x, double dt, std::size_t n_peaks,
                                          double min_separation) {
  std::size_t n = 1;
  while (n < 8 * x.size()) n <<= 1;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  const auto w = hann(x.size());
  RealPowerSpectrum fft(n);
  std::fill(fft.input(), fft.input() + n, 0.0);
  for (std::size_t k = 0; k < x.size(); ++k) fft.input()[k] = (x[k] - mean) * w[k];
  std::vector<double> p;
  fft.power(p);
  const double df = 1.0 / (n * dt);

  std::vector<std::pair<double, double>> maxima;  // (power, freq)
  for (std::size_t k = 1; k + 1 < p.size(); ++k) {
    if (!(p[k] > p[k - 1] && p[k] >= p[k + 1])) continue;
    const double a = std::log(p[k - 1] + 1e-300), b = std::log(p[k] + 1e-300), c = std::log(p[k + 1] + 1e-300);
    const double den = a - 2 * b + c;
    const double shift = den != 0 ? 0.5 * (a - c) / den : 0.0;
    maxima.emplace_back(p[k], (k + std::clamp(shift, -0.5, 0.5)) * df);
  }
  std::sort(maxima.begin(), maxima.end(), [](const auto& u, const auto& v) { return u.first > v.first; });
  std::vector<double> out;
  for (const auto& [pw, f] : maxima) {
    const double om = constants::two_pi * f;
    if (std::all_of(out.begin(), out.end(), [&](double o) { return std::abs(o - om) > min_separation; }))
      out.push_back(om);
    if (out.size() == n_peaks) break;
  }
  return out;
}

/// Energy damping rate from the slope of the log envelope (per-period peak |x - mean|).
inline double envelope_decay(const std::vector<double>& t, const std::vector<double>& x, double omega) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  const double period = constants::two_pi / omega;
  std::vector<double> tc, lc;
  std::size_t k = 0;
  while (k < x.size()) {
    const double t_end = t[k] + period;
    double peak = 0.0, tpk = t[k];
    for (; k < x.size() && t[k] < t_end; ++k)
      if (std::abs(x[k] - mean) > peak) { peak = std::abs(x[k] - mean); tpk = t[k]; }
    if (peak > 0) { tc.push_back(tpk); lc.push_back(std::log(peak)); }
  }
  const double record = t.back() - t.front();
  if (tc.size() < 3) return 4.0 / record;
  // Only the first half of the envelope; the tail is noise-dominated.
  const std::size_t m = std::max<std::size_t>(3, tc.size() / 2);
  const double tm = std::accumulate(tc.begin(), tc.begin() + m, 0.0) / m;
  const double lm = std::accumulate(lc.begin(), lc.begin() + m, 0.0) / m;
  double sxy = 0, sxx = 0;
  for (std::size_t j = 0; j < m; ++j) { sxy += (tc[j] - tm) * (lc[j] - lm); sxx += (tc[j] - tm) * (tc[j] - tm); }
  const double g = sxx > 0 ? -2.0 * sxy / sxx : 0.0;
  return g > 0 ? g : 4.0 / record;
}

}  // namespace detail

/// Least-squares fit of one or two exponentially damped sinusoids plus offset.
/// Time origin is t[0]. Default initial frequencies from periodogram peaks,
/// damping from the log-envelope slope.
inline RingdownFit fit_ringdown(const std::vector<double>& t_in, const std::vector<double>& x, bool two_modes,
                                std::optional<RingdownInit> init = std::nullopt) {
  if (t_in.size() != x.size()) throw ConfigError("fit_ringdown: time and value lengths differ");
  if (x.size() < 16) throw TooShort("ring-down too short to fit");
  std::vector<double> t(t_in.size());
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = t_in[k] - t_in[0];
  const double dt = t[1] - t[0];
  const double record = t.back();
  const double resolution = constants::two_pi / record;

  if (!init) {
    const auto peaks = detail::spectral_peaks(x, dt, two_modes ? 2 : 1, 2.0 * resolution);
    if (peaks.empty() || (two_modes && peaks.size() < 2)) throw NoPeak("ring-down has no spectral peak");
    init = RingdownInit{};
    init->omega1 = peaks[0];
    init->gamma1 = detail::envelope_decay(t, x, peaks[0]);
    if (two_modes) {
      init->omega2 = peaks[1];
      init->gamma2 = init->gamma1;
    }
  }
  if (two_modes && std::abs(init->omega1 - init->omega2) < resolution)
    throw DegenerateModes("mode frequencies closer than the record resolution");

  const int n_modes = two_modes ? 2 : 1;
  // Parameters: A0, then per mode (c, s, omega, gamma) with c cos + s sin.
  auto basis = [&](double om, double g, double tt, double& cs, double& sn) {
    const double e = std::exp(-g * tt / 2);
    cs = e * std::cos(om * tt);
    sn = e * std::sin(om * tt);
  };

  // Linear coefficients for the initial frequencies and dampings.
  const Eigen::Index n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd design(n, 1 + 2 * n_modes);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    design(k, 0) = 1.0;
    double cs, sn;
    basis(init->omega1, init->gamma1, t[k], cs, sn);
    design(k, 1) = cs;
    design(k, 2) = sn;
    if (two_modes) {
      basis(init->omega2, init->gamma2, t[k], cs, sn);
      design(k, 3) = cs;
      design(k, 4) = sn;
    }
    rhs[k] = x[static_cast<std::size_t>(k)];
  }
  const Eigen::VectorXd lin = design.colPivHouseholderQr().solve(rhs);

  Eigen::VectorXd p0(1 + 4 * n_modes);
  p0[0] = lin[0];
  p0.segment(1, 4) << lin[1], lin[2], init->omega1, init->gamma1;
  if (two_modes) p0.segment(5, 4) << lin[3], lin[4], init->omega2, init->gamma2;

  const ResidualFn f = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    r.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      double y = p[0];
      for (int m = 0; m < n_modes; ++m) {
        double cs, sn;
        basis(p[3 + 4 * m], p[4 + 4 * m], t[k], cs, sn);
        y += p[1 + 4 * m] * cs + p[2 + 4 * m] * sn;
      }
      r[k] = y - x[static_cast<std::size_t>(k)];
    }
  };
  const LsqResult res = least_squares(f, p0, n);
  const Eigen::VectorXd& p = res.x;

  struct Mode { double amp, omega, phase, gamma; bool constrained; };
  std::vector<Mode> modes;
  for (int m = 0; m < n_modes; ++m) {
    const int o = 1 + 4 * m;
    const double c = p[o], s = p[o + 2] < 0 ? -p[o + 1] : p[o + 1];
    const double sd = std::sqrt(0.5 * (res.covariance(o, o) + res.covariance(o + 1, o + 1)));
    const double amp = std::hypot(c, s);
    modes.push_back({amp, std::abs(p[o + 2]), std::atan2(c, s), p[o + 3],
                     amp > 3.0 * sd && amp > 0});
  }
  if (two_modes && modes[1].amp > modes[0].amp) std::swap(modes[0], modes[1]);
  if (two_modes && std::abs(modes[0].omega - modes[1].omega) < resolution)
    throw DegenerateModes("fitted mode frequencies closer than the record resolution");

  RingdownFit fit;
  fit.two_modes = two_modes;
  fit.A0 = p[0];
  fit.A1 = modes[0].amp;
  fit.omega_eff = modes[0].omega;
  fit.gamma_eff = modes[0].gamma;
  fit.phase1_constrained = modes[0].constrained;
  fit.phase1 = modes[0].constrained ? modes[0].phase : std::nan("");
  if (two_modes) {
    fit.A2 = modes[1].amp;
    fit.omega2 = modes[1].omega;
    fit.gamma2 = modes[1].gamma;
    fit.phase2_constrained = modes[1].constrained;
    fit.phase2 = modes[1].constrained ? modes[1].phase : std::nan("");
  }
  fit.residual_norm = res.residual_norm;
  fit.iterations = res.iterations;
  return fit;
}

// ---------------------------------------------------------------------------
// Temperatures

inline double effective_temperature(double t_bath, double gamma_bare, double gamma_eff) {
  if (!(gamma_eff > 0)) throw NonPositiveDamping("gamma_eff <= 0: no effective temperature above threshold");
  return t_bath * gamma_bare / gamma_eff;
}

/// I omega_phi^2 <phi^2> / k for a known variance.
inline double equipartition_temperature(double variance, const MechanicalParams& m) {
  return m.inertia * m.omega_phi * m.omega_phi * variance / constants::k_boltzmann;
}

/// Equipartition temperature of a stationary series; the two halves must agree within 20%.
inline double equipartition_temperature(const std::vector<double>& phi, const MechanicalParams& m) {
  if (phi.size() < 4) throw TooShort("series too short for a variance");
  auto variance = [](auto b, auto e) {
    const double n = static_cast<double>(e - b);
    const double mean = std::accumulate(b, e, 0.0) / n;
    double s = 0.0;
    for (auto it = b; it != e; ++it) s += (*it - mean) * (*it - mean);
    return s / n;
  };
  const auto mid = phi.begin() + static_cast<std::ptrdiff_t>(phi.size() / 2);
  const double v1 = variance(phi.begin(), mid), v2 = variance(mid, phi.end());
  if (std::abs(v1 - v2) > 0.2 * std::max(v1, v2)) throw NonStationary("variance drifts by more than 20% between halves");
  return equipartition_temperature(variance(phi.begin(), phi.end()), m);
}

// ---------------------------------------------------------------------------
// Histogram

struct HistogramStats {
  std::vector<double> bin_edges;  // n_bins + 1
  std::vector<long long> counts;
  double mean = 0.0, variance = 0.0;
  double excess_kurtosis = 0.0;
  bool bimodality_flag = false;
};

/// Histogram of the series. Bimodal when the smoothed histogram has two maxima,
/// each at least half the highest bin, separated by a dip of at least 20%.
inline HistogramStats amplitude_histogram(const std::vector<double>& x, int n_bins = 60) {
  if (x.size() < 10000) throw TooFewSamples("histogram needs at least 1e4 samples");
  if (n_bins < 5) throw ConfigError("histogram needs at least 5 bins");
  HistogramStats h;
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  double lo = *lo_it, hi = *hi_it;
  if (hi == lo) { lo -= 0.5; hi += 0.5; }
  const double width = (hi - lo) / n_bins;
  h.bin_edges.resize(static_cast<std::size_t>(n_bins) + 1);
  for (int k = 0; k <= n_bins; ++k) h.bin_edges[k] = lo + width * k;
  h.counts.assign(static_cast<std::size_t>(n_bins), 0);
  for (double v : x) h.counts[std::min<std::size_t>(static_cast<std::size_t>((v - lo) / width), n_bins - 1)]++;

  const double n = static_cast<double>(x.size());
  h.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double m2 = 0, m4 = 0;
  for (double v : x) {
    const double d2 = (v - h.mean) * (v - h.mean);
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= n;
  m4 /= n;
  h.variance = m2;
  h.excess_kurtosis = m2 > 0 ? m4 / (m2 * m2) - 3.0 : 0.0;

  const int half = std::max(1, n_bins / 30);
  std::vector<double> s(h.counts.size());
  for (int k = 0; k < n_bins; ++k) {
    double acc = 0;
    int cnt = 0;
    for (int j = std::max(0, k - half); j <= std::min(n_bins - 1, k + half); ++j, ++cnt) acc += h.counts[j];
    s[k] = acc / cnt;
  }
  const double top = *std::max_element(s.begin(), s.end());
  std::vector<int> peaks;
  for (int k = 0; k < n_bins; ++k) {
    const bool left = k == 0 || s[k] >= s[k - 1];
    const bool right = k == n_bins - 1 || s[k] > s[k + 1];
    if (left && right && s[k] >= 0.5 * top) peaks.push_back(k);
  }
  for (std::size_t a = 0; a < peaks.size() && !h.bimodality_flag; ++a)
    for (std::size_t b = a + 1; b < peaks.size(); ++b) {
      const double dip = *std::min_element(s.begin() + peaks[a], s.begin() + peaks[b] + 1);
      if (dip <= 0.8 * std::min(s[peaks[a]], s[peaks[b]])) { h.bimodality_flag = true; break; }
    }
  return h;
}

}  // namespace spintorque
