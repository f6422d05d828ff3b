#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "mmnoma/matrix.hpp"
#include "mmnoma/rng.hpp"

namespace mmnoma {

using cdouble = std::complex<double>;
using cvector = std::vector<cdouble>;

inline constexpr double kSpeedOfLight = 3.0e8;

// Geometric mmWave channel parameters. The antenna count equals the beam
// count: beams are length-M steering vectors.
struct ChannelParams {
  double carrier_frequency_hz = 28e9;
  int num_paths = 3;  // path 1 is the LoS link
  double alpha_los = 2.0;
  double alpha_nlos = 3.0;
  double cell_radius_m = 10.0;
  int num_antennas = 4;
  double noise_power = 1.0;  // sigma^2, Watts

  /// Frequency constant eta = (c / (4 pi f_c))^2, always recomputed.
  double eta() const {
    const double x = kSpeedOfLight / (4.0 * std::numbers::pi * carrier_frequency_hz);
    return x * x;
  }

  double wavelength() const { return kSpeedOfLight / carrier_frequency_hz; }

  /// Average LoS path-loss rho_k = eta * d^-alpha_los.
  double path_loss(double distance_m) const {
    return eta() * std::pow(distance_m, -alpha_los);
  }

  void validate() const {
    if (carrier_frequency_hz <= 0 || num_paths < 1 || alpha_los <= 0 || alpha_nlos <= 0 ||
        cell_radius_m <= 0 || num_antennas < 1 || noise_power <= 0) {
      throw std::invalid_argument("ChannelParams: all fields must be positive");
    }
  }
};

// One drawn realization: per-user distances, path coefficients and the
// resulting channel vectors h_k = sqrt(M rho_k) sum_l a_{k,l} a_BS(theta_{k,l}).
// NLoS excess path loss is folded into the stored path gains so the
// reconstruction identity holds exactly with the single LoS rho_k.
struct ChannelRealization {
  std::vector<double> user_distances_m;
  std::vector<double> path_loss;                   // rho_k (LoS)
  std::vector<std::vector<cdouble>> path_gains;    // K x L, effective a_{k,l}
  std::vector<std::vector<double>> path_angles;    // K x L, theta in [-1,1]
  std::vector<cvector> channel_vectors;            // K vectors of length M

  std::size_t num_users() const { return channel_vectors.size(); }
};

struct BeamSet {
  std::vector<cvector> beam_vectors;  // M vectors of length M
  double zeta = 0.0;                  // random rotation in [-1,1]

  std::size_t num_beams() const { return beam_vectors.size(); }
};

// Equivalent scalar gains g_k^m = |h_k^H w_m|^2, the only CSI the optimizers see.
struct GainMatrix {
  std::size_t num_users = 0;
  std::size_t num_beams = 0;
  std::vector<double> g;  // row-major K x M

  GainMatrix() = default;
  GainMatrix(std::size_t k, std::size_t m) : num_users(k), num_beams(m), g(k * m, 0.0) {}

  double& operator()(std::size_t k, std::size_t m) { return g[k * num_beams + m]; }
  double operator()(std::size_t k, std::size_t m) const { return g[k * num_beams + m]; }
};

/// ULA array response: entry i = exp(j pi i theta) / sqrt(M). Unit norm.
inline cvector steering_vector(double theta, int num_antennas) {
  if (num_antennas < 1) throw std::invalid_argument("steering_vector: M >= 1 required");
  cvector v(static_cast<std::size_t>(num_antennas));
  const double scale = 1.0 / std::sqrt(static_cast<double>(num_antennas));
  for (int i = 0; i < num_antennas; ++i) {
    const double phase = std::numbers::pi * theta * i;
    v[static_cast<std::size_t>(i)] = std::polar(scale, phase);
  }
  return v;
}

/// Rebuilds channel vectors from distances, path gains and angles. Kept
/// separate from the random draw so tests can force specific paths.
inline ChannelRealization compose_channel(const ChannelParams& params,
                                          std::vector<double> distances,
                                          std::vector<std::vector<cdouble>> path_gains,
                                          std::vector<std::vector<double>> path_angles) {
  params.validate();
  const std::size_t k_users = distances.size();
  const int m = params.num_antennas;
  ChannelRealization ch;
  ch.user_distances_m = std::move(distances);
  ch.path_gains = std::move(path_gains);
  ch.path_angles = std::move(path_angles);
  ch.path_loss.resize(k_users);
  ch.channel_vectors.assign(k_users, cvector(static_cast<std::size_t>(m)));
  for (std::size_t k = 0; k < k_users; ++k) {
    ch.path_loss[k] = params.path_loss(ch.user_distances_m[k]);
    const double amp = std::sqrt(static_cast<double>(m) * ch.path_loss[k]);
    for (std::size_t l = 0; l < ch.path_gains[k].size(); ++l) {
      const cvector a = steering_vector(ch.path_angles[k][l], m);
      for (std::size_t i = 0; i < a.size(); ++i) {
        ch.channel_vectors[k][i] += amp * ch.path_gains[k][l] * a[i];
      }
    }
  }
  return ch;
}

/// Draws a channel realization: distances uniform in (1 m, R_c], AoDs uniform
/// in [0, 2pi), theta = sin(phi) for half-wavelength spacing, path 1 LoS.
inline ChannelRealization draw_channel(const ChannelParams& params, int num_users,
                                       std::uint64_t rng_seed) {
  params.validate();
  if (num_users < 1) throw std::invalid_argument("draw_channel: K >= 1 required");
  Rng rng(rng_seed);
  const std::size_t k_users = static_cast<std::size_t>(num_users);
  const std::size_t l_paths = static_cast<std::size_t>(params.num_paths);
  const double d_lo = std::min(1.0, 0.5 * params.cell_radius_m);

  std::vector<double> distances(k_users);
  std::vector<std::vector<cdouble>> gains(k_users, std::vector<cdouble>(l_paths));
  std::vector<std::vector<double>> angles(k_users, std::vector<double>(l_paths));
  for (std::size_t k = 0; k < k_users; ++k) {
    distances[k] = rng.uniform(d_lo, params.cell_radius_m);
    // Excess NLoS attenuation relative to the LoS rho_k.
    const double nlos_scale =
        std::pow(distances[k], 0.5 * (params.alpha_los - params.alpha_nlos));
    for (std::size_t l = 0; l < l_paths; ++l) {
      const cdouble a = rng.complex_normal();
      const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
      gains[k][l] = (l == 0) ? a : a * nlos_scale;
      angles[k][l] = std::sin(phi);
    }
  }
  return compose_channel(params, std::move(distances), std::move(gains), std::move(angles));
}

/// M orthogonal random beams w_m = a(zeta + 2(m-1)/M), zeta ~ U[-1,1].
inline BeamSet draw_beams(int num_beams, std::uint64_t rng_seed) {
  if (num_beams < 1) throw std::invalid_argument("draw_beams: M >= 1 required");
  Rng rng(rng_seed);
  BeamSet beams;
  beams.zeta = rng.uniform(-1.0, 1.0);
  beams.beam_vectors.reserve(static_cast<std::size_t>(num_beams));
  for (int m = 0; m < num_beams; ++m) {
    beams.beam_vectors.push_back(
        steering_vector(beams.zeta + 2.0 * m / num_beams, num_beams));
  }
  return beams;
}

inline cdouble inner_product(const cvector& a, const cvector& b) {
  cdouble acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

/// g_k^m = |h_k^H w_m|^2.
inline GainMatrix equivalent_gains(const ChannelRealization& ch, const BeamSet& beams) {
  const std::size_t k_users = ch.num_users();
  const std::size_t m_beams = beams.num_beams();
  if (k_users > 0 && ch.channel_vectors[0].size() != beams.beam_vectors[0].size()) {
    throw std::invalid_argument("equivalent_gains: dimension mismatch");
  }
  GainMatrix g(k_users, m_beams);
  for (std::size_t k = 0; k < k_users; ++k) {
    for (std::size_t m = 0; m < m_beams; ++m) {
      g(k, m) = std::norm(inner_product(ch.channel_vectors[k], beams.beam_vectors[m]));
    }
  }
  return g;
}

}  // namespace mmnoma
