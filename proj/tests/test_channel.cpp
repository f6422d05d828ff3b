#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>

#include "mmnoma/channel.hpp"

using namespace mmnoma;

namespace {

double norm2(const cvector& v) {
  double s = 0.0;
  for (const cdouble& x : v) s += std::norm(x);
  return s;
}

}  // namespace

TEST_CASE("steering vector with zero direction is constant") {
  const cvector v = steering_vector(0.0, 4);
  for (const cdouble& x : v) {
    REQUIRE_THAT(x.real(), Catch::Matchers::WithinAbs(0.5, 1e-15));
    REQUIRE_THAT(x.imag(), Catch::Matchers::WithinAbs(0.0, 1e-15));
  }
}

TEST_CASE("steering vector at the grating direction alternates sign") {
  const cvector v = steering_vector(1.0, 2);
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  REQUIRE_THAT(v[0].real(), Catch::Matchers::WithinAbs(inv_sqrt2, 1e-15));
  REQUIRE_THAT(v[1].real(), Catch::Matchers::WithinAbs(-inv_sqrt2, 1e-12));
  REQUIRE_THAT(v[1].imag(), Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("steering vector has unit norm and linear phase ramp") {
  const double theta = 0.37;
  const cvector v = steering_vector(theta, 8);
  REQUIRE_THAT(norm2(v), Catch::Matchers::WithinAbs(1.0, 1e-12));
  for (int i = 0; i < 8; ++i) {
    const double expected = std::numbers::pi * theta * i;
    const cdouble ref = std::polar(1.0 / std::sqrt(8.0), expected);
    REQUIRE_THAT(std::abs(v[static_cast<std::size_t>(i)] - ref),
                 Catch::Matchers::WithinAbs(0.0, 1e-14));
  }
}

TEST_CASE("single forced path reproduces the closed-form vector") {
  ChannelParams params;
  params.num_paths = 1;
  params.num_antennas = 4;
  const ChannelRealization ch = compose_channel(params, {5.0}, {{cdouble(1.0, 0.0)}}, {{0.0}});
  const double rho = params.path_loss(5.0);
  REQUIRE_THAT(norm2(ch.channel_vectors[0]), Catch::Matchers::WithinAbs(4.0 * rho, 1e-12 * rho));
  for (const cdouble& x : ch.channel_vectors[0]) {
    REQUIRE_THAT(std::abs(x - std::sqrt(rho)), Catch::Matchers::WithinAbs(0.0, 1e-15));
  }
}

TEST_CASE("channel vectors reconstruct from stored paths") {
  ChannelParams params;
  params.num_antennas = 4;
  const ChannelRealization ch = draw_channel(params, 6, 99);
  for (std::size_t k = 0; k < ch.num_users(); ++k) {
    cvector rebuilt(4, 0.0);
    const double amp = std::sqrt(4.0 * ch.path_loss[k]);
    for (std::size_t l = 0; l < ch.path_gains[k].size(); ++l) {
      const cvector a = steering_vector(ch.path_angles[k][l], 4);
      for (std::size_t i = 0; i < 4; ++i) rebuilt[i] += amp * ch.path_gains[k][l] * a[i];
    }
    for (std::size_t i = 0; i < 4; ++i) {
      REQUIRE_THAT(std::abs(rebuilt[i] - ch.channel_vectors[k][i]),
                   Catch::Matchers::WithinAbs(0.0, 1e-12));
    }
  }
}

TEST_CASE("same seed draws bit-identical channels") {
  ChannelParams params;
  const ChannelRealization a = draw_channel(params, 8, 1234);
  const ChannelRealization b = draw_channel(params, 8, 1234);
  for (std::size_t k = 0; k < a.num_users(); ++k) {
    REQUIRE(a.user_distances_m[k] == b.user_distances_m[k]);
    for (std::size_t i = 0; i < a.channel_vectors[k].size(); ++i) {
      REQUIRE(a.channel_vectors[k][i] == b.channel_vectors[k][i]);
    }
  }
}

TEST_CASE("channel power concentrates at the path count on average") {
  // With equal path-loss exponents every path carries unit-variance gain, so
  // ||h||^2 / (M rho) averages to the path count.
  ChannelParams params;
  params.alpha_nlos = params.alpha_los;
  params.num_antennas = 4;
  const ChannelRealization ch = draw_channel(params, 1000, 2024);
  double acc = 0.0;
  for (std::size_t k = 0; k < ch.num_users(); ++k) {
    acc += norm2(ch.channel_vectors[k]) / (4.0 * ch.path_loss[k]);
  }
  acc /= static_cast<double>(ch.num_users());
  REQUIRE_THAT(acc, Catch::Matchers::WithinRel(3.0, 0.05));
}

TEST_CASE("a single beam is a unit-norm steering vector") {
  const BeamSet beams = draw_beams(1, 3);
  REQUIRE(beams.num_beams() == 1);
  REQUIRE_THAT(norm2(beams.beam_vectors[0]), Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("beam set is orthonormal") {
  const BeamSet beams = draw_beams(4, 17);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      const cdouble ip = inner_product(beams.beam_vectors[i], beams.beam_vectors[j]);
      const double expected = i == j ? 1.0 : 0.0;
      REQUIRE_THAT(std::abs(ip), Catch::Matchers::WithinAbs(expected, 1e-10));
    }
  }
}

TEST_CASE("opposite grid directions are exactly orthogonal") {
  const cvector w1 = steering_vector(0.0, 2);
  const cvector w2 = steering_vector(1.0, 2);
  REQUIRE_THAT(std::abs(inner_product(w1, w2)), Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("a channel equal to one beam projects onto it alone") {
  const BeamSet beams = draw_beams(4, 5);
  ChannelRealization ch;
  ch.channel_vectors = {beams.beam_vectors[0]};
  ch.user_distances_m = {1.0};
  ch.path_loss = {1.0};
  const GainMatrix g = equivalent_gains(ch, beams);
  REQUIRE_THAT(g(0, 0), Catch::Matchers::WithinAbs(1.0, 1e-10));
  for (std::size_t m = 1; m < 4; ++m) {
    REQUIRE_THAT(g(0, m), Catch::Matchers::WithinAbs(0.0, 1e-10));
  }
}

TEST_CASE("a zero channel has a zero gain row") {
  const BeamSet beams = draw_beams(3, 6);
  ChannelRealization ch;
  ch.channel_vectors = {cvector(3, 0.0)};
  const GainMatrix g = equivalent_gains(ch, beams);
  for (std::size_t m = 0; m < 3; ++m) REQUIRE(g(0, m) == 0.0);
}

TEST_CASE("gains match a brute-force projection") {
  ChannelParams params;
  const ChannelRealization ch = draw_channel(params, 5, 41);
  const BeamSet beams = draw_beams(4, 42);
  const GainMatrix g = equivalent_gains(ch, beams);
  for (std::size_t k = 0; k < 5; ++k) {
    for (std::size_t m = 0; m < 4; ++m) {
      cdouble acc = 0.0;
      for (std::size_t i = 0; i < 4; ++i) {
        acc += std::conj(ch.channel_vectors[k][i]) * beams.beam_vectors[m][i];
      }
      REQUIRE_THAT(g(k, m), Catch::Matchers::WithinAbs(std::norm(acc), 1e-12));
      REQUIRE(g(k, m) >= 0.0);
    }
  }
}

TEST_CASE("beam projections capture the full channel energy") {
  // The beams form an orthonormal basis, so the gains sum to ||h||^2.
  ChannelParams params;
  const ChannelRealization ch = draw_channel(params, 6, 314);
  const BeamSet beams = draw_beams(4, 315);
  const GainMatrix g = equivalent_gains(ch, beams);
  for (std::size_t k = 0; k < 6; ++k) {
    double sum = 0.0;
    for (std::size_t m = 0; m < 4; ++m) sum += g(k, m);
    const double h2 = norm2(ch.channel_vectors[k]);
    REQUIRE_THAT(sum, Catch::Matchers::WithinAbs(h2, 1e-9 * std::max(1.0, h2)));
  }
}

TEST_CASE("invalid channel parameters are rejected") {
  ChannelParams params;
  params.cell_radius_m = -1.0;
  REQUIRE_THROWS_AS(draw_channel(params, 2, 1), std::invalid_argument);
}
