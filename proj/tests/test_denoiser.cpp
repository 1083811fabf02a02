#include <doctest.h>

#include <cmath>

#include "difflab/denoiser.hpp"

using namespace difflab;

namespace {

MixtureParams two_component_2d() {
    MixtureParams mix;
    mix.dim = 2;
    mix.components = {{0.3, {-1.0, 0.0}, 0.1}, {0.7, {2.0, 1.0}, 0.2}};
    mix.validate();
    return mix;
}

}  // namespace

TEST_CASE("point mass at origin forces eps = z / sqrt(1-alpha)") {
    const NoiseSchedule sch = make_schedule(1000, 1e-4, 2e-2);
    MixtureParams mix;
    mix.dim = 3;
    mix.components = {{1.0, zeros(3), 0.0}};
    const AnalyticMixtureDenoiser model(mix, sch);
    const Latent z = {0.4, -1.1, 2.0};
    for (int t : {1, 250, 1000}) {
        const Latent eps = predict_noise(model, z, t, Conditioning::none());
        const double a = sch.alpha(t);
        for (std::size_t i = 0; i < z.size(); ++i) {
            CHECK(eps[i] == doctest::Approx(z[i] / std::sqrt(1.0 - a)).epsilon(1e-12));
        }
    }
}

TEST_CASE("noiseless latent of the mean predicts zero noise") {
    const NoiseSchedule sch = make_schedule(1000, 1e-4, 2e-2);
    MixtureParams mix;
    mix.dim = 2;
    mix.components = {{1.0, {0.7, -0.3}, 0.0}};
    const AnalyticMixtureDenoiser model(mix, sch);
    const int t = 400;
    const Latent z = scaled(mix.components[0].mean, std::sqrt(sch.alpha(t)));
    const Latent eps = predict_noise(model, z, t, Conditioning::none());
    CHECK(inf_norm(eps) <= 1e-12);
}

TEST_CASE("symmetric mixture has zero score at the midpoint") {
    const NoiseSchedule sch = make_schedule(1000, 1e-4, 2e-2);
    MixtureParams mix;
    mix.dim = 2;
    mix.components = {{0.5, {-1.0, 0.5}, 0.3}, {0.5, {1.0, -0.5}, 0.3}};
    const AnalyticMixtureDenoiser model(mix, sch);
    const Latent eps = predict_noise(model, zeros(2), 300, Conditioning::none());
    CHECK(inf_norm(eps) <= 1e-12);
}

TEST_CASE("two-component prediction matches the finite-difference oracle") {
    const NoiseSchedule sch = make_schedule(1000, 1e-4, 2e-2);
    const MixtureParams mix = two_component_2d();
    const Latent z = {0.5, 0.5};

    const Latent score = mixture_score(mix, sch, z, 500);
    const Latent fd = score_finite_diff(mix, sch, z, 500, 1e-5);
    CHECK(distance(score, fd) / (norm(score) + 1e-12) < 1e-4);

    // frozen values from that oracle run
    CHECK(score[0] == doctest::Approx(-0.13237573216727569).epsilon(1e-12));
    CHECK(score[1] == doctest::Approx(-0.30373279851247792).epsilon(1e-12));
    const Latent eps = analytic_mixture_noise(mix, sch, z, 500, Conditioning::none());
    CHECK(eps[0] == doctest::Approx(0.12706779263440249).epsilon(1e-12));
    CHECK(eps[1] == doctest::Approx(0.29155386433580155).epsilon(1e-12));
}

TEST_CASE("finite-difference score on a point mass") {
    // alpha[1] = 0.5 by construction, so log p_1 is N(0, 0.5) and the score at
    // z = 1 is -2.
    const NoiseSchedule sch = NoiseSchedule::from_alphas({1.0, 0.5});
    MixtureParams mix;
    mix.dim = 1;
    mix.components = {{1.0, {0.0}, 0.0}};
    const Latent fd = score_finite_diff(mix, sch, {1.0}, 1, 1e-4);
    CHECK(fd[0] == doctest::Approx(-2.0).epsilon(1e-6));
}

TEST_CASE("central differences converge at second order") {
    const NoiseSchedule sch = make_schedule(1000, 1e-4, 2e-2);
    const MixtureParams mix = two_component_2d();
    const Latent z = {0.2, -0.4};
    const Latent exact = mixture_score(mix, sch, z, 200);
    const double err_h = distance(score_finite_diff(mix, sch, z, 200, 1e-3), exact);
    const double err_h2 = distance(score_finite_diff(mix, sch, z, 200, 5e-4), exact);
    CHECK(err_h2 < err_h);
    CHECK(err_h / err_h2 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("gradient check over random draws") {
    const NoiseSchedule sch = make_schedule(1000, 1e-4, 2e-2);
    const MixtureParams mix = two_component_2d();
    SeededNoiseSource source(2024, 11);
    for (int trial = 0; trial < 100; ++trial) {
        const int t = 1 + static_cast<int>(source.uniform01() * 1000.0);
        const Latent z = scaled(draw_noise(source, 2), 1.5);
        const Latent score = mixture_score(mix, sch, z, std::min(t, 1000));
        const Latent fd = score_finite_diff(mix, sch, z, std::min(t, 1000), 1e-5);
        CHECK(distance(score, fd) / (norm(score) + 1e-12) < 1e-4);
    }
}

TEST_CASE("conditioning shift equals evaluating the unshifted model at z - sqrt(alpha)*delta") {
    const NoiseSchedule sch = make_schedule(1000, 1e-4, 2e-2);
    const MixtureParams mix = two_component_2d();
    const AnalyticMixtureDenoiser model(mix, sch);
    SeededNoiseSource source(5, 0);
    for (int trial = 0; trial < 25; ++trial) {
        const int t = 1 + static_cast<int>(source.uniform01() * 1000.0);
        const Latent z = scaled(draw_noise(source, 2), 2.0);
        const Latent delta = scaled(draw_noise(source, 2), 0.8);
        Conditioning cond;
        cond.edit_shift = delta;
        const Latent shifted = predict_noise(model, z, std::min(t, 1000), cond);
        Latent z_moved = z;
        axpy(-std::sqrt(sch.alpha(std::min(t, 1000))), delta, z_moved);
        const Latent moved = predict_noise(model, z_moved, std::min(t, 1000), Conditioning::none());
        CHECK(inf_distance(shifted, moved) <= 1e-10);
    }
}

TEST_CASE("prediction is pure") {
    const NoiseSchedule sch = make_schedule(1000, 1e-4, 2e-2);
    const MixtureParams mix = two_component_2d();
    const AnalyticMixtureDenoiser model(mix, sch);
    const Latent z = {1.3, -0.2};
    const Latent a = predict_noise(model, z, 321, Conditioning::none());
    const Latent b = predict_noise(model, z, 321, Conditioning::none());
    CHECK(a == b);
}

TEST_CASE("dimension mismatch is rejected") {
    const NoiseSchedule sch = make_schedule(10, 1e-3, 1e-2);
    MixtureParams mix;
    mix.dim = 2;
    mix.components = {{1.0, {0.0, 0.0}, 0.1}};
    const AnalyticMixtureDenoiser model(mix, sch);
    CHECK_THROWS_AS(predict_noise(model, {1.0, 2.0, 3.0}, 5, Conditioning::none()), std::invalid_argument);
}

TEST_CASE("mixture validation") {
    MixtureParams bad;
    bad.dim = 2;
    bad.components = {{0.5, {0.0, 0.0}, 0.1}, {0.6, {1.0, 1.0}, 0.1}};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);  // weights sum != 1
    bad.components = {{0.5, {0.0, 0.0}, -0.1}, {0.5, {1.0, 1.0}, 0.1}};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);  // negative std
    bad.components = {{0.5, {0.0}, 0.1}, {0.5, {1.0, 1.0}, 0.1}};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);  // mean dim mismatch
}

TEST_CASE("log-sum-exp keeps large-t responsibilities finite") {
    const NoiseSchedule sch = make_schedule(1000, 1e-4, 2e-2);
    MixtureParams mix;
    mix.dim = 2;
    mix.components = {{0.5, {-40.0, 0.0}, 0.05}, {0.5, {40.0, 0.0}, 0.05}};
    const Latent eps = analytic_mixture_noise(mix, sch, {-39.0, 0.1}, 1000, Conditioning::none());
    CHECK(std::isfinite(eps[0]));
    CHECK(std::isfinite(eps[1]));
}

TEST_CASE("mixture serializes to a plain-text block") {
    const MixtureParams mix = two_component_2d();
    const std::string text = mixture_to_text(mix);
    CHECK(text.find("dim = 2") != std::string::npos);
    CHECK(text.find("weights =") != std::string::npos);
    CHECK(text.find("mean1 =") != std::string::npos);
}
