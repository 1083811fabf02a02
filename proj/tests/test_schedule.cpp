#include <doctest.h>

#include <cmath>

#include "difflab/schedule.hpp"

using namespace difflab;

TEST_CASE("make_schedule single step") {
    const NoiseSchedule sch = make_schedule(1, 0.5, 0.5);
    CHECK(sch.steps() == 1);
    CHECK(sch.alpha(0) == 1.0);
    CHECK(sch.alpha(1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("make_schedule constant beta") {
    const NoiseSchedule sch = make_schedule(2, 0.3, 0.3);
    CHECK(sch.alpha(1) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(sch.alpha(2) == doctest::Approx(0.49).epsilon(1e-15));
}

TEST_CASE("make_schedule default ramp endpoint") {
    const NoiseSchedule sch = make_schedule(1000, 1e-4, 2e-2);
    // long-double product oracle gives 4.03582976537568e-05
    CHECK(sch.alpha(1000) == doctest::Approx(4.0358297653756833e-05).epsilon(1e-12));
    CHECK(sch.alpha(1000) < 1e-4);
    for (int t = 1; t <= 1000; ++t) CHECK(sch.alpha(t) < sch.alpha(t - 1));
}

TEST_CASE("alpha recurrence is exact term by term") {
    const NoiseSchedule sch = make_schedule(500, 2e-4, 1e-2);
    for (int t = 1; t <= 500; ++t) {
        CHECK(sch.alpha(t) == sch.alpha(t - 1) * (1.0 - sch.beta(t)));
    }
}

TEST_CASE("make_schedule rejects bad ranges") {
    CHECK_THROWS_AS(make_schedule(0, 1e-4, 2e-2), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, 0.0, 2e-2), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, 0.3, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, 1e-4, 1.0), std::invalid_argument);
}

TEST_CASE("sigma_at zero policy") {
    const NoiseSchedule sch = make_schedule(100, 1e-3, 1e-2);
    for (int t : {1, 17, 100}) CHECK(sigma_at(sch, SigmaPolicy::zero(), t) == 0.0);
}

TEST_CASE("sigma_at consistency policy") {
    // alpha[t-1] = 0.75 -> sigma = 0.5
    const NoiseSchedule sch = NoiseSchedule::from_alphas({1.0, 0.75, 0.5});
    CHECK(sigma_at(sch, SigmaPolicy::consistency(), 2) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("sigma_at ddim-eta matches direct evaluation") {
    const NoiseSchedule sch = make_schedule(1000, 1e-4, 2e-2);
    // frozen from a long-double evaluation of the eta formula at t = 500
    CHECK(sigma_at(sch, SigmaPolicy::ddim_eta(1.0), 500) ==
          doctest::Approx(0.10015665437010996).epsilon(1e-12));
    // and against an in-place recomputation at a second position
    const double a_t = sch.alpha(321);
    const double a_prev = sch.alpha(320);
    const double expect = std::sqrt((1.0 - a_prev) / (1.0 - a_t)) * std::sqrt(1.0 - a_t / a_prev);
    CHECK(sigma_at(sch, SigmaPolicy::ddim_eta(1.0), 321) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(sigma_at(sch, SigmaPolicy::ddim_eta(0.25), 321) == doctest::Approx(0.25 * expect).epsilon(1e-14));
}

TEST_CASE("sigma_at rejects out-of-range t") {
    const NoiseSchedule sch = make_schedule(10, 1e-3, 1e-2);
    CHECK_THROWS_AS(sigma_at(sch, SigmaPolicy::zero(), 0), std::out_of_range);
    CHECK_THROWS_AS(sigma_at(sch, SigmaPolicy::zero(), 11), std::out_of_range);
}

TEST_CASE("consistency sigma zeroes the adjustment radicand") {
    const NoiseSchedule sch = make_schedule(1000, 1e-4, 2e-2);
    for (int t : {1, 2, 50, 500, 1000}) {
        const double sigma = sigma_at(sch, SigmaPolicy::consistency(), t);
        const double radicand = 1.0 - sch.alpha(t - 1) - sigma * sigma;
        CHECK(std::abs(radicand) <= 1e-12);
    }
}

TEST_CASE("subsample_timesteps full and uniform") {
    const std::vector<int> all = subsample_timesteps(1000, 1000);
    REQUIRE(all.size() == 1000);
    CHECK(all.front() == 1000);
    CHECK(all.back() == 1);
    for (std::size_t k = 1; k < all.size(); ++k) CHECK(all[k] == all[k - 1] - 1);
}

TEST_CASE("subsample_timesteps thirty of a thousand") {
    const std::vector<int> steps = subsample_timesteps(1000, 30);
    REQUIRE(steps.size() == 30);
    CHECK(steps.front() == 1000);
    CHECK(steps.back() >= 1);
    for (std::size_t k = 1; k < steps.size(); ++k) CHECK(steps[k] < steps[k - 1]);
}

TEST_CASE("subsample_timesteps floor spacing rule") {
    // oracle: t_k = T - floor(k*T/n)
    const std::vector<int> steps = subsample_timesteps(10, 3);
    REQUIRE(steps.size() == 3);
    for (int k = 0; k < 3; ++k) CHECK(steps[static_cast<std::size_t>(k)] == 10 - (k * 10) / 3);
    CHECK(steps == std::vector<int>{10, 7, 4});
}

TEST_CASE("subsample_timesteps rejects bad counts") {
    CHECK_THROWS_AS(subsample_timesteps(10, 0), std::invalid_argument);
    CHECK_THROWS_AS(subsample_timesteps(10, 11), std::invalid_argument);
}

TEST_CASE("draw_noise is reproducible per (seed, stream)") {
    SeededNoiseSource a(1234, 7);
    SeededNoiseSource b(1234, 7);
    const Latent va = draw_noise(a, 32);
    const Latent vb = draw_noise(b, 32);
    CHECK(va == vb);
    const Latent va2 = draw_noise(a, 32);
    const Latent vb2 = draw_noise(b, 32);
    CHECK(va2 == vb2);
    CHECK(va != va2);
}

TEST_CASE("draw_noise streams are distinct") {
    SeededNoiseSource a(1234, 0);
    SeededNoiseSource b(1234, 1);
    CHECK(draw_noise(a, 16) != draw_noise(b, 16));
}

TEST_CASE("draw_noise moments") {
    SeededNoiseSource source(99, 0);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = draw_noise(source, 1)[0];
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("NoiseSchedule validation") {
    CHECK_THROWS_AS(NoiseSchedule::from_alphas({0.9, 0.5}), std::invalid_argument);   // alpha[0] != 1
    CHECK_THROWS_AS(NoiseSchedule::from_alphas({1.0, 0.5, 0.6}), std::invalid_argument);  // not decreasing
    CHECK_THROWS_AS(NoiseSchedule::from_alphas({1.0}), std::invalid_argument);        // no steps
}
