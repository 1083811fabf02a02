#include <doctest.h>

#include "difflab/gridprompt.hpp"

using namespace difflab;

TEST_CASE("compose_grid places quadrants") {
    const Latent a = {1.0, 2.0}, b = {3.0, 4.0}, c = {5.0, 6.0};
    const GridState grid = compose_grid(a, b, c);
    CHECK(grid.quad_ul == a);
    CHECK(grid.quad_ur == b);
    CHECK(grid.quad_ll == c);
    CHECK_FALSE(grid.quad_lr.has_value());
    CHECK(grid.mask == QuadMask{false, false, false, true});
}

TEST_CASE("first-frame self-query") {
    const Latent a = {1.0, -1.0};
    const GridState grid = compose_grid(a, {0.0, 0.0}, a);
    CHECK(grid.quad_ll == grid.quad_ul);
}

TEST_CASE("mask marks exactly one generated quadrant") {
    const QuadMask mask = make_mask();
    int generated = 0;
    for (bool flag : mask) generated += flag ? 1 : 0;
    CHECK(generated == 1);
    CHECK(mask[3]);
    CHECK(make_mask() == mask);
}

TEST_CASE("compose_grid rejects mismatched dimensions") {
    CHECK_THROWS_AS(compose_grid({1.0}, {1.0, 2.0}, {1.0}), std::invalid_argument);
}

TEST_CASE("null edit gives a zero prompt") {
    const IdentityEmbedder embedder;
    const Latent src = {0.4, 0.5, -0.1};
    const PromptVector p = edit_prompt(embedder, src, src, 0.7);
    CHECK(inf_norm(p.p) == 0.0);
    const Conditioning cond = prompt_conditioning(embedder, p);
    CHECK(inf_norm(*cond.edit_shift) == 0.0);
}

TEST_CASE("identity embedder scales the displacement by lambda1") {
    const IdentityEmbedder embedder;
    const Latent src = {1.0, 2.0};
    const Latent delta = {0.5, -0.25};
    const PromptVector p = edit_prompt(embedder, add(src, delta), src, 0.7);
    CHECK(p.p[0] == doctest::Approx(0.7 * delta[0]).epsilon(1e-15));
    CHECK(p.p[1] == doctest::Approx(0.7 * delta[1]).epsilon(1e-15));
}

TEST_CASE("prompt is linear in lambda1") {
    const IdentityEmbedder embedder;
    const Latent src = {0.0, 1.0}, edit = {2.0, 3.0};
    const PromptVector p1 = edit_prompt(embedder, edit, src, 0.35);
    const PromptVector p2 = edit_prompt(embedder, edit, src, 0.7);
    CHECK(p2.p[0] == doctest::Approx(2.0 * p1.p[0]).epsilon(1e-15));
    CHECK(p2.p[1] == doctest::Approx(2.0 * p1.p[1]).epsilon(1e-15));
}

TEST_CASE("edit_prompt requires positive lambda1") {
    const IdentityEmbedder embedder;
    CHECK_THROWS_AS(edit_prompt(embedder, {1.0}, {0.0}, 0.0), std::invalid_argument);
}

TEST_CASE("projection embedder decodes displacements") {
    const std::size_t dim = 24;
    const ProjectionEmbedder embedder(dim, 99);
    SeededNoiseSource source(3, 0);
    const Latent x = draw_noise(source, dim);
    const Latent y = draw_noise(source, dim);
    const Latent decoded = embedder.decode(sub(embedder.embed(x), embedder.embed(y)));
    CHECK(inf_distance(decoded, sub(x, y)) <= 1e-10);
}

TEST_CASE("projection embedder round-trips single vectors") {
    const ProjectionEmbedder embedder(8, 123);
    SeededNoiseSource source(4, 0);
    const Latent x = draw_noise(source, 8);
    CHECK(inf_distance(embedder.decode(embedder.embed(x)), x) <= 1e-10);
    CHECK(norm(embedder.embed(x)) == doctest::Approx(norm(x)).epsilon(1e-10));
}
