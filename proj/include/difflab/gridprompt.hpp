#pragma once

#include <array>
#include <optional>
#include <stdexcept>

#include "difflab/denoiser.hpp"
#include "difflab/latent.hpp"
#include "difflab/schedule.hpp"

namespace difflab {

/// Quadrant mask for the 2x2 prompt layout: exactly one region (lower right)
/// is generated, the other three are fixed context.
using QuadMask = std::array<bool, 4>;  // {ul, ur, ll, lr}, true = generate

inline QuadMask make_mask() {
    return {false, false, false, true};
}

/// Four-slot visual-prompt input: example pair on top (source frame 1, edited
/// frame 1), query frame lower left, generated region lower right.
struct GridState {
    Latent quad_ul;  // first source frame
    Latent quad_ur;  // first edited frame
    Latent quad_ll;  // query frame
    std::optional<Latent> quad_lr;  // generated region, unset until sampled
    QuadMask mask = make_mask();
};

inline GridState compose_grid(const Latent& first_src, const Latent& first_edit, const Latent& query) {
    require_same_dim(first_src, first_edit, "compose_grid");
    require_same_dim(first_src, query, "compose_grid");
    GridState grid;
    grid.quad_ul = first_src;
    grid.quad_ur = first_edit;
    grid.quad_ll = query;
    grid.quad_lr.reset();
    grid.mask = make_mask();
    return grid;
}

/// Frame-to-embedding map with a declared pseudo-inverse. decode(embed(x) -
/// embed(y)) recovers the displacement x - y for the embedders here.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual Latent embed(const Latent& frame) const = 0;
    virtual Latent decode(const Latent& embedding) const = 0;
};

class IdentityEmbedder : public Embedder {
public:
    Latent embed(const Latent& frame) const override { return frame; }
    Latent decode(const Latent& embedding) const override { return embedding; }
};

/// Fixed seeded orthonormal projection; decode is the transpose. Exercises
/// that downstream behavior depends only on the decoded displacement.
class ProjectionEmbedder : public Embedder {
public:
    ProjectionEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), q_(dim * dim) {
        SeededNoiseSource source(seed, /*stream=*/0xE3BEDull);
        // Modified Gram-Schmidt on a Gaussian matrix; rows of q_ are orthonormal.
        for (std::size_t r = 0; r < dim; ++r) {
            Latent row = draw_noise(source, dim);
            for (std::size_t p = 0; p < r; ++p) {
                double proj = 0.0;
                for (std::size_t i = 0; i < dim; ++i) proj += row[i] * q_[p * dim + i];
                for (std::size_t i = 0; i < dim; ++i) row[i] -= proj * q_[p * dim + i];
            }
            const double n = norm(row);
            if (n < 1e-9) throw std::runtime_error("ProjectionEmbedder: degenerate basis draw");
            for (std::size_t i = 0; i < dim; ++i) q_[r * dim + i] = row[i] / n;
        }
    }

    Latent embed(const Latent& frame) const override {
        check(frame);
        Latent out = zeros(dim_);
        for (std::size_t r = 0; r < dim_; ++r) {
            double s = 0.0;
            for (std::size_t i = 0; i < dim_; ++i) s += q_[r * dim_ + i] * frame[i];
            out[r] = s;
        }
        return out;
    }

    Latent decode(const Latent& embedding) const override {
        check(embedding);
        Latent out = zeros(dim_);
        for (std::size_t r = 0; r < dim_; ++r) {
            for (std::size_t i = 0; i < dim_; ++i) out[i] += q_[r * dim_ + i] * embedding[r];
        }
        return out;
    }

private:
    void check(const Latent& v) const {
        if (v.size() != dim_) throw std::invalid_argument("ProjectionEmbedder: dimension mismatch");
    }

    std::size_t dim_;
    std::vector<double> q_;
};

/// Edit-direction prompt: lambda1-scaled embedding difference between the
/// edited and source first frames.
inline PromptVector edit_prompt(const Embedder& embedder, const Latent& first_edit, const Latent& first_src,
                                double lambda1) {
    if (!(lambda1 > 0.0)) throw std::invalid_argument("edit_prompt: lambda1 must be positive");
    require_same_dim(first_edit, first_src, "edit_prompt");
    PromptVector prompt;
    prompt.lambda1 = lambda1;
    prompt.p = scaled(sub(embedder.embed(first_edit), embedder.embed(first_src)), lambda1);
    return prompt;
}

/// Conditioning carrying the prompt and its decoded displacement.
inline Conditioning prompt_conditioning(const Embedder& embedder, const PromptVector& prompt) {
    Conditioning cond;
    cond.prompt = prompt;
    cond.edit_shift = embedder.decode(prompt.p);
    return cond;
}

}  // namespace difflab
