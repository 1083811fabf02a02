#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "difflab/latent.hpp"
#include "difflab/schedule.hpp"

namespace difflab {

/// Edit-direction prompt: a scaled embedding difference (see gridprompt.hpp).
struct PromptVector {
    Latent p;
    double lambda1 = 0.0;
};

/// Conditioning handed to a denoiser. edit_shift is the decoded displacement
/// applied to the data distribution; prompt is kept alongside for provenance.
struct Conditioning {
    std::optional<PromptVector> prompt;
    std::optional<Latent> edit_shift;

    static Conditioning none() { return {}; }

    const Latent* shift() const { return edit_shift ? &*edit_shift : nullptr; }
};

/// Noise-prediction contract: maps (z, t, cond) to a predicted noise vector of
/// equal dimension. Implementations must be pure and safe for concurrent use.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual std::size_t dim() const = 0;
    virtual Latent predict(const Latent& z, int t, const Conditioning& cond) const = 0;
};

inline Latent predict_noise(const Denoiser& model, const Latent& z, int t, const Conditioning& cond) {
    if (z.size() != model.dim()) {
        throw std::invalid_argument("predict_noise: latent dimension does not match model");
    }
    Latent out = model.predict(z, t, cond);
    if (out.size() != z.size()) throw std::logic_error("predict_noise: model returned wrong dimension");
    return out;
}

/// Isotropic Gaussian mixture standing in for the data distribution.
struct MixtureComponent {
    double weight = 1.0;
    Latent mean;
    double std = 0.0;
};

struct MixtureParams {
    std::vector<MixtureComponent> components;
    std::size_t dim = 0;

    void validate() const {
        if (components.empty()) throw std::invalid_argument("MixtureParams: no components");
        double wsum = 0.0;
        for (const auto& c : components) {
            if (!(c.weight > 0.0)) throw std::invalid_argument("MixtureParams: weights must be positive");
            if (c.std < 0.0) throw std::invalid_argument("MixtureParams: negative std");
            if (c.mean.size() != dim) throw std::invalid_argument("MixtureParams: mean dimension mismatch");
            wsum += c.weight;
        }
        if (std::abs(wsum - 1.0) > 1e-12) throw std::invalid_argument("MixtureParams: weights must sum to 1");
    }
};

namespace detail {

inline double log_sum_exp(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace detail

/// log p_t(z) for the noised (and optionally shifted) mixture:
/// p_t(z) = sum_k w_k N(z; sqrt(alpha_t) * (mu_k + shift), (1 - alpha_t + alpha_t s_k^2) I).
inline double mixture_log_marginal(const MixtureParams& params, const NoiseSchedule& schedule, const Latent& z,
                                   int t, const Latent* shift = nullptr) {
    if (t < 1 || t > schedule.steps()) throw std::out_of_range("mixture_log_marginal: t out of range");
    if (z.size() != params.dim) throw std::invalid_argument("mixture_log_marginal: dimension mismatch");
    const double a = schedule.alpha(t);
    const double sqrt_a = std::sqrt(a);
    const double d = static_cast<double>(params.dim);
    std::vector<double> logs;
    logs.reserve(params.components.size());
    for (const auto& c : params.components) {
        const double var = (1.0 - a) + a * c.std * c.std;
        double q = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            double m = c.mean[i];
            if (shift) m += (*shift)[i];
            const double r = z[i] - sqrt_a * m;
            q += r * r;
        }
        logs.push_back(std::log(c.weight) - 0.5 * d * std::log(2.0 * 3.14159265358979323846 * var) -
                       0.5 * q / var);
    }
    return detail::log_sum_exp(logs);
}

/// grad_z log p_t(z), responsibilities stabilized with log-sum-exp.
inline Latent mixture_score(const MixtureParams& params, const NoiseSchedule& schedule, const Latent& z, int t,
                            const Latent* shift = nullptr) {
    if (t < 1 || t > schedule.steps()) throw std::out_of_range("mixture_score: t out of range");
    if (z.size() != params.dim) throw std::invalid_argument("mixture_score: dimension mismatch");
    const double a = schedule.alpha(t);
    const double sqrt_a = std::sqrt(a);
    const double d = static_cast<double>(params.dim);

    const std::size_t K = params.components.size();
    std::vector<double> logs(K);
    for (std::size_t k = 0; k < K; ++k) {
        const auto& c = params.components[k];
        const double var = (1.0 - a) + a * c.std * c.std;
        double q = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            double m = c.mean[i];
            if (shift) m += (*shift)[i];
            const double r = z[i] - sqrt_a * m;
            q += r * r;
        }
        logs[k] = std::log(c.weight) - 0.5 * d * std::log(2.0 * 3.14159265358979323846 * var) - 0.5 * q / var;
    }
    const double lse = detail::log_sum_exp(logs);

    Latent score = zeros(params.dim);
    for (std::size_t k = 0; k < K; ++k) {
        const auto& c = params.components[k];
        const double var = (1.0 - a) + a * c.std * c.std;
        const double resp = std::exp(logs[k] - lse);
        for (std::size_t i = 0; i < z.size(); ++i) {
            double m = c.mean[i];
            if (shift) m += (*shift)[i];
            score[i] -= resp * (z[i] - sqrt_a * m) / var;
        }
    }
    return score;
}

/// Optimal noise prediction for the mixture: eps* = -sqrt(1 - alpha_t) * score.
inline Latent analytic_mixture_noise(const MixtureParams& params, const NoiseSchedule& schedule, const Latent& z,
                                     int t, const Conditioning& cond) {
    Latent score = mixture_score(params, schedule, z, t, cond.shift());
    const double a = schedule.alpha(t);
    return scaled(score, -std::sqrt(1.0 - a));
}

/// Central finite difference of grad_z log p_t(z), coordinate-wise with step h.
/// Independent check for the analytic score.
inline Latent score_finite_diff(const MixtureParams& params, const NoiseSchedule& schedule, const Latent& z,
                                int t, double h, const Latent* shift = nullptr) {
    if (!(h > 0.0)) throw std::invalid_argument("score_finite_diff: h must be positive");
    Latent g(z.size());
    Latent zp = z;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double orig = zp[i];
        zp[i] = orig + h;
        const double fp = mixture_log_marginal(params, schedule, zp, t, shift);
        zp[i] = orig - h;
        const double fm = mixture_log_marginal(params, schedule, zp, t, shift);
        zp[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

/// Reference denoiser backed by the analytic mixture predictor.
class AnalyticMixtureDenoiser : public Denoiser {
public:
    AnalyticMixtureDenoiser(MixtureParams params, NoiseSchedule schedule)
        : params_(std::move(params)), schedule_(std::move(schedule)) {
        params_.validate();
    }

    std::size_t dim() const override { return params_.dim; }

    Latent predict(const Latent& z, int t, const Conditioning& cond) const override {
        return analytic_mixture_noise(params_, schedule_, z, t, cond);
    }

    const MixtureParams& params() const { return params_; }
    const NoiseSchedule& schedule() const { return schedule_; }

private:
    MixtureParams params_;
    NoiseSchedule schedule_;
};

/// Fixed-output denoiser, used by inversion tests where eps must not depend on z.
class ConstantDenoiser : public Denoiser {
public:
    explicit ConstantDenoiser(Latent value) : value_(std::move(value)) {}

    std::size_t dim() const override { return value_.size(); }

    Latent predict(const Latent&, int, const Conditioning&) const override { return value_; }

private:
    Latent value_;
};

/// Plain-text block for mixtures: weights, per-component means, stds as
/// decimal lists. Means shorter than dim are zero-padded on parse.
inline std::string mixture_to_text(const MixtureParams& params) {
    std::ostringstream os;
    os.precision(17);
    os << "dim = " << params.dim << "\n";
    os << "weights =";
    for (const auto& c : params.components) os << " " << c.weight;
    os << "\nstds =";
    for (const auto& c : params.components) os << " " << c.std;
    os << "\n";
    for (std::size_t k = 0; k < params.components.size(); ++k) {
        os << "mean" << k << " =";
        for (double v : params.components[k].mean) os << " " << v;
        os << "\n";
    }
    return os.str();
}

}  // namespace difflab
