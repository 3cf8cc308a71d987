// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rfcmg/diffusion.hpp"

#include <cassert>
#include <cmath>
#include <string>

namespace rfcmg::diffusion {

std::size_t NoiseSchedule::checked(int t) const {
    if (t < 1 || t > steps()) {
        throw InvalidArgument("step index " + std::to_string(t) + " outside [1, " +
                              std::to_string(steps()) + "]");
    }
    return static_cast<std::size_t>(t - 1);
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t == 0) return 1.0;
    return alpha_bar_.at(checked(t));
}

NoiseSchedule schedule_from_betas(std::vector<double> betas) {
    if (betas.empty()) throw InvalidArgument("schedule needs at least one step");
    NoiseSchedule s;
    s.beta_start_ = betas.front();
    s.beta_end_ = betas.back();
    s.alpha_.resize(betas.size());
    s.alpha_bar_.resize(betas.size());
    double prod = 1.0;
    for (std::size_t i = 0; i < betas.size(); ++i) {
        if (!(betas[i] > 0.0 && betas[i] < 1.0)) throw InvalidArgument("beta outside (0, 1)");
        s.alpha_[i] = 1.0 - betas[i];
        prod *= s.alpha_[i];
        s.alpha_bar_[i] = prod;
    }
    s.beta_ = std::move(betas);
    return s;
}

NoiseSchedule build_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw InvalidArgument("schedule needs T >= 1, got " + std::to_string(T));
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        throw InvalidArgument("schedule needs 0 < beta_start <= beta_end < 1");
    }
    std::vector<double> betas(T);
    for (int i = 0; i < T; ++i) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(i) / (T - 1);
        betas[i] = beta_start + (beta_end - beta_start) * frac;
    }
    return schedule_from_betas(std::move(betas));
}

nlohmann::json to_json(const NoiseSchedule& s) {
    return {{"T", s.steps()},
            {"beta_start", s.beta_start()},
            {"beta_end", s.beta_end()},
            {"kind", "linear"}};
}

NoiseSchedule schedule_from_json(const nlohmann::json& j) {
    if (j.value("kind", std::string("linear")) != "linear") {
        throw InvalidArgument("unsupported schedule kind " + j.at("kind").get<std::string>());
    }
    return build_schedule(j.at("T").get<int>(), j.at("beta_start").get<double>(),
                          j.at("beta_end").get<double>());
}

Plane forward_diffuse(const Plane& x0, int t, const Plane& noise, const NoiseSchedule& sched) {
    require_same_shape(x0, noise, "forward_diffuse");
    const double ab = sched.alpha_bar(t);
    if (t < 1) throw InvalidArgument("forward_diffuse needs t >= 1");
    return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * noise;
}

Plane predict_x0(const Plane& xt, const Plane& eps_pred, int t, const NoiseSchedule& sched) {
    require_same_shape(xt, eps_pred, "predict_x0");
    if (t < 1) throw InvalidArgument("predict_x0 needs t >= 1");
    const double ab = sched.alpha_bar(t);
    assert(ab > 0.0);
    return (xt - std::sqrt(1.0 - ab) * eps_pred) / std::sqrt(ab);
}

Plane posterior_mean(const Plane& xt, const Plane& eps_pred, int t, const NoiseSchedule& sched) {
    require_same_shape(xt, eps_pred, "posterior_mean");
    const double coef = sched.beta(t) / std::sqrt(1.0 - sched.alpha_bar(t));
    return (xt - coef * eps_pred) / std::sqrt(sched.alpha(t));
}

Plane reverse_step(const Plane& xt, const Plane& eps_pred, int t, const NoiseSchedule& sched,
                   const Plane& noise) {
    Plane mean = posterior_mean(xt, eps_pred, t, sched);
    require_same_shape(xt, noise, "reverse_step");
    if (t > 1) mean += std::sqrt(sched.beta(t)) * noise;
    return mean;
}

double ddpm_training_loss(const Plane& eps_true, const Plane& eps_pred) {
    require_same_shape(eps_true, eps_pred, "ddpm_training_loss");
    if (eps_true.size() == 0) return 0.0;
    return (eps_true - eps_pred).square().mean();
}

std::vector<int> ddim_plan(int T, int steps) {
    if (steps < 1 || steps > T || T % steps != 0) {
        throw InvalidArgument("ddim steps " + std::to_string(steps) + " must divide T=" +
                              std::to_string(T));
    }
    const int stride = T / steps;
    std::vector<int> plan;
    plan.reserve(steps + 1);
    for (int k = steps; k >= 0; --k) plan.push_back(k * stride);
    return plan;
}

Plane ddim_step(const Plane& xt, const Plane& eps_pred, int t, int t_prev,
                const NoiseSchedule& sched) {
    require(t_prev >= 0 && t_prev < t, "ddim_step needs 0 <= t_prev < t");
    const Plane x0 = predict_x0(xt, eps_pred, t, sched);
    const double ab_prev = sched.alpha_bar(t_prev);
    return std::sqrt(ab_prev) * x0 + std::sqrt(1.0 - ab_prev) * eps_pred;
}

}  // namespace rfcmg::diffusion
