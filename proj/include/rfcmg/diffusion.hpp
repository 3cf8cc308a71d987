// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "json.hpp"

#include "rfcmg/common.hpp"
#include "rfcmg/rng.hpp"

namespace rfcmg::diffusion {

/// Linear DDPM variance schedule. All accessors take the 1-based step index t.
class NoiseSchedule {
public:
    NoiseSchedule() = default;

    int steps() const { return static_cast<int>(beta_.size()); }
    double beta_start() const { return beta_start_; }
    double beta_end() const { return beta_end_; }

    double beta(int t) const { return beta_.at(checked(t)); }
    double alpha(int t) const { return alpha_.at(checked(t)); }
    /// Cumulative product of alpha up to t. alpha_bar(0) is 1 by convention.
    double alpha_bar(int t) const;

    const std::vector<double>& betas() const { return beta_; }
    const std::vector<double>& alphas() const { return alpha_; }
    const std::vector<double>& alpha_bars() const { return alpha_bar_; }

    friend NoiseSchedule schedule_from_betas(std::vector<double> betas);

private:
    std::size_t checked(int t) const;

    double beta_start_ = 0.0;
    double beta_end_ = 0.0;
    std::vector<double> beta_;
    std::vector<double> alpha_;
    std::vector<double> alpha_bar_;
};

NoiseSchedule build_schedule(int T, double beta_start, double beta_end);
/// Arbitrary per-step betas, each in (0, 1). Not serializable through to_json.
NoiseSchedule schedule_from_betas(std::vector<double> betas);
inline NoiseSchedule default_schedule() { return build_schedule(1000, 1e-4, 0.02); }

nlohmann::json to_json(const NoiseSchedule& s);
NoiseSchedule schedule_from_json(const nlohmann::json& j);

/// sqrt(abar_t) x0 + sqrt(1 - abar_t) noise.
Plane forward_diffuse(const Plane& x0, int t, const Plane& noise, const NoiseSchedule& sched);

/// Inverse of forward_diffuse given a noise estimate.
Plane predict_x0(const Plane& xt, const Plane& eps_pred, int t, const NoiseSchedule& sched);

/// Mean of the ancestral transition x_t -> x_{t-1}.
Plane posterior_mean(const Plane& xt, const Plane& eps_pred, int t, const NoiseSchedule& sched);

/// One DDPM ancestral step with sigma_t^2 = beta_t. The noise term is dropped at t = 1.
Plane reverse_step(const Plane& xt, const Plane& eps_pred, int t, const NoiseSchedule& sched,
                   const Plane& noise);

/// Mean squared error between true and predicted noise.
double ddpm_training_loss(const Plane& eps_true, const Plane& eps_pred);

/// Evenly spaced DDIM plan: {T, T - T/steps, ..., T/steps, 0}. `steps` must divide T.
std::vector<int> ddim_plan(int T, int steps);

/// Deterministic DDIM update from t to t_prev (t_prev may be 0).
Plane ddim_step(const Plane& xt, const Plane& eps_pred, int t, int t_prev,
                const NoiseSchedule& sched);

}  // namespace rfcmg::diffusion
