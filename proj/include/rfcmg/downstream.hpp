// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "rfcmg/common.hpp"
#include "rfcmg/nn/fit.hpp"

namespace rfcmg::downstream {

struct ClassifierConfig {
    std::vector<int> channels{24, 48, 96};
    int classes = 6;
    int epochs = 30;
    long steps = 0;  // positive: fixed optimizer-step budget instead of epochs
    double lr = 5e-4;
    int batch = 64;
    std::uint64_t seed = 0;
};

struct Classifier {
    ClassifierConfig config;
    nn::ParamStore<float> params;
    nn::FitHistory history;

    nn::ConvNet<float> net() const;
};

/// Throws InvalidArgument when fewer than two classes are present.
Classifier train_classifier(const std::vector<Spectrogram>& train, const ClassifierConfig& cfg);

std::vector<int> predict(const Classifier& c, const std::vector<Spectrogram>& data);

struct Evaluation {
    double accuracy = 0.0;
    Eigen::MatrixXi confusion;  // rows: true class, columns: predicted class
};

/// Accuracy and confusion matrix from precomputed predictions.
Evaluation score(const std::vector<int>& truth, const std::vector<int>& predicted, int classes);
Evaluation evaluate(const Classifier& c, const std::vector<Spectrogram>& test);

nlohmann::json to_json(const Evaluation& e);

/// Accuracy after training on real_train plus floor(r |real_train|) generated
/// samples for each ratio r, averaged over `repeats` classifiers. Repeat 0
/// uses cfg.seed; repeat k > 0 reseeds both the classifier and the generated
/// subsample. Per-repeat accuracies go to `runs` (one row per ratio) if given.
std::vector<std::pair<double, double>> ratio_sweep(const std::vector<Spectrogram>& real_train,
                                                   const std::vector<Spectrogram>& gen_pool,
                                                   const std::vector<Spectrogram>& test,
                                                   const std::vector<double>& ratios,
                                                   const ClassifierConfig& cfg, int repeats = 1,
                                                   std::vector<std::vector<double>>* runs = nullptr);

}  // namespace rfcmg::downstream
