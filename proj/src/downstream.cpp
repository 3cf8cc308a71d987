// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rfcmg/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "rfcmg/synthdata.hpp"

namespace rfcmg::downstream {

namespace {

std::vector<const Plane*> ptrs_of(const std::vector<Spectrogram>& data) {
    std::vector<const Plane*> p;
    p.reserve(data.size());
    for (const auto& s : data) p.push_back(&s.data);
    return p;
}

}  // namespace

nn::ConvNet<float> Classifier::net() const {
    return nn::ConvNet<float>(config.channels, config.classes, nn::Binder<float>(params));
}

Classifier train_classifier(const std::vector<Spectrogram>& train, const ClassifierConfig& cfg) {
    require(!train.empty(), "classifier training set is empty");
    std::set<int> present;
    std::vector<int> labels;
    for (const auto& s : train) {
        require(s.label >= 0 && s.label < cfg.classes, "training label outside [0, classes)");
        present.insert(s.label);
        labels.push_back(s.label);
    }
    require(present.size() >= 2, "classifier training needs at least two classes");
    Classifier c;
    c.config = cfg;
    const nn::ConvNet<float> net(cfg.channels, cfg.classes, nn::Binder<float>(c.params));
    Rng rng(derive_seed(cfg.seed, "classifier.init"));
    net.init(c.params, rng);
    c.history = nn::fit_convnet(net, c.params, ptrs_of(train), labels,
                                {.epochs = cfg.epochs, .steps = cfg.steps, .batch = cfg.batch, .lr = cfg.lr,
                                 .cosine = true, .seed = derive_seed(cfg.seed, "classifier.fit")});
    return c;
}

std::vector<int> predict(const Classifier& c, const std::vector<Spectrogram>& data) {
    return nn::predict_convnet(c.net(), c.params, ptrs_of(data));
}

Evaluation score(const std::vector<int>& truth, const std::vector<int>& predicted, int classes) {
    require(!truth.empty(), "cannot score an empty test set");
    require(truth.size() == predicted.size(), "one prediction per test sample");
    Evaluation e;
    e.confusion = Eigen::MatrixXi::Zero(classes, classes);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        require(truth[i] >= 0 && truth[i] < classes, "test label outside [0, classes)");
        require(predicted[i] >= 0 && predicted[i] < classes, "prediction outside [0, classes)");
        ++e.confusion(truth[i], predicted[i]);
    }
    e.accuracy = static_cast<double>(e.confusion.trace()) / static_cast<double>(truth.size());
    return e;
}

Evaluation evaluate(const Classifier& c, const std::vector<Spectrogram>& test) {
    std::vector<int> truth;
    for (const auto& s : test) truth.push_back(s.label);
    return score(truth, predict(c, test), c.config.classes);
}

nlohmann::json to_json(const Evaluation& e) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < e.confusion.rows(); ++r) {
        std::vector<int> row(e.confusion.cols());
        for (Eigen::Index c = 0; c < e.confusion.cols(); ++c) row[c] = e.confusion(r, c);
        rows.push_back(row);
    }
    return {{"accuracy", e.accuracy}, {"confusion", rows}};
}

std::vector<std::pair<double, double>> ratio_sweep(const std::vector<Spectrogram>& real_train,
                                                   const std::vector<Spectrogram>& gen_pool,
                                                   const std::vector<Spectrogram>& test,
                                                   const std::vector<double>& ratios,
                                                   const ClassifierConfig& cfg, int repeats,
                                                   std::vector<std::vector<double>>* runs) {
    synthdata::require_disjoint(real_train, test);
    require(repeats >= 1, "repeats must be at least 1");
    if (runs) runs->clear();
    std::vector<std::pair<double, double>> curve;
    for (double r : ratios) {
        require(r >= 0.0, "ratios must be non-negative");
        const auto extra = static_cast<std::size_t>(std::floor(r * static_cast<double>(real_train.size())));
        if (extra > gen_pool.size()) {
            throw InvalidArgument("ratio " + std::to_string(r) + " needs " + std::to_string(extra) +
                                  " generated samples; pool has " + std::to_string(gen_pool.size()));
        }
        std::vector<double> accs;
        for (int k = 0; k < repeats; ++k) {
            ClassifierConfig c = cfg;
            if (k > 0) c.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(k));
            std::vector<std::size_t> idx(gen_pool.size());
            std::iota(idx.begin(), idx.end(), 0);
            Rng rng(derive_seed(c.seed, "ratio.subsample"));
            std::shuffle(idx.begin(), idx.end(), rng);
            std::vector<Spectrogram> train = real_train;
            for (std::size_t i = 0; i < extra; ++i) train.push_back(gen_pool[idx[i]]);
            accs.push_back(evaluate(train_classifier(train, c), test).accuracy);
        }
        curve.emplace_back(r, std::accumulate(accs.begin(), accs.end(), 0.0) / repeats);
        if (runs) runs->push_back(std::move(accs));
    }
    return curve;
}

}  // namespace rfcmg::downstream
