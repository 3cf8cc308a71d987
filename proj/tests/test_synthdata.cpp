// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>

#include "doctest.h"
#include "rfcmg/io.hpp"
#include "rfcmg/lfmc.hpp"
#include "rfcmg/metrics.hpp"
#include "rfcmg/synthdata.hpp"
#include "support.hpp"

using namespace rfcmg;
using namespace rfcmg::synthdata;
using rfcmg::testing::max_abs;

TEST_CASE("rendering shares structure across styles") {
    for (int c = 0; c < 8; ++c) {
        const auto action = action_for_class(c);
        CHECK(action.ridges.size() >= 1);
        const auto a = render(action, ModalityStyle::defaults(StyleKind::wifi), 77 + c, 32, 32);
        const auto b = render(action, ModalityStyle::defaults(StyleKind::mmwave), 77 + c, 32, 32, 3);
        const auto r = render(action, ModalityStyle::defaults(StyleKind::rfid), 77 + c, 32, 32);
        CHECK(max_abs(a.lf_truth, b.lf_truth) == 0.0);
        CHECK(max_abs(a.lf_truth, r.lf_truth) == 0.0);
        CHECK(a.sample.data.maxCoeff() <= 1.0);
        CHECK(b.sample.data.minCoeff() >= -1.0);
        CHECK(a.sample.label == c);
        // Matched instances agree below the N = 4 cutoff.
        CHECK((lfmc::low_pass(a.sample.data, 4) - lfmc::low_pass(b.sample.data, 4)).abs().mean() <= 0.05);
        CHECK((lfmc::low_pass(a.sample.data, 4) - lfmc::low_pass(r.sample.data, 4)).abs().mean() <= 0.05);
    }
    const auto flat = render(action_for_class(2), ModalityStyle::defaults(StyleKind::mmwave).scaled(0.0), 5, 32, 32);
    CHECK(max_abs(flat.sample.data, flat.lf_truth) == 0.0);
    CHECK(flat.hf_truth.isZero());

    const auto again = render(action_for_class(2), ModalityStyle::defaults(StyleKind::rfid), 5, 32, 32);
    const auto same = render(action_for_class(2), ModalityStyle::defaults(StyleKind::rfid), 5, 32, 32);
    CHECK(max_abs(again.sample.data, same.sample.data) == 0.0);
}

TEST_CASE("trajectories live in the low band") {
    for (int c = 0; c < 8; ++c) {
        for (std::uint64_t s = 0; s < 20; ++s) {
            const Plane lf = render_trajectory(action_for_class(c), 1000 * c + s, 32, 32);
            // Ridge energy above the flat background.
            CHECK(metrics::band_energy(lf + 0.7, 4).low_fraction() >= 0.85);
        }
    }
}

TEST_CASE("texture signatures differ between target styles") {
    auto ratio = [](StyleKind k) {
        double low = 0.0, high = 0.0;
        for (int i = 0; i < 60; ++i) {
            const auto r = render(action_for_class(i % 6), ModalityStyle::defaults(k), 500 + i, 32, 32, i % kAngles);
            const auto e = metrics::band_energy(r.hf_truth, 2);
            low += e.low;
            high += e.high;
        }
        return high / low;
    };
    const double mm = ratio(StyleKind::mmwave);
    const double rf = ratio(StyleKind::rfid);
    MESSAGE("high/low ratio mmwave " << mm << " rfid " << rf);
    CHECK(std::max(mm, rf) >= 2.0 * std::min(mm, rf));
}

TEST_CASE("datasets") {
    DatasetSpec spec;
    spec.style = StyleKind::mmwave;
    spec.classes = 6;
    spec.per_class = 10;
    spec.seed = 4;
    const auto d = make_dataset(spec);
    CHECK(d.size() == 60);
    std::map<int, int> counts;
    std::set<std::uint64_t> seeds;
    for (const auto& s : d) {
        ++counts[s.label];
        seeds.insert(s.meta.instance_seed);
        CHECK(s.modality == Modality::target_a);
        CHECK(s.data.allFinite());
    }
    for (int c = 0; c < 6; ++c) CHECK(counts[c] == 10);
    CHECK(seeds.size() == 60);
    const auto d2 = make_dataset(spec);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(max_abs(d[i].data, d2[i].data) == 0.0);

    // Class means are further apart than the typical within-class spread.
    spec.per_class = 30;
    for (StyleKind k : {StyleKind::wifi, StyleKind::mmwave, StyleKind::rfid}) {
        spec.style = k;
        const auto data = make_dataset(spec);
        std::vector<Plane> means(6, Plane::Zero(32, 32));
        for (const auto& s : data) means[s.label] += s.data / 30.0;
        double spread = 0.0;
        for (const auto& s : data) spread += (s.data - means[s.label]).abs().mean() / data.size();
        double between = 1e9;
        for (int a = 0; a < 6; ++a) {
            for (int b = a + 1; b < 6; ++b) between = std::min(between, (means[a] - means[b]).abs().mean());
        }
        CAPTURE(to_string(k));
        CHECK(between > spread);
    }

    spec.style = StyleKind::wifi;
    spec.first_class = 6;
    spec.classes = 2;
    const auto unseen = make_dataset(spec);
    CHECK(unseen.front().label == 6);
    CHECK(unseen.back().label == 7);
    CHECK(unseen.front().modality == Modality::source);
}

TEST_CASE("k-shot split") {
    DatasetSpec spec;
    spec.style = StyleKind::mmwave;
    spec.classes = 6;
    spec.per_class = 12;
    spec.seed = 8;
    const auto data = make_dataset(spec);
    const auto [adapt, eval] = kshot_split(data, 1, 3);
    CHECK(adapt.size() == 6);
    CHECK(eval.size() == 66);
    std::set<std::uint64_t> a, e;
    for (const auto& s : adapt) a.insert(s.meta.instance_seed);
    for (const auto& s : eval) e.insert(s.meta.instance_seed);
    for (auto s : a) CHECK_FALSE(e.contains(s));
    CHECK(a.size() + e.size() == data.size());
    CHECK_NOTHROW(require_disjoint(adapt, eval));
    CHECK_THROWS_AS(require_disjoint(adapt, data), InvalidArgument);

    const auto [a5, e5] = kshot_split(data, 5, 3);
    std::map<int, std::set<int>> angles;
    for (const auto& s : a5) angles[s.label].insert(s.meta.angle);
    for (const auto& [label, set] : angles) CHECK(set.size() == 5);

    const auto [a11, e11] = kshot_split(data, 11, 3);
    CHECK(e11.size() == 6);
    const auto again = kshot_split(data, 1, 3);
    for (std::size_t i = 0; i < adapt.size(); ++i) {
        CHECK(again.first[i].meta.instance_seed == adapt[i].meta.instance_seed);
    }
    CHECK_THROWS_AS(kshot_split(data, 12, 3), InvalidArgument);
    CHECK(filter_labels(data, 2, 3).size() == 24);
}

TEST_CASE("dataset archive") {
    const auto dir = rfcmg::testing::scratch_dir("synth");
    DatasetSpec spec;
    spec.style = StyleKind::rfid;
    spec.classes = 3;
    spec.per_class = 4;
    const auto data = make_dataset(spec);
    save_dataset(dir / "ds", data, {{"note", "x"}});
    const auto j = io::read_json(dir / "ds.json");
    CHECK(j.at("kind") == "dataset");
    CHECK(j.at("count") == 12);
    CHECK(j.at("generator_version") == kGeneratorVersion);
    CHECK(j.at("labels").size() == 12);
    CHECK(j.at("instance_seeds").size() == 12);
    const auto back = load_dataset(dir / "ds");
    REQUIRE(back.size() == 12);
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].label == data[i].label);
        CHECK(back[i].meta.instance_seed == data[i].meta.instance_seed);
        CHECK(back[i].modality == data[i].modality);
        CHECK(max_abs(back[i].data, data[i].data.cast<float>().cast<double>()) == 0.0);
    }
    std::filesystem::resize_file(dir / "ds.rft", 40);
    CHECK_THROWS_AS(load_dataset(dir / "ds"), CorruptFileError);
}
