// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>

#include "doctest.h"
#include "rfcmg/metrics.hpp"
#include "rfcmg/synthdata.hpp"
#include "support.hpp"

using namespace rfcmg;
using namespace rfcmg::metrics;
using rfcmg::testing::random_plane;
using rfcmg::testing::uniform_plane;

namespace {

// Direct windowed SSIM: every valid 7x7 placement, weights recomputed here.
double ssim_oracle(const Plane& a, const Plane& b) {
    double w[7][7], sum = 0.0;
    for (int i = 0; i < 7; ++i) {
        for (int j = 0; j < 7; ++j) {
            w[i][j] = std::exp(-((i - 3) * (i - 3) + (j - 3) * (j - 3)) / (2 * 1.5 * 1.5));
            sum += w[i][j];
        }
    }
    const double c1 = (0.01 * 2) * (0.01 * 2), c2 = (0.03 * 2) * (0.03 * 2);
    double total = 0.0;
    int count = 0;
    for (int y = 0; y + 7 <= a.rows(); ++y) {
        for (int x = 0; x + 7 <= a.cols(); ++x) {
            double ma = 0, mb = 0;
            for (int i = 0; i < 7; ++i) {
                for (int j = 0; j < 7; ++j) {
                    ma += w[i][j] / sum * a(y + i, x + j);
                    mb += w[i][j] / sum * b(y + i, x + j);
                }
            }
            double va = 0, vb = 0, cov = 0;
            for (int i = 0; i < 7; ++i) {
                for (int j = 0; j < 7; ++j) {
                    const double da = a(y + i, x + j) - ma, db = b(y + i, x + j) - mb;
                    va += w[i][j] / sum * da * da;
                    vb += w[i][j] / sum * db * db;
                    cov += w[i][j] / sum * da * db;
                }
            }
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    }
    return total / count;
}

const FeatureEncoder& small_encoder() {
    static const FeatureEncoder enc = [] {
        synthdata::DatasetSpec spec;
        spec.per_class = 8;
        spec.height = 16;
        spec.width = 16;
        std::vector<Plane> data;
        std::vector<int> labels;
        for (StyleKind k : {StyleKind::wifi, StyleKind::mmwave}) {
            spec.style = k;
            for (const auto& s : synthdata::make_dataset(spec)) {
                data.push_back(s.data);
                labels.push_back(s.label + (k == StyleKind::wifi ? 0 : 6));
            }
        }
        EncoderOptions opt;
        opt.channels = {8, 16, 16};
        opt.epochs = 2;
        return train_encoder(data, labels, opt);
    }();
    return enc;
}

Eigen::MatrixXd gaussian(int n, const Eigen::VectorXd& mean, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd m(n, mean.size());
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < mean.size(); ++k) m(i, k) = mean(k) + nd(rng);
    }
    return m;
}

}  // namespace

TEST_CASE("psnr") {
    const Plane a = uniform_plane(16, 16, 1);
    CHECK(psnr(a, a) == kPsnrCap);
    CHECK(psnr(a, a + 0.5) == doctest::Approx(10 * std::log10(4.0 / 0.25)));
    CHECK(psnr(a, a + 0.5) == doctest::Approx(12.0412).epsilon(1e-4));
    const Plane b = uniform_plane(16, 16, 2);
    CHECK(psnr(a, b) == psnr(b, a));
    CHECK_THROWS_AS(psnr(a, uniform_plane(8, 8, 1)), InvalidArgument);
}

TEST_CASE("ssim") {
    const Plane a = uniform_plane(16, 16, 3);
    const Plane b = uniform_plane(16, 16, 4);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) <= 1e-6);
    const Plane smooth = 0.5 * a + 0.5 * b;
    CHECK(std::abs(ssim(a, smooth) - ssim_oracle(a, smooth)) <= 1e-6);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
    // Zero mean in every window, so only the structure term carries the sign.
    Plane centred(16, 16);
    for (int i = 0; i < 16; ++i) {
        for (int j = 0; j < 16; ++j) centred(i, j) = 0.6 * ((i + j) % 2 ? -1.0 : 1.0) * (1.0 + 0.3 * std::sin(j / 3.0));
    }
    CHECK(ssim(centred, -centred) < 0.0);
    const double v = ssim(a, b);
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
    CHECK_THROWS_AS(ssim(a, uniform_plane(16, 8, 1)), InvalidArgument);
}

TEST_CASE("frechet distance") {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
    const Eigen::MatrixXd x = gaussian(400, zero, 1);
    CHECK(fid(x, x) <= 1e-6);
    Eigen::VectorXd d(4);
    d << 1.0, -2.0, 0.5, 1.5;
    const Eigen::MatrixXd a = gaussian(6000, zero, 2);
    const Eigen::MatrixXd b = gaussian(6000, d, 3);
    CHECK(fid(a, b) == doctest::Approx(d.squaredNorm()).epsilon(0.05));
    CHECK(fid(a, b) == doctest::Approx(fid(b, a)).epsilon(1e-9));
    for (std::uint64_t s = 0; s < 10; ++s) CHECK(fid(gaussian(10, zero, 10 + s), gaussian(10, zero, 20 + s)) >= 0.0);
    CHECK_THROWS_AS(fid(gaussian(4, zero, 1), x), InvalidArgument);
    CHECK_THROWS_AS(fid(x, Eigen::MatrixXd::Zero(400, 3)), InvalidArgument);
}

TEST_CASE("band energy") {
    for (int n : {2, 4, 8}) {
        const Plane x = random_plane(32, 32, 40 + n);
        const auto e = band_energy(x, n);
        double total = 0.0;
        for (int i = 0; i < 32; ++i) {
            for (int j = 0; j < 32; ++j) total += x(i, j) * x(i, j);
        }
        CHECK(std::abs(e.low + e.high - total) <= 1e-4 * total);
        CHECK(e.low_fraction() + e.high_fraction() == doctest::Approx(1.0));
    }
    Plane blocks(8, 8), checker(8, 8);
    for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 8; ++j) {
            blocks(i, j) = (i / 2) * 0.1 - (j / 2) * 0.3;
            checker(i, j) = ((i + j) % 2 == 0) ? 0.5 : -0.5;
        }
    }
    CHECK(band_energy(blocks, 2).high <= 1e-24);
    CHECK(band_energy(checker, 2).low == 0.0);
    CHECK_THROWS_AS(band_energy(random_plane(6, 6, 1), 4), InvalidArgument);
}

TEST_CASE("perceptual distances") {
    const auto& enc = small_encoder();
    CHECK(enc.feature_dim() == 16);
    const Plane a = uniform_plane(16, 16, 5);
    const Plane b = uniform_plane(16, 16, 6);
    CHECK(perceptual_distance(enc, a, a) == 0.0);
    CHECK(perceptual_distance(enc, a, b) > 0.0);
    CHECK(perceptual_distance(enc, a, b) == doctest::Approx(perceptual_distance(enc, b, a)).epsilon(1e-12));

    int monotone = 0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const Plane x = uniform_plane(16, 16, 100 + s);
        const Plane delta = 0.02 * random_plane(16, 16, 200 + s);
        if (perceptual_distance(enc, x, x + 2 * delta) >= perceptual_distance(enc, x, x + delta)) ++monotone;
    }
    CHECK(monotone >= 45);

    std::vector<Plane> five;
    for (int i = 0; i < 5; ++i) five.push_back(uniform_plane(16, 16, 300 + i));
    double brute = 0.0;
    for (int i = 0; i < 5; ++i) {
        for (int j = i + 1; j < 5; ++j) brute += perceptual_distance(enc, five[i], five[j]);
    }
    CHECK(std::abs(intra_lpips(enc, five) - brute / 10.0) <= 1e-6);
    const std::vector<Plane> three(five.begin(), five.begin() + 3);
    const double three_brute = (perceptual_distance(enc, five[0], five[1]) + perceptual_distance(enc, five[0], five[2]) +
                                perceptual_distance(enc, five[1], five[2])) / 3.0;
    CHECK(std::abs(intra_lpips(enc, three) - three_brute) <= 1e-9);
    std::vector<Plane> shuffled{five[3], five[0], five[4], five[2], five[1]};
    CHECK(intra_lpips(enc, shuffled) == doctest::Approx(intra_lpips(enc, five)).epsilon(1e-12));
    CHECK(intra_lpips(enc, {a, a, a}) == 0.0);
    CHECK_THROWS_AS(intra_lpips(enc, {a}), InvalidArgument);

    CHECK(r_lpips(enc, five, five) == doctest::Approx(1.0));
    // {a, b}: one pair at distance D. {a, a, a, b}: three of six pairs at D.
    const double d_ab = perceptual_distance(enc, a, b);
    CHECK(intra_lpips(enc, {a, a, a, b}) == doctest::Approx(d_ab / 2.0));
    CHECK(r_lpips(enc, {a, b}, {a, a, a, b}) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK_THROWS_AS(r_lpips(enc, five, {a, a}), InvalidArgument);
}

TEST_CASE("encoder determinism and persistence") {
    const auto& enc = small_encoder();
    std::vector<Plane> xs{uniform_plane(16, 16, 1), uniform_plane(16, 16, 2)};
    const auto f1 = features(enc, xs);
    const auto f2 = features(enc, xs);
    CHECK(f1 == f2);
    CHECK(f1.cols() == 16);
    const auto dir = rfcmg::testing::scratch_dir("metrics");
    save_encoder(dir / "enc.rfck", enc);
    const auto back = load_encoder(dir / "enc.rfck");
    CHECK(back.id() == enc.id());
    CHECK(features(back, xs) == f1);
    std::filesystem::resize_file(dir / "enc.rfck", 100);
    CHECK_THROWS_AS(load_encoder(dir / "enc.rfck"), CorruptFileError);
}

TEST_CASE("metric table") {
    MetricReport r;
    r.run_id = "r1";
    r.experiment = "quality";
    r.target_style = "mmwave";
    r.method = "rfcmg";
    r.fid = 1.5;
    r.ssim = 0.25;
    r.n_generated = 10;
    r.n_real = 20;
    r.encoder_id = "enc-1";
    const std::string header = csv_header();
    CHECK(header.rfind("schema_version,", 0) == 0);
    const std::string row = csv_row(r);
    CHECK(std::count(row.begin(), row.end(), ',') == std::count(header.begin(), header.end(), ','));
    CHECK(row.find(",,") != std::string::npos);
    MetricReport bad = r;
    bad.fid = std::nan("");
    CHECK_THROWS_AS(csv_row(bad), NonFiniteError);

    const auto dir = rfcmg::testing::scratch_dir("csv");
    append_csv(dir / "m.csv", {r});
    append_csv(dir / "m.csv", {r, r});
    std::ifstream in(dir / "m.csv");
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == header);
    CHECK(lines[1] == row);
}
