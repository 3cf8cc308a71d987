// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rfcmg/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "rfcmg/io.hpp"
#include "rfcmg/lfmc.hpp"
#include "rfcmg/nn/fit.hpp"

namespace rfcmg::metrics {

namespace {

constexpr int kWindow = 7;
constexpr double kSigma = 1.5;

Eigen::Matrix<double, kWindow, kWindow> gaussian_window() {
    Eigen::Matrix<double, kWindow, kWindow> g;
    const int r = kWindow / 2;
    for (int i = 0; i < kWindow; ++i) {
        for (int j = 0; j < kWindow; ++j) {
            const double d2 = (i - r) * (i - r) + (j - r) * (j - r);
            g(i, j) = std::exp(-d2 / (2.0 * kSigma * kSigma));
        }
    }
    return g / g.sum();
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& f, Eigen::VectorXd& mean) {
    mean = f.colwise().mean().transpose();
    const Eigen::MatrixXd c = f.rowwise() - mean.transpose();
    return (c.transpose() * c) / static_cast<double>(f.rows() - 1);
}

/// Symmetric square root; eigenvalues above -tol are clamped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, double tol, const char* what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < -tol) {
            throw InvalidArgument(std::string("fid: ") + what + " is not positive semi-definite");
        }
        ev(i) = std::sqrt(std::max(ev(i), 0.0));
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

std::string fmt(const std::optional<double>& v) {
    if (!v) return "";
    std::ostringstream os;
    os << std::setprecision(10) << *v;
    return os.str();
}

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

double psnr(const Plane& a, const Plane& b) {
    require_same_shape(a, b, "psnr");
    const double mse = (a - b).square().mean();
    if (mse < 1e-10) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(kPsnrPeak * kPsnrPeak / mse));
}

double ssim(const Plane& a, const Plane& b) {
    require_same_shape(a, b, "ssim");
    require(a.rows() >= kWindow && a.cols() >= kWindow, "ssim needs at least a 7x7 input");
    constexpr double L = 2.0;
    constexpr double c1 = (0.01 * L) * (0.01 * L);
    constexpr double c2 = (0.03 * L) * (0.03 * L);
    static const auto g = gaussian_window();
    const Eigen::Index oh = a.rows() - kWindow + 1;
    const Eigen::Index ow = a.cols() - kWindow + 1;
    double total = 0.0;
    for (Eigen::Index r = 0; r < oh; ++r) {
        for (Eigen::Index c = 0; c < ow; ++c) {
            const auto pa = a.block(r, c, kWindow, kWindow).matrix();
            const auto pb = b.block(r, c, kWindow, kWindow).matrix();
            const double ma = (g.array() * pa.array()).sum();
            const double mb = (g.array() * pb.array()).sum();
            const double va = (g.array() * pa.array().square()).sum() - ma * ma;
            const double vb = (g.array() * pb.array().square()).sum() - mb * mb;
            const double cov = (g.array() * pa.array() * pb.array()).sum() - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                     ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    return total / static_cast<double>(oh * ow);
}

double fid(const Eigen::MatrixXd& feats_a, const Eigen::MatrixXd& feats_b) {
    require(feats_a.cols() == feats_b.cols(), "fid: feature dimensions differ");
    const Eigen::Index d = feats_a.cols();
    if (feats_a.rows() < d + 1 || feats_b.rows() < d + 1) {
        throw InvalidArgument("fid: need at least " + std::to_string(d + 1) +
                              " samples per set, got " + std::to_string(feats_a.rows()) + " and " +
                              std::to_string(feats_b.rows()));
    }
    Eigen::VectorXd mu_a, mu_b;
    const Eigen::MatrixXd sa = covariance(feats_a, mu_a);
    const Eigen::MatrixXd sb = covariance(feats_b, mu_b);
    const double scale = std::max({1.0, sa.diagonal().maxCoeff(), sb.diagonal().maxCoeff()});
    const double tol = 1e-8 * scale;
    const Eigen::MatrixXd root_a = psd_sqrt(sa, tol, "first covariance");
    const Eigen::MatrixXd m = root_a * sb * root_a;
    const Eigen::MatrixXd root_m = psd_sqrt(0.5 * (m + m.transpose()), tol * scale, "covariance product");
    const double value = (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2.0 * root_m.trace();
    return std::max(value, 0.0);
}

BandEnergy band_energy(const Plane& x, int factor) {
    const Plane lp = lfmc::low_pass(x, factor);
    return BandEnergy{lp.square().sum(), (x - lp).square().sum()};
}

std::string FeatureEncoder::id() const {
    std::ostringstream os;
    os << "enc-" << std::hex << nn::checksum(params);
    return os.str();
}

nn::ConvNet<float> FeatureEncoder::net() const {
    return nn::ConvNet<float>(channels, classes, nn::Binder<float>(params));
}

FeatureEncoder train_encoder(const std::vector<Plane>& data, const std::vector<int>& labels,
                             const EncoderOptions& opt) {
    require(!data.empty() && data.size() == labels.size(), "encoder data/labels mismatch");
    FeatureEncoder enc;
    enc.channels = opt.channels;
    enc.classes = *std::max_element(labels.begin(), labels.end()) + 1;
    enc.seed = opt.seed;
    const nn::ConvNet<float> net(enc.channels, enc.classes, nn::Binder<float>(enc.params));
    Rng rng(derive_seed(opt.seed, "encoder.init"));
    net.init(enc.params, rng);
    std::vector<const Plane*> ptrs;
    for (const auto& p : data) ptrs.push_back(&p);
    nn::fit_convnet(net, enc.params, ptrs, labels,
                    {.epochs = opt.epochs, .batch = opt.batch, .lr = opt.lr, .cosine = true,
                     .seed = derive_seed(opt.seed, "encoder.fit")});
    return enc;
}

Eigen::MatrixXd features(const FeatureEncoder& enc, const std::vector<Plane>& samples) {
    const auto net = enc.net();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(samples.size()), enc.feature_dim());
    constexpr std::size_t kChunk = 64;
    for (std::size_t start = 0; start < samples.size(); start += kChunk) {
        const std::size_t end = std::min(samples.size(), start + kChunk);
        std::vector<const Plane*> ptrs;
        for (std::size_t i = start; i < end; ++i) ptrs.push_back(&samples[i]);
        nn::ConvNet<float>::Tape tape;
        net.forward(enc.params, nn::stack_planes<float>(ptrs), tape);
        for (std::size_t i = start; i < end; ++i) {
            for (int k = 0; k < enc.feature_dim(); ++k) {
                out(static_cast<Eigen::Index>(i), k) =
                    tape.pooled.v[(i - start) * enc.feature_dim() + k];
            }
        }
    }
    return out;
}

std::vector<std::vector<float>> normalized_activations(const FeatureEncoder& enc,
                                                       const Plane& x) {
    const auto net = enc.net();
    nn::ConvNet<float>::Tape tape;
    net.forward(enc.params, nn::stack_planes<float>({&x}), tape);
    std::vector<std::vector<float>> out;
    for (const auto& act : tape.act) {
        std::vector<float> v(act.v.begin(), act.v.end());
        const std::size_t hw = act.plane_size();
        for (std::size_t pos = 0; pos < hw; ++pos) {
            double norm = 0.0;
            for (int ch = 0; ch < act.c; ++ch) norm += double(v[ch * hw + pos]) * v[ch * hw + pos];
            const double inv = 1.0 / (std::sqrt(norm) + 1e-10);
            for (int ch = 0; ch < act.c; ++ch) v[ch * hw + pos] = static_cast<float>(v[ch * hw + pos] * inv);
        }
        out.push_back(std::move(v));
    }
    return out;
}

namespace {

double activation_distance(const std::vector<std::vector<float>>& a,
                           const std::vector<std::vector<float>>& b) {
    double total = 0.0;
    for (std::size_t l = 0; l < a.size(); ++l) {
        double s = 0.0;
        for (std::size_t i = 0; i < a[l].size(); ++i) {
            const double d = double(a[l][i]) - double(b[l][i]);
            s += d * d;
        }
        total += s / static_cast<double>(a[l].size());
    }
    return total;
}

}  // namespace

double perceptual_distance(const FeatureEncoder& enc, const Plane& a, const Plane& b) {
    require_same_shape(a, b, "perceptual_distance");
    return activation_distance(normalized_activations(enc, a), normalized_activations(enc, b));
}

double intra_lpips(const FeatureEncoder& enc, const std::vector<Plane>& samples) {
    require(samples.size() >= 2, "intra_lpips needs at least two samples");
    std::vector<std::vector<std::vector<float>>> acts;
    acts.reserve(samples.size());
    for (const auto& s : samples) acts.push_back(normalized_activations(enc, s));
    double total = 0.0;
    long pairs = 0;
    for (std::size_t i = 0; i < acts.size(); ++i) {
        for (std::size_t j = i + 1; j < acts.size(); ++j) {
            total += activation_distance(acts[i], acts[j]);
            ++pairs;
        }
    }
    return total / static_cast<double>(pairs);
}

double r_lpips(const FeatureEncoder& enc, const std::vector<Plane>& generated,
               const std::vector<Plane>& real) {
    const double denom = intra_lpips(enc, real);
    if (denom <= 1e-9) {
        throw InvalidArgument("r_lpips: real-set diversity is zero; the ratio is undefined");
    }
    return intra_lpips(enc, generated) / denom;
}

void save_encoder(const std::filesystem::path& path, const FeatureEncoder& enc) {
    io::Archive a;
    a.header = {{"kind", "feature_encoder"},
                {"channels", enc.channels},
                {"classes", enc.classes},
                {"seed", enc.seed}};
    for (int i = 0; i < enc.params.count(); ++i) {
        io::TensorData t;
        for (int d : enc.params.shape(i)) t.shape.push_back(static_cast<std::uint64_t>(d));
        t.values.assign(enc.params.value(i).begin(), enc.params.value(i).end());
        a.tensors.push_back({enc.params.name(i), std::move(t)});
    }
    io::write_archive(path, a);
}

FeatureEncoder load_encoder(const std::filesystem::path& path) {
    const io::Archive a = io::read_archive(path);
    if (a.header.value("kind", std::string()) != "feature_encoder") {
        throw CorruptFileError(path.string() + ": not a feature encoder");
    }
    FeatureEncoder enc;
    enc.channels = a.header.at("channels").get<std::vector<int>>();
    enc.classes = a.header.at("classes").get<int>();
    enc.seed = a.header.at("seed").get<std::uint64_t>();
    nn::ConvNet<float> net(enc.channels, enc.classes, nn::Binder<float>(enc.params));
    if (static_cast<std::size_t>(enc.params.count()) != a.tensors.size()) {
        throw CorruptFileError(path.string() + ": parameter count mismatch");
    }
    for (int i = 0; i < enc.params.count(); ++i) {
        const auto& t = a.get(enc.params.name(i));
        if (t.values.size() != enc.params.value(i).size()) {
            throw CorruptFileError(path.string() + ": shape mismatch for " + enc.params.name(i));
        }
        enc.params.value(i).assign(t.values.begin(), t.values.end());
    }
    return enc;
}

std::string csv_header() {
    return "schema_version,run_id,experiment,target_style,method,param_name,param_value,fid,ssim,"
           "psnr,intra_lpips,r_lpips,accuracy,n_generated,n_real,encoder_id";
}

std::string csv_row(const MetricReport& r) {
    for (const auto& v : {r.fid, r.ssim, r.psnr, r.intra_lpips, r.r_lpips, r.accuracy}) {
        if (v && !std::isfinite(*v)) throw NonFiniteError("metric report holds a non-finite value");
    }
    std::ostringstream os;
    os << kCsvSchemaVersion << ',' << quote(r.run_id) << ',' << quote(r.experiment) << ','
       << quote(r.target_style) << ',' << quote(r.method) << ',' << quote(r.param_name) << ','
       << quote(r.param_value) << ',' << fmt(r.fid) << ',' << fmt(r.ssim) << ',' << fmt(r.psnr)
       << ',' << fmt(r.intra_lpips) << ',' << fmt(r.r_lpips) << ',' << fmt(r.accuracy) << ','
       << r.n_generated << ',' << r.n_real << ',' << quote(r.encoder_id);
    return os.str();
}

void append_csv(const std::filesystem::path& path, const std::vector<MetricReport>& rows) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    if (fresh) out << csv_header() << '\n';
    for (const auto& r : rows) out << csv_row(r) << '\n';
}

std::vector<Plane> planes_of(const std::vector<Spectrogram>& s) {
    std::vector<Plane> out;
    out.reserve(s.size());
    for (const auto& x : s) out.push_back(x.data);
    return out;
}

}  // namespace rfcmg::metrics
