#include "odm/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "odm/data.hpp"
#include "odm/rng.hpp"

namespace odm {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_set(const Tensor& x, const char* what) {
    if (x.rank() != 2 || x.numel() == 0)
        throw std::invalid_argument(std::string(what) + ": expected a nonempty [N x D] tensor");
}

/// Symmetric PSD square root via eigendecomposition, negative eigenvalues
/// clamped to zero.
Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    if (es.info() != Eigen::Success)
        throw std::runtime_error("frechet_gaussian: eigendecomposition failed");
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double sq_dist(const double* a, const double* b, std::size_t d) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double diff = a[j] - b[j];
        acc += diff * diff;
    }
    return acc;
}

/// k-th-nearest-neighbor squared radius per point, self excluded.
std::vector<double> knn_radii(const Tensor& pts, std::size_t k) {
    const std::size_t n = pts.rows(), d = pts.cols();
    std::vector<double> radii(n);
    std::vector<double> dists;
    dists.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        dists.clear();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) dists.push_back(sq_dist(&pts.data[i * d], &pts.data[j * d], d));
        std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
        radii[i] = dists[k - 1];
    }
    return radii;
}

double coverage(const Tensor& pts, const Tensor& centers, const std::vector<double>& radii) {
    const std::size_t n = pts.rows(), m = centers.rows(), d = pts.cols();
    std::size_t covered = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (sq_dist(&pts.data[i * d], &centers.data[j * d], d) <= radii[j]) {
                ++covered;
                break;
            }
        }
    }
    return static_cast<double>(covered) / static_cast<double>(n);
}

/// Mean-normalized distance between two mean-prediction vectors.
double mean_distance(const std::vector<double>& a, const std::vector<double>& b,
                     DistanceMetric metric) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = a[j] - b[j];
        acc += diff * diff;
    }
    const double d = acc / static_cast<double>(a.size());
    return metric == DistanceMetric::squared ? d : std::sqrt(d);
}

}  // namespace

double frechet_gaussian(const Tensor& real, const Tensor& gen) {
    check_set(real, "frechet_gaussian");
    check_set(gen, "frechet_gaussian");
    if (real.cols() != gen.cols())
        throw std::invalid_argument("frechet_gaussian: dimension mismatch");
    if (real.rows() < 2 || gen.rows() < 2)
        throw std::invalid_argument("frechet_gaussian: need at least 2 samples per set");

    const std::size_t d = real.cols();
    const auto fit = [d](const Tensor& x) {
        Eigen::Map<const RowMat> m(x.data.data(), static_cast<Eigen::Index>(x.rows()),
                                   static_cast<Eigen::Index>(d));
        Eigen::VectorXd mu = m.colwise().mean();
        Eigen::MatrixXd centered = m.rowwise() - mu.transpose();
        Eigen::MatrixXd cov =
            centered.transpose() * centered / static_cast<double>(x.rows() - 1);
        if (x.rows() < d + 1)
            cov += 1e-6 * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d),
                                                    static_cast<Eigen::Index>(d));
        return std::make_pair(std::move(mu), std::move(cov));
    };

    const auto [mu_r, cov_r] = fit(real);
    const auto [mu_g, cov_g] = fit(gen);

    const Eigen::MatrixXd a = sqrtm_psd(cov_r);
    const Eigen::MatrixXd cross = sqrtm_psd(a * cov_g * a);
    const double d2 = (mu_r - mu_g).squaredNorm() + cov_r.trace() + cov_g.trace() -
                      2.0 * cross.trace();
    return std::max(0.0, d2);
}

std::pair<double, double> knn_precision_recall(const Tensor& real, const Tensor& gen,
                                               std::size_t k) {
    check_set(real, "knn_precision_recall");
    check_set(gen, "knn_precision_recall");
    if (real.cols() != gen.cols())
        throw std::invalid_argument("knn_precision_recall: dimension mismatch");
    if (k < 1) throw std::invalid_argument("knn_precision_recall: need k >= 1");
    if (real.rows() <= k || gen.rows() <= k)
        throw std::invalid_argument("knn_precision_recall: each set needs more than k points");

    const auto real_radii = knn_radii(real, k);
    const auto gen_radii = knn_radii(gen, k);
    return {coverage(gen, real, real_radii), coverage(real, gen, gen_radii)};
}

std::vector<CollinearityRecord> collinearity_probe(const PredictFn& predict,
                                                   const std::vector<Tensor>& class_batches,
                                                   const std::vector<std::size_t>& t_list,
                                                   const NoiseSchedule& sched,
                                                   DistanceMetric metric, std::uint64_t seed) {
    const std::size_t C = class_batches.size();
    if (C < 3) throw std::invalid_argument("collinearity_probe: need at least 3 classes");
    const std::size_t D = class_batches.front().rank() == 2 ? class_batches.front().cols() : 0;
    for (const Tensor& b : class_batches)
        if (b.rank() != 2 || b.numel() == 0 || b.cols() != D)
            throw std::invalid_argument("collinearity_probe: class batches must share [.. x D]");

    const auto triplets = sample_triplets(C, TripletMode::all, nullptr);
    Rng rng(seed);
    std::vector<CollinearityRecord> records;
    records.reserve(t_list.size() * triplets.size());

    for (const std::size_t t : t_list) {
        if (t < 1 || t > sched.T)
            throw std::invalid_argument("collinearity_probe: t out of range 1..T");
        std::vector<std::vector<double>> means(C, std::vector<double>(D, 0.0));
        for (std::size_t c = 1; c <= C; ++c) {
            const Tensor& x0 = class_batches[c - 1];
            Tensor eps(x0.shape);
            for (double& v : eps.data) v = rng.normal();
            const Tensor x_t = forward_jump(x0, eps, t, sched);
            const Tensor pred = predict(x_t, t, c);
            if (!pred.same_shape(x0))
                throw std::invalid_argument("collinearity_probe: prediction shape mismatch");
            const std::size_t b = x0.rows();
            for (std::size_t i = 0; i < b; ++i)
                for (std::size_t j = 0; j < D; ++j) means[c - 1][j] += pred.data[i * D + j];
            for (std::size_t j = 0; j < D; ++j) means[c - 1][j] /= static_cast<double>(b);
        }
        for (const Triplet& tr : triplets) {
            const auto& mp = means[tr.p - 1];
            const auto& mq = means[tr.q - 1];
            const auto& mr = means[tr.r - 1];
            const double e = mean_distance(mp, mr, metric) -
                             (mean_distance(mp, mq, metric) + mean_distance(mq, mr, metric));
            double num = 0.0, den = 0.0;
            for (std::size_t j = 0; j < D; ++j) {
                const double qr = mq[j] - mr[j];
                const double pr = mp[j] - mr[j];
                num += qr * pr;
                den += pr * pr;
            }
            records.push_back({t, tr.p, tr.q, tr.r, e * e, den == 0.0 ? 0.5 : num / den});
        }
    }
    return records;
}

std::vector<CollinearityRecord> collinearity_probe(const DenoiserParams& params,
                                                   const std::vector<Tensor>& class_batches,
                                                   const std::vector<std::size_t>& t_list,
                                                   const NoiseSchedule& sched,
                                                   DistanceMetric metric, std::uint64_t seed) {
    if (class_batches.size() != params.arch.num_classes)
        throw std::invalid_argument("collinearity_probe: need one batch per model class");
    const PredictFn fn = [&](const Tensor& x_t, std::size_t t, std::size_t c) {
        return predict_noise(params, x_t, t, sched.T, c);
    };
    return collinearity_probe(fn, class_batches, t_list, sched, metric, seed);
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json j;
    j["frechet_overall"] = frechet_overall;
    j["frechet_per_class"] = frechet_per_class;
    j["precision"] = precision;
    j["recall"] = recall;
    nlohmann::json coll = nlohmann::json::array();
    for (const CollinearityRecord& r : collinearity)
        coll.push_back({{"t", r.t},
                        {"p", r.p},
                        {"q", r.q},
                        {"r", r.r},
                        {"residual", r.residual},
                        {"alpha_hat", r.alpha_hat}});
    j["collinearity"] = std::move(coll);
    return j;
}

void write_geometry_csv(const std::vector<CollinearityRecord>& records,
                        const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << "t,p,q,r,residual,alpha_hat\n";
    for (const CollinearityRecord& r : records)
        f << r.t << "," << r.p << "," << r.q << "," << r.r << "," << fmt_g17(r.residual) << ","
          << fmt_g17(r.alpha_hat) << "\n";
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace odm
