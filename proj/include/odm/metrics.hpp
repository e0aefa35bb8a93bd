#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "odm/denoiser.hpp"
#include "odm/diffusion.hpp"
#include "odm/schedule.hpp"
#include "odm/tensor.hpp"

namespace odm {

/// Squared Frechet distance between the Gaussian fits of two sample sets:
/// ||mu_r - mu_g||^2 + Tr(S_r + S_g - 2 (S_r S_g)^{1/2}), covariance with
/// ddof = 1, result clamped at 0. Sets with fewer rows than D+1 get an
/// 1e-6 * I regularizer on their covariance.
double frechet_gaussian(const Tensor& real, const Tensor& gen);

/// k-NN-ball coverage: precision = fraction of gen points within some real
/// point's k-th-neighbor radius (self excluded); recall symmetric. Both sets
/// need more than k points.
std::pair<double, double> knn_precision_recall(const Tensor& real, const Tensor& gen,
                                               std::size_t k = 3);

struct CollinearityRecord {
    std::size_t t{0}, p{0}, q{0}, r{0};
    double residual{0.0};
    double alpha_hat{0.0};
};

using PredictFn = std::function<Tensor(const Tensor& x_t, std::size_t t, std::size_t c)>;

/// For each timestep and class triplet: diffuse one fixed per-class batch
/// with seeded noise, take the class-mean noise prediction, and record the
/// ordering residual (d(p,r) - d(p,q) - d(q,r))^2 together with the
/// unclamped least-squares alpha_hat of
/// min_a ||eps_q - (a*eps_p + (1-a)*eps_r)||^2. class_batches[i] holds class
/// i+1 and must share one width; C >= 3 required.
std::vector<CollinearityRecord> collinearity_probe(const PredictFn& predict,
                                                   const std::vector<Tensor>& class_batches,
                                                   const std::vector<std::size_t>& t_list,
                                                   const NoiseSchedule& sched,
                                                   DistanceMetric metric, std::uint64_t seed);

std::vector<CollinearityRecord> collinearity_probe(const DenoiserParams& params,
                                                   const std::vector<Tensor>& class_batches,
                                                   const std::vector<std::size_t>& t_list,
                                                   const NoiseSchedule& sched,
                                                   DistanceMetric metric, std::uint64_t seed);

struct MetricsReport {
    double frechet_overall{0.0};
    std::vector<double> frechet_per_class;
    double precision{0.0};
    double recall{0.0};
    std::vector<CollinearityRecord> collinearity;

    nlohmann::json to_json() const;
};

/// t,p,q,r,residual,alpha_hat
void write_geometry_csv(const std::vector<CollinearityRecord>& records,
                        const std::string& path);

}  // namespace odm
