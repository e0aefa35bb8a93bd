#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "odm/autograd.hpp"
#include "odm/rng.hpp"
#include "odm/schedule.hpp"
#include "odm/tensor.hpp"

namespace odm {

/// One corruption step: sqrt(1 - beta_t) * x_prev + sqrt(beta_t) * eps.
Tensor forward_step(const Tensor& x_prev, const Tensor& eps, std::size_t t,
                    const NoiseSchedule& sched);

/// Closed-form jump to timestep t:
/// sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps.
Tensor forward_jump(const Tensor& x0, const Tensor& eps, std::size_t t,
                    const NoiseSchedule& sched);

struct Triplet {
    std::size_t p{0}, q{0}, r{0};  // class labels, 1 <= p < q < r <= C
};

enum class TripletMode { all, random_one };
enum class DistanceMetric { squared, euclidean };
enum class LambdaMode { time_variant, off, constant };

const char* to_string(TripletMode m);
const char* to_string(DistanceMetric m);
const char* to_string(LambdaMode m);
TripletMode triplet_mode_from_string(const std::string& s);
DistanceMetric metric_from_string(const std::string& s);
LambdaMode lambda_mode_from_string(const std::string& s);

/// mode=all: every p<q<r triple in lexicographic order; mode=random_one: one
/// uniform triple (rng required). C < 3 yields an empty list.
std::vector<Triplet> sample_triplets(std::size_t C, TripletMode mode, Rng* rng);

/// One class sub-batch. x0/eps/x_t are [B x D]; label is the true class in
/// 1..C; cond is the label fed to the model after CFG dropout (0 = null).
struct ClassBlock {
    std::size_t label{1};
    std::size_t cond{1};
    Tensor x0, eps, x_t;
};

struct TrainBatch {
    std::vector<ClassBlock> blocks;  // strictly ascending by label
    std::size_t t{1};                // shared timestep for the step
    std::size_t num_classes{0};
};

/// Noise prediction for one block at timestep t with conditioning label cond
/// (0 = null class).
using ModelFn = std::function<NodeId(Tape&, NodeId x_t, std::size_t t, std::size_t cond)>;

/// Mean over blocks of the per-block mean squared prediction error. Blocks
/// are equal-sized under class-balanced batching, so this equals the global
/// mean over samples and elements.
NodeId dm_loss(Tape& tape, const ModelFn& model, const TrainBatch& batch);

/// metric=squared: mean-normalized ||a - b||^2; metric=euclidean: its sqrt.
NodeId ordinal_distance(Tape& tape, NodeId eps_a, NodeId eps_b, DistanceMetric metric);

/// (d(p,r) - (d(p,q) + d(q,r)))^2 with d = ordinal_distance.
NodeId ordinal_loss(Tape& tape, NodeId eps_p, NodeId eps_q, NodeId eps_r,
                    DistanceMetric metric);

struct LossBreakdown {
    double dm{0.0};
    double ordinal{0.0};
    double lambda{0.0};
    double total{0.0};
    NodeId total_node{0};
};

/// total = dm + lambda * ordinal with lambda = t/T (time_variant), 0 (off),
/// or lambda_const (constant). The ordinal term is the uniform average of
/// ordinal_loss over the given triplets, computed on the same per-block
/// predictions as the dm term. lambda_mode=off adds no ordinal nodes at all,
/// so the step is bit-identical to a plain-diffusion loop.
LossBreakdown total_loss(Tape& tape, const ModelFn& model, const TrainBatch& batch,
                         std::size_t T, DistanceMetric metric, LambdaMode lambda_mode,
                         double lambda_const, const std::vector<Triplet>& triplets);

}  // namespace odm
