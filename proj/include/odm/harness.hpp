#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "odm/data.hpp"
#include "odm/denoiser.hpp"
#include "odm/diffusion.hpp"
#include "odm/rng.hpp"
#include "odm/schedule.hpp"

namespace odm {

/// Experiment configuration. Exactly one of dataset_path / generator names
/// the data source. The architecture's input_dim and num_classes are always
/// taken from the dataset, never from the config.
struct TrainConfig {
    std::string dataset_path;
    std::optional<OrdinalGaussianSpec> generator;

    std::vector<std::size_t> hidden{128, 128, 128};
    std::size_t class_embed_dim{16};
    std::size_t time_freqs{8};
    Activation activation{Activation::silu};

    double beta1{1e-4};
    double betaT{0.02};
    std::size_t timesteps{1000};

    std::size_t iterations{20000};
    std::size_t batch_size{32};
    double learning_rate{1e-4};
    double adam_beta1{0.9};
    double adam_beta2{0.999};
    double adam_eps{1e-8};

    LambdaMode lambda_mode{LambdaMode::time_variant};
    double lambda_const{1.0};
    DistanceMetric metric{DistanceMetric::squared};
    TripletMode triplet_mode{TripletMode::all};
    double label_drop{0.1};
    std::uint64_t seed{0};

    /// Strict parse: unknown keys anywhere are rejected by name.
    static TrainConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;

    /// Architecture completed with the dataset's dimensions.
    ArchConfig resolve_arch(std::size_t input_dim, std::size_t num_classes) const;
};

nlohmann::json arch_to_json(const ArchConfig& a);
ArchConfig arch_from_json(const nlohmann::json& j);

struct AdamState {
    std::vector<Tensor> m, v;  // canonical tensor order
    std::uint64_t step{0};
};

AdamState make_adam_state(const DenoiserParams& params);

/// One bias-corrected Adam update over the canonical tensor list.
void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps);

struct Checkpoint {
    std::uint32_t version{1};
    std::uint64_t iteration{0};
    TrainConfig config;
    DenoiserParams params;  // params.arch carries the resolved architecture
    AdamState adam;
    std::array<std::array<std::uint64_t, 4>, RngStreams::kStreamCount> rng_states{};
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Loads the config's dataset file, or generates the synthetic set from a
/// seed stream disjoint from all training streams.
LabeledDataset resolve_dataset(const TrainConfig& cfg);

/// Deterministic training loop: class-balanced batch -> shared t -> noise ->
/// CFG label dropout -> forward_jump -> total_loss -> backward -> Adam.
/// A nonempty loss_log_path receives one CSV row per step
/// (iter,t,lambda,dm_loss,ordinal_loss,total); resuming appends. resume must
/// match the config (iterations aside) and the architecture hash, and
/// training continues from its iteration up to cfg.iterations.
/// Aborts with the iteration number and last breakdown if the loss goes
/// non-finite.
Checkpoint train(const TrainConfig& cfg, const std::string& loss_log_path = "",
                 const Checkpoint* resume = nullptr);

}  // namespace odm
