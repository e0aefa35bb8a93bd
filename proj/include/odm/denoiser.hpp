#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odm/autograd.hpp"
#include "odm/rng.hpp"
#include "odm/tensor.hpp"

namespace odm {

enum class Activation { silu, tanh_ };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct ArchConfig {
    std::size_t input_dim{2};
    std::vector<std::size_t> hidden{128, 128, 128};
    std::size_t class_embed_dim{16};  // E
    std::size_t time_freqs{8};        // F
    Activation activation{Activation::silu};
    std::size_t num_classes{4};  // C; the embedding table has C+1 rows

    void validate() const;  // throws on non-positive dims or C < 2
    std::size_t concat_dim() const { return input_dim + 2 * time_freqs + class_embed_dim; }
    /// Canonical description string; hash() is FNV-1a over it.
    std::string describe() const;
    std::uint64_t hash() const;
};

/// All trainable tensors. The canonical flattening order — class_embed, then
/// w0, b0, w1, b1, ... — is the contract for gradients, optimizer state, and
/// checkpoint blocks.
struct DenoiserParams {
    ArchConfig arch;
    Tensor class_embed;           // (C+1) x E, row 0 = null class
    std::vector<Tensor> weights;  // layer l: [in_l x out_l]
    std::vector<Tensor> biases;   // layer l: [1 x out_l]

    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;
    std::vector<std::string> tensor_names() const;
};

/// Weights U(-a, a) with a = 1/sqrt(fan_in), biases zero, embeddings
/// N(0, 0.02^2). Draw order: embedding row-major, then each layer's weight
/// row-major. Deterministic given the generator state.
DenoiserParams init_params(const ArchConfig& arch, Rng& rng);
DenoiserParams init_params(const ArchConfig& arch, std::uint64_t seed);

/// [sin(w_k*tau), cos(w_k*tau)] interleaved over k = 1..F, tau = t/T, with
/// w_k spaced geometrically from 1 to 1000.
std::vector<double> time_embed(std::size_t t, std::size_t T, std::size_t F);

/// Parameter leaves on a tape, in canonical order.
struct DenoiserNodes {
    NodeId class_embed{0};
    std::vector<NodeId> weights, biases;

    std::vector<NodeId> all() const;
};

DenoiserNodes bind_params(Tape& tape, const DenoiserParams& params);

/// Differentiable forward pass: concat(x_t, time_embed(t), class row c)
/// through the MLP; c = 0 selects the null-class row. x_t is [B x D].
NodeId denoiser_forward(Tape& tape, const DenoiserNodes& nodes, const ArchConfig& arch,
                        NodeId x_t, std::size_t t, std::size_t T, std::size_t c);

/// Tape-free forward pass for sampling and evaluation; same math as
/// denoiser_forward up to floating-point summation order.
Tensor predict_noise(const DenoiserParams& params, const Tensor& x_t, std::size_t t,
                     std::size_t T, std::size_t c);

}  // namespace odm
