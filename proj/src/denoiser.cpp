#include "odm/denoiser.hpp"

#include <cmath>
#include <stdexcept>

namespace odm {

const char* to_string(Activation a) {
    switch (a) {
        case Activation::silu: return "silu";
        case Activation::tanh_: return "tanh";
    }
    throw std::invalid_argument("to_string: bad activation");
}

Activation activation_from_string(const std::string& s) {
    if (s == "silu") return Activation::silu;
    if (s == "tanh") return Activation::tanh_;
    throw std::invalid_argument("unknown activation '" + s + "' (expected silu or tanh)");
}

void ArchConfig::validate() const {
    if (input_dim == 0) throw std::invalid_argument("arch: input_dim must be positive");
    if (hidden.empty()) throw std::invalid_argument("arch: need at least one hidden layer");
    for (std::size_t h : hidden)
        if (h == 0) throw std::invalid_argument("arch: hidden widths must be positive");
    if (class_embed_dim == 0) throw std::invalid_argument("arch: class_embed_dim must be positive");
    if (time_freqs == 0) throw std::invalid_argument("arch: time_freqs must be positive");
    if (num_classes < 2) throw std::invalid_argument("arch: need num_classes >= 2");
}

std::string ArchConfig::describe() const {
    std::string s = "D=" + std::to_string(input_dim) + ";hidden=";
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(hidden[i]);
    }
    s += ";E=" + std::to_string(class_embed_dim);
    s += ";F=" + std::to_string(time_freqs);
    s += ";act=";
    s += to_string(activation);
    s += ";C=" + std::to_string(num_classes);
    return s;
}

std::uint64_t ArchConfig::hash() const {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char ch : describe()) {
        h ^= ch;
        h *= 0x100000001B3ull;
    }
    return h;
}

std::vector<Tensor*> DenoiserParams::tensors() {
    std::vector<Tensor*> out{&class_embed};
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.push_back(&weights[l]);
        out.push_back(&biases[l]);
    }
    return out;
}

std::vector<const Tensor*> DenoiserParams::tensors() const {
    std::vector<const Tensor*> out{&class_embed};
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.push_back(&weights[l]);
        out.push_back(&biases[l]);
    }
    return out;
}

std::vector<std::string> DenoiserParams::tensor_names() const {
    std::vector<std::string> out{"class_embed"};
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.push_back("w" + std::to_string(l));
        out.push_back("b" + std::to_string(l));
    }
    return out;
}

namespace {

std::vector<std::size_t> layer_dims(const ArchConfig& a) {
    std::vector<std::size_t> dims{a.concat_dim()};
    dims.insert(dims.end(), a.hidden.begin(), a.hidden.end());
    dims.push_back(a.input_dim);
    return dims;
}

}  // namespace

DenoiserParams init_params(const ArchConfig& arch, Rng& rng) {
    arch.validate();
    DenoiserParams p;
    p.arch = arch;

    p.class_embed = Tensor({arch.num_classes + 1, arch.class_embed_dim});
    for (double& v : p.class_embed.data) v = 0.02 * rng.normal();

    const auto dims = layer_dims(arch);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t in = dims[l], out = dims[l + 1];
        Tensor w({in, out});
        const double a = 1.0 / std::sqrt(static_cast<double>(in));
        for (double& v : w.data) v = a * (2.0 * rng.uniform01() - 1.0);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(std::vector<std::size_t>{1, out});
    }
    return p;
}

DenoiserParams init_params(const ArchConfig& arch, std::uint64_t seed) {
    Rng rng(seed);
    return init_params(arch, rng);
}

std::vector<double> time_embed(std::size_t t, std::size_t T, std::size_t F) {
    if (t < 1 || t > T) throw std::invalid_argument("time_embed: t out of range 1..T");
    if (F == 0) throw std::invalid_argument("time_embed: F must be positive");
    const double tau = static_cast<double>(t) / static_cast<double>(T);
    std::vector<double> out(2 * F);
    for (std::size_t k = 0; k < F; ++k) {
        const double w =
            F == 1 ? 1.0
                   : std::pow(1000.0, static_cast<double>(k) / static_cast<double>(F - 1));
        out[2 * k] = std::sin(w * tau);
        out[2 * k + 1] = std::cos(w * tau);
    }
    return out;
}

std::vector<NodeId> DenoiserNodes::all() const {
    std::vector<NodeId> out{class_embed};
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.push_back(weights[l]);
        out.push_back(biases[l]);
    }
    return out;
}

DenoiserNodes bind_params(Tape& tape, const DenoiserParams& params) {
    DenoiserNodes n;
    n.class_embed = tape.leaf(params.class_embed);
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        n.weights.push_back(tape.leaf(params.weights[l]));
        n.biases.push_back(tape.leaf(params.biases[l]));
    }
    return n;
}

NodeId denoiser_forward(Tape& tape, const DenoiserNodes& nodes, const ArchConfig& arch,
                        NodeId x_t, std::size_t t, std::size_t T, std::size_t c) {
    const Tensor& x = tape.value(x_t);
    if (x.rank() != 2 || x.cols() != arch.input_dim)
        throw std::invalid_argument("denoiser_forward: input must be [B x " +
                                    std::to_string(arch.input_dim) + "], got " + x.shape_str());
    if (c > arch.num_classes)
        throw std::invalid_argument("denoiser_forward: unknown class " + std::to_string(c));
    const std::size_t B = x.rows();

    // Rows are replicated across the batch by multiplying with a ones column,
    // which also routes gradients back to the row tensors correctly.
    const NodeId ones = tape.leaf(Tensor({B, 1}, 1.0));
    const NodeId trow = tape.leaf(Tensor::row(time_embed(t, T, arch.time_freqs)));
    const NodeId crow = tape.select_row(nodes.class_embed, c);

    NodeId h = tape.concat_cols(tape.concat_cols(x_t, tape.matmul(ones, trow)),
                                tape.matmul(ones, crow));
    for (std::size_t l = 0; l < nodes.weights.size(); ++l) {
        h = tape.add(tape.matmul(h, nodes.weights[l]), tape.matmul(ones, nodes.biases[l]));
        if (l + 1 < nodes.weights.size())
            h = arch.activation == Activation::silu ? tape.silu(h) : tape.tanh(h);
    }
    return h;
}

Tensor predict_noise(const DenoiserParams& params, const Tensor& x_t, std::size_t t,
                     std::size_t T, std::size_t c) {
    const ArchConfig& arch = params.arch;
    if (x_t.rank() != 2 || x_t.cols() != arch.input_dim)
        throw std::invalid_argument("predict_noise: input must be [B x " +
                                    std::to_string(arch.input_dim) + "], got " + x_t.shape_str());
    if (c > arch.num_classes)
        throw std::invalid_argument("predict_noise: unknown class " + std::to_string(c));

    const std::size_t B = x_t.rows(), D = arch.input_dim;
    const std::size_t E = arch.class_embed_dim, F2 = 2 * arch.time_freqs;
    const auto temb = time_embed(t, T, arch.time_freqs);
    const double* crow = params.class_embed.data.data() + c * E;

    Tensor h({B, D + F2 + E});
    for (std::size_t i = 0; i < B; ++i) {
        double* row = h.data.data() + i * (D + F2 + E);
        for (std::size_t j = 0; j < D; ++j) row[j] = x_t.data[i * D + j];
        for (std::size_t j = 0; j < F2; ++j) row[D + j] = temb[j];
        for (std::size_t j = 0; j < E; ++j) row[D + F2 + j] = crow[j];
    }

    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        const Tensor& w = params.weights[l];
        const Tensor& b = params.biases[l];
        const std::size_t out_dim = w.cols();
        Tensor out({B, out_dim});
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t j = 0; j < out_dim; ++j) out.data[i * out_dim + j] = b.data[j];
        mm_nn(h.data.data(), w.data.data(), out.data.data(), B, w.rows(), out_dim);
        if (l + 1 < params.weights.size()) {
            if (arch.activation == Activation::silu) {
                for (double& v : out.data) v = v / (1.0 + std::exp(-v));
            } else {
                for (double& v : out.data) v = std::tanh(v);
            }
        }
        h = std::move(out);
    }
    return h;
}

}  // namespace odm
