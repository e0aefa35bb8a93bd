#include "odm/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "odm/container.hpp"

namespace odm {

namespace {

constexpr const char* kCheckpointMagic = "ODMCKPT\x01";

void require_keys(const nlohmann::json& j, const char* ctx,
                  std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw std::invalid_argument(std::string(ctx) + ": expected an object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                ok = true;
                break;
            }
        if (!ok)
            throw std::invalid_argument(std::string(ctx) + ": unknown key '" + item.key() + "'");
    }
}

std::string u64_hex(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t hex_u64(const std::string& s) {
    if (s.size() != 18 || s[0] != '0' || s[1] != 'x')
        throw std::runtime_error("checkpoint: malformed hex word '" + s + "'");
    std::uint64_t v = 0;
    for (std::size_t i = 2; i < s.size(); ++i) {
        const char c = s[i];
        std::uint64_t digit;
        if (c >= '0' && c <= '9')
            digit = static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f')
            digit = static_cast<std::uint64_t>(c - 'a') + 10;
        else
            throw std::runtime_error("checkpoint: malformed hex word '" + s + "'");
        v = (v << 4) | digit;
    }
    return v;
}

}  // namespace

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    require_keys(j, "config",
                 {"dataset", "generator", "arch", "beta1", "betaT", "timesteps", "iterations",
                  "batch_size", "learning_rate", "adam_beta1", "adam_beta2", "adam_eps",
                  "lambda_mode", "lambda_const", "metric", "triplet_mode", "label_drop",
                  "seed"});
    TrainConfig c;
    if (j.contains("dataset")) c.dataset_path = j["dataset"].get<std::string>();
    if (j.contains("generator")) c.generator = OrdinalGaussianSpec::from_json(j["generator"]);
    if (j.contains("arch")) {
        const nlohmann::json& a = j["arch"];
        require_keys(a, "config.arch",
                     {"hidden", "class_embed_dim", "time_freqs", "activation"});
        if (a.contains("hidden")) c.hidden = a["hidden"].get<std::vector<std::size_t>>();
        if (a.contains("class_embed_dim"))
            c.class_embed_dim = a["class_embed_dim"].get<std::size_t>();
        if (a.contains("time_freqs")) c.time_freqs = a["time_freqs"].get<std::size_t>();
        if (a.contains("activation"))
            c.activation = activation_from_string(a["activation"].get<std::string>());
    }
    if (j.contains("beta1")) c.beta1 = j["beta1"].get<double>();
    if (j.contains("betaT")) c.betaT = j["betaT"].get<double>();
    if (j.contains("timesteps")) c.timesteps = j["timesteps"].get<std::size_t>();
    if (j.contains("iterations")) c.iterations = j["iterations"].get<std::size_t>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("adam_beta1")) c.adam_beta1 = j["adam_beta1"].get<double>();
    if (j.contains("adam_beta2")) c.adam_beta2 = j["adam_beta2"].get<double>();
    if (j.contains("adam_eps")) c.adam_eps = j["adam_eps"].get<double>();
    if (j.contains("lambda_mode"))
        c.lambda_mode = lambda_mode_from_string(j["lambda_mode"].get<std::string>());
    if (j.contains("lambda_const")) c.lambda_const = j["lambda_const"].get<double>();
    if (j.contains("metric")) c.metric = metric_from_string(j["metric"].get<std::string>());
    if (j.contains("triplet_mode"))
        c.triplet_mode = triplet_mode_from_string(j["triplet_mode"].get<std::string>());
    if (j.contains("label_drop")) c.label_drop = j["label_drop"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    c.validate();
    return c;
}

nlohmann::json TrainConfig::to_json() const {
    nlohmann::json j;
    if (!dataset_path.empty()) j["dataset"] = dataset_path;
    if (generator) j["generator"] = generator->to_json();
    j["arch"] = {{"hidden", hidden},
                 {"class_embed_dim", class_embed_dim},
                 {"time_freqs", time_freqs},
                 {"activation", to_string(activation)}};
    j["beta1"] = beta1;
    j["betaT"] = betaT;
    j["timesteps"] = timesteps;
    j["iterations"] = iterations;
    j["batch_size"] = batch_size;
    j["learning_rate"] = learning_rate;
    j["adam_beta1"] = adam_beta1;
    j["adam_beta2"] = adam_beta2;
    j["adam_eps"] = adam_eps;
    j["lambda_mode"] = to_string(lambda_mode);
    j["lambda_const"] = lambda_const;
    j["metric"] = to_string(metric);
    j["triplet_mode"] = to_string(triplet_mode);
    j["label_drop"] = label_drop;
    j["seed"] = seed;
    return j;
}

void TrainConfig::validate() const {
    if (dataset_path.empty() == !generator)
        throw std::invalid_argument("config: exactly one of dataset/generator is required");
    if (generator) generator->validate();
    if (!(beta1 > 0.0 && beta1 <= betaT && betaT < 1.0))
        throw std::invalid_argument("config: need 0 < beta1 <= betaT < 1");
    if (timesteps < 2) throw std::invalid_argument("config: need timesteps >= 2");
    if (iterations == 0) throw std::invalid_argument("config: need iterations >= 1");
    if (batch_size == 0) throw std::invalid_argument("config: need batch_size >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("config: learning_rate must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw std::invalid_argument("config: Adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw std::invalid_argument("config: adam_eps must be > 0");
    if (!(lambda_const >= 0.0)) throw std::invalid_argument("config: lambda_const must be >= 0");
    if (!(label_drop >= 0.0 && label_drop <= 1.0))
        throw std::invalid_argument("config: label_drop must lie in [0, 1]");
    if (hidden.empty()) throw std::invalid_argument("config: need at least one hidden layer");
    for (std::size_t h : hidden)
        if (h == 0) throw std::invalid_argument("config: hidden widths must be positive");
    if (class_embed_dim == 0 || time_freqs == 0)
        throw std::invalid_argument("config: embedding sizes must be positive");
}

ArchConfig TrainConfig::resolve_arch(std::size_t input_dim, std::size_t num_classes) const {
    ArchConfig a;
    a.input_dim = input_dim;
    a.hidden = hidden;
    a.class_embed_dim = class_embed_dim;
    a.time_freqs = time_freqs;
    a.activation = activation;
    a.num_classes = num_classes;
    a.validate();
    return a;
}

nlohmann::json arch_to_json(const ArchConfig& a) {
    return {{"input_dim", a.input_dim},
            {"hidden", a.hidden},
            {"class_embed_dim", a.class_embed_dim},
            {"time_freqs", a.time_freqs},
            {"activation", to_string(a.activation)},
            {"num_classes", a.num_classes}};
}

ArchConfig arch_from_json(const nlohmann::json& j) {
    require_keys(j, "arch",
                 {"input_dim", "hidden", "class_embed_dim", "time_freqs", "activation",
                  "num_classes"});
    ArchConfig a;
    a.input_dim = j.at("input_dim").get<std::size_t>();
    a.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    a.class_embed_dim = j.at("class_embed_dim").get<std::size_t>();
    a.time_freqs = j.at("time_freqs").get<std::size_t>();
    a.activation = activation_from_string(j.at("activation").get<std::string>());
    a.num_classes = j.at("num_classes").get<std::size_t>();
    a.validate();
    return a;
}

AdamState make_adam_state(const DenoiserParams& params) {
    AdamState s;
    for (const Tensor* t : params.tensors()) {
        s.m.emplace_back(t->shape);
        s.v.emplace_back(t->shape);
    }
    return s;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps) {
    if (params.size() != grads.size() || params.size() != state.m.size() ||
        params.size() != state.v.size())
        throw std::invalid_argument("adam_step: tensor list size mismatch");
    state.step += 1;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        if (!p.same_shape(g) || !p.same_shape(m) || !p.same_shape(v))
            throw std::invalid_argument("adam_step: shape mismatch at tensor " +
                                        std::to_string(i));
        for (std::size_t e = 0; e < p.numel(); ++e) {
            m.data[e] = beta1 * m.data[e] + (1.0 - beta1) * g.data[e];
            v.data[e] = beta2 * v.data[e] + (1.0 - beta2) * g.data[e] * g.data[e];
            p.data[e] -= lr * (m.data[e] / c1) / (std::sqrt(v.data[e] / c2) + eps);
        }
    }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    const auto names = ckpt.params.tensor_names();
    const auto tensors = ckpt.params.tensors();

    nlohmann::json meta;
    meta["kind"] = "odm_checkpoint";
    meta["version"] = ckpt.version;
    meta["iteration"] = ckpt.iteration;
    meta["config"] = ckpt.config.to_json();
    meta["arch"] = arch_to_json(ckpt.params.arch);
    meta["arch_hash"] = u64_hex(ckpt.params.arch.hash());
    meta["schedule"] = {{"beta1", ckpt.config.beta1},
                        {"betaT", ckpt.config.betaT},
                        {"timesteps", ckpt.config.timesteps}};
    meta["adam_step"] = ckpt.adam.step;

    nlohmann::json states = nlohmann::json::array();
    for (const auto& st : ckpt.rng_states) {
        nlohmann::json words = nlohmann::json::array();
        for (std::uint64_t w : st) words.push_back(u64_hex(w));
        states.push_back(std::move(words));
    }
    meta["rng_states"] = std::move(states);

    nlohmann::json manifest = nlohmann::json::array();
    for (std::size_t i = 0; i < names.size(); ++i)
        manifest.push_back({{"name", names[i]}, {"shape", tensors[i]->shape}});
    meta["tensors"] = std::move(manifest);

    std::vector<container::Block> blocks;
    for (std::size_t i = 0; i < names.size(); ++i)
        blocks.push_back({"param/" + names[i], container::pack_f64(tensors[i]->data)});
    for (std::size_t i = 0; i < names.size(); ++i)
        blocks.push_back({"adam_m/" + names[i], container::pack_f64(ckpt.adam.m[i].data)});
    for (std::size_t i = 0; i < names.size(); ++i)
        blocks.push_back({"adam_v/" + names[i], container::pack_f64(ckpt.adam.v[i].data)});

    container::write(path, kCheckpointMagic, std::move(meta), blocks);
}

Checkpoint load_checkpoint(const std::string& path) {
    const container::File f = container::read(path, kCheckpointMagic);
    const nlohmann::json& meta = f.meta;
    if (meta.value("kind", "") != "odm_checkpoint" || meta.value("version", 0u) != 1u)
        throw std::runtime_error("checkpoint '" + path + "': unsupported kind or version");

    Checkpoint ckpt;
    ckpt.version = meta["version"].get<std::uint32_t>();
    ckpt.iteration = meta["iteration"].get<std::uint64_t>();
    ckpt.config = TrainConfig::from_json(meta.at("config"));
    const ArchConfig arch = arch_from_json(meta.at("arch"));
    if (meta.value("arch_hash", "") != u64_hex(arch.hash()))
        throw std::runtime_error("checkpoint '" + path + "': architecture hash mismatch");

    ckpt.params.arch = arch;
    const auto load_tensor = [&](const std::string& block,
                                 const std::vector<std::size_t>& shape) {
        Tensor t(shape, container::unpack_f64(f.get(block).bytes));
        return t;
    };

    // Reconstruct shapes from the architecture, then cross-check the manifest.
    DenoiserParams ref = init_params(arch, static_cast<std::uint64_t>(0));
    const auto names = ref.tensor_names();
    const auto ref_tensors = ref.tensors();
    if (!meta.contains("tensors") || meta["tensors"].size() != names.size())
        throw std::runtime_error("checkpoint '" + path + "': tensor manifest size mismatch");
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& entry = meta["tensors"][i];
        if (entry.at("name").get<std::string>() != names[i] ||
            entry.at("shape").get<std::vector<std::size_t>>() != ref_tensors[i]->shape)
            throw std::runtime_error("checkpoint '" + path + "': tensor manifest entry " +
                                     std::to_string(i) + " disagrees with the architecture");
    }

    ckpt.params.class_embed = load_tensor("param/class_embed", ref.class_embed.shape);
    for (std::size_t l = 0; l < ref.weights.size(); ++l) {
        ckpt.params.weights.push_back(
            load_tensor("param/w" + std::to_string(l), ref.weights[l].shape));
        ckpt.params.biases.push_back(
            load_tensor("param/b" + std::to_string(l), ref.biases[l].shape));
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
        ckpt.adam.m.push_back(load_tensor("adam_m/" + names[i], ref_tensors[i]->shape));
        ckpt.adam.v.push_back(load_tensor("adam_v/" + names[i], ref_tensors[i]->shape));
    }
    ckpt.adam.step = meta["adam_step"].get<std::uint64_t>();

    const auto& states = meta.at("rng_states");
    constexpr auto kStreams = static_cast<std::size_t>(RngStreams::kStreamCount);
    if (!states.is_array() || states.size() != kStreams)
        throw std::runtime_error("checkpoint '" + path + "': bad rng state table");
    for (std::size_t i = 0; i < kStreams; ++i)
        for (std::size_t w = 0; w < 4; ++w)
            ckpt.rng_states[i][w] = hex_u64(states[i][w].get<std::string>());
    return ckpt;
}

LabeledDataset resolve_dataset(const TrainConfig& cfg) {
    cfg.validate();
    LabeledDataset ds = cfg.generator
                            ? gen_ordinal_gaussians(*cfg.generator, dataset_seed(cfg.seed))
                            : load_dataset(cfg.dataset_path);
    ds.validate();
    return ds;
}

Checkpoint train(const TrainConfig& cfg, const std::string& loss_log_path,
                 const Checkpoint* resume) {
    cfg.validate();
    const LabeledDataset ds = resolve_dataset(cfg);
    const std::size_t C = ds.num_classes, D = ds.dim(), T = cfg.timesteps;
    if (cfg.batch_size % C != 0)
        throw std::invalid_argument("train: batch_size must be divisible by the class count (" +
                                    std::to_string(C) + ")");
    if (cfg.lambda_mode != LambdaMode::off && C < 3)
        throw std::invalid_argument("train: the ordinal term needs at least 3 classes");

    const ArchConfig arch = cfg.resolve_arch(D, C);
    const NoiseSchedule sched = build_schedule(cfg.beta1, cfg.betaT, T);

    RngStreams streams(cfg.seed);
    DenoiserParams params;
    AdamState adam;
    std::uint64_t start_iter = 0;
    if (resume) {
        if (resume->params.arch.hash() != arch.hash())
            throw std::invalid_argument("train: resume architecture hash mismatch");
        nlohmann::json a = resume->config.to_json(), b = cfg.to_json();
        a.erase("iterations");
        b.erase("iterations");
        if (a != b) throw std::invalid_argument("train: resume config mismatch");
        if (resume->iteration > cfg.iterations)
            throw std::invalid_argument("train: checkpoint is already past cfg.iterations");
        params = resume->params;
        adam = resume->adam;
        streams.set_states(resume->rng_states);
        start_iter = resume->iteration;
    } else {
        params = init_params(arch, streams.init);
        adam = make_adam_state(params);
    }

    std::vector<std::vector<std::size_t>> by_class(C);
    for (std::size_t c = 1; c <= C; ++c) {
        by_class[c - 1] = ds.class_indices(c);
        if (by_class[c - 1].empty())
            throw std::invalid_argument("train: class " + std::to_string(c) + " has no samples");
    }
    const std::size_t Bc = cfg.batch_size / C;

    std::ofstream log;
    if (!loss_log_path.empty()) {
        log.open(loss_log_path, resume ? std::ios::app : std::ios::trunc);
        if (!log) throw std::runtime_error("train: cannot open loss log '" + loss_log_path + "'");
        if (!resume) log << "iter,t,lambda,dm_loss,ordinal_loss,total\n";
    }

    const bool ordinal_on = cfg.lambda_mode != LambdaMode::off;
    const std::vector<Triplet> all_triplets =
        ordinal_on && cfg.triplet_mode == TripletMode::all
            ? sample_triplets(C, TripletMode::all, nullptr)
            : std::vector<Triplet>{};

    for (std::uint64_t it = start_iter + 1; it <= cfg.iterations; ++it) {
        TrainBatch batch;
        batch.num_classes = C;
        batch.blocks.resize(C);

        // Stream draw order per step: data, timesteps, noise, dropout,
        // triplets. This order is part of the checkpoint contract.
        for (std::size_t c = 1; c <= C; ++c) {
            ClassBlock& blk = batch.blocks[c - 1];
            blk.label = c;
            blk.x0 = Tensor({Bc, D});
            const auto& rows = by_class[c - 1];
            for (std::size_t i = 0; i < Bc; ++i) {
                const std::size_t src = rows[streams.data.below(rows.size())];
                for (std::size_t j = 0; j < D; ++j)
                    blk.x0.data[i * D + j] = ds.samples.data[src * D + j];
            }
        }
        batch.t = 1 + static_cast<std::size_t>(streams.timesteps.below(T));
        for (std::size_t c = 1; c <= C; ++c) {
            ClassBlock& blk = batch.blocks[c - 1];
            blk.eps = Tensor({Bc, D});
            for (double& v : blk.eps.data) v = streams.noise.normal();
        }
        for (std::size_t c = 1; c <= C; ++c) {
            ClassBlock& blk = batch.blocks[c - 1];
            blk.cond = streams.dropout.uniform01() < cfg.label_drop ? 0 : c;
        }
        const bool random_mode = ordinal_on && cfg.triplet_mode == TripletMode::random_one;
        std::vector<Triplet> step_triplets;
        if (random_mode)
            step_triplets = sample_triplets(C, TripletMode::random_one, &streams.triplets);
        const std::vector<Triplet>& triplets = random_mode ? step_triplets : all_triplets;
        for (std::size_t c = 1; c <= C; ++c) {
            ClassBlock& blk = batch.blocks[c - 1];
            blk.x_t = forward_jump(blk.x0, blk.eps, batch.t, sched);
        }

        Tape tape;
        tape.reserve(64 + 16 * C);
        const DenoiserNodes nodes = bind_params(tape, params);
        const ModelFn model = [&](Tape& tp, NodeId x, std::size_t tt, std::size_t cc) {
            return denoiser_forward(tp, nodes, arch, x, tt, T, cc);
        };
        const LossBreakdown lb = total_loss(tape, model, batch, T, cfg.metric, cfg.lambda_mode,
                                            cfg.lambda_const, triplets);
        if (!std::isfinite(lb.total))
            throw std::runtime_error(
                "train: non-finite loss at iteration " + std::to_string(it) +
                " (dm=" + fmt_g17(lb.dm) + ", ordinal=" + fmt_g17(lb.ordinal) +
                ", lambda=" + fmt_g17(lb.lambda) + ", total=" + fmt_g17(lb.total) + ")");
        tape.backward(lb.total_node);

        std::vector<const Tensor*> grads;
        for (NodeId id : nodes.all()) grads.push_back(&tape.grad(id));
        const auto tensors = params.tensors();
        adam_step(tensors, grads, adam, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                  cfg.adam_eps);

        if (log)
            log << it << "," << batch.t << "," << fmt_g17(lb.lambda) << "," << fmt_g17(lb.dm)
                << "," << fmt_g17(lb.ordinal) << "," << fmt_g17(lb.total) << "\n";
    }
    if (log) {
        log.flush();
        if (!log) throw std::runtime_error("train: loss log write failed");
    }

    Checkpoint out;
    out.iteration = cfg.iterations;
    out.config = cfg;
    out.params = std::move(params);
    out.adam = std::move(adam);
    out.rng_states = streams.states();
    return out;
}

}  // namespace odm
