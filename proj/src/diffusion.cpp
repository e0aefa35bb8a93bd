#include "odm/diffusion.hpp"

#include <cmath>
#include <iostream>
#include <map>
#include <stdexcept>

namespace odm {

namespace {

void check_t(std::size_t t, const NoiseSchedule& sched, const char* what) {
    if (t < 1 || t > sched.T)
        throw std::invalid_argument(std::string(what) + ": t out of range 1..T");
}

}  // namespace

Tensor forward_step(const Tensor& x_prev, const Tensor& eps, std::size_t t,
                    const NoiseSchedule& sched) {
    check_t(t, sched, "forward_step");
    return lin_comb(std::sqrt(sched.alpha[t]), x_prev, std::sqrt(sched.beta[t]), eps);
}

Tensor forward_jump(const Tensor& x0, const Tensor& eps, std::size_t t,
                    const NoiseSchedule& sched) {
    check_t(t, sched, "forward_jump");
    const double ab = sched.alpha_bar[t];
    return lin_comb(std::sqrt(ab), x0, std::sqrt(1.0 - ab), eps);
}

const char* to_string(TripletMode m) {
    return m == TripletMode::all ? "all" : "random";
}

const char* to_string(DistanceMetric m) {
    return m == DistanceMetric::squared ? "squared" : "euclidean";
}

const char* to_string(LambdaMode m) {
    switch (m) {
        case LambdaMode::time_variant: return "time_variant";
        case LambdaMode::off: return "off";
        case LambdaMode::constant: return "constant";
    }
    throw std::invalid_argument("to_string: bad lambda mode");
}

TripletMode triplet_mode_from_string(const std::string& s) {
    if (s == "all") return TripletMode::all;
    if (s == "random") return TripletMode::random_one;
    throw std::invalid_argument("unknown triplet mode '" + s + "' (expected all or random)");
}

DistanceMetric metric_from_string(const std::string& s) {
    if (s == "squared") return DistanceMetric::squared;
    if (s == "euclidean") return DistanceMetric::euclidean;
    throw std::invalid_argument("unknown metric '" + s + "' (expected squared or euclidean)");
}

LambdaMode lambda_mode_from_string(const std::string& s) {
    if (s == "time_variant") return LambdaMode::time_variant;
    if (s == "off") return LambdaMode::off;
    if (s == "constant") return LambdaMode::constant;
    throw std::invalid_argument("unknown lambda mode '" + s +
                                "' (expected time_variant, off, or constant)");
}

std::vector<Triplet> sample_triplets(std::size_t C, TripletMode mode, Rng* rng) {
    std::vector<Triplet> out;
    if (C < 3) return out;
    if (mode == TripletMode::all) {
        for (std::size_t p = 1; p + 2 <= C; ++p)
            for (std::size_t q = p + 1; q + 1 <= C; ++q)
                for (std::size_t r = q + 1; r <= C; ++r) out.push_back({p, q, r});
        return out;
    }
    if (!rng) throw std::invalid_argument("sample_triplets: random mode needs an rng");
    const std::uint64_t total = C * (C - 1) * (C - 2) / 6;
    std::uint64_t idx = rng->below(total);
    for (std::size_t p = 1; p + 2 <= C; ++p)
        for (std::size_t q = p + 1; q + 1 <= C; ++q)
            for (std::size_t r = q + 1; r <= C; ++r)
                if (idx-- == 0) {
                    out.push_back({p, q, r});
                    return out;
                }
    throw std::logic_error("sample_triplets: index decode failed");
}

namespace {

void validate_batch(const TrainBatch& batch) {
    if (batch.blocks.empty()) throw std::invalid_argument("batch: no class blocks");
    std::size_t prev = 0;
    for (const ClassBlock& b : batch.blocks) {
        if (b.label < 1 || b.label > batch.num_classes)
            throw std::invalid_argument("batch: label out of range");
        if (b.label <= prev) throw std::invalid_argument("batch: labels must strictly ascend");
        if (b.cond > batch.num_classes) throw std::invalid_argument("batch: bad cond label");
        if (b.x0.rank() != 2 || b.x0.numel() == 0)
            throw std::invalid_argument("batch: empty class block");
        if (!b.eps.same_shape(b.x0) || !b.x_t.same_shape(b.x0))
            throw std::invalid_argument("batch: eps/x_t shape mismatch");
        prev = b.label;
    }
}

struct BatchForward {
    std::vector<NodeId> preds;  // aligned with batch.blocks
    NodeId dm{0};
};

BatchForward batch_forward(Tape& tape, const ModelFn& model, const TrainBatch& batch) {
    validate_batch(batch);
    BatchForward bf;
    NodeId acc = 0;
    for (std::size_t i = 0; i < batch.blocks.size(); ++i) {
        const ClassBlock& b = batch.blocks[i];
        const NodeId x = tape.leaf(b.x_t);
        const NodeId e = tape.leaf(b.eps);
        const NodeId pred = model(tape, x, batch.t, b.cond);
        if (!tape.value(pred).same_shape(b.eps))
            throw std::invalid_argument("model output shape mismatch");
        bf.preds.push_back(pred);
        const NodeId diff = tape.sub(e, pred);
        const NodeId mse = tape.reduce_mean(tape.mul(diff, diff));
        acc = i == 0 ? mse : tape.add(acc, mse);
    }
    bf.dm = batch.blocks.size() == 1
                ? acc
                : tape.mul(acc, 1.0 / static_cast<double>(batch.blocks.size()));
    return bf;
}

}  // namespace

NodeId dm_loss(Tape& tape, const ModelFn& model, const TrainBatch& batch) {
    return batch_forward(tape, model, batch).dm;
}

NodeId ordinal_distance(Tape& tape, NodeId eps_a, NodeId eps_b, DistanceMetric metric) {
    if (!tape.value(eps_a).same_shape(tape.value(eps_b)))
        throw std::invalid_argument("ordinal_distance: shape mismatch");
    const NodeId diff = tape.sub(eps_a, eps_b);
    const NodeId d = tape.reduce_mean(tape.mul(diff, diff));
    return metric == DistanceMetric::squared ? d : tape.sqrt(d);
}

NodeId ordinal_loss(Tape& tape, NodeId eps_p, NodeId eps_q, NodeId eps_r,
                    DistanceMetric metric) {
    const NodeId d_pr = ordinal_distance(tape, eps_p, eps_r, metric);
    const NodeId d_pq = ordinal_distance(tape, eps_p, eps_q, metric);
    const NodeId d_qr = ordinal_distance(tape, eps_q, eps_r, metric);
    const NodeId e = tape.sub(d_pr, tape.add(d_pq, d_qr));
    return tape.mul(e, e);
}

LossBreakdown total_loss(Tape& tape, const ModelFn& model, const TrainBatch& batch,
                         std::size_t T, DistanceMetric metric, LambdaMode lambda_mode,
                         double lambda_const, const std::vector<Triplet>& triplets) {
    if (batch.t < 1 || batch.t > T)
        throw std::invalid_argument("total_loss: batch timestep out of range");

    const BatchForward bf = batch_forward(tape, model, batch);

    LossBreakdown out;
    out.dm = tape.value(bf.dm).item();
    if (lambda_mode == LambdaMode::off) {
        out.total_node = bf.dm;
        out.total = out.dm;
        return out;
    }

    out.lambda = lambda_mode == LambdaMode::time_variant
                     ? static_cast<double>(batch.t) / static_cast<double>(T)
                     : lambda_const;

    if (batch.num_classes < 3 || triplets.empty()) {
        if (batch.num_classes < 3)
            std::cerr << "warning: ordinal term requested with fewer than 3 classes; "
                         "contributing 0\n";
        out.total_node = bf.dm;
        out.total = out.dm;
        return out;
    }

    std::map<std::size_t, NodeId> by_label;
    for (std::size_t i = 0; i < batch.blocks.size(); ++i)
        by_label[batch.blocks[i].label] = bf.preds[i];

    NodeId acc = 0;
    for (std::size_t i = 0; i < triplets.size(); ++i) {
        const Triplet& tr = triplets[i];
        if (!(tr.p >= 1 && tr.p < tr.q && tr.q < tr.r && tr.r <= batch.num_classes))
            throw std::invalid_argument("total_loss: malformed triplet");
        const auto p = by_label.find(tr.p), q = by_label.find(tr.q), r = by_label.find(tr.r);
        if (p == by_label.end() || q == by_label.end() || r == by_label.end())
            throw std::invalid_argument("total_loss: triplet class missing from batch");
        const NodeId l = ordinal_loss(tape, p->second, q->second, r->second, metric);
        acc = i == 0 ? l : tape.add(acc, l);
    }
    const NodeId ord = triplets.size() == 1
                           ? acc
                           : tape.mul(acc, 1.0 / static_cast<double>(triplets.size()));
    out.ordinal = tape.value(ord).item();
    out.total_node = tape.add(bf.dm, tape.mul(ord, out.lambda));
    out.total = tape.value(out.total_node).item();
    return out;
}

}  // namespace odm
