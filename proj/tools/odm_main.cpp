#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "odm/data.hpp"
#include "odm/harness.hpp"
#include "odm/metrics.hpp"
#include "odm/rng.hpp"
#include "odm/sampler.hpp"
#include "odm/schedule.hpp"

namespace {

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    nlohmann::json j;
    in >> j;
    return j;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

odm::LabeledDataset sample_dataset(const odm::Checkpoint& ckpt, std::size_t per_class,
                                   odm::SampleMethod method, std::size_t steps,
                                   double guidance, std::uint64_t seed) {
    const std::size_t C = ckpt.params.arch.num_classes;
    const std::size_t D = ckpt.params.arch.input_dim;
    const odm::NoiseSchedule sched =
        odm::build_schedule(ckpt.config.beta1, ckpt.config.betaT, ckpt.config.timesteps);

    odm::LabeledDataset out;
    out.num_classes = C;
    out.samples = odm::Tensor({C * per_class, D});
    out.labels.reserve(C * per_class);
    odm::Rng seedgen(seed);
    for (std::size_t c = 1; c <= C; ++c) {
        odm::SampleRun run;
        run.class_label = c;
        run.count = per_class;
        run.method = method;
        run.ddim_steps = steps;
        run.guidance = guidance;
        run.seed = seedgen.next_u64();
        const odm::SampleResult res = odm::sample(ckpt.params, sched, run);
        std::copy(res.samples.data.begin(), res.samples.data.end(),
                  out.samples.data.begin() + static_cast<std::ptrdiff_t>((c - 1) * per_class * D));
        out.labels.insert(out.labels.end(), per_class, static_cast<std::uint16_t>(c));
    }
    out.validate();
    return out;
}

void cmd_train(const std::string& config_path, const std::string& out_path,
               const std::string& resume_path, const std::string& loss_log) {
    const odm::TrainConfig cfg = odm::TrainConfig::from_json(read_json_file(config_path));
    std::optional<odm::Checkpoint> resume;
    if (!resume_path.empty()) resume = odm::load_checkpoint(resume_path);
    const std::string log = loss_log.empty() ? out_path + ".loss.csv" : loss_log;
    const odm::Checkpoint ckpt = odm::train(cfg, log, resume ? &*resume : nullptr);
    odm::save_checkpoint(ckpt, out_path);
    std::cout << "trained to iteration " << ckpt.iteration << " -> " << out_path
              << " (loss log: " << log << ")\n";
}

void cmd_sample(const std::string& ckpt_path, std::size_t cls, std::size_t n,
                const std::string& method, std::size_t steps, double guidance,
                std::uint64_t seed, bool clamp, const std::string& out_path,
                const std::string& csv_path, const std::string& traj_path) {
    const odm::Checkpoint ckpt = odm::load_checkpoint(ckpt_path);
    const std::size_t C = ckpt.params.arch.num_classes;
    const std::size_t D = ckpt.params.arch.input_dim;
    if (cls < 1 || cls > C)
        throw std::invalid_argument("sample: class must lie in 1.." + std::to_string(C));
    const odm::NoiseSchedule sched =
        odm::build_schedule(ckpt.config.beta1, ckpt.config.betaT, ckpt.config.timesteps);

    odm::SampleRun run;
    run.class_label = cls;
    run.count = n;
    run.method = odm::sample_method_from_string(method);
    run.ddim_steps = steps;
    run.guidance = guidance;
    run.seed = seed;
    run.keep_trajectory = !traj_path.empty();
    run.clamp_unit = clamp;
    const odm::SampleResult res = odm::sample(ckpt.params, sched, run);

    odm::LabeledDataset ds;
    ds.samples = res.samples;
    ds.labels.assign(n, static_cast<std::uint16_t>(cls));
    ds.num_classes = C;
    if (!out_path.empty()) odm::save_dataset(ds, out_path);
    if (!csv_path.empty()) odm::export_csv(ds, csv_path);
    if (!traj_path.empty()) {
        std::ofstream tf(traj_path);
        if (!tf) throw std::runtime_error("cannot open '" + traj_path + "' for writing");
        tf << "t,index";
        for (std::size_t j = 1; j <= D; ++j) tf << ",f" << j;
        tf << "\n";
        for (const auto& [tt, state] : res.trajectory)
            for (std::size_t i = 0; i < n; ++i) {
                tf << tt << "," << i;
                for (std::size_t j = 0; j < D; ++j)
                    tf << "," << odm::fmt_g17(state.data[i * D + j]);
                tf << "\n";
            }
        if (!tf) throw std::runtime_error("write to '" + traj_path + "' failed");
    }
    std::cout << "sampled " << n << " points of class " << cls << " (" << method << ")";
    if (!out_path.empty()) std::cout << " -> " << out_path;
    std::cout << "\n";
}

void cmd_eval(const std::string& ckpt_path, const std::string& real_path,
              const std::string& gen_path, const std::string& out_path, std::size_t n,
              const std::string& method, std::size_t steps, double guidance,
              std::uint64_t seed, std::size_t k) {
    const odm::LabeledDataset real = odm::load_dataset(real_path);
    odm::LabeledDataset gen;
    nlohmann::json source;
    if (!gen_path.empty()) {
        gen = odm::load_dataset(gen_path);
        source = gen_path;
    } else {
        if (ckpt_path.empty())
            throw std::invalid_argument("eval: need --gen or --ckpt to obtain samples");
        const odm::Checkpoint ckpt = odm::load_checkpoint(ckpt_path);
        gen = sample_dataset(ckpt, n, odm::sample_method_from_string(method), steps, guidance,
                             seed);
        source = {{"ckpt", ckpt_path}, {"per_class", n},      {"method", method},
                  {"steps", steps},    {"guidance", guidance}, {"seed", seed}};
    }
    if (gen.dim() != real.dim())
        throw std::invalid_argument("eval: real and generated dimensions differ");
    if (gen.num_classes != real.num_classes)
        throw std::invalid_argument("eval: real and generated class counts differ");

    odm::MetricsReport rep;
    rep.frechet_overall = odm::frechet_gaussian(real.samples, gen.samples);
    for (std::size_t c = 1; c <= real.num_classes; ++c) {
        const odm::Tensor rc = real.class_samples(c);
        const odm::Tensor gc = gen.class_samples(c);
        rep.frechet_per_class.push_back(
            rc.rows() >= 2 && gc.rows() >= 2
                ? odm::frechet_gaussian(rc, gc)
                : std::numeric_limits<double>::quiet_NaN());
    }
    const auto pr = odm::knn_precision_recall(real.samples, gen.samples, k);
    rep.precision = pr.first;
    rep.recall = pr.second;

    nlohmann::json report = rep.to_json();
    report["k"] = k;
    report["real"] = real_path;
    report["gen"] = source;
    write_text_file(out_path, report.dump(2) + "\n");
    std::printf("frechet_overall=%.6g precision=%.6f recall=%.6f\n", rep.frechet_overall,
                rep.precision, rep.recall);
    std::cout << "report -> " << out_path << "\n";
}

void cmd_geometry(const std::string& ckpt_path, const std::string& real_path,
                  const std::vector<std::size_t>& t_list, const std::string& metric,
                  std::size_t per_class, std::uint64_t seed, const std::string& out_path) {
    const odm::Checkpoint ckpt = odm::load_checkpoint(ckpt_path);
    const odm::LabeledDataset ds =
        real_path.empty() ? odm::resolve_dataset(ckpt.config) : odm::load_dataset(real_path);
    const std::size_t C = ckpt.params.arch.num_classes;
    if (ds.num_classes != C)
        throw std::invalid_argument("geometry: dataset class count does not match the model");
    const odm::NoiseSchedule sched =
        odm::build_schedule(ckpt.config.beta1, ckpt.config.betaT, ckpt.config.timesteps);

    std::uint64_t st = seed;
    const std::uint64_t subset_seed = odm::splitmix64(st);
    const std::uint64_t probe_seed = odm::splitmix64(st);

    const std::size_t D = ds.dim();
    odm::Rng pick(subset_seed);
    std::vector<odm::Tensor> batches;
    for (std::size_t c = 1; c <= C; ++c) {
        std::vector<std::size_t> idx = ds.class_indices(c);
        const std::size_t take = std::min(per_class, idx.size());
        for (std::size_t i = 0; i < take; ++i)
            std::swap(idx[i], idx[i + static_cast<std::size_t>(pick.below(idx.size() - i))]);
        odm::Tensor batch({take, D});
        for (std::size_t i = 0; i < take; ++i)
            for (std::size_t j = 0; j < D; ++j)
                batch.data[i * D + j] = ds.samples.data[idx[i] * D + j];
        batches.push_back(std::move(batch));
    }

    const auto records = odm::collinearity_probe(ckpt.params, batches, t_list, sched,
                                                 odm::metric_from_string(metric), probe_seed);
    odm::write_geometry_csv(records, out_path);
    std::cout << records.size() << " geometry records -> " << out_path << "\n";
}

void cmd_gen(std::size_t classes, std::size_t dim, const std::string& layout, double spacing,
             const std::vector<double>& sigma, const std::vector<std::size_t>& counts,
             std::uint64_t seed, const std::string& out_path, const std::string& csv_path) {
    odm::OrdinalGaussianSpec spec;
    spec.num_classes = classes;
    spec.dim = dim;
    spec.layout = odm::mean_layout_from_string(layout);
    spec.spacing = spacing;
    if (!sigma.empty()) spec.sigma = sigma;
    if (!counts.empty()) spec.counts = counts;
    spec.validate();
    if (out_path.empty() && csv_path.empty())
        throw std::invalid_argument("gen: need --out and/or --csv");
    const odm::LabeledDataset ds = odm::gen_ordinal_gaussians(spec, odm::dataset_seed(seed));
    if (!out_path.empty()) odm::save_dataset(ds, out_path);
    if (!csv_path.empty()) odm::export_csv(ds, csv_path);
    std::cout << "generated " << ds.size() << " samples across " << classes << " classes\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"odm: ordinal diffusion models on vector data"};
    app.require_subcommand(1);

    auto* tr = app.add_subcommand("train", "Train a model from a JSON config");
    std::string tr_config, tr_out, tr_resume, tr_log;
    tr->add_option("--config", tr_config, "JSON experiment config")
        ->required()
        ->check(CLI::ExistingFile);
    tr->add_option("--out", tr_out, "checkpoint output path")->required();
    tr->add_option("--resume", tr_resume, "checkpoint to resume from")->check(CLI::ExistingFile);
    tr->add_option("--loss-log", tr_log, "loss CSV path (default: <out>.loss.csv)");
    tr->callback([&] { cmd_train(tr_config, tr_out, tr_resume, tr_log); });

    auto* sa = app.add_subcommand("sample", "Generate samples from a checkpoint");
    std::string sa_ckpt, sa_method = "ddim", sa_out, sa_csv, sa_traj;
    std::size_t sa_class = 1, sa_n = 1, sa_steps = 100;
    double sa_guidance = 2.0;
    std::uint64_t sa_seed = 0;
    bool sa_clamp = false;
    sa->add_option("--ckpt", sa_ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
    sa->add_option("--class", sa_class, "class label in 1..C")->required();
    sa->add_option("--n", sa_n, "number of samples")->required();
    sa->add_option("--method", sa_method, "ddpm or ddim")
        ->check(CLI::IsMember({"ddpm", "ddim"}));
    sa->add_option("--steps", sa_steps, "ddim step count S");
    sa->add_option("--guidance", sa_guidance, "guidance scale s >= 0");
    sa->add_option("--seed", sa_seed, "sampling seed");
    sa->add_option("--out", sa_out, "dataset container output");
    sa->add_option("--csv", sa_csv, "CSV output");
    sa->add_option("--trajectory", sa_traj, "per-step trajectory CSV");
    sa->add_flag("--clamp", sa_clamp, "clamp the ddim x0 estimate to [-1,1]");
    sa->callback([&] {
        if (sa_out.empty() && sa_csv.empty() && sa_traj.empty())
            throw CLI::ValidationError("sample: need --out, --csv, and/or --trajectory");
        cmd_sample(sa_ckpt, sa_class, sa_n, sa_method, sa_steps, sa_guidance, sa_seed, sa_clamp,
                   sa_out, sa_csv, sa_traj);
    });

    auto* ev = app.add_subcommand("eval", "Distribution metrics against a real dataset");
    std::string ev_ckpt, ev_real, ev_gen, ev_out = "report.json", ev_method = "ddim";
    std::size_t ev_n = 2000, ev_steps = 100, ev_k = 3;
    double ev_guidance = 2.0;
    std::uint64_t ev_seed = 0;
    ev->add_option("--ckpt", ev_ckpt, "model checkpoint (used when --gen is absent)")
        ->check(CLI::ExistingFile);
    ev->add_option("--real", ev_real, "reference dataset")->required()->check(CLI::ExistingFile);
    ev->add_option("--gen", ev_gen, "pre-generated dataset to evaluate")
        ->check(CLI::ExistingFile);
    ev->add_option("--out", ev_out, "report JSON path");
    ev->add_option("--n", ev_n, "samples per class when sampling from --ckpt");
    ev->add_option("--method", ev_method, "ddpm or ddim")
        ->check(CLI::IsMember({"ddpm", "ddim"}));
    ev->add_option("--steps", ev_steps, "ddim step count S");
    ev->add_option("--guidance", ev_guidance, "guidance scale s >= 0");
    ev->add_option("--seed", ev_seed, "sampling seed");
    ev->add_option("--k", ev_k, "k for k-NN precision/recall");
    ev->callback([&] {
        cmd_eval(ev_ckpt, ev_real, ev_gen, ev_out, ev_n, ev_method, ev_steps, ev_guidance,
                 ev_seed, ev_k);
    });

    auto* ge = app.add_subcommand("geometry", "Noise-prediction collinearity probe");
    std::string ge_ckpt, ge_real, ge_metric = "euclidean", ge_out = "geometry.csv";
    std::vector<std::size_t> ge_tlist;
    std::size_t ge_n = 256;
    std::uint64_t ge_seed = 0;
    ge->add_option("--ckpt", ge_ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
    ge->add_option("--real", ge_real, "dataset (default: the checkpoint's data source)")
        ->check(CLI::ExistingFile);
    ge->add_option("--t-list", ge_tlist, "timesteps, comma separated")
        ->required()
        ->delimiter(',');
    ge->add_option("--metric", ge_metric, "squared or euclidean")
        ->check(CLI::IsMember({"squared", "euclidean"}));
    ge->add_option("--n", ge_n, "samples per class in the probe batch");
    ge->add_option("--seed", ge_seed, "probe seed");
    ge->add_option("--out", ge_out, "geometry CSV path");
    ge->callback(
        [&] { cmd_geometry(ge_ckpt, ge_real, ge_tlist, ge_metric, ge_n, ge_seed, ge_out); });

    auto* gn = app.add_subcommand("gen", "Generate a synthetic ordinal Gaussian dataset");
    std::size_t gn_classes = 4, gn_dim = 2;
    std::string gn_layout = "line", gn_out, gn_csv;
    double gn_spacing = 2.0;
    std::vector<double> gn_sigma;
    std::vector<std::size_t> gn_counts;
    std::uint64_t gn_seed = 0;
    gn->add_option("--classes", gn_classes, "class count C");
    gn->add_option("--dim", gn_dim, "feature dimension D");
    gn->add_option("--layout", gn_layout, "line or curve")
        ->check(CLI::IsMember({"line", "curve"}));
    gn->add_option("--spacing", gn_spacing, "mean spacing");
    gn->add_option("--sigma", gn_sigma, "shared or per-class sigmas")->delimiter(',');
    gn->add_option("--counts", gn_counts, "per-class sample counts")->delimiter(',');
    gn->add_option("--seed", gn_seed, "generation seed");
    gn->add_option("--out", gn_out, "dataset container output");
    gn->add_option("--csv", gn_csv, "CSV output");
    gn->callback([&] {
        cmd_gen(gn_classes, gn_dim, gn_layout, gn_spacing, gn_sigma, gn_counts, gn_seed, gn_out,
                gn_csv);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
