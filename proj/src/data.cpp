#include "odm/data.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "odm/container.hpp"
#include "odm/rng.hpp"

namespace odm {

namespace {

constexpr const char* kDatasetMagic = "ODMDATA\x01";

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

}  // namespace

std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const char* to_string(MeanLayout m) { return m == MeanLayout::line ? "line" : "curve"; }

MeanLayout mean_layout_from_string(const std::string& s) {
    if (s == "line") return MeanLayout::line;
    if (s == "curve") return MeanLayout::curve;
    throw std::invalid_argument("unknown layout '" + s + "' (expected line or curve)");
}

void OrdinalGaussianSpec::validate() const {
    if (num_classes < 2) throw std::invalid_argument("spec: need at least 2 classes");
    if (num_classes > 0xFFFF) throw std::invalid_argument("spec: class count exceeds u16 labels");
    if (dim == 0) throw std::invalid_argument("spec: dim must be positive");
    if (!(spacing > 0.0)) throw std::invalid_argument("spec: spacing must be positive");
    if (layout == MeanLayout::curve && dim < 2)
        throw std::invalid_argument("spec: curve layout needs dim >= 2");
    if (sigma.size() != 1 && sigma.size() != num_classes)
        throw std::invalid_argument("spec: sigma must hold 1 or C scales");
    for (double s : sigma)
        if (!(s >= 0.0)) throw std::invalid_argument("spec: sigma scales must be >= 0");
    if (counts.size() != num_classes)
        throw std::invalid_argument("spec: counts must hold one entry per class");
    for (std::size_t n : counts)
        if (n == 0) throw std::invalid_argument("spec: every class count must be >= 1");
}

double OrdinalGaussianSpec::class_sigma(std::size_t c) const {
    return sigma.size() == 1 ? sigma[0] : sigma[c - 1];
}

std::vector<double> OrdinalGaussianSpec::class_mean(std::size_t c) const {
    if (c < 1 || c > num_classes) throw std::invalid_argument("spec: class out of range");
    std::vector<double> mu(dim, 0.0);
    const double s = static_cast<double>(c - 1) * spacing;
    mu[0] = s;
    if (layout == MeanLayout::curve) {
        const double span = static_cast<double>(num_classes - 1) * spacing;
        mu[1] = s * s / span;
    }
    return mu;
}

OrdinalGaussianSpec OrdinalGaussianSpec::from_json(const nlohmann::json& j) {
    require_keys(j, "generator", {"classes", "dim", "layout", "spacing", "sigma", "counts"});
    OrdinalGaussianSpec s;
    if (j.contains("classes")) s.num_classes = j["classes"].get<std::size_t>();
    if (j.contains("dim")) s.dim = j["dim"].get<std::size_t>();
    if (j.contains("layout")) s.layout = mean_layout_from_string(j["layout"].get<std::string>());
    if (j.contains("spacing")) s.spacing = j["spacing"].get<double>();
    if (j.contains("sigma")) {
        s.sigma.clear();
        if (j["sigma"].is_array())
            for (const auto& v : j["sigma"]) s.sigma.push_back(v.get<double>());
        else
            s.sigma.push_back(j["sigma"].get<double>());
    }
    if (j.contains("counts")) {
        s.counts.clear();
        for (const auto& v : j["counts"]) s.counts.push_back(v.get<std::size_t>());
    }
    s.validate();
    return s;
}

nlohmann::json OrdinalGaussianSpec::to_json() const {
    nlohmann::json j;
    j["classes"] = num_classes;
    j["dim"] = dim;
    j["layout"] = to_string(layout);
    j["spacing"] = spacing;
    if (sigma.size() == 1)
        j["sigma"] = sigma[0];
    else
        j["sigma"] = sigma;
    j["counts"] = counts;
    return j;
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
    std::vector<std::size_t> counts(num_classes, 0);
    for (std::uint16_t l : labels) ++counts[l - 1];
    return counts;
}

std::vector<std::size_t> LabeledDataset::class_indices(std::size_t label) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) idx.push_back(i);
    return idx;
}

Tensor LabeledDataset::class_samples(std::size_t label) const {
    const auto idx = class_indices(label);
    const std::size_t D = dim();
    Tensor out({idx.size(), D});
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < D; ++j) out.data[i * D + j] = samples.data[idx[i] * D + j];
    return out;
}

void LabeledDataset::validate() const {
    if (samples.rank() != 2) throw std::invalid_argument("dataset: samples must be [N x D]");
    if (samples.rows() != labels.size())
        throw std::invalid_argument("dataset: sample/label count mismatch");
    if (num_classes < 1) throw std::invalid_argument("dataset: need at least 1 class");
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 1 || labels[i] > num_classes)
            throw std::invalid_argument("dataset: record " + std::to_string(i) + ": label " +
                                        std::to_string(labels[i]) + " out of range 1.." +
                                        std::to_string(num_classes));
}

LabeledDataset gen_ordinal_gaussians(const OrdinalGaussianSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::size_t N = 0;
    for (std::size_t n : spec.counts) N += n;

    LabeledDataset ds;
    ds.num_classes = spec.num_classes;
    ds.samples = Tensor({N, spec.dim});
    ds.labels.reserve(N);

    Rng rng(seed);
    std::size_t row = 0;
    for (std::size_t c = 1; c <= spec.num_classes; ++c) {
        const auto mu = spec.class_mean(c);
        const double sc = spec.class_sigma(c);
        for (std::size_t i = 0; i < spec.counts[c - 1]; ++i, ++row) {
            for (std::size_t d = 0; d < spec.dim; ++d)
                ds.samples.data[row * spec.dim + d] = mu[d] + sc * rng.normal();
            ds.labels.push_back(static_cast<std::uint16_t>(c));
        }
    }
    return ds;
}

void save_dataset(const LabeledDataset& ds, const std::string& path) {
    ds.validate();
    nlohmann::json meta;
    meta["kind"] = "odm_dataset";
    meta["version"] = 1;
    meta["n"] = ds.size();
    meta["d"] = ds.dim();
    meta["c"] = ds.num_classes;
    meta["dtype"] = "f64";
    meta["label_dtype"] = "u16";
    meta["counts"] = ds.class_counts();
    container::write(path, kDatasetMagic, std::move(meta),
                     {{"samples", container::pack_f64(ds.samples.data)},
                      {"labels", container::pack_u16(ds.labels)}});
}

LabeledDataset load_dataset(const std::string& path) {
    const container::File f = container::read(path, kDatasetMagic);
    for (const char* k : {"n", "d", "c"})
        if (!f.meta.contains(k) || !f.meta[k].is_number_unsigned())
            throw std::runtime_error("dataset '" + path + "': header lacks field '" + k + "'");
    const auto n = f.meta["n"].get<std::size_t>();
    const auto d = f.meta["d"].get<std::size_t>();
    const auto c = f.meta["c"].get<std::size_t>();
    if (d == 0 || c == 0)
        throw std::runtime_error("dataset '" + path + "': degenerate dimensions in header");

    LabeledDataset ds;
    ds.num_classes = c;
    auto values = container::unpack_f64(f.get("samples").bytes);
    if (values.size() != n * d)
        throw std::runtime_error("dataset '" + path + "': sample block holds " +
                                 std::to_string(values.size()) + " values, header implies " +
                                 std::to_string(n * d));
    ds.samples = Tensor({n, d}, std::move(values));
    ds.labels = container::unpack_u16(f.get("labels").bytes);
    if (ds.labels.size() != n)
        throw std::runtime_error("dataset '" + path + "': label block holds " +
                                 std::to_string(ds.labels.size()) + " entries, header implies " +
                                 std::to_string(n));
    for (std::size_t i = 0; i < ds.labels.size(); ++i)
        if (ds.labels[i] < 1 || ds.labels[i] > c)
            throw std::runtime_error("dataset '" + path + "': record " + std::to_string(i) +
                                     ": label " + std::to_string(ds.labels[i]) +
                                     " out of range 1.." + std::to_string(c));
    if (f.meta.contains("counts")) {
        const auto counts = ds.class_counts();
        const auto stated = f.meta["counts"].get<std::vector<std::size_t>>();
        if (stated != counts)
            throw std::runtime_error("dataset '" + path +
                                     "': per-class counts disagree with the labels");
    }
    return ds;
}

void export_csv(const LabeledDataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    const std::size_t D = ds.dim();
    f << "index,label";
    for (std::size_t j = 1; j <= D; ++j) f << ",f" << j;
    f << "\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        f << i << "," << ds.labels[i];
        for (std::size_t j = 0; j < D; ++j) f << "," << fmt_g17(ds.samples.data[i * D + j]);
        f << "\n";
    }
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace odm
