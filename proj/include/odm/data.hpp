#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "odm/tensor.hpp"

namespace odm {

enum class MeanLayout { line, curve };

const char* to_string(MeanLayout m);
MeanLayout mean_layout_from_string(const std::string& s);

/// Synthetic ordinal classes: Gaussian blobs whose means sit on a line
/// (first axis, spacing apart) or on a quadratic arc (curve layout, needs
/// D >= 2). sigma holds one shared scale or one scale per class.
struct OrdinalGaussianSpec {
    std::size_t num_classes{4};
    std::size_t dim{2};
    MeanLayout layout{MeanLayout::line};
    double spacing{2.0};
    std::vector<double> sigma{1.0};
    std::vector<std::size_t> counts{600, 300, 120, 80};

    void validate() const;
    double class_sigma(std::size_t c) const;           // c in 1..C
    std::vector<double> class_mean(std::size_t c) const;  // length dim

    static OrdinalGaussianSpec from_json(const nlohmann::json& j);  // strict keys
    nlohmann::json to_json() const;
};

struct LabeledDataset {
    Tensor samples;  // [N x D]
    std::vector<std::uint16_t> labels;  // in 1..num_classes
    std::size_t num_classes{0};

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return samples.rank() == 2 ? samples.cols() : 0; }
    std::vector<std::size_t> class_counts() const;
    /// Rows with the given label, in file order.
    Tensor class_samples(std::size_t label) const;
    std::vector<std::size_t> class_indices(std::size_t label) const;
    void validate() const;  // throws naming the first offending record
};

/// Rows are grouped by class in label order; draws are row-major per sample.
LabeledDataset gen_ordinal_gaussians(const OrdinalGaussianSpec& spec, std::uint64_t seed);

void save_dataset(const LabeledDataset& ds, const std::string& path);
LabeledDataset load_dataset(const std::string& path);

/// index,label,f1..fD with full round-trip float precision.
void export_csv(const LabeledDataset& ds, const std::string& path);

/// Round-trip float formatting (17 significant digits).
std::string fmt_g17(double v);

}  // namespace odm
