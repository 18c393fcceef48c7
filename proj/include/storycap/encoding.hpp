#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace storycap::encoding {

// Per-frame local motion descriptors for one video. Frame indices are
// strictly increasing and all descriptors share one raw dimension, which
// must be even (the PCA step halves it).
struct DescriptorSequence {
    struct Frame {
        int frame_index = 0;
        std::vector<double> descriptor;
    };

    std::string video_id;
    std::vector<Frame> frames;

    int dim() const { return frames.empty() ? 0 : static_cast<int>(frames[0].descriptor.size()); }
    // One past the last frame index; 0 for an empty sequence.
    int length() const { return frames.empty() ? 0 : frames.back().frame_index + 1; }
};

// Linear projection that halves (or otherwise reduces) descriptor dimension.
// `components[j]` is the j-th principal direction (length d_raw), ordered by
// descending eigenvalue. Directions are orthonormal to 1e-6.
struct PcaModel {
    std::vector<double> mean;
    std::vector<std::vector<double>> components;
    std::vector<double> eigenvalues;
    bool whiten = false;

    int d_raw() const { return static_cast<int>(mean.size()); }
    int d_pca() const { return static_cast<int>(components.size()); }

    std::vector<double> transform(const std::vector<double>& x) const;
    // Maps a reduced vector back to the raw space (exact when d_pca == d_raw).
    std::vector<double> inverse_transform(const std::vector<double>& y) const;
    void validate() const;
};

// Diagonal-covariance Gaussian mixture. Weights form a simplex (sum 1 within
// 1e-9, all positive); every variance is at or above `variance_floor`.
struct GmmModel {
    std::vector<double> weights;
    std::vector<std::vector<double>> means;
    std::vector<std::vector<double>> variances;

    static constexpr double variance_floor = 1e-6;

    int component_count() const { return static_cast<int>(weights.size()); }
    int dim() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }
    void validate() const;
};

struct FisherVector {
    std::vector<double> values;
    bool normalized = false;
};

// One-vs-rest linear classifier bank: one weight vector and bias per class.
struct LinearOvrModel {
    std::vector<std::string> classes;
    std::vector<std::vector<double>> weights;
    std::vector<double> biases;
    double c = 100.0;

    int dim() const { return weights.empty() ? 0 : static_cast<int>(weights[0].size()); }
    void validate() const;
};

// Principal component analysis of row-stacked descriptors. Directions are
// the top `target_dim` eigenvectors of the sample covariance (1/(n-1)),
// eigenvalue-descending, with a deterministic sign convention.
// Throws InputError when rows < target_dim, when target_dim exceeds the
// data dimension, or when a column has zero variance (named in the message).
PcaModel fit_pca(const std::vector<std::vector<double>>& rows, int target_dim,
                 bool whiten = false);

// Soft assignments of x to the mixture components; non-negative, sums to 1.
// Computed in log space so large models do not underflow.
std::vector<double> gmm_posteriors(const GmmModel& gmm, const std::vector<double>& x);

// Fisher vector of a descriptor set under a diagonal GMM: the mean-gradient
// block followed by the variance-gradient block, each laid out component-major
// (k, then dimension d), giving 2*K*D values. Per descriptor count N and
// posteriors g_nk:
//   mean block:     1/(N*sqrt(w_k))   * sum_n g_nk * (x_nd - mu_kd)/sigma_kd
//   variance block: 1/(N*sqrt(2*w_k)) * sum_n g_nk * ((x_nd - mu_kd)^2/var_kd - 1)
// Throws InputError on an empty window or dimension mismatch.
FisherVector fisher_encode(const std::vector<std::vector<double>>& window_descriptors,
                           const GmmModel& gmm);

// Signed square root of every entry, then scaling to unit L2 norm. An
// all-zero vector is left all-zero (no division by zero) but still marked
// normalized.
FisherVector power_l2_normalize(const FisherVector& fv);

// Deterministic one-vs-rest training: for every class, subgradient descent
// on the L2-regularized hinge loss with lambda = 1/(C*n), a fixed 100 epochs
// in input order and learning rate 1/(lambda*t). The bias rides along as a
// constant-one feature. Two runs on the same input produce identical bits.
// Throws InputError when fewer than two distinct labels are present or
// feature dimensions disagree.
LinearOvrModel train_ovr_linear(const std::vector<FisherVector>& features,
                                const std::vector<std::string>& labels, double c = 100.0);

// w_c . fv + b_c for every class, in model class order.
std::vector<std::pair<std::string, double>> score_ovr(const LinearOvrModel& model,
                                                      const FisherVector& fv);

// Plain EM fit with k-means++ initialization (seeded), exactly 100 EM
// iterations, and the model's variance floor. Deterministic for a fixed seed.
GmmModel fit_gmm(const std::vector<std::vector<double>>& rows, int component_count,
                 std::uint64_t seed = 0);

// --- file formats ------------------------------------------------------
// Descriptor files are JSON lines, one object per frame:
//   {"frame": 7, "vec": [0.1, -0.2, ...]}
// Model files are single JSON documents with explicit dimension fields;
// loaders reject mismatches naming the offending field.

DescriptorSequence load_descriptor_jsonl(const std::string& text, const std::string& video_id);

PcaModel pca_from_json(const std::string& text);
std::string pca_to_json(const PcaModel& model);

GmmModel gmm_from_json(const std::string& text);
std::string gmm_to_json(const GmmModel& model);

LinearOvrModel ovr_from_json(const std::string& text);
std::string ovr_to_json(const LinearOvrModel& model);

}  // namespace storycap::encoding
