#include "storycap/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "storycap/errors.hpp"

namespace storycap::encoding {

using nlohmann::json;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Cyclic Jacobi rotations for a symmetric matrix. Small descriptor
// dimensions only; returns eigenpairs sorted by descending eigenvalue with
// the largest-magnitude entry of each vector made positive.
void jacobi_eigen_symmetric(std::vector<std::vector<double>> a,
                            std::vector<double>& eigenvalues,
                            std::vector<std::vector<double>>& eigenvectors) {
    const int n = static_cast<int>(a.size());
    std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) v[i][i] = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-30) break;

        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (int k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return a[i][i] > a[j][j]; });

    eigenvalues.assign(n, 0.0);
    eigenvectors.assign(n, std::vector<double>(n, 0.0));
    for (int r = 0; r < n; ++r) {
        const int src = order[r];
        eigenvalues[r] = a[src][src];
        for (int k = 0; k < n; ++k) eigenvectors[r][k] = v[k][src];
        // Sign convention: largest-magnitude entry positive.
        int arg = 0;
        for (int k = 1; k < n; ++k)
            if (std::abs(eigenvectors[r][k]) > std::abs(eigenvectors[r][arg])) arg = k;
        if (eigenvectors[r][arg] < 0.0)
            for (double& x : eigenvectors[r]) x = -x;
    }
}

double uniform01(std::mt19937_64& rng) {
    // Top 53 bits of the generator output; identical across platforms,
    // unlike std::uniform_real_distribution.
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

std::vector<double> PcaModel::transform(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != d_raw())
        throw InputError("pca transform: descriptor has dimension " +
                         std::to_string(x.size()) + ", model expects " +
                         std::to_string(d_raw()));
    std::vector<double> centered(x.size());
    for (size_t i = 0; i < x.size(); ++i) centered[i] = x[i] - mean[i];
    std::vector<double> out(components.size());
    for (size_t j = 0; j < components.size(); ++j) {
        out[j] = dot(components[j], centered);
        if (whiten) {
            const double ev = std::max(eigenvalues[j], 1e-12);
            out[j] /= std::sqrt(ev);
        }
    }
    return out;
}

std::vector<double> PcaModel::inverse_transform(const std::vector<double>& y) const {
    if (static_cast<int>(y.size()) != d_pca())
        throw InputError("pca inverse_transform: vector has dimension " +
                         std::to_string(y.size()) + ", model expects " +
                         std::to_string(d_pca()));
    std::vector<double> out = mean;
    for (size_t j = 0; j < components.size(); ++j) {
        double coeff = y[j];
        if (whiten) coeff *= std::sqrt(std::max(eigenvalues[j], 1e-12));
        for (size_t i = 0; i < out.size(); ++i) out[i] += coeff * components[j][i];
    }
    return out;
}

void PcaModel::validate() const {
    if (mean.empty()) throw InputError("pca model: empty mean");
    if (components.empty()) throw InputError("pca model: no components");
    if (eigenvalues.size() != components.size())
        throw InputError("pca model: eigenvalues count does not match components");
    for (size_t j = 0; j < components.size(); ++j) {
        if (components[j].size() != mean.size())
            throw InputError("pca model: components[" + std::to_string(j) +
                             "] has dimension " + std::to_string(components[j].size()) +
                             ", mean has " + std::to_string(mean.size()));
        for (size_t k = 0; k <= j; ++k) {
            const double d = dot(components[j], components[k]);
            const double want = (j == k) ? 1.0 : 0.0;
            if (std::abs(d - want) > 1e-6)
                throw InputError("pca model: components " + std::to_string(j) + " and " +
                                 std::to_string(k) + " are not orthonormal");
        }
    }
}

void GmmModel::validate() const {
    const int k = component_count();
    if (k == 0) throw InputError("gmm model: weights is empty");
    if (static_cast<int>(means.size()) != k)
        throw InputError("gmm model: means has " + std::to_string(means.size()) +
                         " entries, weights has " + std::to_string(k));
    if (static_cast<int>(variances.size()) != k)
        throw InputError("gmm model: variances has " + std::to_string(variances.size()) +
                         " entries, weights has " + std::to_string(k));
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        if (weights[i] <= 0.0)
            throw InputError("gmm model: weights[" + std::to_string(i) + "] is not positive");
        sum += weights[i];
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw InputError("gmm model: weights sum to " + std::to_string(sum) + ", expected 1");
    const size_t d = means[0].size();
    for (int i = 0; i < k; ++i) {
        if (means[i].size() != d)
            throw InputError("gmm model: means[" + std::to_string(i) + "] has dimension " +
                             std::to_string(means[i].size()) + ", expected " + std::to_string(d));
        if (variances[i].size() != d)
            throw InputError("gmm model: variances[" + std::to_string(i) + "] has dimension " +
                             std::to_string(variances[i].size()) + ", expected " +
                             std::to_string(d));
        for (size_t j = 0; j < d; ++j)
            if (variances[i][j] < variance_floor)
                throw InputError("gmm model: variances[" + std::to_string(i) + "][" +
                                 std::to_string(j) + "] is below the floor");
    }
}

void LinearOvrModel::validate() const {
    if (classes.empty()) throw InputError("ovr model: classes is empty");
    std::set<std::string> uniq(classes.begin(), classes.end());
    if (uniq.size() != classes.size()) throw InputError("ovr model: classes are not unique");
    if (weights.size() != classes.size())
        throw InputError("ovr model: weights count does not match classes");
    if (biases.size() != classes.size())
        throw InputError("ovr model: biases count does not match classes");
    for (size_t i = 1; i < weights.size(); ++i)
        if (weights[i].size() != weights[0].size())
            throw InputError("ovr model: weights[" + std::to_string(i) +
                             "] dimension differs from weights[0]");
}

PcaModel fit_pca(const std::vector<std::vector<double>>& rows, int target_dim, bool whiten) {
    if (rows.empty()) throw InputError("fit_pca: no rows");
    const int n = static_cast<int>(rows.size());
    const int d = static_cast<int>(rows[0].size());
    if (target_dim <= 0) throw InputError("fit_pca: target_dim must be positive");
    if (target_dim > d)
        throw InputError("fit_pca: target_dim " + std::to_string(target_dim) +
                         " exceeds data dimension " + std::to_string(d));
    if (n < target_dim)
        throw InputError("fit_pca: need at least " + std::to_string(target_dim) +
                         " rows, got " + std::to_string(n));
    for (int i = 0; i < n; ++i)
        if (static_cast<int>(rows[i].size()) != d)
            throw InputError("fit_pca: row " + std::to_string(i) + " has dimension " +
                             std::to_string(rows[i].size()) + ", expected " + std::to_string(d));

    std::vector<double> mean(d, 0.0);
    for (const auto& r : rows)
        for (int j = 0; j < d; ++j) mean[j] += r[j];
    for (double& m : mean) m /= n;

    // Column variance check catches constant inputs before the eigensolver.
    for (int j = 0; j < d; ++j) {
        double ss = 0.0;
        for (const auto& r : rows) {
            const double dev = r[j] - mean[j];
            ss += dev * dev;
        }
        const double var = n > 1 ? ss / (n - 1) : 0.0;
        if (var <= 1e-12 * std::max(1.0, mean[j] * mean[j]))
            throw InputError("fit_pca: column " + std::to_string(j) + " has zero variance");
    }

    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    for (const auto& r : rows) {
        for (int i = 0; i < d; ++i) {
            const double di = r[i] - mean[i];
            for (int j = i; j < d; ++j) cov[i][j] += di * (r[j] - mean[j]);
        }
    }
    const double norm = n > 1 ? 1.0 / (n - 1) : 1.0;
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            cov[i][j] *= norm;
            cov[j][i] = cov[i][j];
        }

    std::vector<double> evals;
    std::vector<std::vector<double>> evecs;
    jacobi_eigen_symmetric(cov, evals, evecs);

    PcaModel model;
    model.mean = std::move(mean);
    model.whiten = whiten;
    model.components.assign(evecs.begin(), evecs.begin() + target_dim);
    model.eigenvalues.assign(evals.begin(), evals.begin() + target_dim);
    return model;
}

std::vector<double> gmm_posteriors(const GmmModel& gmm, const std::vector<double>& x) {
    const int k = gmm.component_count();
    const int d = gmm.dim();
    if (static_cast<int>(x.size()) != d)
        throw InputError("gmm_posteriors: descriptor has dimension " + std::to_string(x.size()) +
                         ", model expects " + std::to_string(d));

    static constexpr double log_2pi = 1.8378770664093454836;
    std::vector<double> logp(k);
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
        double lp = std::log(gmm.weights[i]);
        for (int j = 0; j < d; ++j) {
            const double var = gmm.variances[i][j];
            const double dev = x[j] - gmm.means[i][j];
            lp -= 0.5 * (log_2pi + std::log(var) + dev * dev / var);
        }
        logp[i] = lp;
        best = std::max(best, lp);
    }
    double denom = 0.0;
    for (int i = 0; i < k; ++i) denom += std::exp(logp[i] - best);
    std::vector<double> post(k);
    for (int i = 0; i < k; ++i) post[i] = std::exp(logp[i] - best) / denom;
    return post;
}

FisherVector fisher_encode(const std::vector<std::vector<double>>& window_descriptors,
                           const GmmModel& gmm) {
    if (window_descriptors.empty())
        throw InputError("fisher_encode: empty descriptor window");
    const int k = gmm.component_count();
    const int d = gmm.dim();
    const size_t n = window_descriptors.size();

    std::vector<double> mean_grad(static_cast<size_t>(k) * d, 0.0);
    std::vector<double> var_grad(static_cast<size_t>(k) * d, 0.0);

    for (const auto& x : window_descriptors) {
        const std::vector<double> post = gmm_posteriors(gmm, x);
        for (int i = 0; i < k; ++i) {
            const double g = post[i];
            for (int j = 0; j < d; ++j) {
                const double sigma = std::sqrt(gmm.variances[i][j]);
                const double u = (x[j] - gmm.means[i][j]) / sigma;
                mean_grad[static_cast<size_t>(i) * d + j] += g * u;
                var_grad[static_cast<size_t>(i) * d + j] += g * (u * u - 1.0);
            }
        }
    }

    FisherVector fv;
    fv.values.resize(2 * static_cast<size_t>(k) * d);
    const double nn = static_cast<double>(n);
    for (int i = 0; i < k; ++i) {
        const double mean_scale = 1.0 / (nn * std::sqrt(gmm.weights[i]));
        const double var_scale = 1.0 / (nn * std::sqrt(2.0 * gmm.weights[i]));
        for (int j = 0; j < d; ++j) {
            fv.values[static_cast<size_t>(i) * d + j] =
                mean_scale * mean_grad[static_cast<size_t>(i) * d + j];
            fv.values[static_cast<size_t>(k) * d + static_cast<size_t>(i) * d + j] =
                var_scale * var_grad[static_cast<size_t>(i) * d + j];
        }
    }
    return fv;
}

FisherVector power_l2_normalize(const FisherVector& fv) {
    FisherVector out;
    out.values.resize(fv.values.size());
    double sumsq = 0.0;
    for (size_t i = 0; i < fv.values.size(); ++i) {
        const double z = fv.values[i];
        const double p = (z >= 0.0 ? 1.0 : -1.0) * std::sqrt(std::abs(z));
        out.values[i] = p;
        sumsq += p * p;
    }
    if (sumsq > 0.0) {
        const double inv = 1.0 / std::sqrt(sumsq);
        for (double& v : out.values) v *= inv;
    }
    out.normalized = true;
    return out;
}

LinearOvrModel train_ovr_linear(const std::vector<FisherVector>& features,
                                const std::vector<std::string>& labels, double c) {
    if (features.size() != labels.size())
        throw InputError("train_ovr_linear: feature and label counts differ");
    if (features.empty()) throw InputError("train_ovr_linear: no training data");
    const size_t dim = features[0].values.size();
    for (size_t i = 0; i < features.size(); ++i)
        if (features[i].values.size() != dim)
            throw InputError("train_ovr_linear: feature " + std::to_string(i) +
                             " has dimension " + std::to_string(features[i].values.size()) +
                             ", expected " + std::to_string(dim));

    std::set<std::string> class_set(labels.begin(), labels.end());
    if (class_set.size() < 2)
        throw InputError("train_ovr_linear: need at least two distinct labels");

    LinearOvrModel model;
    model.classes.assign(class_set.begin(), class_set.end());
    model.c = c;

    const size_t n = features.size();
    const double lambda = 1.0 / (c * static_cast<double>(n));
    constexpr int epochs = 100;

    for (const std::string& cls : model.classes) {
        // Bias is the extra constant-one feature, regularized with the rest.
        std::vector<double> w(dim + 1, 0.0);
        long long t = 0;
        for (int epoch = 0; epoch < epochs; ++epoch) {
            for (size_t i = 0; i < n; ++i) {
                ++t;
                const double eta = 1.0 / (lambda * static_cast<double>(t));
                const double y = labels[i] == cls ? 1.0 : -1.0;
                const auto& x = features[i].values;
                double margin = w[dim];
                for (size_t j = 0; j < dim; ++j) margin += w[j] * x[j];
                margin *= y;
                const double decay = 1.0 - eta * lambda;
                for (double& wj : w) wj *= decay;
                if (margin < 1.0) {
                    for (size_t j = 0; j < dim; ++j) w[j] += eta * y * x[j];
                    w[dim] += eta * y;
                }
            }
        }
        model.biases.push_back(w[dim]);
        w.pop_back();
        model.weights.push_back(std::move(w));
    }
    return model;
}

std::vector<std::pair<std::string, double>> score_ovr(const LinearOvrModel& model,
                                                      const FisherVector& fv) {
    if (fv.values.size() != static_cast<size_t>(model.dim()))
        throw InputError("score_ovr: feature has dimension " + std::to_string(fv.values.size()) +
                         ", model expects " + std::to_string(model.dim()));
    std::vector<std::pair<std::string, double>> scores;
    scores.reserve(model.classes.size());
    for (size_t i = 0; i < model.classes.size(); ++i)
        scores.emplace_back(model.classes[i], dot(model.weights[i], fv.values) + model.biases[i]);
    return scores;
}

GmmModel fit_gmm(const std::vector<std::vector<double>>& rows, int component_count,
                 std::uint64_t seed) {
    if (component_count <= 0) throw InputError("fit_gmm: component count must be positive");
    if (rows.size() < static_cast<size_t>(component_count))
        throw InputError("fit_gmm: need at least " + std::to_string(component_count) + " rows");
    const int k = component_count;
    const int d = static_cast<int>(rows[0].size());
    const size_t n = rows.size();
    for (const auto& r : rows)
        if (static_cast<int>(r.size()) != d) throw InputError("fit_gmm: ragged input rows");

    std::mt19937_64 rng(seed);

    // k-means++ seeding.
    std::vector<std::vector<double>> centers;
    centers.push_back(rows[static_cast<size_t>(uniform01(rng) * n) % n]);
    std::vector<double> dist2(n);
    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& ctr : centers) {
                double s = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double dev = rows[i][j] - ctr[j];
                    s += dev * dev;
                }
                best = std::min(best, s);
            }
            dist2[i] = best;
            total += best;
        }
        size_t pick = 0;
        if (total > 0.0) {
            double target = uniform01(rng) * total;
            for (; pick + 1 < n; ++pick) {
                target -= dist2[pick];
                if (target <= 0.0) break;
            }
        } else {
            pick = static_cast<size_t>(uniform01(rng) * n) % n;
        }
        centers.push_back(rows[pick]);
    }

    // Global per-dimension variance as the starting spread.
    std::vector<double> gmean(d, 0.0), gvar(d, 0.0);
    for (const auto& r : rows)
        for (int j = 0; j < d; ++j) gmean[j] += r[j];
    for (double& m : gmean) m /= static_cast<double>(n);
    for (const auto& r : rows)
        for (int j = 0; j < d; ++j) {
            const double dev = r[j] - gmean[j];
            gvar[j] += dev * dev;
        }
    for (double& v : gvar) v = std::max(v / static_cast<double>(n), GmmModel::variance_floor);

    GmmModel gmm;
    gmm.weights.assign(k, 1.0 / k);
    gmm.means = std::move(centers);
    gmm.variances.assign(k, gvar);

    std::vector<std::vector<double>> post(n);
    for (int iter = 0; iter < 100; ++iter) {
        for (size_t i = 0; i < n; ++i) post[i] = gmm_posteriors(gmm, rows[i]);

        for (int ci = 0; ci < k; ++ci) {
            double nk = 0.0;
            for (size_t i = 0; i < n; ++i) nk += post[i][ci];
            if (nk < 1e-10) continue;  // starved component keeps its parameters
            std::vector<double> mu(d, 0.0), var(d, 0.0);
            for (size_t i = 0; i < n; ++i)
                for (int j = 0; j < d; ++j) mu[j] += post[i][ci] * rows[i][j];
            for (double& m : mu) m /= nk;
            for (size_t i = 0; i < n; ++i)
                for (int j = 0; j < d; ++j) {
                    const double dev = rows[i][j] - mu[j];
                    var[j] += post[i][ci] * dev * dev;
                }
            for (double& v : var) v = std::max(v / nk, GmmModel::variance_floor);
            gmm.weights[ci] = nk / static_cast<double>(n);
            gmm.means[ci] = std::move(mu);
            gmm.variances[ci] = std::move(var);
        }
        double wsum = 0.0;
        for (double w : gmm.weights) wsum += w;
        for (double& w : gmm.weights) w /= wsum;
    }
    gmm.validate();
    return gmm;
}

// --- file formats ------------------------------------------------------

namespace {

json parse_json(const std::string& text, const std::string& what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw InputError(what + ": invalid JSON");
    return j;
}

std::vector<double> require_vector(const json& j, const std::string& field, size_t want_dim,
                                   const std::string& what) {
    if (!j.contains(field) || !j[field].is_array())
        throw InputError(what + ": missing array field '" + field + "'");
    std::vector<double> out = j[field].get<std::vector<double>>();
    if (want_dim != 0 && out.size() != want_dim)
        throw InputError(what + ": field '" + field + "' has " + std::to_string(out.size()) +
                         " entries, expected " + std::to_string(want_dim));
    return out;
}

std::vector<std::vector<double>> require_matrix(const json& j, const std::string& field,
                                                size_t want_rows, size_t want_cols,
                                                const std::string& what) {
    if (!j.contains(field) || !j[field].is_array())
        throw InputError(what + ": missing array field '" + field + "'");
    std::vector<std::vector<double>> out;
    for (const auto& row : j[field]) {
        if (!row.is_array()) throw InputError(what + ": field '" + field + "' must be a matrix");
        out.push_back(row.get<std::vector<double>>());
    }
    if (want_rows != 0 && out.size() != want_rows)
        throw InputError(what + ": field '" + field + "' has " + std::to_string(out.size()) +
                         " rows, expected " + std::to_string(want_rows));
    for (size_t r = 0; r < out.size(); ++r)
        if (want_cols != 0 && out[r].size() != want_cols)
            throw InputError(what + ": field '" + field + "' row " + std::to_string(r) + " has " +
                             std::to_string(out[r].size()) + " entries, expected " +
                             std::to_string(want_cols));
    return out;
}

}  // namespace

DescriptorSequence load_descriptor_jsonl(const std::string& text, const std::string& video_id) {
    DescriptorSequence seq;
    seq.video_id = video_id;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    int last_frame = -1;
    size_t dim = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string what = "descriptors " + video_id + " line " + std::to_string(line_no);
        json j = parse_json(line, what);
        if (!j.contains("frame") || !j["frame"].is_number_integer())
            throw InputError(what + ": missing integer field 'frame'");
        DescriptorSequence::Frame f;
        f.frame_index = j["frame"].get<int>();
        f.descriptor = require_vector(j, "vec", 0, what);
        if (f.frame_index < 0) throw InputError(what + ": field 'frame' is negative");
        if (f.frame_index <= last_frame)
            throw InputError(what + ": field 'frame' is not strictly increasing");
        last_frame = f.frame_index;
        if (dim == 0) {
            dim = f.descriptor.size();
            if (dim < 2) throw InputError(what + ": field 'vec' must have dimension >= 2");
            if (dim % 2 != 0) throw InputError(what + ": field 'vec' dimension must be even");
        } else if (f.descriptor.size() != dim) {
            throw InputError(what + ": field 'vec' has dimension " +
                             std::to_string(f.descriptor.size()) + ", expected " +
                             std::to_string(dim));
        }
        seq.frames.push_back(std::move(f));
    }
    return seq;
}

PcaModel pca_from_json(const std::string& text) {
    const std::string what = "pca file";
    json j = parse_json(text, what);
    if (!j.contains("d_raw") || !j["d_raw"].is_number_integer())
        throw InputError(what + ": missing integer field 'd_raw'");
    if (!j.contains("d_pca") || !j["d_pca"].is_number_integer())
        throw InputError(what + ": missing integer field 'd_pca'");
    const size_t d_raw = j["d_raw"].get<size_t>();
    const size_t d_pca = j["d_pca"].get<size_t>();
    PcaModel m;
    m.mean = require_vector(j, "mean", d_raw, what);
    m.components = require_matrix(j, "components", d_pca, d_raw, what);
    m.eigenvalues = require_vector(j, "eigenvalues", d_pca, what);
    m.whiten = j.value("whiten", false);
    m.validate();
    return m;
}

std::string pca_to_json(const PcaModel& model) {
    json j;
    j["d_raw"] = model.d_raw();
    j["d_pca"] = model.d_pca();
    j["mean"] = model.mean;
    j["components"] = model.components;
    j["eigenvalues"] = model.eigenvalues;
    j["whiten"] = model.whiten;
    return j.dump(2) + "\n";
}

GmmModel gmm_from_json(const std::string& text) {
    const std::string what = "gmm file";
    json j = parse_json(text, what);
    if (!j.contains("k") || !j["k"].is_number_integer())
        throw InputError(what + ": missing integer field 'k'");
    if (!j.contains("dim") || !j["dim"].is_number_integer())
        throw InputError(what + ": missing integer field 'dim'");
    const size_t k = j["k"].get<size_t>();
    const size_t dim = j["dim"].get<size_t>();
    GmmModel m;
    m.weights = require_vector(j, "weights", k, what);
    m.means = require_matrix(j, "means", k, dim, what);
    m.variances = require_matrix(j, "variances", k, dim, what);
    try {
        m.validate();
    } catch (const InputError& e) {
        throw InputError(what + ": " + e.what());
    }
    return m;
}

std::string gmm_to_json(const GmmModel& model) {
    json j;
    j["k"] = model.component_count();
    j["dim"] = model.dim();
    j["weights"] = model.weights;
    j["means"] = model.means;
    j["variances"] = model.variances;
    return j.dump(2) + "\n";
}

LinearOvrModel ovr_from_json(const std::string& text) {
    const std::string what = "ovr model file";
    json j = parse_json(text, what);
    if (!j.contains("dim") || !j["dim"].is_number_integer())
        throw InputError(what + ": missing integer field 'dim'");
    if (!j.contains("classes") || !j["classes"].is_array())
        throw InputError(what + ": missing array field 'classes'");
    const size_t dim = j["dim"].get<size_t>();
    LinearOvrModel m;
    m.classes = j["classes"].get<std::vector<std::string>>();
    m.weights = require_matrix(j, "weights", m.classes.size(), dim, what);
    m.biases = require_vector(j, "biases", m.classes.size(), what);
    m.c = j.value("c", 100.0);
    try {
        m.validate();
    } catch (const InputError& e) {
        throw InputError(what + ": " + e.what());
    }
    return m;
}

std::string ovr_to_json(const LinearOvrModel& model) {
    json j;
    j["dim"] = model.dim();
    j["classes"] = model.classes;
    j["weights"] = model.weights;
    j["biases"] = model.biases;
    j["c"] = model.c;
    return j.dump(2) + "\n";
}

}  // namespace storycap::encoding
