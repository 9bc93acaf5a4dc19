#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "driftlens/corpus.hpp"
#include "driftlens/error.hpp"
#include "driftlens/ngram_lm.hpp"
#include "driftlens/rng.hpp"

namespace driftlens {

// Row-major n x d matrix of externally-produced embeddings, aligned 1:1 with
// a corpus by record_id. 32-bit storage; all arithmetic in double.
struct EmbeddingMatrix {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<float> values;
    std::vector<std::string> alignment;

    std::span<const float> row(std::size_t i) const {
        return std::span<const float>(values).subspan(i * dim, dim);
    }

    void check_finite() const {
        for (std::size_t i = 0; i < rows; ++i) {
            for (float v : row(i)) {
                if (!std::isfinite(v)) {
                    throw InputError("embedding row " + std::to_string(i) + " (record '" +
                                     alignment[i] + "') contains a non-finite value");
                }
            }
        }
    }
};

enum class EmbeddingFormat { Binary, Jsonl };

namespace detail {

constexpr char kEmbeddingMagic[4] = {'D', 'L', 'E', 'M'};
constexpr std::uint8_t kEmbeddingVersion = 1;

inline std::uint32_t read_u32_le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw InputError("embedding file truncated");
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

inline void write_u32_le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline float read_f32_le(std::istream& in) {
    std::uint32_t bits = read_u32_le(in);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

inline void write_f32_le(std::ostream& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    write_u32_le(out, bits);
}

// Reorder rows so alignment matches the corpus record order exactly; the id
// sets must coincide.
inline EmbeddingMatrix align_to_corpus(EmbeddingMatrix m, const Corpus& corpus) {
    if (m.rows != corpus.size()) {
        throw InputError("embedding row count " + std::to_string(m.rows) +
                         " does not match corpus size " + std::to_string(corpus.size()));
    }
    std::unordered_map<std::string, std::size_t> row_of;
    row_of.reserve(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        if (!row_of.emplace(m.alignment[i], i).second) {
            throw InputError("embedding file repeats record_id '" + m.alignment[i] + "'");
        }
    }
    EmbeddingMatrix out;
    out.rows = m.rows;
    out.dim = m.dim;
    out.values.resize(m.values.size());
    out.alignment.reserve(m.rows);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& id = corpus.at(i).record_id;
        auto it = row_of.find(id);
        if (it == row_of.end()) {
            throw InputError("embedding file has no row for record_id '" + id + "'");
        }
        auto src = m.row(it->second);
        std::copy(src.begin(), src.end(), out.values.begin() + static_cast<std::ptrdiff_t>(i * out.dim));
        out.alignment.push_back(id);
    }
    return out;
}

} // namespace detail

inline EmbeddingMatrix load_embeddings(const std::string& path, EmbeddingFormat format,
                                       const Corpus& corpus) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open embedding file '" + path + "'");
    EmbeddingMatrix m;
    if (format == EmbeddingFormat::Binary) {
        char magic[4];
        in.read(magic, 4);
        if (!in || std::memcmp(magic, detail::kEmbeddingMagic, 4) != 0) {
            throw InputError("'" + path + "' is not a DLEM embedding file");
        }
        int version = in.get();
        if (version != detail::kEmbeddingVersion) {
            throw InputError("unsupported DLEM version " + std::to_string(version));
        }
        m.rows = detail::read_u32_le(in);
        m.dim = detail::read_u32_le(in);
        if (m.dim == 0) throw InputError("DLEM file declares zero dimension");
        m.values.resize(m.rows * m.dim);
        for (auto& v : m.values) v = detail::read_f32_le(in);
        m.alignment.reserve(m.rows);
        for (std::size_t i = 0; i < m.rows; ++i) {
            const std::uint32_t len = detail::read_u32_le(in);
            std::string id(len, '\0');
            in.read(id.data(), static_cast<std::streamsize>(len));
            if (!in) throw InputError("embedding file truncated reading record ids");
            m.alignment.push_back(std::move(id));
        }
    } else {
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            json obj;
            try {
                obj = json::parse(line);
            } catch (const json::parse_error& e) {
                throw InputError("embeddings line " + std::to_string(line_no) + ": " + e.what());
            }
            if (!obj.contains("record_id") || !obj.contains("vector")) {
                throw InputError("embeddings line " + std::to_string(line_no) +
                                 ": need record_id and vector");
            }
            auto vec = obj["vector"].get<std::vector<double>>();
            if (m.dim == 0) {
                m.dim = vec.size();
                if (m.dim == 0) {
                    throw InputError("embeddings line " + std::to_string(line_no) + ": empty vector");
                }
            } else if (vec.size() != m.dim) {
                throw InputError("embeddings line " + std::to_string(line_no) + ": dimension " +
                                 std::to_string(vec.size()) + " != " + std::to_string(m.dim));
            }
            for (double v : vec) m.values.push_back(static_cast<float>(v));
            m.alignment.push_back(obj["record_id"].get<std::string>());
            ++m.rows;
        }
    }
    m = detail::align_to_corpus(std::move(m), corpus);
    m.check_finite();
    return m;
}

inline void write_embeddings_binary(const EmbeddingMatrix& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write embedding file '" + path + "'");
    out.write(detail::kEmbeddingMagic, 4);
    out.put(static_cast<char>(detail::kEmbeddingVersion));
    detail::write_u32_le(out, static_cast<std::uint32_t>(m.rows));
    detail::write_u32_le(out, static_cast<std::uint32_t>(m.dim));
    for (float v : m.values) detail::write_f32_le(out, v);
    for (const auto& id : m.alignment) {
        detail::write_u32_le(out, static_cast<std::uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
    }
}

// Rows of `all` matching the subset corpus, in the subset's order.
inline EmbeddingMatrix select_embeddings(const EmbeddingMatrix& all, const Corpus& subset) {
    std::unordered_map<std::string, std::size_t> row_of;
    row_of.reserve(all.rows);
    for (std::size_t i = 0; i < all.rows; ++i) row_of.emplace(all.alignment[i], i);
    EmbeddingMatrix out;
    out.dim = all.dim;
    out.rows = subset.size();
    out.values.reserve(out.rows * out.dim);
    out.alignment.reserve(out.rows);
    for (const auto& rec : subset.records()) {
        auto it = row_of.find(rec.record_id);
        if (it == row_of.end()) {
            throw InputError("no embedding for record_id '" + rec.record_id + "'");
        }
        auto src = all.row(it->second);
        out.values.insert(out.values.end(), src.begin(), src.end());
        out.alignment.push_back(rec.record_id);
    }
    return out;
}

inline EmbeddingMatrix vstack(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    if (a.dim != b.dim) throw InputError("vstack: dimension mismatch");
    EmbeddingMatrix out;
    out.dim = a.dim;
    out.rows = a.rows + b.rows;
    out.values = a.values;
    out.values.insert(out.values.end(), b.values.begin(), b.values.end());
    out.alignment = a.alignment;
    out.alignment.insert(out.alignment.end(), b.alignment.begin(), b.alignment.end());
    return out;
}

// ---------------------------------------------------------------------------
// k-means quantization
// ---------------------------------------------------------------------------

struct ClusterModel {
    std::size_t k = 0;
    std::size_t dim = 0;
    std::vector<double> centroids;  // row-major k x dim
    std::uint64_t seed = 0;
    std::size_t iterations = 0;

    std::span<const double> centroid(std::size_t c) const {
        return std::span<const double>(centroids).subspan(c * dim, dim);
    }
};

namespace detail {

inline double sq_distance(std::span<const float> p, std::span<const double> c) {
    double acc = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double diff = static_cast<double>(p[j]) - c[j];
        acc += diff * diff;
    }
    return acc;
}

// Nearest centroid by squared Euclidean distance; ties go to the lowest index.
inline std::size_t nearest_centroid(std::span<const float> p, const ClusterModel& model) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < model.k; ++c) {
        const double d = sq_distance(p, model.centroid(c));
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

} // namespace detail

// Lloyd's algorithm with k-means++ seeding. Deterministic given the seed:
// sequential assignment scans, tie-breaks to the lowest centroid index, empty
// clusters re-seeded from the point farthest from its assigned centroid.
inline ClusterModel kmeans(const EmbeddingMatrix& points, std::size_t k, std::uint64_t seed,
                           std::size_t max_iter = 300, double tol = 1e-6) {
    if (k < 2) throw InputError("kmeans: k must be >= 2");
    if (points.rows < k) {
        throw InputError("kmeans: " + std::to_string(points.rows) + " rows < k = " +
                         std::to_string(k));
    }
    const std::size_t n = points.rows;
    const std::size_t d = points.dim;
    SeededRng rng(seed);
    ClusterModel model;
    model.k = k;
    model.dim = d;
    model.seed = seed;
    model.centroids.assign(k * d, 0.0);

    // k-means++ initialization
    {
        std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
        auto set_centroid = [&](std::size_t c, std::size_t point) {
            auto src = points.row(point);
            for (std::size_t j = 0; j < d; ++j) model.centroids[c * d + j] = src[j];
        };
        set_centroid(0, static_cast<std::size_t>(rng.bounded(n)));
        for (std::size_t c = 1; c < k; ++c) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d2 = detail::sq_distance(points.row(i), model.centroid(c - 1));
                if (d2 < min_d2[i]) min_d2[i] = d2;
                sum += min_d2[i];
            }
            std::size_t chosen;
            if (sum <= 0.0) {
                chosen = static_cast<std::size_t>(rng.bounded(n));
            } else {
                const double target = rng.unit() * sum;
                double acc = 0.0;
                chosen = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += min_d2[i];
                    if (acc > target) {
                        chosen = i;
                        break;
                    }
                }
            }
            set_centroid(c, chosen);
        }
    }

    std::vector<std::size_t> assign(n, 0);
    std::vector<double> sums(k * d);
    std::vector<std::size_t> counts(k);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        model.iterations = iter + 1;
        for (std::size_t i = 0; i < n; ++i) {
            assign[i] = detail::nearest_centroid(points.row(i), model);
        }
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto p = points.row(i);
            const std::size_t c = assign[i];
            for (std::size_t j = 0; j < d; ++j) sums[c * d + j] += p[j];
            ++counts[c];
        }
        double max_shift = 0.0;
        std::vector<std::size_t> empties;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                empties.push_back(c);
                continue;
            }
            double shift2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double updated = sums[c * d + j] / static_cast<double>(counts[c]);
                const double diff = updated - model.centroids[c * d + j];
                shift2 += diff * diff;
                model.centroids[c * d + j] = updated;
            }
            max_shift = std::max(max_shift, std::sqrt(shift2));
        }
        for (std::size_t c : empties) {
            // farthest point from its assigned centroid takes over the empty slot
            double worst = -1.0;
            std::size_t worst_i = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d2 = detail::sq_distance(points.row(i), model.centroid(assign[i]));
                if (d2 > worst) {
                    worst = d2;
                    worst_i = i;
                }
            }
            auto src = points.row(worst_i);
            for (std::size_t j = 0; j < d; ++j) model.centroids[c * d + j] = src[j];
            assign[worst_i] = c;
            max_shift = std::numeric_limits<double>::infinity();
        }
        if (max_shift < tol) break;
    }
    return model;
}

// ---------------------------------------------------------------------------
// Quantized histograms and MAUVE
// ---------------------------------------------------------------------------

struct ClusterHistogram {
    std::vector<double> probs;
};

inline ClusterHistogram histogram(const ClusterModel& model, const EmbeddingMatrix& points,
                                  double smoothing_eps = 0.0) {
    if (points.dim != model.dim) throw InputError("histogram: dimension mismatch");
    if (points.rows == 0) throw InputError("histogram: no points");
    std::vector<double> counts(model.k, 0.0);
    for (std::size_t i = 0; i < points.rows; ++i) {
        counts[detail::nearest_centroid(points.row(i), model)] += 1.0;
    }
    ClusterHistogram h;
    h.probs.resize(model.k);
    double total = 0.0;
    for (std::size_t c = 0; c < model.k; ++c) {
        h.probs[c] = counts[c] / static_cast<double>(points.rows) + smoothing_eps;
        total += h.probs[c];
    }
    for (auto& p : h.probs) p /= total;
    return h;
}

struct CurvePoint {
    double lambda;
    double x;  // exp(-c * KL(q || R_lambda))
    double y;  // exp(-c * KL(p || R_lambda))
};

struct DivergenceCurve {
    std::vector<CurvePoint> points;  // lambda strictly increasing
    double scaling_c = 5.0;
};

// Divergence curve over mixtures R_lambda = lambda*p + (1-lambda)*q for
// lambda on a uniform open grid: lambda_i = i / (grid_size + 1).
inline DivergenceCurve divergence_curve(const ClusterHistogram& p, const ClusterHistogram& q,
                                        double c = 5.0, std::size_t grid_size = 101) {
    if (p.probs.size() != q.probs.size()) throw InputError("divergence_curve: length mismatch");
    if (grid_size == 0) throw InputError("divergence_curve: grid_size must be >= 1");
    if (c < 0) throw InputError("divergence_curve: scaling constant must be >= 0");
    for (std::size_t i = 0; i < p.probs.size(); ++i) {
        if (p.probs[i] <= 0.0 || q.probs[i] <= 0.0) {
            throw InputError("divergence_curve: histograms must be strictly positive; "
                             "apply smoothing before building the curve");
        }
    }
    DivergenceCurve curve;
    curve.scaling_c = c;
    curve.points.reserve(grid_size);
    std::vector<double> r(p.probs.size());
    for (std::size_t i = 1; i <= grid_size; ++i) {
        const double lambda = static_cast<double>(i) / static_cast<double>(grid_size + 1);
        for (std::size_t j = 0; j < r.size(); ++j) {
            r[j] = lambda * p.probs[j] + (1.0 - lambda) * q.probs[j];
        }
        double kl_q = 0.0, kl_p = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j) {
            kl_q += q.probs[j] * std::log(q.probs[j] / r[j]);
            kl_p += p.probs[j] * std::log(p.probs[j] / r[j]);
        }
        curve.points.push_back({lambda, std::exp(-c * kl_q), std::exp(-c * kl_p)});
    }
    return curve;
}

// Area under the divergence frontier. The curve is closed with the idealized
// extreme points (0,1) and (1,0) before trapezoid integration, which makes
// the degenerate p = q curve (every point at (1,1)) integrate to exactly 1.
inline double mauve(const DivergenceCurve& curve) {
    if (curve.points.empty()) throw InputError("mauve: empty curve");
    std::vector<std::pair<double, double>> pts;
    pts.reserve(curve.points.size() + 2);
    pts.emplace_back(0.0, 1.0);
    for (const auto& cp : curve.points) pts.emplace_back(cp.x, cp.y);
    pts.emplace_back(1.0, 0.0);
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second > b.second;
    });
    double area = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        area += (pts[i].first - pts[i - 1].first) * 0.5 * (pts[i].second + pts[i - 1].second);
    }
    return area;
}

struct MauveParams {
    // 0 = auto: max(2, min(n, m) / 10), the quantization the original MAUVE
    // tooling defaults to. Coarser grids (one cluster per ~10 points of the
    // smaller sample) keep the multinomial noise floor on same-distribution
    // samples near the ~0.96 random baseline; doubling k roughly doubles the
    // noise term and depresses every score.
    std::size_t k = 0;
    double c = 5.0;
    std::size_t grid_size = 101;
    std::size_t kmeans_max_iter = 300;
    double kmeans_tol = 1e-6;
    double smoothing_eps = 1e-6;
};

struct MauveResult {
    double value = 0.0;
    std::size_t k_used = 0;
    DivergenceCurve curve;
};

// Full MAUVE pipeline: joint quantization of both samples, smoothed cluster
// histograms, divergence curve, area.
inline MauveResult mauve_score(const EmbeddingMatrix& x, const EmbeddingMatrix& y,
                               const MauveParams& params, std::uint64_t seed) {
    if (x.dim != y.dim) throw InputError("mauve_score: dimension mismatch");
    if (x.rows == 0 || y.rows == 0) throw InputError("mauve_score: empty sample");
    std::size_t k = params.k;
    if (k == 0) k = std::max<std::size_t>(2, std::min(x.rows, y.rows) / 10);
    k = std::min(k, x.rows + y.rows);
    if (k < 2) k = 2;
    EmbeddingMatrix joint = vstack(x, y);
    ClusterModel model = kmeans(joint, k, seed, params.kmeans_max_iter, params.kmeans_tol);
    ClusterHistogram hp = histogram(model, x, params.smoothing_eps);
    ClusterHistogram hq = histogram(model, y, params.smoothing_eps);
    MauveResult result;
    result.k_used = k;
    result.curve = divergence_curve(hp, hq, params.c, params.grid_size);
    result.value = mauve(result.curve);
    return result;
}

// ---------------------------------------------------------------------------
// Average minimum distance
// ---------------------------------------------------------------------------

enum class DistanceMetric { Euclidean, Cosine };

namespace detail {

inline double cosine_distance(std::span<const float> a, std::span<const float> b,
                              std::size_t row_a, std::size_t row_b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        dot += static_cast<double>(a[j]) * b[j];
        na += static_cast<double>(a[j]) * a[j];
        nb += static_cast<double>(b[j]) * b[j];
    }
    if (na == 0.0 || nb == 0.0) {
        throw InputError("cosine distance undefined for zero-norm vector (rows " +
                         std::to_string(row_a) + ", " + std::to_string(row_b) + ")");
    }
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

} // namespace detail

// Mean over rows of y of the minimum distance to any row of x.
inline double avg_min_distance(const EmbeddingMatrix& x, const EmbeddingMatrix& y,
                               DistanceMetric metric) {
    if (x.dim != y.dim) throw InputError("avg_min_distance: dimension mismatch");
    if (x.rows == 0 || y.rows == 0) throw InputError("avg_min_distance: empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < y.rows; ++i) {
        double best = std::numeric_limits<double>::infinity();
        auto a = y.row(i);
        for (std::size_t j = 0; j < x.rows; ++j) {
            double d;
            if (metric == DistanceMetric::Euclidean) {
                double acc = 0.0;
                auto b = x.row(j);
                for (std::size_t t = 0; t < a.size(); ++t) {
                    const double diff = static_cast<double>(a[t]) - b[t];
                    acc += diff * diff;
                }
                d = std::sqrt(acc);
            } else {
                d = detail::cosine_distance(x.row(j), a, j, i);
            }
            if (d < best) best = d;
        }
        total += best;
    }
    return total / static_cast<double>(y.rows);
}

} // namespace driftlens
