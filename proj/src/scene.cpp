#include "restage/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace restage {

void SequenceBundle::validate() const {
    const std::size_t nt = static_cast<std::size_t>(num_tracks) * num_frames;
    if (positions.size() != nt) throw std::invalid_argument("bundle: positions shape mismatch");
    if (visibility.size() != nt) throw std::invalid_argument("bundle: visibility shape mismatch");
    if (labels.size() != static_cast<std::size_t>(num_tracks))
        throw std::invalid_argument("bundle: labels shape mismatch");
    if (!colors.empty() && colors.size() != static_cast<std::size_t>(num_tracks))
        throw std::invalid_argument("bundle: colors shape mismatch");
    if (cameras.size() != static_cast<std::size_t>(num_frames))
        throw std::invalid_argument("bundle: camera count mismatch");
    if (t1 < 0 || t1 > num_frames) throw std::invalid_argument("bundle: t1 out of range");
    for (const Vec3& p : positions)
        if (!p.allFinite()) throw std::invalid_argument("bundle: non-finite track position");
}

MotionBases MotionBases::identity(int k, int t) {
    MotionBases b;
    b.num_bases = k;
    b.num_frames = t;
    b.grid.assign(static_cast<std::size_t>(k) * t, Pose::identity());
    return b;
}

void MotionBases::column(int t, std::vector<Pose>& out) const {
    out.resize(num_bases);
    for (int k = 0; k < num_bases; ++k) out[k] = at(k, t);
}

int SceneModel::foreground_count() const { return coeffs.rows(); }

int SceneModel::add_foreground_splat(const Splat& s, const Eigen::VectorXd& beta) {
    if (beta.size() != bases.num_bases)
        throw std::invalid_argument("coefficient length must equal basis count");
    Splat sp = s;
    sp.is_foreground = true;
    sp.coeff_row = coeffs.rows();
    coeffs.beta.conservativeResize(coeffs.rows() + 1, bases.num_bases);
    coeffs.beta.row(sp.coeff_row) = beta.transpose();
    splats.push_back(sp);
    return static_cast<int>(splats.size()) - 1;
}

int SceneModel::add_background_splat(const Splat& s) {
    Splat sp = s;
    sp.is_foreground = false;
    sp.coeff_row = -1;
    splats.push_back(sp);
    return static_cast<int>(splats.size()) - 1;
}

void SceneModel::validate() const {
    if (t_cano < 0 || t_cano >= frame_count)
        throw std::invalid_argument("model: t_cano out of range");
    if (bases.num_frames != frame_count)
        throw std::invalid_argument("model: basis frame count mismatch");
    int fg = 0;
    for (const Splat& s : splats) {
        if (s.is_foreground) {
            if (s.coeff_row < 0 || s.coeff_row >= coeffs.rows())
                throw std::invalid_argument("model: dangling coefficient row");
            ++fg;
        }
        if ((s.scale.array() <= 0.0).any())
            throw std::invalid_argument("model: splat scale must be positive");
        if (s.opacity < 0.0 || s.opacity > 1.0)
            throw std::invalid_argument("model: opacity out of [0,1]");
        if (std::abs(s.orientation.norm() - 1.0) > 1e-6)
            throw std::invalid_argument("model: splat orientation not unit");
    }
    if (fg != coeffs.rows())
        throw std::invalid_argument("model: coefficient rows must equal foreground count");
}

void softmax_into(const Eigen::VectorXd& beta, Eigen::VectorXd& out) {
    if (beta.size() == 0) throw std::invalid_argument("softmax of empty vector");
    double m = beta.maxCoeff();
    out = (beta.array() - m).exp();
    out /= out.sum();
}

BlendWeights blend_weights(const Eigen::VectorXd& beta) {
    BlendWeights w;
    softmax_into(beta, w.w);
    return w;
}

Pose point_transform(const SceneModel& model, int i, int t) {
    if (i < 0 || i >= static_cast<int>(model.splats.size()))
        throw std::domain_error("point_transform: splat index out of range");
    const Splat& s = model.splats[i];
    if (!s.is_foreground)
        throw std::domain_error("point_transform: background splats carry no motion");
    if (t < 0 || t >= model.frame_count)
        throw std::domain_error("point_transform: frame out of range");
    BlendWeights w = blend_weights(model.coeffs.beta.row(s.coeff_row).transpose());
    std::vector<Pose> column;
    model.bases.column(t, column);
    return blend(w, column);
}

Vec3 deform(const SceneModel& model, int i, int t) {
    if (t < 0 || t >= model.frame_count) throw std::domain_error("deform: frame out of range");
    const Splat& s = model.splats.at(i);
    if (!s.is_foreground) return s.mu;
    return apply(point_transform(model, i, t), s.mu);
}

Vec3 backtrace_to_canonical(const SceneModel& model, const Vec3& x,
                            const Eigen::VectorXd& beta, int t) {
    if (t < 0 || t >= model.frame_count)
        throw std::domain_error("backtrace_to_canonical: frame out of range");
    BlendWeights w = blend_weights(beta);
    std::vector<Pose> column;
    model.bases.column(t, column);
    return apply(inverse(blend(w, column)), x);
}

KnnGraph build_knn_graph(const SceneModel& model, int k) {
    if (k < 1) throw std::invalid_argument("build_knn_graph: k must be >= 1");
    std::vector<int> fg;
    for (int i = 0; i < static_cast<int>(model.splats.size()); ++i)
        if (model.splats[i].is_foreground) fg.push_back(i);
    if (static_cast<int>(fg.size()) < k + 1)
        throw std::invalid_argument("build_knn_graph: need at least k+1 foreground splats");

    KnnGraph graph;
    graph.k = k;
    graph.edges.reserve(fg.size() * static_cast<std::size_t>(k));
    std::vector<std::pair<double, int>> cand;
    cand.reserve(fg.size());
    for (int a : fg) {
        cand.clear();
        for (int b : fg) {
            if (a == b) continue;
            cand.emplace_back((model.splats[a].mu - model.splats[b].mu).squaredNorm(), b);
        }
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
        for (int n = 0; n < k; ++n) {
            KnnGraph::Edge e;
            e.i = a;
            e.j = cand[n].second;
            e.rest_length = std::sqrt(cand[n].first);
            graph.edges.push_back(e);
        }
    }
    graph.similarity.assign(graph.edges.size(), 1.0);
    return graph;
}

void init_splat_scales(SceneModel& model) {
    const int n = static_cast<int>(model.splats.size());
    if (n < 2) return;
    const int neighbors = std::min(3, n - 1);
    std::vector<double> d2(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j)
            d2[j] = j == i ? std::numeric_limits<double>::infinity()
                           : (model.splats[i].mu - model.splats[j].mu).squaredNorm();
        std::partial_sort(d2.begin(), d2.begin() + neighbors, d2.end());
        double mean = 0.0;
        for (int k = 0; k < neighbors; ++k) mean += std::sqrt(d2[k]);
        mean /= neighbors;
        // 1.5x the neighbor spacing: sampled surfaces must rasterize
        // without pinholes for the depth buffer to read as opaque.
        model.splats[i].scale = Vec3::Constant(std::max(1.5 * mean, 1e-4));
    }
}

int select_canonical_frame(const SequenceBundle& bundle) {
    if (bundle.num_frames == 0 || bundle.num_tracks == 0)
        throw std::invalid_argument("select_canonical_frame: empty bundle");
    int best_t = 0;
    long best_count = -1;
    for (int t = 0; t < bundle.num_frames; ++t) {
        long count = 0;
        for (int i = 0; i < bundle.num_tracks; ++i)
            if (bundle.is_foreground(i) && bundle.visible(t, i)) ++count;
        if (count > best_count) {
            best_count = count;
            best_t = t;
        }
    }
    return best_t;
}

}  // namespace restage
