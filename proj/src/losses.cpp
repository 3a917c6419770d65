#include "restage/losses.hpp"

#include <cmath>

#include "restage/parallel.hpp"

namespace restage {

namespace {

inline double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Forward blend state for every (foreground splat, frame) pair, shared by
// the track and rigidity terms and their backward pass.
struct DeformCache {
    int rows = 0, frames = 0, num_bases = 0;
    std::vector<double> weights;  // row-major rows x K softmax
    std::vector<int> ref;         // per row, largest-weight basis
    std::vector<int> fg_splat;    // row -> splat index
    std::vector<std::vector<Pose>> columns;  // per frame, K poses
    std::vector<double> qhat;     // (row*T+t)*4
    std::vector<double> norm;     // row*T+t, pre-normalization quaternion norm
    std::vector<double> x;        // (row*T+t)*3 deformed positions

    std::size_t idx(int r, int t) const { return static_cast<std::size_t>(r) * frames + t; }
    Vec3 position(int r, int t) const {
        const double* p = &x[idx(r, t) * 3];
        return Vec3{p[0], p[1], p[2]};
    }
};

void build_cache(const SceneModel& model, int workers, DeformCache& c) {
    c.rows = model.foreground_count();
    c.frames = model.frame_count;
    c.num_bases = model.num_bases();
    const int K = c.num_bases;

    c.fg_splat.assign(c.rows, -1);
    for (int i = 0; i < static_cast<int>(model.splats.size()); ++i)
        if (model.splats[i].is_foreground) c.fg_splat[model.splats[i].coeff_row] = i;

    c.weights.resize(static_cast<std::size_t>(c.rows) * K);
    c.ref.resize(c.rows);
    Eigen::VectorXd w;
    for (int r = 0; r < c.rows; ++r) {
        softmax_into(model.coeffs.beta.row(r).transpose(), w);
        int ref = 0;
        for (int k = 0; k < K; ++k) {
            c.weights[static_cast<std::size_t>(r) * K + k] = w[k];
            if (w[k] > w[ref]) ref = k;
        }
        c.ref[r] = ref;
    }

    c.columns.resize(c.frames);
    c.qhat.resize(static_cast<std::size_t>(c.rows) * c.frames * 4);
    c.norm.resize(static_cast<std::size_t>(c.rows) * c.frames);
    c.x.resize(static_cast<std::size_t>(c.rows) * c.frames * 3);

    parallel_for(c.frames, workers, [&](int t) {
        auto& col = c.columns[t];
        model.bases.column(t, col);
        for (int r = 0; r < c.rows; ++r) {
            std::span<const double> wr(&c.weights[static_cast<std::size_t>(r) * K], K);
            BlendDetail d = blend_detail(wr, col);
            const std::size_t i = c.idx(r, t);
            for (int q = 0; q < 4; ++q) c.qhat[i * 4 + q] = d.pose.q[q];
            c.norm[i] = d.norm;
            Vec3 pos = apply(d.pose, model.splats[c.fg_splat[r]].mu);
            for (int q = 0; q < 3; ++q) c.x[i * 3 + q] = pos[q];
        }
    });
}

struct EvalRequest {
    const SequenceBundle* bundle = nullptr;
    double lambda_track = 0.0;
    const KnnGraph* graph = nullptr;
    double lambda_rigid = 0.0;
    int rigidity_frame_end = -1;
    bool refine_gate = false;
    const std::vector<InvisibilityScores>* zetas = nullptr;
    double lambda_smooth = 0.0;
    ParamVector* grad = nullptr;
    int workers = 1;
};

struct EvalResult {
    double track = 0.0, rigidity = 0.0, smoothness = 0.0;
};

double smoothness_impl(const MotionBases& bases, std::vector<double>* grad_rot,
                       std::vector<double>* grad_trans, double scale) {
    const int K = bases.num_bases, T = bases.num_frames;
    if (T < 2) return 0.0;
    const bool grad = grad_rot != nullptr;
    double value = 0.0;
    std::vector<Mat3> rot(T), rot_grad;
    std::vector<Vec4> qh(T);
    if (grad) rot_grad.resize(T);
    for (int k = 0; k < K; ++k) {
        for (int t = 0; t < T; ++t) {
            qh[t] = quat_normalized(bases.at(k, t).q);
            rot[t] = quat_to_mat(qh[t]);
            if (grad) rot_grad[t].setZero();
        }
        for (int t = 0; t + 1 < T; ++t) {
            Mat3 dr = rot[t + 1] - rot[t];
            Vec3 dt = bases.at(k, t + 1).t - bases.at(k, t).t;
            value += dr.squaredNorm() + dt.squaredNorm();
            if (grad) {
                rot_grad[t] -= 2.0 * dr;
                rot_grad[t + 1] += 2.0 * dr;
                const std::size_t b0 = (static_cast<std::size_t>(k) * T + t) * 3;
                for (int col = 0; col < 3; ++col) {
                    (*grad_trans)[b0 + col] -= scale * 2.0 * dt[col];
                    (*grad_trans)[b0 + 3 + col] += scale * 2.0 * dt[col];
                }
            }
        }
        if (grad) {
            for (int t = 0; t < T; ++t) {
                Vec4 gq = mat_to_quat_grad(rot_grad[t], qh[t]);
                double n = bases.at(k, t).q.norm();
                Vec4 graw = (gq - qh[t] * qh[t].dot(gq)) / n;
                const std::size_t b = (static_cast<std::size_t>(k) * T + t) * 4;
                for (int q = 0; q < 4; ++q) (*grad_rot)[b + q] += scale * graw[q];
            }
        }
    }
    return value;
}

EvalResult evaluate(const SceneModel& model, const EvalRequest& req) {
    EvalResult res;
    const bool want_track = req.bundle != nullptr;
    const bool want_rigid = req.graph != nullptr;
    const bool want_grad = req.grad != nullptr;
    const int T = model.frame_count;

    if (want_rigid && req.graph->edges.empty())
        throw std::runtime_error("rigidity: empty neighbor graph");
    if (want_rigid && req.refine_gate) {
        if (!req.zetas || static_cast<int>(req.zetas->size()) != T)
            throw std::invalid_argument("rigidity_refine: need invisibility scores per frame");
    }

    DeformCache cache;
    if (want_track || want_rigid) build_cache(model, req.workers, cache);

    // Splats with a supervising track.
    std::vector<std::pair<int, int>> supervised;  // (splat, track)
    long visible_count = 0;
    if (want_track) {
        const SequenceBundle& b = *req.bundle;
        if (b.num_frames != T) throw std::invalid_argument("track_loss: frame count mismatch");
        for (int i = 0; i < static_cast<int>(model.splats.size()); ++i) {
            int st = model.splats[i].source_track;
            if (st < 0) continue;
            if (st >= b.num_tracks)
                throw std::invalid_argument("track_loss: source track outside bundle");
            supervised.emplace_back(i, st);
        }
        for (int t = 0; t < T; ++t)
            for (const auto& [splat, track] : supervised)
                if (b.visible(t, track)) ++visible_count;
        if (visible_count == 0)
            throw std::runtime_error("track_loss: no visible observations");
    }
    const double inv_count = visible_count > 0 ? 1.0 / static_cast<double>(visible_count) : 0.0;

    std::vector<double> track_val(T, 0.0), rigid_val(T, 0.0);
    std::vector<double> gx;  // dL/dx per (row, frame)
    std::vector<std::vector<double>> frame_mu, frame_beta;
    const int n_splats = static_cast<int>(model.splats.size());
    const int K = model.num_bases();
    if (want_grad && (want_track || want_rigid)) {
        gx.assign(static_cast<std::size_t>(cache.rows) * T * 3, 0.0);
        frame_mu.assign(T, {});
        frame_beta.assign(T, {});
    }

    parallel_for(T, (want_track || want_rigid) ? req.workers : 1, [&](int t) {
        if (!(want_track || want_rigid)) return;
        if (want_grad) {
            frame_mu[t].assign(static_cast<std::size_t>(n_splats) * 3, 0.0);
            frame_beta[t].assign(static_cast<std::size_t>(cache.rows) * K, 0.0);
        }
        if (want_track) {
            const SequenceBundle& b = *req.bundle;
            for (const auto& [splat, track] : supervised) {
                if (!b.visible(t, track)) continue;
                const Splat& s = model.splats[splat];
                Vec3 x = s.is_foreground ? cache.position(s.coeff_row, t) : s.mu;
                Vec3 r = x - b.position(t, track);
                track_val[t] += std::abs(r.x()) + std::abs(r.y()) + std::abs(r.z());
                if (!want_grad) continue;
                Vec3 g = req.lambda_track * inv_count *
                         Vec3{sgn(r.x()), sgn(r.y()), sgn(r.z())};
                if (s.is_foreground) {
                    double* dst = &gx[(cache.idx(s.coeff_row, t)) * 3];
                    for (int c = 0; c < 3; ++c) dst[c] += g[c];
                } else {
                    double* dst = &frame_mu[t][static_cast<std::size_t>(splat) * 3];
                    for (int c = 0; c < 3; ++c) dst[c] += g[c];
                }
            }
        }
        if (want_rigid && (req.rigidity_frame_end < 0 || t < req.rigidity_frame_end)) {
            const KnnGraph& graph = *req.graph;
            for (std::size_t e = 0; e < graph.edges.size(); ++e) {
                const KnnGraph::Edge& edge = graph.edges[e];
                int ra = model.splats[edge.i].coeff_row;
                int rb = model.splats[edge.j].coeff_row;
                double gate = graph.similarity[e];
                if (req.refine_gate)
                    gate *= (*req.zetas)[t].zeta[ra] * (*req.zetas)[t].zeta[rb];
                if (gate == 0.0) continue;
                Vec3 d = cache.position(ra, t) - cache.position(rb, t);
                double len = d.norm();
                double dev = len - edge.rest_length;
                rigid_val[t] += gate * std::abs(dev);
                if (!want_grad || len < 1e-12) continue;
                Vec3 ge = (req.lambda_rigid * gate * sgn(dev) / len) * d;
                double* da = &gx[cache.idx(ra, t) * 3];
                double* db = &gx[cache.idx(rb, t) * 3];
                for (int c = 0; c < 3; ++c) {
                    da[c] += ge[c];
                    db[c] -= ge[c];
                }
            }
        }
    });

    // Backward through the blend chain, frames in parallel; basis cells are
    // frame-owned, splat-owned grads go to per-frame buffers reduced below.
    if (want_grad && (want_track || want_rigid)) {
        auto& rot = (*req.grad)[ParamGroup::BasisRot];
        auto& trn = (*req.grad)[ParamGroup::BasisTrans];
        parallel_for(T, req.workers, [&](int t) {
            const std::vector<Pose>& col = cache.columns[t];
            std::vector<double> gw(K);
            for (int r = 0; r < cache.rows; ++r) {
                const double* gp = &gx[cache.idx(r, t) * 3];
                if (gp[0] == 0.0 && gp[1] == 0.0 && gp[2] == 0.0) continue;
                Vec3 g{gp[0], gp[1], gp[2]};
                const std::size_t i = cache.idx(r, t);
                Vec4 qh{cache.qhat[i * 4], cache.qhat[i * 4 + 1], cache.qhat[i * 4 + 2],
                        cache.qhat[i * 4 + 3]};
                const double n = cache.norm[i];
                const Vec3& mu = model.splats[cache.fg_splat[r]].mu;
                const double* w = &cache.weights[static_cast<std::size_t>(r) * K];
                const Vec4& qref = col[cache.ref[r]].q;

                // mu path: R^T g
                Vec3 gmu = quat_rotate(quat_conjugate(qh), g);
                double* mu_dst = &frame_mu[t][static_cast<std::size_t>(cache.fg_splat[r]) * 3];
                for (int c = 0; c < 3; ++c) mu_dst[c] += gmu[c];

                // rotation path through normalization
                Mat34 jac = rotate_jacobian(qh, mu);
                Vec4 gq = jac.transpose() * g;
                Vec4 gu = (gq - qh * qh.dot(gq)) / n;

                for (int k = 0; k < K; ++k) {
                    double s = quat_dot(col[k].q, qref) >= 0.0 ? 1.0 : -1.0;
                    const std::size_t b = (static_cast<std::size_t>(k) * T + t);
                    double ws = w[k] * s;
                    for (int c = 0; c < 4; ++c) rot[b * 4 + c] += ws * gu[c];
                    for (int c = 0; c < 3; ++c) trn[b * 3 + c] += w[k] * g[c];
                    gw[k] = s * quat_dot(col[k].q, gu) + col[k].t.dot(g);
                }
                double mean = 0.0;
                for (int k = 0; k < K; ++k) mean += gw[k] * w[k];
                double* beta_dst = &frame_beta[t][static_cast<std::size_t>(r) * K];
                for (int k = 0; k < K; ++k) beta_dst[k] += w[k] * (gw[k] - mean);
            }
        });
        auto& mu_grad = (*req.grad)[ParamGroup::Mu];
        auto& beta_grad = (*req.grad)[ParamGroup::Coeffs];
        for (int t = 0; t < T; ++t) {
            for (std::size_t i = 0; i < frame_mu[t].size(); ++i) mu_grad[i] += frame_mu[t][i];
            for (std::size_t i = 0; i < frame_beta[t].size(); ++i)
                beta_grad[i] += frame_beta[t][i];
        }
    }

    for (int t = 0; t < T; ++t) {
        res.track += track_val[t];
        res.rigidity += rigid_val[t];
    }
    res.track *= inv_count;

    if (req.lambda_smooth != 0.0) {
        if (want_grad)
            res.smoothness = smoothness_impl(model.bases, &(*req.grad)[ParamGroup::BasisRot],
                                             &(*req.grad)[ParamGroup::BasisTrans],
                                             req.lambda_smooth);
        else
            res.smoothness = smoothness_impl(model.bases, nullptr, nullptr, 1.0);
    }
    return res;
}

}  // namespace

void LossWeights::validate() const {
    if (lambda_track < 0 || lambda_rigid < 0 || lambda_smooth < 0)
        throw std::invalid_argument("loss weights must be nonnegative");
    if (!(tau0 < tau1)) throw std::invalid_argument("tau0 must be < tau1");
    if (knn_k < 1) throw std::invalid_argument("knn_k must be >= 1");
    if (num_bases < 1) throw std::invalid_argument("num_bases must be >= 1");
}

double similarity(const Eigen::VectorXd& beta_i, const Eigen::VectorXd& beta_j) {
    Eigen::VectorXd wi, wj;
    softmax_into(beta_i, wi);
    softmax_into(beta_j, wj);
    double cosv = wi.dot(wj) / (wi.norm() * wj.norm());
    return std::min(cosv, 1.0);
}

void refresh_similarity(KnnGraph& graph, const SceneModel& model) {
    const int rows = model.foreground_count();
    const int K = model.num_bases();
    Eigen::MatrixXd w(rows, K);
    Eigen::VectorXd wr;
    Eigen::VectorXd norms(rows);
    for (int r = 0; r < rows; ++r) {
        softmax_into(model.coeffs.beta.row(r).transpose(), wr);
        w.row(r) = wr.transpose();
        norms[r] = wr.norm();
    }
    graph.similarity.resize(graph.edges.size());
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
        int ra = model.splats[graph.edges[e].i].coeff_row;
        int rb = model.splats[graph.edges[e].j].coeff_row;
        double cosv = w.row(ra).dot(w.row(rb)) / (norms[ra] * norms[rb]);
        graph.similarity[e] = std::min(cosv, 1.0);
    }
}

double track_loss(const SceneModel& model, const SequenceBundle& bundle, ParamVector* grad,
                  int workers) {
    EvalRequest req;
    req.bundle = &bundle;
    req.lambda_track = 1.0;
    req.grad = grad;
    req.workers = workers;
    return evaluate(model, req).track;
}

double rigidity_init(const SceneModel& model, const KnnGraph& graph, ParamVector* grad,
                     int workers) {
    EvalRequest req;
    req.graph = &graph;
    req.lambda_rigid = 1.0;
    req.grad = grad;
    req.workers = workers;
    return evaluate(model, req).rigidity;
}

double rigidity_refine(const SceneModel& model, const KnnGraph& graph,
                       const std::vector<InvisibilityScores>& zetas, ParamVector* grad,
                       int workers) {
    EvalRequest req;
    req.graph = &graph;
    req.lambda_rigid = 1.0;
    req.refine_gate = true;
    req.zetas = &zetas;
    req.grad = grad;
    req.workers = workers;
    return evaluate(model, req).rigidity;
}

double smoothness(const MotionBases& bases, ParamVector* grad) {
    if (!grad) return smoothness_impl(bases, nullptr, nullptr, 1.0);
    return smoothness_impl(bases, &(*grad)[ParamGroup::BasisRot],
                           &(*grad)[ParamGroup::BasisTrans], 1.0);
}

LossBreakdown total_loss(Stage stage, const SceneModel& model, const SequenceBundle& bundle,
                         const KnnGraph& graph, const LossWeights& weights,
                         const std::vector<InvisibilityScores>* zetas, ParamVector* grad,
                         int workers) {
    weights.validate();
    EvalRequest req;
    if (weights.lambda_track > 0.0) {
        req.bundle = &bundle;
        req.lambda_track = weights.lambda_track;
    }
    if (weights.lambda_rigid > 0.0) {
        req.graph = &graph;
        req.lambda_rigid = weights.lambda_rigid;
        req.rigidity_frame_end = weights.rigidity_frame_end;
        if (stage == Stage::Refine) {
            req.refine_gate = true;
            req.zetas = zetas;
        }
    }
    req.lambda_smooth = weights.lambda_smooth;
    req.grad = grad;
    req.workers = workers;
    EvalResult r = evaluate(model, req);

    LossBreakdown b;
    b.track = r.track;
    b.rigidity = r.rigidity;
    b.smoothness = r.smoothness;
    b.total = weights.lambda_track * b.track + weights.lambda_rigid * b.rigidity +
              weights.lambda_smooth * b.smoothness;
    return b;
}

}  // namespace restage
