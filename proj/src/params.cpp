#include "restage/params.hpp"

#include <cmath>

namespace restage {

const char* param_group_name(ParamGroup g) {
    switch (g) {
        case ParamGroup::BasisRot: return "basis_rot";
        case ParamGroup::BasisTrans: return "basis_trans";
        case ParamGroup::Coeffs: return "coeffs";
        case ParamGroup::Mu: return "mu";
        case ParamGroup::Opacity: return "opacity";
    }
    return "unknown";
}

void ParamVector::setZero() {
    for (auto& g : groups) std::fill(g.begin(), g.end(), 0.0);
}

void ParamVector::resize_like(const ParamVector& other) {
    for (int g = 0; g < kNumParamGroups; ++g) groups[g].resize(other.groups[g].size());
}

std::size_t ParamVector::total_size() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.size();
    return n;
}

bool ParamVector::allFinite() const {
    for (const auto& g : groups)
        for (double v : g)
            if (!std::isfinite(v)) return false;
    return true;
}

ParamVector pack_params(const SceneModel& model) {
    ParamVector p;
    const int K = model.bases.num_bases, T = model.bases.num_frames;
    const int N = static_cast<int>(model.splats.size());
    const int Nf = model.foreground_count();

    auto& rot = p[ParamGroup::BasisRot];
    auto& trn = p[ParamGroup::BasisTrans];
    rot.resize(static_cast<std::size_t>(K) * T * 4);
    trn.resize(static_cast<std::size_t>(K) * T * 3);
    for (int k = 0; k < K; ++k)
        for (int t = 0; t < T; ++t) {
            const Pose& pose = model.bases.at(k, t);
            std::size_t b = (static_cast<std::size_t>(k) * T + t);
            for (int c = 0; c < 4; ++c) rot[b * 4 + c] = pose.q[c];
            for (int c = 0; c < 3; ++c) trn[b * 3 + c] = pose.t[c];
        }

    auto& co = p[ParamGroup::Coeffs];
    co.resize(static_cast<std::size_t>(Nf) * K);
    for (int r = 0; r < Nf; ++r)
        for (int k = 0; k < K; ++k) co[static_cast<std::size_t>(r) * K + k] = model.coeffs.beta(r, k);

    auto& mu = p[ParamGroup::Mu];
    auto& op = p[ParamGroup::Opacity];
    mu.resize(static_cast<std::size_t>(N) * 3);
    op.resize(N);
    for (int i = 0; i < N; ++i) {
        for (int c = 0; c < 3; ++c) mu[static_cast<std::size_t>(i) * 3 + c] = model.splats[i].mu[c];
        op[i] = model.splats[i].opacity;
    }
    return p;
}

void unpack_params(const ParamVector& p, SceneModel& model) {
    const int K = model.bases.num_bases, T = model.bases.num_frames;
    const int N = static_cast<int>(model.splats.size());
    const int Nf = model.foreground_count();

    const auto& rot = p[ParamGroup::BasisRot];
    const auto& trn = p[ParamGroup::BasisTrans];
    for (int k = 0; k < K; ++k)
        for (int t = 0; t < T; ++t) {
            Pose& pose = model.bases.at(k, t);
            std::size_t b = (static_cast<std::size_t>(k) * T + t);
            for (int c = 0; c < 4; ++c) pose.q[c] = rot[b * 4 + c];
            for (int c = 0; c < 3; ++c) pose.t[c] = trn[b * 3 + c];
        }

    const auto& co = p[ParamGroup::Coeffs];
    for (int r = 0; r < Nf; ++r)
        for (int k = 0; k < K; ++k) model.coeffs.beta(r, k) = co[static_cast<std::size_t>(r) * K + k];

    const auto& mu = p[ParamGroup::Mu];
    const auto& op = p[ParamGroup::Opacity];
    for (int i = 0; i < N; ++i) {
        for (int c = 0; c < 3; ++c) model.splats[i].mu[c] = mu[static_cast<std::size_t>(i) * 3 + c];
        model.splats[i].opacity = op[i];
    }
}

ParamVector zero_gradients(const SceneModel& model) {
    ParamVector g = pack_params(model);
    g.setZero();
    return g;
}

}  // namespace restage
