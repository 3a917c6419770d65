#pragma once

#include <Eigen/Geometry>

#include <random>

#include "restage/geom.hpp"

namespace restage::testutil {

// Independent 4x4 homogeneous-matrix oracle built through Eigen's own
// quaternion-to-matrix path.
inline Mat4 pose_matrix_oracle(const Pose& p) {
    Eigen::Quaterniond q(p.q[0], p.q[1], p.q[2], p.q[3]);
    q.normalize();
    Mat4 m = Mat4::Identity();
    m.block<3, 3>(0, 0) = q.toRotationMatrix();
    m.block<3, 1>(0, 3) = p.t;
    return m;
}

inline Vec3 apply_matrix_oracle(const Mat4& m, const Vec3& x) {
    Eigen::Vector4d h(x.x(), x.y(), x.z(), 1.0);
    Eigen::Vector4d y = m * h;
    return y.head<3>();
}

inline Pose random_pose(std::mt19937_64& rng, double trans_scale = 2.0) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vec4 q{u(rng), u(rng), u(rng), u(rng)};
    while (q.norm() < 1e-3) q = Vec4{u(rng), u(rng), u(rng), u(rng)};
    return Pose{quat_normalized(q), Vec3{u(rng), u(rng), u(rng)} * trans_scale};
}

inline Vec3 random_vec3(std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    return Vec3{u(rng), u(rng), u(rng)} * scale;
}

}  // namespace restage::testutil

#include "restage/scene.hpp"

namespace restage::testutil {

// Independent deform oracle: local softmax, aligned quaternion sum, and the
// Eigen matrix path for the final transform.
inline Vec3 oracle_deform(const SceneModel& m, int splat, int t) {
    const Splat& s = m.splats[splat];
    if (!s.is_foreground) return s.mu;
    const int K = m.num_bases();
    Eigen::VectorXd beta = m.coeffs.beta.row(s.coeff_row).transpose();
    Eigen::VectorXd w(K);
    double mx = beta.maxCoeff();
    for (int k = 0; k < K; ++k) w[k] = std::exp(beta[k] - mx);
    w /= w.sum();
    int ref = 0;
    for (int k = 1; k < K; ++k)
        if (w[k] > w[ref]) ref = k;
    Vec4 u = Vec4::Zero();
    Vec3 tr = Vec3::Zero();
    for (int k = 0; k < K; ++k) {
        const Pose& p = m.bases.at(k, t);
        double sgn = p.q.dot(m.bases.at(ref, t).q) >= 0.0 ? 1.0 : -1.0;
        u += w[k] * sgn * p.q;
        tr += w[k] * p.t;
    }
    Pose blended{u / u.norm(), tr};
    return apply_matrix_oracle(pose_matrix_oracle(blended), s.mu);
}

}  // namespace restage::testutil
