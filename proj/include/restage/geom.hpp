#pragma once

#include <Eigen/Core>
#include <span>
#include <stdexcept>

namespace restage {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

// Quaternions are stored w-x-y-z throughout.
inline double quat_dot(const Vec4& a, const Vec4& b) { return a.dot(b); }

Vec4 quat_normalized(const Vec4& q);
Vec4 quat_mul(const Vec4& a, const Vec4& b);
Vec4 quat_conjugate(const Vec4& q);
Vec4 quat_from_axis_angle(const Vec3& axis, double angle);

// Rotate v by unit quaternion q: (w^2 - u.u) v + 2 (u.v) u + 2 w (u x v).
Vec3 quat_rotate(const Vec4& q, const Vec3& v);
Mat3 quat_to_mat(const Vec4& q);

// d(R(q) v)/dq for the homogeneous rotation formula, evaluated at unit q.
Mat34 rotate_jacobian(const Vec4& q, const Vec3& v);
// Accumulate dL/dq from dL/dR (both for the homogeneous matrix form).
Vec4 mat_to_quat_grad(const Mat3& dL_dR, const Vec4& q);

// Rigid SE(3) transform: x -> R(q) x + t.
struct Pose {
    Vec4 q{1.0, 0.0, 0.0, 0.0};
    Vec3 t{0.0, 0.0, 0.0};

    static Pose identity() { return {}; }
    static Pose translation(const Vec3& t) { return {Vec4{1, 0, 0, 0}, t}; }
    static Pose rotation(const Vec3& axis, double angle) {
        return {quat_from_axis_angle(axis, angle), Vec3::Zero()};
    }

    Mat34 matrix34() const;
    Mat4 matrix4() const;
};

// Applies b then a.
Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);
Vec3 apply(const Pose& p, const Vec3& x);

// Convex weights over K motion bases.
struct BlendWeights {
    Eigen::VectorXd w;

    int size() const { return static_cast<int>(w.size()); }
    bool valid(double tol = 1e-9) const;
};

// Intermediates of a pose blend, reused by the analytic gradients.
struct BlendDetail {
    Vec4 u;        // sign-aligned weighted quaternion sum, pre-normalization
    double norm;   // |u|
    int ref;       // index of the largest-weight basis (lowest index on ties)
    Pose pose;
};

BlendDetail blend_detail(std::span<const double> w, std::span<const Pose> poses);

// Weighted pose blend: translation is the weighted mean, rotation the
// normalized sign-aligned weighted quaternion sum.
Pose blend(const BlendWeights& w, std::span<const Pose> poses);

// 0 below tau0, 1 above tau1, cubic Hermite ramp between.
double smoothstep(double delta, double tau0, double tau1);

}  // namespace restage
