#include "restage/geom.hpp"

#include <Eigen/Geometry>

#include <cmath>

namespace restage {

Vec4 quat_normalized(const Vec4& q) {
    double n = q.norm();
    if (n < 1e-12) throw std::runtime_error("quaternion norm underflow");
    return q / n;
}

Vec4 quat_mul(const Vec4& a, const Vec4& b) {
    return Vec4{
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]};
}

Vec4 quat_conjugate(const Vec4& q) { return Vec4{q[0], -q[1], -q[2], -q[3]}; }

Vec4 quat_from_axis_angle(const Vec3& axis, double angle) {
    double n = axis.norm();
    if (n < 1e-12) throw std::invalid_argument("rotation axis must be nonzero");
    Vec3 a = axis / n;
    double h = 0.5 * angle;
    double s = std::sin(h);
    return Vec4{std::cos(h), s * a.x(), s * a.y(), s * a.z()};
}

Vec3 quat_rotate(const Vec4& q, const Vec3& v) {
    const double w = q[0];
    const Vec3 u{q[1], q[2], q[3]};
    return (w * w - u.squaredNorm()) * v + 2.0 * u.dot(v) * u + 2.0 * w * u.cross(v);
}

Mat3 quat_to_mat(const Vec4& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 m;
    m << w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z;
    return m;
}

Mat34 rotate_jacobian(const Vec4& q, const Vec3& v) {
    const double w = q[0];
    const Vec3 u{q[1], q[2], q[3]};
    Mat34 j;
    j.col(0) = 2.0 * (w * v + u.cross(v));
    Mat3 skew_v;
    skew_v << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    Mat3 du = 2.0 * (-v * u.transpose() + u * v.transpose() +
                     u.dot(v) * Mat3::Identity() - w * skew_v);
    j.block<3, 3>(0, 1) = du;
    return j;
}

Vec4 mat_to_quat_grad(const Mat3& g, const Vec4& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 dw, dx, dy, dz;
    dw << 2 * w, -2 * z, 2 * y, 2 * z, 2 * w, -2 * x, -2 * y, 2 * x, 2 * w;
    dx << 2 * x, 2 * y, 2 * z, 2 * y, -2 * x, -2 * w, 2 * z, 2 * w, -2 * x;
    dy << -2 * y, 2 * x, 2 * w, 2 * x, 2 * y, 2 * z, -2 * w, 2 * z, -2 * y;
    dz << -2 * z, -2 * w, 2 * x, 2 * w, -2 * z, 2 * y, 2 * x, 2 * y, 2 * z;
    return Vec4{g.cwiseProduct(dw).sum(), g.cwiseProduct(dx).sum(),
                g.cwiseProduct(dy).sum(), g.cwiseProduct(dz).sum()};
}

Mat34 Pose::matrix34() const {
    Mat34 m;
    m.block<3, 3>(0, 0) = quat_to_mat(quat_normalized(q));
    m.col(3) = t;
    return m;
}

Mat4 Pose::matrix4() const {
    Mat4 m = Mat4::Identity();
    m.block<3, 4>(0, 0) = matrix34();
    return m;
}

Pose compose(const Pose& a, const Pose& b) {
    return Pose{quat_normalized(quat_mul(a.q, b.q)), quat_rotate(a.q, b.t) + a.t};
}

Pose inverse(const Pose& p) {
    Vec4 qi = quat_conjugate(p.q);
    return Pose{qi, -quat_rotate(qi, p.t)};
}

Vec3 apply(const Pose& p, const Vec3& x) { return quat_rotate(p.q, x) + p.t; }

bool BlendWeights::valid(double tol) const {
    if (w.size() == 0) return false;
    if ((w.array() < 0.0).any()) return false;
    return std::abs(w.sum() - 1.0) <= tol;
}

BlendDetail blend_detail(std::span<const double> w, std::span<const Pose> poses) {
    const int k_count = static_cast<int>(w.size());
    if (k_count == 0 || poses.size() != w.size())
        throw std::invalid_argument("blend: weight/pose count mismatch");

    int ref = 0;
    for (int k = 1; k < k_count; ++k)
        if (w[k] > w[ref]) ref = k;

    const Vec4& qr = poses[ref].q;
    Vec4 u = Vec4::Zero();
    Vec3 t = Vec3::Zero();
    for (int k = 0; k < k_count; ++k) {
        double s = quat_dot(poses[k].q, qr) >= 0.0 ? 1.0 : -1.0;
        u += (w[k] * s) * poses[k].q;
        t += w[k] * poses[k].t;
    }
    double n = u.norm();
    if (n < 1e-8)
        throw std::runtime_error("degenerate pose blend: antipodal quaternion cancellation");
    return BlendDetail{u, n, ref, Pose{u / n, t}};
}

Pose blend(const BlendWeights& w, std::span<const Pose> poses) {
    if (!w.valid()) throw std::invalid_argument("blend: weights must be convex");
    return blend_detail(std::span<const double>(w.w.data(), w.w.size()), poses).pose;
}

double smoothstep(double delta, double tau0, double tau1) {
    if (!(tau0 < tau1)) throw std::invalid_argument("smoothstep: tau0 must be < tau1");
    if (delta < tau0) return 0.0;
    if (delta >= tau1) return 1.0;
    double u = (delta - tau0) / (tau1 - tau0);
    return u * u * (3.0 - 2.0 * u);
}

}  // namespace restage
