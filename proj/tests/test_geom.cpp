#include <doctest.h>

#include <cmath>
#include <numbers>

#include "restage/geom.hpp"
#include "test_util.hpp"

using namespace restage;
using restage::testutil::apply_matrix_oracle;
using restage::testutil::pose_matrix_oracle;
using restage::testutil::random_pose;
using restage::testutil::random_vec3;

namespace {
constexpr double kPi = std::numbers::pi;

Pose rz(double angle, const Vec3& t = Vec3::Zero()) {
    Pose p = Pose::rotation(Vec3{0, 0, 1}, angle);
    p.t = t;
    return p;
}
}  // namespace

TEST_CASE("compose identity and inverse") {
    std::mt19937_64 rng(7);
    Pose p = random_pose(rng);
    Pose c = compose(Pose::identity(), p);
    CHECK((c.q - p.q).norm() < 1e-12);
    CHECK((c.t - p.t).norm() < 1e-12);

    Pose id = compose(p, inverse(p));
    CHECK(std::abs(std::abs(id.q[0]) - 1.0) < 1e-9);
    CHECK(id.q.tail<3>().norm() < 1e-9);
    CHECK(id.t.norm() < 1e-9);
}

TEST_CASE("compose matches homogeneous matrix oracle on Rz example") {
    Pose a = rz(kPi / 2, Vec3{1, 2, 3});
    Pose b = rz(kPi / 2, Vec3{-2, 0.5, 1});
    Pose c = compose(a, b);

    Mat4 oracle = pose_matrix_oracle(a) * pose_matrix_oracle(b);
    Mat4 got = c.matrix4();
    CHECK((got - oracle).cwiseAbs().maxCoeff() < 1e-12);

    // Rz(90)+t1 then Rz(90)+t2 is Rz(180) with translation Rz(90)*t2 + t1.
    Pose expected_rot = rz(kPi);
    CHECK(std::abs(std::abs(c.q.dot(expected_rot.q)) - 1.0) < 1e-12);
    Vec3 expected_t = quat_rotate(a.q, b.t) + a.t;
    CHECK((c.t - expected_t).norm() < 1e-12);
}

TEST_CASE("inverse of pure translation negates it") {
    Pose p = Pose::translation(Vec3{3, -1, 2});
    Pose inv = inverse(p);
    CHECK((inv.t + p.t).norm() < 1e-15);
    CHECK(std::abs(inv.q[0] - 1.0) < 1e-15);
}

TEST_CASE("inverse round-trips 100 random points") {
    std::mt19937_64 rng(11);
    Pose p = random_pose(rng);
    for (int i = 0; i < 100; ++i) {
        Vec3 x = random_vec3(rng, 5.0);
        CHECK((apply(inverse(p), apply(p, x)) - x).norm() < 1e-9);
    }
}

TEST_CASE("apply basics") {
    Vec3 x{0.3, -0.7, 1.1};
    CHECK((apply(Pose::identity(), x) - x).norm() == 0.0);
    CHECK((apply(Pose::translation(Vec3{1, 0, 0}), Vec3::Zero()) - Vec3{1, 0, 0}).norm() == 0.0);
    Vec3 y = apply(rz(kPi / 2), Vec3{1, 0, 0});
    CHECK((y - Vec3{0, 1, 0}).norm() < 1e-12);
}

TEST_CASE("compose/inverse/apply agree with matrix oracle on 1000 random poses") {
    std::mt19937_64 rng(23);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        Pose a = random_pose(rng);
        Pose b = random_pose(rng);
        Vec3 x = random_vec3(rng, 3.0);

        Mat4 ma = pose_matrix_oracle(a), mb = pose_matrix_oracle(b);
        worst = std::max(worst,
                         (apply(compose(a, b), x) - apply_matrix_oracle(ma * mb, x)).norm());
        worst = std::max(worst,
                         (apply(inverse(a), x) - apply_matrix_oracle(ma.inverse(), x)).norm());
        worst = std::max(worst, (apply(a, x) - apply_matrix_oracle(ma, x)).norm());
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("blend one-hot returns that pose exactly up to sign") {
    std::mt19937_64 rng(3);
    std::vector<Pose> poses;
    for (int k = 0; k < 4; ++k) poses.push_back(random_pose(rng));
    for (int k = 0; k < 4; ++k) {
        BlendWeights w;
        w.w = Eigen::VectorXd::Zero(4);
        w.w[k] = 1.0;
        Pose b = blend(w, poses);
        CHECK(std::abs(std::abs(b.q.dot(poses[k].q)) - 1.0) < 1e-12);
        CHECK((b.t - poses[k].t).norm() == 0.0);
    }
}

TEST_CASE("blend of identical poses is that pose") {
    std::mt19937_64 rng(5);
    Pose p = random_pose(rng);
    std::vector<Pose> poses(3, p);
    BlendWeights w;
    w.w = Eigen::Vector3d{0.2, 0.5, 0.3};
    Pose b = blend(w, poses);
    CHECK(std::abs(std::abs(b.q.dot(p.q)) - 1.0) < 1e-9);
    CHECK((b.t - p.t).norm() < 1e-9);
}

TEST_CASE("blend of two pure translations averages them") {
    std::vector<Pose> poses{Pose::translation(Vec3{1, 0, 0}), Pose::translation(Vec3{0, 1, 0})};
    BlendWeights w;
    w.w = Eigen::Vector2d{0.5, 0.5};
    Pose b = blend(w, poses);
    CHECK(std::abs(b.q[0] - 1.0) < 1e-12);
    CHECK((b.t - Vec3{0.5, 0.5, 0}).norm() < 1e-15);
}

TEST_CASE("blend translation is linear (superposition)") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        int k_count = 3;
        Eigen::VectorXd raw(k_count);
        for (int k = 0; k < k_count; ++k) raw[k] = u(rng);
        raw /= raw.sum();
        BlendWeights w;
        w.w = raw;

        std::vector<Pose> pa, pb, psum;
        for (int k = 0; k < k_count; ++k) {
            Pose base = random_pose(rng);
            Pose a = base, b = base, s = base;
            a.t = random_vec3(rng);
            b.t = random_vec3(rng);
            s.t = a.t + b.t;
            pa.push_back(a);
            pb.push_back(b);
            psum.push_back(s);
        }
        Vec3 lhs = blend(w, psum).t;
        Vec3 rhs = blend(w, pa).t + blend(w, pb).t;
        CHECK((lhs - rhs).norm() < 1e-9);
    }
}

TEST_CASE("blend rejects antipodal cancellation") {
    std::vector<Pose> poses{Pose::identity(), Pose::identity()};
    poses[1].q = Vec4{-1, 0, 0, 0};
    // Equal weights: the sign alignment flips the second back, no throw.
    BlendWeights w;
    w.w = Eigen::Vector2d{0.5, 0.5};
    CHECK_NOTHROW(blend(w, poses));

    // Orthogonal quaternions with opposing aligned halves cancel.
    poses[0].q = Vec4{std::sqrt(0.5), std::sqrt(0.5), 0, 0};
    poses[1].q = Vec4{std::sqrt(0.5), -std::sqrt(0.5), 0, 0};
    BlendWeights w2;
    w2.w = Eigen::Vector2d{0.5, 0.5};
    Pose ok = blend(w2, poses);  // sum is (1,0,0,0) scaled, fine
    CHECK(ok.q.allFinite());

    // Sign alignment keeps the aligned sum's dot with the reference
    // positive for unit quaternions, so the degenerate branch can only
    // fire on corrupted (near-zero) quaternion storage.
    poses[0].q = Vec4{1e-9, 0, 0, 0};
    poses[1].q = Vec4{1e-9, 0, 0, 0};
    BlendWeights w3;
    w3.w = Eigen::Vector2d{0.5, 0.5};
    CHECK_THROWS_AS(blend(w3, poses), std::runtime_error);
}

TEST_CASE("smoothstep branches and midpoint") {
    CHECK(smoothstep(0.01 - 1e-9, 0.01, 0.05) == 0.0);
    // Dyadic knots make the midpoint representable: 3/8 - 2/16 = 1/2.
    CHECK(smoothstep(0.5, 0.25, 0.75) == 0.5);
    CHECK(smoothstep(0.03, 0.01, 0.05) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(smoothstep(0.05, 0.01, 0.05) == 1.0);
    CHECK(smoothstep(0.2, 0.01, 0.05) == 1.0);
    CHECK_THROWS_AS(smoothstep(0.0, 0.05, 0.01), std::invalid_argument);
    CHECK_THROWS_AS(smoothstep(0.0, 0.05, 0.05), std::invalid_argument);
}

TEST_CASE("smoothstep is C1 at both knots") {
    // Unit-scale ramp: the one-sided FD error is O(h * 6 / (tau1-tau0)^2).
    const double tau0 = 0.3, tau1 = 1.3, h = 1e-6;
    auto deriv = [&](double at, double dir) {
        return (smoothstep(at + dir * h, tau0, tau1) - smoothstep(at, tau0, tau1)) / (dir * h);
    };
    CHECK(std::abs(deriv(tau0, +1.0) - deriv(tau0, -1.0)) < 1e-4);
    CHECK(std::abs(deriv(tau1, +1.0) - deriv(tau1, -1.0)) < 1e-4);
}

TEST_CASE("smoothstep is monotone nondecreasing") {
    double prev = -1.0;
    for (int i = 0; i <= 200; ++i) {
        double d = -0.02 + i * 0.0005;
        double v = smoothstep(d, 0.01, 0.05);
        CHECK(v >= prev);
        prev = v;
    }
}
