#pragma once

#include <array>
#include <cmath>

#include "lsd2/error.hpp"

namespace lsd2 {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

// Row-major 3x3 matrix, double precision. Used for rotations, intrinsics and
// homographies; nothing here is performance-critical enough to vectorize.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return Mat3{}; }

    double operator()(int r, int c) const { return m[r * 3 + c]; }
    double& operator()(int r, int c) { return m[r * 3 + c]; }

    Mat3 operator*(const Mat3& o) const {
        Mat3 out;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += (*this)(r, k) * o(k, c);
                out(r, c) = s;
            }
        }
        return out;
    }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3 transposed() const {
        Mat3 out;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) out(r, c) = (*this)(c, r);
        return out;
    }
};

// Unit quaternion camera attitude. Renormalized after every integration step
// so |q| stays within 1e-6 of 1 over arbitrarily long tracks.
struct Rotation {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    static Rotation identity() { return Rotation{}; }

    // Rotation by angle |omega|*dt about axis omega. Closed form, exact for
    // constant angular velocity over the step.
    static Rotation from_angular_velocity(const Vec3& omega, double dt) {
        const double n = omega.norm();
        const double angle = n * dt;
        if (std::abs(angle) < 1e-300) return identity();
        const double half = 0.5 * angle;
        const double s = std::sin(half) / n;
        return Rotation{std::cos(half), omega.x * s, omega.y * s, omega.z * s};
    }

    Rotation operator*(const Rotation& o) const {
        return Rotation{w * o.w - x * o.x - y * o.y - z * o.z,
                        w * o.x + x * o.w + y * o.z - z * o.y,
                        w * o.y - x * o.z + y * o.w + z * o.x,
                        w * o.z + x * o.y - y * o.x + z * o.w};
    }

    Rotation conjugate() const { return Rotation{w, -x, -y, -z}; }

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

    Rotation normalized() const {
        const double n = norm();
        return Rotation{w / n, x / n, y / n, z / n};
    }

    Mat3 to_matrix() const {
        Mat3 r;
        const double xx = x * x, yy = y * y, zz = z * z;
        const double xy = x * y, xz = x * z, yz = y * z;
        const double wx = w * x, wy = w * y, wz = w * z;
        r(0, 0) = 1 - 2 * (yy + zz);
        r(0, 1) = 2 * (xy - wz);
        r(0, 2) = 2 * (xz + wy);
        r(1, 0) = 2 * (xy + wz);
        r(1, 1) = 1 - 2 * (xx + zz);
        r(1, 2) = 2 * (yz - wx);
        r(2, 0) = 2 * (xz - wy);
        r(2, 1) = 2 * (yz + wx);
        r(2, 2) = 1 - 2 * (xx + yy);
        return r;
    }

    // Geodesic distance to another rotation, in radians.
    double angle_to(const Rotation& o) const {
        const Rotation d = conjugate() * o;
        const double c = std::min(1.0, std::abs(d.w));
        return 2.0 * std::acos(c);
    }
};

// Pinhole intrinsics in pixels.
struct Intrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;

    void validate() const {
        if (!(fx > 0.0) || !(fy > 0.0)) {
            throw InvalidParameterError("Intrinsics: fx and fy must be > 0");
        }
    }

    Mat3 matrix() const {
        Mat3 k;
        k(0, 0) = fx; k(0, 1) = 0;  k(0, 2) = cx;
        k(1, 0) = 0;  k(1, 1) = fy; k(1, 2) = cy;
        k(2, 0) = 0;  k(2, 1) = 0;  k(2, 2) = 1;
        return k;
    }

    Mat3 inverse_matrix() const {
        Mat3 k;
        k(0, 0) = 1.0 / fx; k(0, 1) = 0;        k(0, 2) = -cx / fx;
        k(1, 0) = 0;        k(1, 1) = 1.0 / fy; k(1, 2) = -cy / fy;
        k(2, 0) = 0;        k(2, 1) = 0;        k(2, 2) = 1;
        return k;
    }
};

// Rolling-shutter homography anchored at the row's exposure start:
// H = K R(t) R^T(t_1) K^-1, normalized so the bottom-right entry is 1.
// With r_t1 = identity this is the plain rotation homography K R K^-1.
inline Mat3 homography_at(const Intrinsics& k, const Rotation& r_t, const Rotation& r_t1) {
    k.validate();
    const Mat3 h = k.matrix() * r_t.to_matrix() * r_t1.to_matrix().transposed() * k.inverse_matrix();
    Mat3 out = h;
    const double s = h(2, 2);
    for (double& v : out.m) v /= s;
    return out;
}

// Apply a homography to pixel coordinates.
inline Vec2 project(const Mat3& h, const Vec2& p) {
    const Vec3 q = h * Vec3{p.x, p.y, 1.0};
    return {q.x / q.z, q.y / q.z};
}

} // namespace lsd2
