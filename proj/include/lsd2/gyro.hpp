#pragma once

#include <cstdint>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "lsd2/error.hpp"
#include "lsd2/geometry.hpp"

namespace lsd2 {

// One gyroscope reading: timestamp plus body-frame angular velocity in rad/s.
struct GyroSample {
    double t = 0.0; // seconds
    Vec3 omega;
};

// Sanity bound on |omega|; handheld shake is well below this.
constexpr double kMaxAngularRate = 20.0;

class GyroTrack {
public:
    GyroTrack() = default;

    explicit GyroTrack(std::vector<GyroSample> samples) : samples_(std::move(samples)) {
        validate();
    }

    const std::vector<GyroSample>& samples() const { return samples_; }
    double start_time() const { return samples_.front().t; }
    double end_time() const { return samples_.back().t; }
    double duration() const { return end_time() - start_time(); }

    bool contains(double t_a, double t_b) const {
        return t_a >= start_time() && t_b <= end_time() && t_b >= t_a;
    }

    // Rotate every angular-velocity sample into the camera frame. Identity
    // by convention for synthetic tracks; real logs may need it.
    GyroTrack with_alignment(const Mat3& align) const {
        std::vector<GyroSample> out = samples_;
        for (GyroSample& s : out) s.omega = align * s.omega;
        return GyroTrack(std::move(out));
    }

    // Text log format: one `t_ns,omega_x,omega_y,omega_z` sample per line,
    // int64 nanoseconds and rad/s values, strictly increasing timestamps.
    // Lines starting with '#' are ignored.
    static GyroTrack parse(std::istream& in) {
        std::vector<GyroSample> samples;
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            size_t first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '#') continue;
            std::istringstream ls(line);
            int64_t t_ns = 0;
            double wx = 0, wy = 0, wz = 0;
            char c1 = 0, c2 = 0, c3 = 0;
            if (!(ls >> t_ns >> c1 >> wx >> c2 >> wy >> c3 >> wz) ||
                c1 != ',' || c2 != ',' || c3 != ',') {
                throw InvalidInputError("gyro log line " + std::to_string(line_no) +
                                        ": expected t_ns,omega_x,omega_y,omega_z");
            }
            samples.push_back({static_cast<double>(t_ns) * 1e-9, {wx, wy, wz}});
        }
        return GyroTrack(std::move(samples));
    }

private:
    std::vector<GyroSample> samples_;

    void validate() const {
        if (samples_.size() < 2) {
            throw InvalidInputError("GyroTrack: need at least 2 samples");
        }
        for (size_t i = 0; i < samples_.size(); ++i) {
            const Vec3& w = samples_[i].omega;
            if (!std::isfinite(w.x) || !std::isfinite(w.y) || !std::isfinite(w.z) ||
                w.norm() > kMaxAngularRate) {
                throw InvalidInputError("GyroTrack: sample " + std::to_string(i) +
                                        " has non-finite or implausible angular velocity");
            }
            if (i > 0 && !(samples_[i].t > samples_[i - 1].t)) {
                throw InvalidInputError("GyroTrack: timestamps must be strictly increasing");
            }
        }
    }
};

// Relative rotation from the pose at t_a to the pose at t_b, integrating the
// quaternion differential equation with piecewise-constant angular velocity
// (zero-order hold of the sample at each segment start). The per-segment
// update is the closed-form axis-angle exponential, renormalized every step.
inline Rotation integrate_rotation(const GyroTrack& track, double t_a, double t_b) {
    if (!track.contains(t_a, t_b)) {
        throw OutOfRangeError("integrate_rotation: interval outside track span");
    }
    const std::vector<GyroSample>& s = track.samples();
    Rotation q = Rotation::identity();
    for (size_t i = 0; i + 1 < s.size(); ++i) {
        const double seg_lo = s[i].t;
        const double seg_hi = s[i + 1].t;
        const double lo = std::max(seg_lo, t_a);
        const double hi = std::min(seg_hi, t_b);
        if (hi <= lo) continue;
        q = (q * Rotation::from_angular_velocity(s[i].omega, hi - lo)).normalized();
    }
    return q;
}

} // namespace lsd2
