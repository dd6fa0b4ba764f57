#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mars
{

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

constexpr double kGravity = 9.81;
constexpr double kPi = std::numbers::pi;

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument did not hold.
class InvalidArgument : public Error
{
public:
    using Error::Error;
};

/// An optimization problem has no feasible point.
class Infeasible : public Error
{
public:
    using Error::Error;
};

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Wraps into [-pi, pi).
inline double wrapAngle(double a)
{
    double w = std::fmod(a + kPi, 2.0 * kPi);
    if (w < 0.0)
        w += 2.0 * kPi;
    return w - kPi;
}

// Wraps into [-period/2, period/2).
inline double wrapPeriod(double a, double period)
{
    double w = std::fmod(a + 0.5 * period, period);
    if (w < 0.0)
        w += period;
    return w - 0.5 * period;
}

inline Mat3 rotZ(double yaw)
{
    return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
}

} // namespace mars
