#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <stdexcept>

namespace pipeunroll {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Equidistant circular fisheye: image radius proportional to incidence angle.
struct FisheyeIntrinsics {
    double fov_deg = 185.0;          // full field of view
    double circle_diameter_px = 1000.0;  // diameter of the exposed image circle
    Vec2 center_px{512.0, 512.0};    // center of the image circle
    Vec2 image_size_px{1024.0, 1024.0};

    double fov_rad() const;
    double circle_radius_px() const { return circle_diameter_px / 2.0; }
    void validate() const;
};

// Camera-to-world transform. A camera-frame direction d maps to the world
// ray t + lambda * R * d.
struct CameraPose {
    Vec3 t = Vec3::Zero();
    Mat3 R = Mat3::Identity();

    void validate(double tol = 1e-9) const;
};

// Ideal cylinder around the world z-axis.
struct PipeModel {
    double radius_m = 0.125;
    double length_m = 2.0;

    void validate() const;
};

struct Ray {
    Vec3 origin;
    Vec3 dir;  // need not be normalized
};

struct CylinderHit {
    double lambda = 0.0;
    Vec3 point = Vec3::Zero();
};

// Incidence angle for an image radius d (pixels from the circle center).
// Throws std::domain_error outside [0, D/2].
double angle_from_radius(double d_px, const FisheyeIntrinsics &intr);

// Inverse of angle_from_radius.
double radius_from_angle(double alpha_rad, const FisheyeIntrinsics &intr);

// Camera-frame line-of-sight direction [u, v, d / tan(alpha)] for a pixel.
// The scale of the result is arbitrary; only the direction is meaningful.
// Throws std::domain_error for the exact circle center (d = 0).
Vec3 ray_direction(const Vec2 &feature_px, const FisheyeIntrinsics &intr);

// Project a world point into the fisheye image. Throws std::domain_error when
// the point lies outside the field of view.
Vec2 project(const Vec3 &point_world, const CameraPose &pose, const FisheyeIntrinsics &intr);

// Smallest lambda >= 0 where the ray meets x^2 + y^2 = r^2. Requires the ray
// origin strictly inside the cylinder; throws std::runtime_error when the ray
// is parallel to the axis.
CylinderHit intersect_cylinder(const Ray &ray, const PipeModel &pipe);

Mat3 rotation_x(double angle_rad);
Mat3 rotation_y(double angle_rad);
Mat3 rotation_z(double angle_rad);

// Rotation angle of world-z alignment: atan2(R(1,0), R(0,0)).
double yaw_about_z(const Mat3 &R);

// Nearest orthonormal matrix (polar factor).
Mat3 orthonormalize(const Mat3 &R);

constexpr double deg_to_rad(double deg) { return deg * 3.14159265358979323846 / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / 3.14159265358979323846; }

}  // namespace pipeunroll
