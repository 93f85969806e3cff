#include "pipeunroll/geometry.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <string>

namespace pipeunroll {

double FisheyeIntrinsics::fov_rad() const { return deg_to_rad(fov_deg); }

void FisheyeIntrinsics::validate() const {
    if (!(fov_deg > 0.0 && fov_deg < 360.0))
        throw std::invalid_argument("intrinsics: fov_deg must lie in (0, 360)");
    if (!(circle_diameter_px > 0.0))
        throw std::invalid_argument("intrinsics: circle_diameter_px must be positive");
    if (!(center_px.x() >= 0.0 && center_px.x() < image_size_px.x() && center_px.y() >= 0.0 &&
          center_px.y() < image_size_px.y()))
        throw std::invalid_argument("intrinsics: center_px outside image bounds");
}

void CameraPose::validate(double tol) const {
    if (((R.transpose() * R) - Mat3::Identity()).cwiseAbs().maxCoeff() > tol)
        throw std::invalid_argument("pose: R is not orthonormal");
    if (std::abs(R.determinant() - 1.0) > tol)
        throw std::invalid_argument("pose: det(R) != 1");
}

void PipeModel::validate() const {
    if (!(radius_m > 0.0)) throw std::invalid_argument("pipe: radius_m must be positive");
    if (!(length_m > 0.0)) throw std::invalid_argument("pipe: length_m must be positive");
}

double angle_from_radius(double d_px, const FisheyeIntrinsics &intr) {
    if (d_px < 0.0 || d_px > intr.circle_radius_px())
        throw std::domain_error("angle_from_radius: radius " + std::to_string(d_px) +
                                " outside the image circle");
    return d_px * intr.fov_rad() / intr.circle_diameter_px;
}

double radius_from_angle(double alpha_rad, const FisheyeIntrinsics &intr) {
    return alpha_rad * intr.circle_diameter_px / intr.fov_rad();
}

Vec3 ray_direction(const Vec2 &feature_px, const FisheyeIntrinsics &intr) {
    const Vec2 offset = feature_px - intr.center_px;
    const double d = offset.norm();
    if (d <= 0.0) throw std::domain_error("ray_direction: degenerate direction at the optical center");
    const double alpha = angle_from_radius(d, intr);
    return Vec3(offset.x(), offset.y(), d / std::tan(alpha));
}

Vec2 project(const Vec3 &point_world, const CameraPose &pose, const FisheyeIntrinsics &intr) {
    const Vec3 pc = pose.R.transpose() * (point_world - pose.t);
    const double rho = std::hypot(pc.x(), pc.y());
    const double alpha = std::atan2(rho, pc.z());
    if (alpha > intr.fov_rad() / 2.0)
        throw std::domain_error("project: point outside the field of view");
    const double d = radius_from_angle(alpha, intr);
    if (rho <= 0.0) return intr.center_px;
    return intr.center_px + d * Vec2(pc.x() / rho, pc.y() / rho);
}

CylinderHit intersect_cylinder(const Ray &ray, const PipeModel &pipe) {
    const double ox = ray.origin.x(), oy = ray.origin.y();
    const double dx = ray.dir.x(), dy = ray.dir.y();
    if (ray.dir.squaredNorm() == 0.0) throw std::invalid_argument("intersect_cylinder: zero direction");
    const double r2 = pipe.radius_m * pipe.radius_m;
    if (ox * ox + oy * oy >= r2)
        throw std::invalid_argument("intersect_cylinder: ray origin not inside the cylinder");

    const double a = dx * dx + dy * dy;
    if (a == 0.0)
        throw std::runtime_error("intersect_cylinder: ray parallel to the cylinder axis");
    const double b = 2.0 * (ox * dx + oy * dy);
    const double c = ox * ox + oy * oy - r2;

    // c < 0 here, so the roots have opposite signs; take the positive one.
    const double disc = b * b - 4.0 * a * c;
    const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    const double root1 = q / a;
    const double root2 = (q != 0.0) ? c / q : 0.0;
    const double lambda = std::max(root1, root2);

    CylinderHit hit;
    hit.lambda = lambda;
    hit.point = ray.origin + lambda * ray.dir;
    return hit;
}

Mat3 rotation_x(double a) {
    Mat3 m;
    m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
    return m;
}

Mat3 rotation_y(double a) {
    Mat3 m;
    m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
    return m;
}

Mat3 rotation_z(double a) {
    Mat3 m;
    m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    return m;
}

double yaw_about_z(const Mat3 &R) { return std::atan2(R(1, 0), R(0, 0)); }

Mat3 orthonormalize(const Mat3 &R) {
    Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 out = svd.matrixU() * svd.matrixV().transpose();
    if (out.determinant() < 0.0) {
        Mat3 flip = Mat3::Identity();
        flip(2, 2) = -1.0;
        out = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return out;
}

}  // namespace pipeunroll
