#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace semsplat {

using Vec2f = Eigen::Vector2f;
using Vec3f = Eigen::Vector3f;
using Vec3d = Eigen::Vector3d;
using Mat3d = Eigen::Matrix3d;
using Mat4d = Eigen::Matrix4d;

/// Raised when a domain value fails its construction-time checks.
class SceneError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raw splat parameters as they come off disk or out of a predictor.
/// Quaternion order is (w, x, y, z).
struct GaussianParams {
    Vec3f mean = Vec3f::Zero();
    Vec3f scale = Vec3f::Ones();
    Eigen::Vector4f rotation{1.0f, 0.0f, 0.0f, 0.0f};
    float opacity = 1.0f;
    Vec3f color = Vec3f::Zero();
    Vec3f feature = Vec3f::Zero();
};

/// One validated semantic splat. Covariance is held in factored form
/// (scale, rotation) so it is positive definite by construction.
class SemanticGaussian {
public:
    /// Quaternions whose norm is off by more than this are rejected rather
    /// than silently renormalized.
    static constexpr float kQuaternionTolerance = 1e-3f;

    /// Throws SceneError naming the first offending field.
    explicit SemanticGaussian(const GaussianParams& params);

    const Vec3f& mean() const { return mean_; }
    const Vec3f& scale() const { return scale_; }
    /// Unit quaternion (w, x, y, z).
    const Eigen::Vector4f& rotation() const { return rotation_; }
    float opacity() const { return opacity_; }
    const Vec3f& color() const { return color_; }
    const Vec3f& feature() const { return feature_; }

    GaussianParams params() const;
    SemanticGaussian with_feature(const Vec3f& feature) const;
    SemanticGaussian with_opacity(float opacity) const;

private:
    Vec3f mean_;
    Vec3f scale_;
    Eigen::Vector4f rotation_;
    float opacity_;
    Vec3f color_;
    Vec3f feature_;
};

/// R * diag(scale^2) * R^T.
Mat3d covariance_of(const SemanticGaussian& g);

/// Rotation matrix of a (w, x, y, z) quaternion, normalizing first.
Mat3d rotation_matrix(const Eigen::Vector4f& wxyz);

/// Rigidly rotates a Gaussian about the world origin by the unit quaternion q.
SemanticGaussian rotate(const SemanticGaussian& g, const Eigen::Quaterniond& q);

struct SceneIssue {
    std::size_t index = 0;
    std::string field;
    std::string message;
};

/// First violated invariant in the list, or nullopt when every entry is valid.
std::optional<SceneIssue> validate_scene(std::span<const GaussianParams> gaussians);

std::vector<SemanticGaussian> make_scene(std::span<const GaussianParams> gaussians);

class PinholeCamera {
public:
    static constexpr double kOrthonormalTolerance = 1e-5;

    /// `world_to_camera` is a rigid 4x4 transform. Pixel (x, y) has its
    /// center at image coordinates (x, y).
    PinholeCamera(double fx, double fy, double cx, double cy, int width, int height,
                  const Mat4d& world_to_camera);

    /// Camera at `eye` looking at `target`; +y of the image points along -up.
    static PinholeCamera look_at(const Vec3d& eye, const Vec3d& target, const Vec3d& up,
                                 double fx, double fy, double cx, double cy, int width,
                                 int height);

    double fx() const { return fx_; }
    double fy() const { return fy_; }
    double cx() const { return cx_; }
    double cy() const { return cy_; }
    int width() const { return width_; }
    int height() const { return height_; }
    const Mat4d& world_to_camera() const { return world_to_camera_; }
    Mat3d rotation() const { return world_to_camera_.topLeftCorner<3, 3>(); }
    Vec3d translation() const { return world_to_camera_.topRightCorner<3, 1>(); }

    Vec3d to_camera(const Vec3d& world) const { return rotation() * world + translation(); }
    Vec3d center() const { return -rotation().transpose() * translation(); }

    /// World-space direction of the ray through image point (u, v).
    Vec3d ray_direction(double u, double v) const;

private:
    double fx_, fy_, cx_, cy_;
    int width_, height_;
    Mat4d world_to_camera_;
};

/// Per-pixel object indices. 0 is unlabeled.
class LabelMap {
public:
    LabelMap() = default;
    LabelMap(int width, int height, std::uint16_t fill = 0);
    LabelMap(int width, int height, std::vector<std::uint16_t> labels);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return labels_.size(); }

    std::uint16_t at(int x, int y) const { return labels_[index(x, y)]; }
    void set(int x, int y, std::uint16_t label) { labels_[index(x, y)] = label; }
    std::span<const std::uint16_t> labels() const { return labels_; }
    std::span<std::uint16_t> labels() { return labels_; }

    bool operator==(const LabelMap&) const = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint16_t> labels_;
};

/// Dense 3-channel image: rendered colors, rendered semantic features, or
/// semantic label images.
class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(int width, int height, const Vec3f& fill = Vec3f::Zero());

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return values_.size(); }

    const Vec3f& at(int x, int y) const { return values_[index(x, y)]; }
    Vec3f& at(int x, int y) { return values_[index(x, y)]; }
    const Vec3f& operator[](std::size_t i) const { return values_[i]; }
    Vec3f& operator[](std::size_t i) { return values_[i]; }
    std::span<const Vec3f> values() const { return values_; }
    std::span<Vec3f> values() { return values_; }

    bool all_finite() const;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<Vec3f> values_;
};

/// High-dimensional language feature. An all-zero vector marks an object
/// absent from a view.
class Embedding {
public:
    static constexpr std::size_t kDefaultDim = 512;

    Embedding() = default;
    explicit Embedding(std::vector<float> values);
    static Embedding zeros(std::size_t dim) { return Embedding(std::vector<float>(dim, 0.0f)); }

    std::size_t dim() const { return values_.size(); }
    std::span<const float> values() const { return values_; }
    bool is_zero() const;
    double norm() const;
    /// Unit-L2 copy; the zero sentinel stays zero.
    Embedding normalized() const;

    bool operator==(const Embedding&) const = default;

private:
    std::vector<float> values_;
};

double dot(const Embedding& a, const Embedding& b);

}  // namespace semsplat
