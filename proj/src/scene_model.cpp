#include "semsplat/scene_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace semsplat {
namespace {

bool finite(const auto& v) { return v.allFinite(); }

bool in_unit_range(float x) { return x >= 0.0f && x <= 1.0f; }

std::optional<SceneIssue> check(const GaussianParams& p, std::size_t index) {
    auto issue = [index](std::string field, std::string message) {
        return SceneIssue{index, std::move(field), std::move(message)};
    };
    if (!finite(p.mean)) return issue("mean", "non-finite value");
    if (!finite(p.scale)) return issue("scale", "non-finite value");
    if (!finite(p.rotation)) return issue("rotation", "non-finite value");
    if (!std::isfinite(p.opacity)) return issue("opacity", "non-finite value");
    if (!finite(p.color)) return issue("color", "non-finite value");
    if (!finite(p.feature)) return issue("feature", "non-finite value");
    if ((p.scale.array() <= 0.0f).any()) return issue("scale", "components must be > 0");
    const float qnorm = p.rotation.norm();
    if (std::abs(qnorm - 1.0f) > SemanticGaussian::kQuaternionTolerance) {
        std::ostringstream os;
        os << "quaternion norm " << qnorm << " is not unit";
        return issue("rotation", os.str());
    }
    if (!in_unit_range(p.opacity)) {
        std::ostringstream os;
        os << "opacity " << p.opacity << " outside [0,1]";
        return issue("opacity", os.str());
    }
    if (!std::all_of(p.color.data(), p.color.data() + 3, in_unit_range))
        return issue("color", "components outside [0,1]");
    if (!std::all_of(p.feature.data(), p.feature.data() + 3, in_unit_range))
        return issue("feature", "components outside [0,1]");
    return std::nullopt;
}

std::string describe(const SceneIssue& issue) {
    std::ostringstream os;
    os << "gaussian " << issue.index << ": " << issue.field << ": " << issue.message;
    return os.str();
}

}  // namespace

SemanticGaussian::SemanticGaussian(const GaussianParams& params) {
    if (auto issue = check(params, 0)) throw SceneError(issue->field + ": " + issue->message);
    mean_ = params.mean;
    scale_ = params.scale;
    // Already-unit quaternions are kept bit-for-bit so file round trips are exact.
    const float qnorm = params.rotation.norm();
    rotation_ = std::abs(qnorm - 1.0f) <= 1e-6f ? params.rotation : Eigen::Vector4f(params.rotation / qnorm);
    opacity_ = params.opacity;
    color_ = params.color;
    feature_ = params.feature;
}

GaussianParams SemanticGaussian::params() const {
    return GaussianParams{mean_, scale_, rotation_, opacity_, color_, feature_};
}

SemanticGaussian SemanticGaussian::with_feature(const Vec3f& feature) const {
    GaussianParams p = params();
    p.feature = feature;
    return SemanticGaussian(p);
}

SemanticGaussian SemanticGaussian::with_opacity(float opacity) const {
    GaussianParams p = params();
    p.opacity = opacity;
    return SemanticGaussian(p);
}

Mat3d rotation_matrix(const Eigen::Vector4f& wxyz) {
    const Eigen::Vector4d q = wxyz.cast<double>().normalized();
    return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

Mat3d covariance_of(const SemanticGaussian& g) {
    const Mat3d r = rotation_matrix(g.rotation());
    const Vec3d s2 = g.scale().cast<double>().array().square();
    Mat3d cov = r * s2.asDiagonal() * r.transpose();
    return 0.5 * (cov + cov.transpose());
}

SemanticGaussian rotate(const SemanticGaussian& g, const Eigen::Quaterniond& q) {
    GaussianParams p = g.params();
    const Eigen::Vector4d r = g.rotation().cast<double>();
    const Eigen::Quaterniond composed = q.normalized() * Eigen::Quaterniond(r[0], r[1], r[2], r[3]);
    p.mean = (q.normalized() * g.mean().cast<double>()).cast<float>();
    p.rotation = Eigen::Vector4d(composed.w(), composed.x(), composed.y(), composed.z()).cast<float>();
    return SemanticGaussian(p);
}

std::optional<SceneIssue> validate_scene(std::span<const GaussianParams> gaussians) {
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        if (auto issue = check(gaussians[i], i)) return issue;
    }
    return std::nullopt;
}

std::vector<SemanticGaussian> make_scene(std::span<const GaussianParams> gaussians) {
    if (auto issue = validate_scene(gaussians)) throw SceneError(describe(*issue));
    std::vector<SemanticGaussian> out;
    out.reserve(gaussians.size());
    for (const auto& p : gaussians) out.emplace_back(p);
    return out;
}

// -- PinholeCamera ----------------------------------------------------------

PinholeCamera::PinholeCamera(double fx, double fy, double cx, double cy, int width, int height,
                             const Mat4d& world_to_camera)
    : fx_(fx), fy_(fy), cx_(cx), cy_(cy), width_(width), height_(height),
      world_to_camera_(world_to_camera) {
    if (!(fx > 0.0) || !(fy > 0.0)) throw SceneError("camera: focal lengths must be > 0");
    if (!std::isfinite(cx) || !std::isfinite(cy)) throw SceneError("camera: non-finite principal point");
    if (width < 1 || height < 1) throw SceneError("camera: image dimensions must be >= 1");
    if (!world_to_camera.allFinite()) throw SceneError("camera: non-finite pose");
    const Mat3d r = rotation();
    if (!(r.transpose() * r).isIdentity(kOrthonormalTolerance) ||
        std::abs(r.determinant() - 1.0) > kOrthonormalTolerance)
        throw SceneError("camera: rotation block is not orthonormal");
    if (!world_to_camera.row(3).isApprox(Eigen::RowVector4d(0, 0, 0, 1), 1e-12))
        throw SceneError("camera: bottom row must be (0,0,0,1)");
}

PinholeCamera PinholeCamera::look_at(const Vec3d& eye, const Vec3d& target, const Vec3d& up,
                                     double fx, double fy, double cx, double cy, int width,
                                     int height) {
    const Vec3d forward = (target - eye).normalized();
    const Vec3d right = forward.cross(up).normalized();
    const Vec3d down = forward.cross(right);
    Mat3d r;
    r.row(0) = right.transpose();
    r.row(1) = down.transpose();
    r.row(2) = forward.transpose();
    Mat4d pose = Mat4d::Identity();
    pose.topLeftCorner<3, 3>() = r;
    pose.topRightCorner<3, 1>() = -r * eye;
    return PinholeCamera(fx, fy, cx, cy, width, height, pose);
}

Vec3d PinholeCamera::ray_direction(double u, double v) const {
    const Vec3d cam((u - cx_) / fx_, (v - cy_) / fy_, 1.0);
    return (rotation().transpose() * cam).normalized();
}

// -- LabelMap / FeatureMap --------------------------------------------------

LabelMap::LabelMap(int width, int height, std::uint16_t fill)
    : width_(width), height_(height) {
    if (width < 1 || height < 1) throw SceneError("label map: dimensions must be positive");
    labels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

LabelMap::LabelMap(int width, int height, std::vector<std::uint16_t> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
    if (width < 1 || height < 1) throw SceneError("label map: dimensions must be positive");
    if (labels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
        throw SceneError("label map: pixel count does not match dimensions");
}

FeatureMap::FeatureMap(int width, int height, const Vec3f& fill)
    : width_(width), height_(height) {
    if (width < 1 || height < 1) throw SceneError("feature map: dimensions must be positive");
    values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

bool FeatureMap::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](const Vec3f& v) { return v.allFinite(); });
}

// -- Embedding ---------------------------------------------------------------

Embedding::Embedding(std::vector<float> values) : values_(std::move(values)) {
    if (!std::all_of(values_.begin(), values_.end(), [](float x) { return std::isfinite(x); }))
        throw SceneError("embedding: non-finite component");
}

bool Embedding::is_zero() const {
    return std::all_of(values_.begin(), values_.end(), [](float x) { return x == 0.0f; });
}

double Embedding::norm() const {
    double acc = 0.0;
    for (float x : values_) acc += static_cast<double>(x) * x;
    return std::sqrt(acc);
}

Embedding Embedding::normalized() const {
    const double n = norm();
    if (n == 0.0) return *this;
    std::vector<float> out(values_.size());
    std::transform(values_.begin(), values_.end(), out.begin(),
                   [n](float x) { return static_cast<float>(x / n); });
    return Embedding(std::move(out));
}

double dot(const Embedding& a, const Embedding& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("embedding dimension mismatch");
    const auto av = a.values();
    const auto bv = b.values();
    double acc = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) acc += static_cast<double>(av[i]) * bv[i];
    return acc;
}

}  // namespace semsplat
