#ifndef DNEA_SPATIAL_HPP_
#define DNEA_SPATIAL_HPP_

// SE(3) / se(3) algebra used by the Newton-Euler recursions.
//
// Layout convention (project-wide): spatial vectors are stacked
// [linear; angular]. A twist is [v; w], a wrench is [f; n] with n the moment
// about the frame origin. All types are templated on the scalar so the same
// code runs on double, long double and ad::Var.

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace dnea {

template <typename S> using Vec3 = Eigen::Matrix<S, 3, 1>;
template <typename S> using Mat3 = Eigen::Matrix<S, 3, 3>;
template <typename S> using Vec6 = Eigen::Matrix<S, 6, 1>;
template <typename S> using Mat6 = Eigen::Matrix<S, 6, 6>;
template <typename S> using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// Twist, acceleration, wrench or momentum, stacked [linear; angular].
template <typename S> using SpatialVector = Vec6<S>;

template <typename S>
auto linear(const SpatialVector<S>& v) {
  return v.template head<3>();
}
template <typename S>
auto angular(const SpatialVector<S>& v) {
  return v.template tail<3>();
}

template <typename S>
SpatialVector<S> make_spatial(const Vec3<S>& lin, const Vec3<S>& ang) {
  SpatialVector<S> out;
  out << lin, ang;
  return out;
}

/// [a] such that [a] b = a x b.
template <typename S>
Mat3<S> skew(const Vec3<S>& a) {
  Mat3<S> m;
  m << S(0), -a.z(), a.y(),  //
      a.z(), S(0), -a.x(),   //
      -a.y(), a.x(), S(0);
  return m;
}

template <typename S>
Mat3<S> rot_x(const S& angle) {
  using std::cos;
  using std::sin;
  const S c = cos(angle), s = sin(angle);
  Mat3<S> r;
  r << S(1), S(0), S(0), S(0), c, -s, S(0), s, c;
  return r;
}

template <typename S>
Mat3<S> rot_y(const S& angle) {
  using std::cos;
  using std::sin;
  const S c = cos(angle), s = sin(angle);
  Mat3<S> r;
  r << c, S(0), s, S(0), S(1), S(0), -s, S(0), c;
  return r;
}

template <typename S>
Mat3<S> rot_z(const S& angle) {
  using std::cos;
  using std::sin;
  const S c = cos(angle), s = sin(angle);
  Mat3<S> r;
  r << c, -s, S(0), s, c, S(0), S(0), S(0), S(1);
  return r;
}

/// R_z(rpy.z) R_y(rpy.y) R_x(rpy.x).
template <typename S>
Mat3<S> rotation_from_rpy(const Vec3<S>& rpy) {
  return rot_z(rpy.z()) * rot_y(rpy.y()) * rot_x(rpy.x());
}

/// Rigid transform T = [R p; 0 1]. Maps child coordinates to parent
/// coordinates: x_parent = R x_child + p.
template <typename S>
struct SpatialTransform {
  Mat3<S> rotation = Mat3<S>::Identity();
  Vec3<S> translation = Vec3<S>::Zero();

  static SpatialTransform identity() { return {}; }

  SpatialTransform operator*(const SpatialTransform& o) const {
    return {rotation * o.rotation, rotation * o.translation + translation};
  }

  SpatialTransform inverse() const {
    Mat3<S> rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  Vec3<S> apply(const Vec3<S>& point) const { return rotation * point + translation; }

  template <typename T>
  SpatialTransform<T> cast() const {
    return {rotation.template cast<T>(), translation.template cast<T>()};
  }
};

template <typename S>
SpatialTransform<S> transform_from_rpy(const Vec3<S>& rpy, const Vec3<S>& translation) {
  return {rotation_from_rpy(rpy), translation};
}

/// Ad_T, mapping twists expressed in the child frame to the parent frame.
template <typename S>
Mat6<S> adjoint(const SpatialTransform<S>& t) {
  Mat6<S> ad = Mat6<S>::Zero();
  ad.template topLeftCorner<3, 3>() = t.rotation;
  ad.template topRightCorner<3, 3>() = skew(t.translation) * t.rotation;
  ad.template bottomRightCorner<3, 3>() = t.rotation;
  return ad;
}

/// Ad_T v without forming the 6x6 matrix.
template <typename S>
SpatialVector<S> transform_motion(const SpatialTransform<S>& t, const SpatialVector<S>& v) {
  const Vec3<S> w = t.rotation * angular(v);
  const Vec3<S> lin = t.rotation * linear(v) + t.translation.cross(w);
  return make_spatial(lin, w);
}

/// Ad_{T^-1} v: a parent-frame twist expressed in the child frame.
template <typename S>
SpatialVector<S> inverse_transform_motion(const SpatialTransform<S>& t,
                                          const SpatialVector<S>& v) {
  const Mat3<S> rt = t.rotation.transpose();
  const Vec3<S> w = angular(v);
  const Vec3<S> lin = rt * (linear(v) - t.translation.cross(w));
  return make_spatial(lin, Vec3<S>(rt * w));
}

/// Ad_{T^-1}^T f: a child-frame wrench expressed in the parent frame.
template <typename S>
SpatialVector<S> transform_force(const SpatialTransform<S>& t, const SpatialVector<S>& f) {
  const Vec3<S> force = t.rotation * linear(f);
  const Vec3<S> moment = t.rotation * angular(f) + t.translation.cross(force);
  return make_spatial(force, moment);
}

/// Ad_T^T f: a parent-frame wrench expressed in the child frame (dual of
/// transform_motion). Carries momenta the same way.
template <typename S>
SpatialVector<S> inverse_transform_force(const SpatialTransform<S>& t,
                                         const SpatialVector<S>& f) {
  const Mat3<S> rt = t.rotation.transpose();
  const Vec3<S> force = linear(f);
  const Vec3<S> moment = rt * (angular(f) - t.translation.cross(force));
  return make_spatial(Vec3<S>(rt * force), moment);
}

/// Lie bracket matrix ad_v, so that ad_v u = [v, u] for twists u:
///   [ [w]  [v] ]
///   [  0   [w] ]
template <typename S>
Mat6<S> lie_bracket(const SpatialVector<S>& v) {
  Mat6<S> m = Mat6<S>::Zero();
  const Mat3<S> sw = skew<S>(angular(v));
  m.template topLeftCorner<3, 3>() = sw;
  m.template topRightCorner<3, 3>() = skew<S>(linear(v));
  m.template bottomRightCorner<3, 3>() = sw;
  return m;
}

/// ad_v u without the matrix.
template <typename S>
SpatialVector<S> bracket(const SpatialVector<S>& v, const SpatialVector<S>& u) {
  const Vec3<S> wv = angular(v), lv = linear(v);
  const Vec3<S> wu = angular(u), lu = linear(u);
  return make_spatial(Vec3<S>(wv.cross(lu) + lv.cross(wu)), Vec3<S>(wv.cross(wu)));
}

/// Co-adjoint ad*_v = ad_v^T acting on wrenches and momenta:
///   [ [w]^T    0   ]
///   [ [v]^T  [w]^T ]
/// The Newton-Euler equation of a body reads f = M a - ad*_v M v.
template <typename S>
Mat6<S> co_adjoint_ad(const SpatialVector<S>& v) {
  return lie_bracket(v).transpose();
}

/// ad*_v h without the matrix.
template <typename S>
SpatialVector<S> co_bracket(const SpatialVector<S>& v, const SpatialVector<S>& h) {
  const Vec3<S> w = angular(v), lv = linear(v);
  const Vec3<S> hl = linear(h), ha = angular(h);
  // [w]^T = -[w]
  return make_spatial(Vec3<S>(-w.cross(hl)), Vec3<S>(-lv.cross(hl) - w.cross(ha)));
}

/// Rigid-body inertia about the frame origin.
template <typename S>
struct SpatialInertia {
  Mat3<S> inertia = Mat3<S>::Zero();  // rotational inertia about the origin
  S mass = S(0);
  Vec3<S> com = Vec3<S>::Zero();      // centre of mass in this frame

  /// [ m I       m[c]^T ]
  /// [ m[c]      J      ]
  Mat6<S> matrix() const {
    Mat6<S> m;
    const Mat3<S> mc = skew(com) * mass;
    m.template topLeftCorner<3, 3>() = Mat3<S>::Identity() * mass;
    m.template topRightCorner<3, 3>() = mc.transpose();
    m.template bottomLeftCorner<3, 3>() = mc;
    m.template bottomRightCorner<3, 3>() = inertia;
    return m;
  }
};

}  // namespace dnea

#endif  // DNEA_SPATIAL_HPP_
