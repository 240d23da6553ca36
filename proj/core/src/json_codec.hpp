#pragma once

// JSON encoders shared by the serializers. Not installed.

#include <json.hpp>

#include "cathreg/geometry.hpp"

namespace cathreg::detail {

using Json = nlohmann::json;

inline Json point_json(const Point3& p) { return Json::array({p.x(), p.y(), p.z()}); }

inline Json rotation_json(const Eigen::Matrix3d& r) {
  Json rows = Json::array();
  for (int i = 0; i < 3; ++i) rows.push_back(Json::array({r(i, 0), r(i, 1), r(i, 2)}));
  return rows;
}

inline Json transform_json(const RigidTransform& t) {
  return Json{{"rotation", rotation_json(t.rotation)},
              {"translation", Json::array({t.translation.x(), t.translation.y(), t.translation.z()})}};
}

inline Json transform_json(const RigidTransform& t, Frame from, Frame to) {
  Json out = transform_json(t);
  out["frame_from"] = std::string(to_string(from));
  out["frame_to"] = std::string(to_string(to));
  return out;
}

/// Null for non-finite values so the output stays valid JSON.
inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace cathreg::detail
