// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "snk/geometry.h"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace snk {

/// A scene plus the cameras that observe it, as read from a scene JSON file:
///
///   {
///     "scale": 6.0,                       // optional, metres
///     "texel_size": 0.05,                 // optional
///     "primitives": [
///       {"type": "sphere", "center": [0, 1, 0], "radius": 1,
///        "albedo": {"kind": "checker", "color": [0.3, 0.3, 0.3],
///                   "secondary": [0.7, 0.7, 0.7], "period": 0.5}},
///       {"type": "plane", "point": [0, 0, 0], "normal": [0, 1, 0]},
///       {"type": "box", "min": [..], "max": [..]}
///     ],
///     "cameras": [
///       {"id": 0, "width": 64, "height": 64, "latent_scale": 8,
///        "fov_y": 60,                     // or "fx", "fy", "cx", "cy"
///        "position": [0, 1, 4], "look_at": [0, 1, 0], "up": [0, 1, 0]}
///                                         // or "rotation" (3x3 rows) + "translation"
///     ],
///     "orbit": {"count": 8, "radius": 4, "elevation": 1, "target": [0, 0.5, 0],
///               "width": 64, "height": 64, "fov_y": 60}   // optional, appends cameras
///   }
struct SceneDocument {
    Scene scene;
    std::vector<CameraView> cameras;

    const CameraView &camera(int id) const;
};

SceneDocument parseSceneDocument(const nlohmann::json &doc);
SceneDocument loadSceneDocument(const std::filesystem::path &path);
nlohmann::json sceneDocumentToJson(const SceneDocument &doc);

/// Built-in desk-scale scenes:
///   "desk"          checkered floor, sphere and box, 8 orbit cameras
///   "desk-solid"    same layout with solid per-primitive colours
///   "plane"         fronto-parallel checkered plane, two stereo cameras
///   "two-spheres"   a near sphere partially occluding a far one
SceneDocument builtinScene(const std::string &name, int width = 64, int height = 64, int viewCount = 8);

} // namespace snk
