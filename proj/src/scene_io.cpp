// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#include "snk/scene_io.h"

#include <fstream>

namespace snk {

using nlohmann::json;

namespace {

Vec3
readVec3(const json &j, const char *key) {
    check(j.contains(key) && j.at(key).is_array() && j.at(key).size() == 3,
          std::string("expected 3-vector field '") + key + "'");
    return {j.at(key)[0].get<double>(), j.at(key)[1].get<double>(), j.at(key)[2].get<double>()};
}

json
vec3Json(const Vec3 &v) {
    return json::array({v.x(), v.y(), v.z()});
}

Color
readColor(const json &j, const char *key, const Color &fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    const auto &a = j.at(key);
    check(a.is_array() && a.size() == 3, std::string("expected RGB field '") + key + "'");
    return {a[0].get<float>(), a[1].get<float>(), a[2].get<float>()};
}

Albedo
parseAlbedo(const json &j) {
    Albedo albedo;
    if (j.is_null()) {
        return albedo;
    }
    const std::string kind = j.value("kind", "solid");
    if (kind == "solid") {
        albedo.kind = Albedo::Kind::Solid;
    } else if (kind == "checker") {
        albedo.kind = Albedo::Kind::Checker;
    } else if (kind == "gradient") {
        albedo.kind = Albedo::Kind::Gradient;
    } else {
        throw Error("unknown albedo kind '" + kind + "'");
    }
    albedo.primary   = readColor(j, "color", albedo.primary);
    albedo.secondary = readColor(j, "secondary", albedo.primary);
    albedo.period    = j.value("period", 1.0);
    return albedo;
}

json
albedoJson(const Albedo &a) {
    const char *kind = a.kind == Albedo::Kind::Solid ? "solid" : a.kind == Albedo::Kind::Checker ? "checker" : "gradient";
    return {{"kind", kind},
            {"color", {a.primary[0], a.primary[1], a.primary[2]}},
            {"secondary", {a.secondary[0], a.secondary[1], a.secondary[2]}},
            {"period", a.period}};
}

CameraView
parseCamera(const json &j, int fallbackId) {
    const int id     = j.value("id", fallbackId);
    const int width  = j.at("width").get<int>();
    const int height = j.at("height").get<int>();
    const int latent = j.value("latent_scale", 8);
    Intrinsics k;
    if (j.contains("fx")) {
        k.fx = j.at("fx").get<double>();
        k.fy = j.value("fy", k.fx);
        k.cx = j.value("cx", 0.5 * width);
        k.cy = j.value("cy", 0.5 * height);
    } else {
        k = Intrinsics::fromVerticalFov(width, height, j.value("fov_y", 60.0));
    }
    Pose pose;
    if (j.contains("rotation")) {
        const auto &r = j.at("rotation");
        check(r.is_array() && r.size() == 3, "rotation must be a 3x3 row-major array");
        for (int row = 0; row < 3; ++row) {
            for (int col = 0; col < 3; ++col) {
                pose.rotation(row, col) = r[row][col].get<double>();
            }
        }
        pose.translation = readVec3(j, "translation");
    } else {
        const Vec3 up = j.contains("up") ? readVec3(j, "up") : Vec3::UnitY();
        pose          = Pose::lookAt(readVec3(j, "position"), readVec3(j, "look_at"), up);
    }
    return CameraView(id, k, pose, width, height, latent);
}

json
cameraJson(const CameraView &v) {
    json rot = json::array();
    for (int row = 0; row < 3; ++row) {
        rot.push_back({v.pose().rotation(row, 0), v.pose().rotation(row, 1), v.pose().rotation(row, 2)});
    }
    return {{"id", v.id()},
            {"width", v.width()},
            {"height", v.height()},
            {"latent_scale", v.latentScale()},
            {"fx", v.intrinsics().fx},
            {"fy", v.intrinsics().fy},
            {"cx", v.intrinsics().cx},
            {"cy", v.intrinsics().cy},
            {"rotation", rot},
            {"translation", vec3Json(v.pose().translation)}};
}

Primitive
makePrimitive(Shape shape, Albedo albedo) {
    return Primitive{std::move(shape), albedo};
}

Albedo
solid(float r, float g, float b) {
    Albedo a;
    a.primary = a.secondary = Color(r, g, b);
    return a;
}

Albedo
checker(const Color &a, const Color &b, double period) {
    return Albedo{Albedo::Kind::Checker, a, b, period};
}

} // namespace

const CameraView &
SceneDocument::camera(int id) const {
    for (const auto &c: cameras) {
        if (c.id() == id) {
            return c;
        }
    }
    throw Error("unknown camera id " + std::to_string(id));
}

SceneDocument
parseSceneDocument(const json &doc) {
    try {
        std::vector<Primitive> primitives;
        for (const auto &p: doc.at("primitives")) {
            const std::string type = p.at("type").get<std::string>();
            const Albedo albedo    = parseAlbedo(p.value("albedo", json()));
            if (type == "sphere") {
                primitives.push_back(makePrimitive(Sphere{readVec3(p, "center"), p.at("radius").get<double>()}, albedo));
            } else if (type == "plane") {
                primitives.push_back(makePrimitive(Plane{readVec3(p, "point"), readVec3(p, "normal")}, albedo));
            } else if (type == "box") {
                primitives.push_back(makePrimitive(Box{readVec3(p, "min"), readVec3(p, "max")}, albedo));
            } else {
                throw Error("unknown primitive type '" + type + "'");
            }
        }
        SceneDocument out;
        out.scene = Scene(std::move(primitives), doc.value("scale", 0.0), doc.value("texel_size", 0.05));
        int nextId = 0;
        for (const auto &c: doc.value("cameras", json::array())) {
            out.cameras.push_back(parseCamera(c, nextId));
            nextId = out.cameras.back().id() + 1;
        }
        if (doc.contains("orbit")) {
            const auto &o = doc.at("orbit");
            auto ring     = orbitViews(o.at("count").get<int>(), o.at("radius").get<double>(), o.value("elevation", 0.0),
                                       o.contains("target") ? readVec3(o, "target") : Vec3::Zero(), o.at("width").get<int>(),
                                       o.at("height").get<int>(), o.value("fov_y", 60.0), o.value("latent_scale", 8), nextId);
            out.cameras.insert(out.cameras.end(), ring.begin(), ring.end());
        }
        return out;
    } catch (const json::exception &e) {
        throw Error(std::string("malformed scene document: ") + e.what());
    }
}

SceneDocument
loadSceneDocument(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open scene file " + path.string());
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception &e) {
        throw Error("malformed scene document: " + std::string(e.what()));
    }
    return parseSceneDocument(doc);
}

json
sceneDocumentToJson(const SceneDocument &doc) {
    json prims = json::array();
    for (const auto &p: doc.scene.primitives()) {
        json j = std::visit(
            [](const auto &s) -> json {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Sphere>) {
                    return {{"type", "sphere"}, {"center", vec3Json(s.center)}, {"radius", s.radius}};
                } else if constexpr (std::is_same_v<T, Plane>) {
                    return {{"type", "plane"}, {"point", vec3Json(s.point)}, {"normal", vec3Json(s.normal)}};
                } else {
                    return {{"type", "box"}, {"min", vec3Json(s.min)}, {"max", vec3Json(s.max)}};
                }
            },
            p.shape);
        j["albedo"] = albedoJson(p.albedo);
        prims.push_back(std::move(j));
    }
    json cams = json::array();
    for (const auto &c: doc.cameras) {
        cams.push_back(cameraJson(c));
    }
    return {{"scale", doc.scene.scale()}, {"texel_size", doc.scene.texelSize()}, {"primitives", prims}, {"cameras", cams}};
}

SceneDocument
builtinScene(const std::string &name, int width, int height, int viewCount) {
    SceneDocument doc;
    const Color dark(0.35f, 0.35f, 0.4f);
    const Color light(0.65f, 0.6f, 0.55f);
    if (name == "desk" || name == "desk-solid") {
        const bool plain = name == "desk-solid";
        std::vector<Primitive> prims;
        prims.push_back(makePrimitive(Plane{Vec3::Zero(), Vec3::UnitY()},
                                      plain ? solid(0.45f, 0.4f, 0.35f) : checker(dark, light, 0.5)));
        prims.push_back(makePrimitive(Sphere{Vec3(0.0, 0.7, 0.0), 0.7},
                                      plain ? solid(0.8f, 0.3f, 0.2f)
                                            : checker(Color(0.7f, 0.35f, 0.3f), Color(0.5f, 0.45f, 0.3f), 0.4)));
        prims.push_back(makePrimitive(Box{Vec3(0.9, 0.0, -0.4), Vec3(1.5, 0.6, 0.2)},
                                      plain ? solid(0.2f, 0.5f, 0.7f)
                                            : checker(Color(0.3f, 0.45f, 0.6f), Color(0.45f, 0.55f, 0.5f), 0.3)));
        doc.scene   = Scene(std::move(prims), 6.0, 0.05);
        doc.cameras = orbitViews(viewCount, 3.2, 1.6, Vec3(0.3, 0.4, 0.0), width, height, 60.0, 8, 0, 10.0, 100.0);
        return doc;
    }
    if (name == "plane") {
        std::vector<Primitive> prims;
        prims.push_back(makePrimitive(Plane{Vec3(0.0, 0.0, 3.0), -Vec3::UnitZ()}, checker(dark, light, 0.25)));
        doc.scene = Scene(std::move(prims), 4.0, 0.05);
        const Intrinsics k = Intrinsics::fromVerticalFov(width, height, 60.0);
        for (int i = 0; i < std::max(2, viewCount); ++i) {
            Pose pose;
            pose.translation = Vec3(0.15 * i, 0.0, 0.0);
            doc.cameras.emplace_back(i, k, pose, width, height, 8);
        }
        return doc;
    }
    if (name == "two-spheres") {
        std::vector<Primitive> prims;
        prims.push_back(makePrimitive(Sphere{Vec3(0.0, 0.0, 5.0), 1.0}, checker(dark, light, 0.4)));
        prims.push_back(makePrimitive(Sphere{Vec3(0.3, 0.0, 3.0), 0.5}, solid(0.8f, 0.2f, 0.2f)));
        doc.scene = Scene(std::move(prims), 4.0, 0.05);
        const Intrinsics k = Intrinsics::fromVerticalFov(width, height, 50.0);
        for (int i = 0; i < std::max(2, viewCount); ++i) {
            const Vec3 eye(-0.8 + 0.8 * i, 0.0, 0.0);
            doc.cameras.emplace_back(i, k, Pose::lookAt(eye, Vec3(0.0, 0.0, 5.0), -Vec3::UnitY()), width, height, 8);
        }
        return doc;
    }
    throw Error("unknown builtin scene '" + name + "'");
}

} // namespace snk
