#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "dmgnet/scene_data.hpp"

namespace dmgnet {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::string> DatasetManifest::events() const {
    std::set<std::string> ids;
    for (const auto& s : scenes) ids.insert(s.event_id);
    return {ids.begin(), ids.end()};
}

std::vector<std::size_t> DatasetManifest::indices_for_event(const std::string& event_id) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < scenes.size(); ++i)
        if (scenes[i].event_id == event_id) out.push_back(i);
    return out;
}

std::vector<std::size_t> DatasetManifest::indices_for_hazard(HazardType hazard) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < scenes.size(); ++i)
        if (scenes[i].hazard == hazard) out.push_back(i);
    return out;
}

DatasetManifest DatasetManifest::filter_events(const std::vector<std::string>& event_ids) const {
    DatasetManifest out;
    out.base_dir = base_dir;
    for (const auto& s : scenes)
        if (std::find(event_ids.begin(), event_ids.end(), s.event_id) != event_ids.end()) out.scenes.push_back(s);
    return out;
}

DatasetManifest DatasetManifest::filter_hazard(HazardType hazard) const {
    DatasetManifest out;
    out.base_dir = base_dir;
    for (const auto& s : scenes)
        if (s.hazard == hazard) out.scenes.push_back(s);
    return out;
}

DatasetManifest DatasetManifest::filter_split(Split split) const {
    DatasetManifest out;
    out.base_dir = base_dir;
    for (const auto& s : scenes)
        if (s.split == split) out.scenes.push_back(s);
    return out;
}

fs::path DatasetManifest::resolve(const std::string& path) const {
    const fs::path p(path);
    return p.is_absolute() ? p : base_dir / p;
}

namespace {

const json& require(const json& rec, const char* key, json::value_t type, std::size_t index) {
    auto it = rec.find(key);
    const bool ok = it != rec.end() &&
                    (it->type() == type || (type == json::value_t::number_float && it->is_number()));
    if (!ok)
        throw ManifestError(ManifestErrorKind::schema_violation,
                            "manifest record " + std::to_string(index) + ": missing or mistyped field '" + key + "'");
    return *it;
}

}  // namespace

DatasetManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ManifestError(ManifestErrorKind::missing_file, "manifest not found: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ManifestError(ManifestErrorKind::schema_violation, "manifest is not valid JSON: " + std::string(e.what()));
    }
    if (!doc.is_array())
        throw ManifestError(ManifestErrorKind::schema_violation, "manifest must be a top-level array of scene records");

    DatasetManifest m;
    m.base_dir = path.parent_path();
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const json& rec = doc[i];
        if (!rec.is_object())
            throw ManifestError(ManifestErrorKind::schema_violation, "manifest record " + std::to_string(i) + " is not an object");
        SceneRecord r;
        using vt = json::value_t;
        r.event_id = require(rec, "event_id", vt::string, i).get<std::string>();
        r.pre_path = require(rec, "pre_path", vt::string, i).get<std::string>();
        r.post_path = require(rec, "post_path", vt::string, i).get<std::string>();
        r.mask_path = require(rec, "mask_path", vt::string, i).get<std::string>();
        r.gsd = require(rec, "gsd", vt::number_float, i).get<double>();
        try {
            r.hazard = parse_hazard(require(rec, "hazard_type", vt::string, i).get<std::string>());
            r.split = parse_split(require(rec, "split", vt::string, i).get<std::string>());
        } catch (const std::invalid_argument& e) {
            throw ManifestError(ManifestErrorKind::schema_violation,
                                "manifest record " + std::to_string(i) + ": " + e.what());
        }
        if (r.event_id.empty() || !(r.gsd > 0.0))
            throw ManifestError(ManifestErrorKind::schema_violation,
                                "manifest record " + std::to_string(i) + ": empty event_id or non-positive gsd");
        for (const std::string* p : {&r.pre_path, &r.post_path, &r.mask_path})
            if (!fs::exists(m.resolve(*p)))
                throw ManifestError(ManifestErrorKind::dangling_path,
                                    "manifest record " + std::to_string(i) + ": path does not resolve: " + *p);
        m.scenes.push_back(std::move(r));
    }
    return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
    json doc = json::array();
    for (const auto& r : manifest.scenes) {
        doc.push_back({{"event_id", r.event_id},
                       {"hazard_type", std::string(to_string(r.hazard))},
                       {"split", std::string(to_string(r.split))},
                       {"pre_path", r.pre_path},
                       {"post_path", r.post_path},
                       {"mask_path", r.mask_path},
                       {"gsd", r.gsd}});
    }
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ManifestError(ManifestErrorKind::io_failure, "cannot write manifest: " + path.string());
    out << doc.dump(2) << '\n';
}

ScenePair load_scene(const DatasetManifest& manifest, std::size_t index) {
    const SceneRecord& r = manifest.scenes.at(index);
    ScenePair s;
    s.scene_id = r.event_id + "/" + fs::path(r.pre_path).stem().string();
    s.event_id = r.event_id;
    s.hazard = r.hazard;
    s.split = r.split;
    s.pre = read_png_image(manifest.resolve(r.pre_path), r.gsd);
    s.post = read_png_image(manifest.resolve(r.post_path), r.gsd);
    s.labels = read_png_labels(manifest.resolve(r.mask_path));
    s.validate();
    return s;
}

std::vector<ScenePair> load_scenes(const DatasetManifest& manifest) {
    std::vector<ScenePair> out;
    out.reserve(manifest.scenes.size());
    for (std::size_t i = 0; i < manifest.scenes.size(); ++i) out.push_back(load_scene(manifest, i));
    return out;
}

}  // namespace dmgnet
