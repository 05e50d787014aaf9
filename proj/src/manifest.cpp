#include "gaitfi/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>

#include "json.hpp"

namespace gaitfi {

namespace fs = std::filesystem;

std::string Manifest::resolve(const std::string& rel) const {
    fs::path p(rel);
    if (p.is_absolute() || root.empty()) return rel;
    return (fs::path(root) / p).string();
}

std::vector<int64_t> Manifest::subjects() const {
    std::set<int64_t> ids;
    for (const auto& e : entries) ids.insert(e.subject_id);
    return {ids.begin(), ids.end()};
}

std::vector<ManifestEntry> Manifest::split(const std::string& name) const {
    std::vector<ManifestEntry> out;
    for (const auto& e : entries)
        if (e.split == name) out.push_back(e);
    return out;
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest: cannot open " + path);

    Manifest m;
    m.root = fs::path(path).parent_path().string();

    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error("manifest: line " + std::to_string(lineno) + ": " + e.what());
        }
        ManifestEntry ent;
        try {
            ent.subject_id = j.at("subject_id").get<int64_t>();
            ent.sample_index = j.at("sample_index").get<int64_t>();
            ent.csi_path = j.at("csi_path").get<std::string>();
            ent.sil_path = j.at("sil_path").get<std::string>();
            ent.split = j.at("split").get<std::string>();
        } catch (const std::exception& e) {
            throw std::runtime_error("manifest: line " + std::to_string(lineno) + ": " + e.what());
        }
        if (ent.split != "gallery" && ent.split != "probe")
            throw std::runtime_error("manifest: line " + std::to_string(lineno) + ": unknown split '" + ent.split +
                                     "'");
        m.entries.push_back(std::move(ent));
    }
    if (m.entries.empty()) throw std::runtime_error("manifest: empty manifest " + path);

    std::set<std::pair<int64_t, int64_t>> seen;
    for (const auto& e : m.entries) {
        if (!seen.insert({e.subject_id, e.sample_index}).second)
            throw std::runtime_error("manifest: duplicate sample (subject " + std::to_string(e.subject_id) +
                                     ", index " + std::to_string(e.sample_index) + ")");
        for (const std::string* p : {&e.csi_path, &e.sil_path}) {
            const std::string full = m.resolve(*p);
            if (!fs::exists(full)) throw std::runtime_error("manifest: missing file " + full);
        }
    }

    std::map<int64_t, int64_t> gallery_counts;
    for (const auto& e : m.entries) gallery_counts[e.subject_id];  // every subject gets a slot
    for (const auto& e : m.entries)
        if (e.split == "gallery") ++gallery_counts[e.subject_id];
    int64_t expect = gallery_counts.begin()->second;
    for (const auto& [id, n] : gallery_counts)
        if (n != expect)
            throw std::runtime_error("manifest: unequal gallery counts (subject " + std::to_string(id) + " has " +
                                     std::to_string(n) + ", expected " + std::to_string(expect) + ")");
    return m;
}

void save_manifest(const Manifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("manifest: cannot write " + path);
    for (const auto& e : m.entries) {
        nlohmann::json j;
        j["subject_id"] = e.subject_id;
        j["sample_index"] = e.sample_index;
        j["csi_path"] = e.csi_path;
        j["sil_path"] = e.sil_path;
        j["split"] = e.split;
        out << j.dump() << "\n";
    }
    out.close();
    if (!out) throw std::runtime_error("manifest: failed writing " + path);
}

namespace {

std::string trim(const std::string& s) {
    const size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    size_t pos = 0;
    double d;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("config: bad number for " + key + ": '" + v + "'");
    }
    if (pos != v.size()) throw std::runtime_error("config: bad number for " + key + ": '" + v + "'");
    return d;
}

int64_t parse_int(const std::string& key, const std::string& v) {
    size_t pos = 0;
    long long i;
    try {
        i = std::stoll(v, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("config: bad integer for " + key + ": '" + v + "'");
    }
    if (pos != v.size()) throw std::runtime_error("config: bad integer for " + key + ": '" + v + "'");
    return i;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::runtime_error("config: bad boolean for " + key + ": '" + v + "'");
}

}  // namespace

void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "alpha") cfg.alpha = parse_double(key, value);
    else if (key == "margin") cfg.margin = parse_double(key, value);
    else if (key == "lr") cfg.lr = parse_double(key, value);
    else if (key == "batch") cfg.batch = parse_int(key, value);
    else if (key == "epochs") cfg.epochs = parse_int(key, value);
    else if (key == "p") cfg.p = parse_int(key, value);
    else if (key == "q") cfg.q = parse_int(key, value);
    else if (key == "seed") cfg.seed = static_cast<uint64_t>(parse_int(key, value));
    else if (key == "fusion") cfg.fusion = value;
    else if (key == "modality") cfg.modality = value;
    else if (key == "lstm_feature") cfg.lstm_feature = value;
    else if (key == "use_ce") cfg.use_ce = parse_bool(key, value);
    else if (key == "frames") cfg.frames = parse_int(key, value);
    else if (key == "frame_size") cfg.frame_size = parse_int(key, value);
    else if (key == "csi_packets") cfg.csi_packets = parse_int(key, value);
    else if (key == "denoise_window") cfg.denoise_window = parse_int(key, value);
    else throw std::runtime_error("config: unknown key '" + key + "'");
}

RunConfig load_run_config(const std::string& path) {
    RunConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (value.size() >= 2 && ((value.front() == '"' && value.back() == '"') ||
                                  (value.front() == '\'' && value.back() == '\'')))
            value = value.substr(1, value.size() - 2);
        try {
            apply_config_kv(cfg, key, value);
        } catch (const std::exception& e) {
            throw std::runtime_error("config: line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

}  // namespace gaitfi
