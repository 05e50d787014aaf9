#include "gaitfi/checkpoint.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

#include "json.hpp"

#include "gaitfi/io_util.hpp"

namespace gaitfi {
namespace {

constexpr char kMagic[4] = {'G', 'F', 'W', '1'};

std::string feature_name(LstmFeature f) { return f == LstmFeature::LastHidden ? "last" : "mean"; }

LstmFeature parse_feature(const std::string& s) {
    if (s == "last") return LstmFeature::LastHidden;
    if (s == "mean") return LstmFeature::TemporalMean;
    throw std::runtime_error("checkpoint: unknown lstm feature '" + s + "'");
}

void write_record(std::ofstream& out, const std::string& name, const TensorT<float>& t) {
    io::write_u32(out, static_cast<uint32_t>(name.size()));
    io::write_bytes(out, name.data(), name.size());
    io::write_u32(out, static_cast<uint32_t>(t.rank()));
    for (int64_t d = 0; d < t.rank(); ++d) io::write_u32(out, static_cast<uint32_t>(t.dim(d)));
    io::write_f32_array(out, t.data(), static_cast<size_t>(t.numel()));
}

struct Record {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

Record read_record(std::ifstream& in) {
    Record r;
    const uint32_t name_len = io::read_u32(in, "record name length");
    io::require(name_len > 0 && name_len < 4096, "checkpoint: implausible record name length");
    r.name.resize(name_len);
    io::read_exact(in, r.name.data(), name_len, "record name");
    const uint32_t rank = io::read_u32(in, "record rank");
    io::require(rank <= 8, "checkpoint: implausible record rank");
    int64_t numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
        const uint32_t ext = io::read_u32(in, "record extent");
        io::require(ext > 0, "checkpoint: zero record extent");
        r.shape.push_back(static_cast<int64_t>(ext));
        numel *= static_cast<int64_t>(ext);
        io::require(numel < (int64_t{1} << 31), "checkpoint: record too large");
    }
    r.data.resize(static_cast<size_t>(numel));
    io::read_f32_array(in, r.data.data(), r.data.size(), "record data");
    return r;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    GaitFiModel<float>& model = const_cast<GaitFiModel<float>&>(ck.model);
    if (static_cast<int64_t>(ck.subject_ids.size()) != model.num_classes)
        throw std::invalid_argument("checkpoint: subject id list does not match class count");

    nlohmann::json hdr;
    hdr["format"] = "gfw1";
    hdr["modality"] = to_string(model.modality);
    hdr["fusion"] = to_string(model.fusion);
    hdr["lstm_feature"] = feature_name(model.lstm_feature);
    hdr["num_classes"] = model.num_classes;
    hdr["frames"] = model.frames;
    hdr["frame_size"] = model.frame_size;
    hdr["csi_h"] = model.csi_h;
    hdr["csi_w"] = model.csi_w;
    hdr["subject_ids"] = ck.subject_ids;
    hdr["alpha"] = ck.alpha;
    hdr["margin"] = ck.margin;
    hdr["lr"] = ck.lr;
    hdr["seed"] = ck.seed;
    hdr["adam_step"] = ck.adam ? ck.adam->step : int64_t{0};
    hdr["has_adam"] = ck.adam.has_value();
    const std::string js = hdr.dump();

    std::ofstream out = io::open_write(path);
    io::write_bytes(out, kMagic, 4);
    io::write_u32(out, static_cast<uint32_t>(js.size()));
    io::write_bytes(out, js.data(), js.size());

    auto params = model.parameters();
    for (const auto& [name, t] : params) write_record(out, name, t);
    for (const auto& [name, t] : model.buffers()) write_record(out, name, t);
    if (ck.adam) {
        if (ck.adam->m.size() != params.size())
            throw std::invalid_argument("checkpoint: adam state does not match parameter list");
        for (size_t i = 0; i < params.size(); ++i) write_record(out, "adam.m." + params[i].first, ck.adam->m[i]);
        for (size_t i = 0; i < params.size(); ++i) write_record(out, "adam.v." + params[i].first, ck.adam->v[i]);
    }
    out.close();
    if (!out) throw std::runtime_error("checkpoint: failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in = io::open_read(path);
    char magic[4];
    io::read_exact(in, magic, 4, "magic");
    io::require(std::equal(magic, magic + 4, kMagic), "checkpoint: bad magic in " + path);

    const uint32_t js_len = io::read_u32(in, "header length");
    io::require(js_len > 0 && js_len < (1u << 24), "checkpoint: implausible header length");
    std::string js(js_len, '\0');
    io::read_exact(in, js.data(), js_len, "header");

    nlohmann::json hdr;
    try {
        hdr = nlohmann::json::parse(js);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("checkpoint: bad header json: ") + e.what());
    }

    Checkpoint ck;
    ck.subject_ids = hdr.at("subject_ids").get<std::vector<int64_t>>();
    ck.alpha = hdr.at("alpha").get<double>();
    ck.margin = hdr.at("margin").get<double>();
    ck.lr = hdr.at("lr").get<double>();
    ck.seed = hdr.at("seed").get<uint64_t>();

    std::mt19937_64 dummy(0);
    ck.model = GaitFiModel<float>::make(
        dummy, parse_modality(hdr.at("modality").get<std::string>()), parse_fusion(hdr.at("fusion").get<std::string>()),
        hdr.at("num_classes").get<int64_t>(), hdr.at("frames").get<int64_t>(), hdr.at("frame_size").get<int64_t>(),
        hdr.at("csi_h").get<int64_t>(), hdr.at("csi_w").get<int64_t>(),
        parse_feature(hdr.at("lstm_feature").get<std::string>()));
    if (static_cast<int64_t>(ck.subject_ids.size()) != ck.model.num_classes)
        throw std::runtime_error("checkpoint: subject id list does not match class count");

    auto params = ck.model.parameters();
    std::map<std::string, TensorT<float>> slots;
    for (const auto& [name, t] : params) slots.emplace(name, t);
    for (const auto& [name, t] : ck.model.buffers()) slots.emplace(name, t);

    std::map<std::string, Record> adam_records;
    std::set<std::string> filled;
    while (!io::at_eof(in)) {
        Record r = read_record(in);
        if (r.name.rfind("adam.", 0) == 0) {
            if (!adam_records.emplace(r.name, std::move(r)).second)
                throw std::runtime_error("checkpoint: duplicate record " + r.name);
            continue;
        }
        auto it = slots.find(r.name);
        if (it == slots.end()) throw std::runtime_error("checkpoint: unexpected record " + r.name);
        if (!filled.insert(r.name).second) throw std::runtime_error("checkpoint: duplicate record " + r.name);
        if (it->second.shape() != r.shape)
            throw std::runtime_error("checkpoint: shape mismatch for " + r.name + ": file has " + shape_str(r.shape) +
                                     ", model expects " + shape_str(it->second.shape()));
        std::copy(r.data.begin(), r.data.end(), it->second.data());
    }
    for (const auto& [name, t] : slots)
        if (!filled.count(name)) throw std::runtime_error("checkpoint: missing record " + name);

    if (hdr.value("has_adam", false)) {
        AdamState<float> adam = AdamState<float>::init(
            [&params] {
                std::vector<TensorT<float>> ps;
                for (auto& [n, t] : params) ps.push_back(t);
                return ps;
            }(),
            static_cast<float>(ck.lr));
        adam.step = hdr.at("adam_step").get<int64_t>();
        for (size_t i = 0; i < params.size(); ++i) {
            for (const auto& [prefix, dst] :
                 std::initializer_list<std::pair<const char*, std::vector<TensorT<float>>*>>{{"adam.m.", &adam.m},
                                                                                             {"adam.v.", &adam.v}}) {
                auto it = adam_records.find(prefix + params[i].first);
                if (it == adam_records.end())
                    throw std::runtime_error("checkpoint: missing record " + std::string(prefix) + params[i].first);
                if (it->second.shape != params[i].second.shape())
                    throw std::runtime_error("checkpoint: shape mismatch for " + it->second.name);
                std::copy(it->second.data.begin(), it->second.data.end(), (*dst)[i].data());
            }
        }
        if (adam_records.size() != 2 * params.size())
            throw std::runtime_error("checkpoint: unexpected adam records");
        ck.adam = std::move(adam);
    } else if (!adam_records.empty()) {
        throw std::runtime_error("checkpoint: unexpected record " + adam_records.begin()->first);
    }
    return ck;
}

}  // namespace gaitfi
