// Copyright 2026 The aspectcrop Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "aspectcrop/model.hpp"
#include "aspectcrop/random.hpp"

// Checkpoint layout:
//   config.json          format tag, version, backbone/head specs, normalization
//   backbone.bin         weights of the feature extractor
//   head_<key>.bin       weights of one regression head
// Each blob: "ACWB", u32 version, u32 tensor count, then per tensor
// u32 name length, name, u32 rows, u32 cols, rows*cols little-endian f64 in
// column-major order; a trailing u64 FNV-1a of everything before it.
namespace aspectcrop {

namespace {

using nlohmann::json;

constexpr char kFormatTag[] = "aspectcrop-checkpoint";
constexpr char kBlobMagic[4] = {'A', 'C', 'W', 'B'};

std::string blob_name(const std::string& key) {
    std::string s = "head_";
    for (char c : key) {
        s.push_back(c == ':' ? 'x' : c == '~' ? '_' : c);
    }
    return s + ".bin";
}

template <typename T>
void put(std::string& buf, T v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

void write_blob(const std::filesystem::path& path, const std::vector<const nn::Parameter*>& params) {
    std::string buf(kBlobMagic, 4);
    put<std::uint32_t>(buf, kCheckpointVersion);
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(params.size()));
    for (const auto* p : params) {
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(p->name.size()));
        buf.append(p->name);
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(p->value.rows()));
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(p->value.cols()));
        buf.append(reinterpret_cast<const char*>(p->value.data()),
                   static_cast<std::size_t>(p->value.size()) * sizeof(double));
    }
    put<std::uint64_t>(buf, rnd::fnv1a(buf));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) {
        throw CheckpointError("cannot write " + path.string());
    }
}

class Reader {
public:
    Reader(std::string data, std::string what) : data_(std::move(data)), what_(std::move(what)) {}

    template <typename T>
    T get() {
        T v{};
        need(sizeof(T));
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) {
            throw CheckpointError(what_ + ": truncated weight blob");
        }
    }

    std::string data_;
    std::size_t pos_ = 0;
    std::string what_;
};

std::map<std::string, nn::Matrix> read_blob(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError("missing weight blob " + path.string());
    }
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.size() < 4 + 4 + 4 + 8 || data.compare(0, 4, kBlobMagic, 4) != 0) {
        throw CheckpointError(path.string() + ": not a weight blob");
    }
    std::uint64_t stored = 0;
    std::memcpy(&stored, data.data() + data.size() - 8, 8);
    data.resize(data.size() - 8);
    if (rnd::fnv1a(data) != stored) {
        throw CheckpointError(path.string() + ": checksum mismatch (corrupt file)");
    }
    Reader r(std::move(data), path.string());
    r.bytes(4);
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw CheckpointError(path.string() + ": unsupported blob version " + std::to_string(version));
    }
    const auto count = r.get<std::uint32_t>();
    std::map<std::string, nn::Matrix> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = r.bytes(r.get<std::uint32_t>());
        const auto rows = r.get<std::uint32_t>();
        const auto cols = r.get<std::uint32_t>();
        nn::Matrix m(rows, cols);
        const std::string raw = r.bytes(static_cast<std::size_t>(rows) * cols * sizeof(double));
        std::memcpy(m.data(), raw.data(), raw.size());
        out.emplace(name, std::move(m));
    }
    return out;
}

void assign(const std::map<std::string, nn::Matrix>& blob, std::vector<nn::Parameter*> params,
            const std::string& what) {
    for (auto* p : params) {
        const auto it = blob.find(p->name);
        if (it == blob.end()) {
            throw CheckpointError(what + ": parameter " + p->name + " missing");
        }
        if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
            throw CheckpointError(what + ": parameter " + p->name + " has the wrong shape");
        }
        p->value = it->second;
        p->grad.setZero();
    }
}

json head_to_json(const HeadSpec& h) {
    json j;
    j["key"] = h.key();
    j["kind"] = std::string(to_string(h.kind));
    j["alpha"] = h.alpha ? json(h.alpha->to_string()) : json(nullptr);
    j["hidden"] = h.hidden;
    j["leaky_slope"] = h.leaky_slope;
    j["weights"] = blob_name(h.key());
    return j;
}

HeadSpec head_from_json(const json& j) {
    HeadSpec h;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "enforced") {
        h.kind = HeadKind::Enforced;
    } else if (kind == "non_enforced") {
        h.kind = HeadKind::NonEnforced;
    } else {
        throw CheckpointError("unknown head kind '" + kind + "'");
    }
    if (!j.at("alpha").is_null()) {
        h.alpha = AspectRatio::parse(j.at("alpha").get<std::string>());
    }
    h.hidden = j.at("hidden").get<std::vector<int>>();
    h.leaky_slope = j.at("leaky_slope").get<double>();
    return h;
}

}  // namespace

void save_model(const CropModel& model, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& bb = model.backbone_spec();
    json cfg;
    cfg["format"] = kFormatTag;
    cfg["version"] = kCheckpointVersion;
    cfg["seed"] = model.seed();
    cfg["backbone"] = {{"name", bb.name},
                       {"channels", bb.channels},
                       {"pooling", std::string(to_string(bb.pooling))},
                       {"canvas_side", bb.canvas_side},
                       {"feature_dim", bb.feature_dim()},
                       {"weights", "backbone.bin"}};
    cfg["normalization"] = {{"mean", model.normalization().mean}, {"std", model.normalization().stddev}};
    cfg["heads"] = json::array();
    for (const auto& h : model.heads()) {
        cfg["heads"].push_back(head_to_json(h.spec()));
        write_blob(dir / blob_name(h.spec().key()), h.parameters());
    }
    write_blob(dir / "backbone.bin", model.backbone().parameters());
    std::ofstream out(dir / "config.json", std::ios::trunc);
    out << cfg.dump(2) << '\n';
    if (!out) {
        throw CheckpointError("cannot write " + (dir / "config.json").string());
    }
}

CropModel load_model(const std::filesystem::path& dir) {
    const auto cfg_path = dir / "config.json";
    std::ifstream in(cfg_path);
    if (!in) {
        throw CheckpointError("no checkpoint config at " + cfg_path.string());
    }
    json cfg;
    try {
        cfg = json::parse(in);
    } catch (const json::exception& e) {
        throw CheckpointError(cfg_path.string() + ": corrupt config (" + e.what() + ")");
    }
    try {
        if (cfg.value("format", std::string{}) != kFormatTag) {
            throw CheckpointError(cfg_path.string() + ": not an aspectcrop checkpoint");
        }
        const int version = cfg.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw CheckpointError(cfg_path.string() + ": unsupported checkpoint version " + std::to_string(version) +
                                  " (expected " + std::to_string(kCheckpointVersion) + ")");
        }
        if (!cfg.contains("heads") || !cfg["heads"].is_array() || cfg["heads"].empty()) {
            throw CheckpointError(cfg_path.string() + ": missing head section");
        }
        BackboneSpec bb;
        const auto& jb = cfg.at("backbone");
        bb.name = jb.at("name").get<std::string>();
        bb.channels = jb.at("channels").get<std::vector<int>>();
        bb.pooling = parse_pooling(jb.at("pooling").get<std::string>());
        bb.canvas_side = jb.at("canvas_side").get<int>();
        Normalization norm;
        norm.mean = cfg.at("normalization").at("mean").get<std::array<double, 3>>();
        norm.stddev = cfg.at("normalization").at("std").get<std::array<double, 3>>();

        std::vector<HeadSpec> heads;
        std::vector<std::string> blobs;
        for (const auto& jh : cfg["heads"]) {
            heads.push_back(head_from_json(jh));
            blobs.push_back(jh.at("weights").get<std::string>());
        }
        CropModel model(bb, heads, cfg.at("seed").get<std::uint64_t>(), norm);
        assign(read_blob(dir / jb.at("weights").get<std::string>()), model.backbone().parameters(), "backbone");
        for (std::size_t i = 0; i < heads.size(); ++i) {
            assign(read_blob(dir / blobs[i]), model.heads()[i].parameters(), heads[i].key());
        }
        return model;
    } catch (const json::exception& e) {
        throw CheckpointError(cfg_path.string() + ": malformed config (" + e.what() + ")");
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(cfg_path.string() + ": invalid config (" + e.what() + ")");
    }
}

}  // namespace aspectcrop
