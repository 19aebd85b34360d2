// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include "raw2raw/nnmap/model_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <map>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace raw2raw::nn {

using nlohmann::json;

namespace {

std::filesystem::path base_of(const std::filesystem::path &p)
{
    const auto ext = p.extension();
    if (ext == ".json" || ext == ".bin")
        return p.parent_path() / p.stem();
    return p;
}

struct NamedBuffer
{
    std::string name;
    std::vector<int> shape;
    const std::vector<float> *data;
};

void write_bundle(const json &header_in, const std::vector<NamedBuffer> &buffers, const std::filesystem::path &path)
{
    json header = header_in;
    json index = json::array();
    std::uint64_t offset = 0;
    for (const auto &b : buffers) {
        index.push_back({{"name", b.name}, {"shape", b.shape}, {"offset", offset}, {"count", b.data->size()}});
        offset += b.data->size();
    }
    header["dtype"] = "float32";
    header["byte_order"] = "little";
    header["tensors"] = index;

    if (auto dir = model_json_path(path).parent_path(); !dir.empty())
        std::filesystem::create_directories(dir);
    std::ofstream bin(model_bin_path(path), std::ios::binary);
    if (!bin)
        throw Error(ErrorCode::Io, "cannot write " + model_bin_path(path).string());
    for (const auto &b : buffers)
        for (float v : *b.data) {
            auto u = std::bit_cast<std::uint32_t>(v);
            const char bytes[4] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                                   static_cast<char>((u >> 16) & 0xff), static_cast<char>((u >> 24) & 0xff)};
            bin.write(bytes, 4);
        }
    if (!bin)
        throw Error(ErrorCode::Io, "write failed for " + model_bin_path(path).string());
    std::ofstream js(model_json_path(path));
    if (!js)
        throw Error(ErrorCode::Io, "cannot write " + model_json_path(path).string());
    js << header.dump(2) << '\n';
}

struct Bundle
{
    json header;
    std::vector<float> payload;
    std::map<std::string, std::pair<std::vector<int>, std::pair<std::uint64_t, std::uint64_t>>> index;

    std::vector<float> take(const std::string &name, const std::vector<int> &shape) const
    {
        auto it = index.find(name);
        if (it == index.end())
            throw Error(ErrorCode::Metadata, "model file lacks tensor '" + name + "'");
        if (it->second.first != shape)
            throw Error(ErrorCode::Arch, "tensor '" + name + "' has the wrong shape");
        const auto [off, count] = it->second.second;
        if (off + count > payload.size())
            throw Error(ErrorCode::CorruptPayload, "tensor '" + name + "' extends past the payload");
        return {payload.begin() + static_cast<std::ptrdiff_t>(off),
                payload.begin() + static_cast<std::ptrdiff_t>(off + count)};
    }
};

Bundle read_bundle(const std::filesystem::path &path)
{
    Bundle b;
    std::ifstream js(model_json_path(path));
    if (!js)
        throw Error(ErrorCode::Io, "cannot open " + model_json_path(path).string());
    try {
        b.header = json::parse(js);
        for (const auto &t : b.header.at("tensors"))
            b.index[t.at("name").get<std::string>()] = {
                t.at("shape").get<std::vector<int>>(),
                {t.at("offset").get<std::uint64_t>(), t.at("count").get<std::uint64_t>()}};
    } catch (const json::exception &e) {
        throw Error(ErrorCode::Metadata, std::string("malformed model descriptor: ") + e.what());
    }
    std::ifstream bin(model_bin_path(path), std::ios::binary);
    if (!bin)
        throw Error(ErrorCode::Io, "cannot open " + model_bin_path(path).string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
    if (bytes.size() % 4)
        throw Error(ErrorCode::CorruptPayload, "model payload size is not a multiple of 4 bytes");
    b.payload.resize(bytes.size() / 4);
    for (std::size_t i = 0; i < b.payload.size(); ++i) {
        const std::uint32_t u = bytes[4 * i] | (bytes[4 * i + 1] << 8) | (bytes[4 * i + 2] << 16) |
                                (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
        b.payload[i] = std::bit_cast<float>(u);
    }
    return b;
}

json model_header(const MappingModel &m)
{
    const auto &f = m.fingerprint;
    return {{"format", "raw2raw-model"},
            {"version", 1},
            {"arch",
             {{"in_channels", m.arch.in_channels},
              {"channels", m.arch.channels},
              {"skip_connections", m.arch.skip_connections}}},
            {"training_fingerprint",
             {{"seed", f.seed},
              {"epochs", f.epochs},
              {"loss_switches", {{"use_r", f.use_r}, {"use_a", f.use_a}, {"use_m", f.use_m}}}}}};
}

MappingModel model_from_bundle(const Bundle &b)
{
    ArchitectureSpec arch;
    TrainingFingerprint fp;
    try {
        const auto &a = b.header.at("arch");
        arch.in_channels = a.at("in_channels").get<int>();
        arch.channels = a.at("channels").get<std::vector<int>>();
        arch.skip_connections = a.at("skip_connections").get<bool>();
        if (b.header.contains("training_fingerprint")) {
            const auto &f = b.header.at("training_fingerprint");
            fp.seed = f.value("seed", std::uint64_t{0});
            fp.epochs = f.value("epochs", 0);
            if (f.contains("loss_switches")) {
                fp.use_r = f.at("loss_switches").value("use_r", true);
                fp.use_a = f.at("loss_switches").value("use_a", true);
                fp.use_m = f.at("loss_switches").value("use_m", true);
            }
        }
    } catch (const json::exception &e) {
        throw Error(ErrorCode::Metadata, std::string("malformed model descriptor: ") + e.what());
    }
    MappingModel m(arch);
    m.fingerprint = fp;
    for (auto *p : m.params()) {
        p->value = b.take(p->name, p->shape);
        for (float v : p->value)
            if (!std::isfinite(v))
                throw Error(ErrorCode::Numeric, "tensor '" + p->name + "' holds non-finite values");
    }
    return m;
}

std::vector<NamedBuffer> model_buffers(const MappingModel &m)
{
    std::vector<NamedBuffer> out;
    for (const auto *p : m.params())
        out.push_back({p->name, p->shape, &p->value});
    return out;
}

} // namespace

std::filesystem::path model_json_path(const std::filesystem::path &path)
{
    auto b = base_of(path);
    return b += ".json";
}

std::filesystem::path model_bin_path(const std::filesystem::path &path)
{
    auto b = base_of(path);
    return b += ".bin";
}

void save_model(const MappingModel &model, const std::filesystem::path &path)
{
    write_bundle(model_header(model), model_buffers(model), path);
}

MappingModel load_model(const std::filesystem::path &path)
{
    return model_from_bundle(read_bundle(path));
}

std::filesystem::path checkpoint_path(const std::filesystem::path &dir, int epoch)
{
    char name[32];
    std::snprintf(name, sizeof name, "checkpoint_epoch%04d", epoch);
    return dir / name;
}

void save_checkpoint(const Checkpoint &ck, const std::filesystem::path &path)
{
    json h = model_header(ck.model);
    h["checkpoint"] = {{"epoch", ck.epoch}, {"adam_step", ck.adam.step}};
    json log = json::array();
    for (const auto &e : ck.log)
        log.push_back({e.epoch, e.l_r, e.l_a, e.l_m, e.total});
    h["loss_log"] = log;
    auto buffers = model_buffers(ck.model);
    const auto params = ck.model.params();
    if (!ck.adam.m.empty()) {
        for (std::size_t k = 0; k < params.size(); ++k) {
            buffers.push_back({"adam.m." + params[k]->name, params[k]->shape, &ck.adam.m[k]});
            buffers.push_back({"adam.v." + params[k]->name, params[k]->shape, &ck.adam.v[k]});
        }
    }
    write_bundle(h, buffers, path);
}

Checkpoint load_checkpoint(const std::filesystem::path &path)
{
    const Bundle b = read_bundle(path);
    Checkpoint ck;
    ck.model = model_from_bundle(b);
    try {
        const auto &c = b.header.at("checkpoint");
        ck.epoch = c.at("epoch").get<int>();
        ck.adam.step = c.at("adam_step").get<long long>();
        for (const auto &row : b.header.at("loss_log"))
            ck.log.push_back({row.at(0).get<int>(), row.at(1).get<double>(), row.at(2).get<double>(),
                              row.at(3).get<double>(), row.at(4).get<double>()});
    } catch (const json::exception &e) {
        throw Error(ErrorCode::Metadata, std::string("not a checkpoint: ") + e.what());
    }
    if (ck.adam.step > 0)
        for (const auto *p : ck.model.params()) {
            ck.adam.m.push_back(b.take("adam.m." + p->name, p->shape));
            ck.adam.v.push_back(b.take("adam.v." + p->name, p->shape));
        }
    return ck;
}

} // namespace raw2raw::nn
