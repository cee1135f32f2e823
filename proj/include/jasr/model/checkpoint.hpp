#pragma once

#include <jasr/core/error.hpp>
#include <jasr/model/jasrnet.hpp>
#include <jasr/nn/adam.hpp>

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <cstdio>
#include <iterator>
#include <string>
#include <unordered_map>
#include <vector>

namespace jasr {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

/// Container layout:
///
///     "JASRNET-CKPT-1\n"
///     u64 little-endian header length
///     JSON header: format, config, epoch, extra, tensors [{name, shape, offset}], adam_steps
///     float32 payload (offsets counted in floats)
///
/// Parameter paths are canonical ("encoder.res0.conv1.weight"); optimizer moments
/// are stored as "adam.m/<path>" and "adam.v/<path>".
inline constexpr char kCheckpointMagic[] = "JASRNET-CKPT-1\n";

template <class T>
struct Checkpoint {
    Jasrnet<T> model;
    int epoch = 0;
    nlohmann::json extra;
    std::optional<nn::Adam<T>> optimizer;
};

template <class T>
void save_checkpoint(const std::string& path, const Jasrnet<T>& model, int epoch, const nn::Adam<T>* optimizer = nullptr,
                     const nlohmann::json& extra = nlohmann::json::object()) {
    nlohmann::json tensors = nlohmann::json::array();
    std::vector<float> payload;
    auto add = [&](const std::string& name, const Tensor<T>& t) {
        tensors.push_back({{"name", name}, {"shape", t.shape()}, {"offset", payload.size()}});
        for (T v : t.vec()) payload.push_back(static_cast<float>(v));
    };
    const auto params = model.parameters();
    for (const auto* p : params) add(p->name, p->value);
    std::uint64_t adam_steps = 0;
    if (optimizer && optimizer->steps() > 0) {
        adam_steps = optimizer->steps();
        for (std::size_t i = 0; i < params.size(); ++i) add("adam.m/" + params[i]->name, optimizer->first_moments()[i]);
        for (std::size_t i = 0; i < params.size(); ++i) add("adam.v/" + params[i]->name, optimizer->second_moments()[i]);
    }
    const nlohmann::json header{{"format", "JASRNET-CKPT-1"}, {"config", model.config()}, {"epoch", epoch},
                                {"extra", extra},             {"tensors", tensors},        {"adam_steps", adam_steps}};
    const std::string hdr = header.dump();
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw Error("cannot open '" + tmp + "' for writing");
        os.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
        const std::uint64_t len = hdr.size();
        os.write(reinterpret_cast<const char*>(&len), sizeof len);
        os.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
        os.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size() * sizeof(float)));
        if (!os) throw Error("failed writing checkpoint '" + tmp + "'");
    }
    std::rename(tmp.c_str(), path.c_str());
}

template <class T>
Checkpoint<T> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint '" + path + "'");
    char magic[sizeof(kCheckpointMagic) - 1];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
        throw ParseError("'" + path + "' is not a JASRNET-CKPT-1 checkpoint");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    std::string hdr(len, '\0');
    in.read(hdr.data(), static_cast<std::streamsize>(len));
    if (!in) throw ParseError("truncated checkpoint header in '" + path + "'");
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (raw.size() % sizeof(float)) throw ParseError("checkpoint payload is not a whole number of floats");
    std::vector<float> data(raw.size() / sizeof(float));
    std::memcpy(data.data(), raw.data(), raw.size());

    try {
        const nlohmann::json header = nlohmann::json::parse(hdr);
        Checkpoint<T> ck{Jasrnet<T>::structure_only(header.at("config").get<ModelConfig>()),
                         header.at("epoch").get<int>(), header.value("extra", nlohmann::json::object()), std::nullopt};
        std::unordered_map<std::string, Tensor<T>> tensors;
        for (const auto& e : header.at("tensors")) {
            Shape shape = e.at("shape").get<Shape>();
            const std::size_t off = e.at("offset").get<std::size_t>(), n = shape_size(shape);
            if (off + n > data.size()) throw ParseError("tensor '" + e.at("name").get<std::string>() + "' overruns the payload");
            Tensor<T> t(shape);
            for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<T>(data[off + i]);
            tensors.emplace(e.at("name").get<std::string>(), std::move(t));
        }
        auto take = [&](const std::string& name, const Shape& want) {
            auto it = tensors.find(name);
            if (it == tensors.end()) throw ParseError("checkpoint is missing tensor '" + name + "'");
            if (it->second.shape() != want)
                throw ParseError("tensor '" + name + "' has shape " + shape_str(it->second.shape()) + ", expected " +
                                 shape_str(want));
            return std::move(it->second);
        };
        auto params = ck.model.parameters();
        for (auto* p : params) p->value = take(p->name, p->value.shape());
        const auto steps = header.value("adam_steps", std::uint64_t{0});
        if (steps > 0) {
            std::vector<Tensor<T>> m, v;
            for (auto* p : params) m.push_back(take("adam.m/" + p->name, p->value.shape()));
            for (auto* p : params) v.push_back(take("adam.v/" + p->name, p->value.shape()));
            ck.optimizer.emplace();
            ck.optimizer->restore(std::move(m), std::move(v), steps);
        }
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad checkpoint header in '" + path + "': " + e.what());
    }
}

}  // namespace jasr
