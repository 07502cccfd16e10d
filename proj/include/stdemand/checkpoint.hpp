#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stdemand/optimizer.hpp"
#include "stdemand/tensor.hpp"

namespace stdemand {

// Checkpoint layout: <path>.json holds {"params": {name: {"shape": [...],
// "offset": n}}} with offsets in elements; <path>.bin is the concatenated
// parameter data as little-endian IEEE-754 doubles in manifest order.

namespace detail {

inline void write_doubles_le(std::ofstream& os, const double* p, std::int64_t n) {
    // assumes a little-endian host, as everything this builds on does
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 8));
}

inline void read_doubles_le(std::ifstream& is, double* p, std::int64_t n) {
    is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * 8));
}

}  // namespace detail

inline void save_checkpoint(const ParameterSet& params, const std::string& path_prefix) {
    nlohmann::ordered_json manifest;
    manifest["format"] = "stdemand-checkpoint-v1";
    nlohmann::ordered_json entries;
    std::int64_t offset = 0;
    for (size_t i = 0; i < params.size(); ++i) {
        const Parameter& p = params[i];
        entries[p.name] = {{"shape", p.value.shape().dims()}, {"offset", offset}};
        offset += p.value.size();
    }
    manifest["params"] = entries;
    manifest["total_elements"] = offset;

    std::ofstream js(path_prefix + ".json");
    if (!js) throw std::runtime_error("cannot write " + path_prefix + ".json");
    js << manifest.dump(2) << "\n";

    std::ofstream bin(path_prefix + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot write " + path_prefix + ".bin");
    for (size_t i = 0; i < params.size(); ++i)
        detail::write_doubles_le(bin, params[i].value.data(), params[i].value.size());
}

/// Loads into an existing ParameterSet; every parameter must appear in the
/// manifest with a matching shape.
inline void load_checkpoint(ParameterSet& params, const std::string& path_prefix) {
    std::ifstream js(path_prefix + ".json");
    if (!js) throw std::runtime_error("cannot read " + path_prefix + ".json");
    nlohmann::json manifest = nlohmann::json::parse(js);
    const auto& entries = manifest.at("params");

    std::ifstream bin(path_prefix + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot read " + path_prefix + ".bin");

    for (size_t i = 0; i < params.size(); ++i) {
        Parameter& p = params[i];
        if (!entries.contains(p.name))
            throw std::runtime_error("checkpoint missing parameter " + p.name);
        const auto& e = entries.at(p.name);
        Shape s(e.at("shape").get<std::vector<int>>());
        if (s != p.value.shape())
            throw std::runtime_error("checkpoint shape mismatch for " + p.name + ": have " +
                                     p.value.shape().str() + ", file has " + s.str());
        std::int64_t off = e.at("offset").get<std::int64_t>();
        bin.seekg(off * 8);
        detail::read_doubles_le(bin, p.value.data(), p.value.size());
        if (!bin) throw std::runtime_error("checkpoint blob truncated at " + p.name);
    }
}

}  // namespace stdemand
