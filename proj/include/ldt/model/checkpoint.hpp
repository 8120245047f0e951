#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "ldt/model/transformer.hpp"

namespace ldt {

// Self-describing container: one JSON header line (config, vocabulary version,
// step counter, tensor directory), then each tensor's raw doubles in directory
// order, column-major, native byte order. Raw bytes round-trip bit-exactly.
inline void save_checkpoint(const Model& model, uint64_t vocab_version, long step,
                            const std::string& path) {
    nlohmann::ordered_json header;
    header["format"] = "ldt-checkpoint-v1";
    header["config"] = model.config();
    header["vocab_version"] = vocab_version;
    header["step"] = step;
    auto& tensors = header["tensors"] = nlohmann::ordered_json::array();
    for (const auto& p : model.store().all())
        tensors.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});

    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << header.dump() << '\n';
    for (const auto& p : model.store().all())
        out.write(reinterpret_cast<const char*>(p.value.data()),
                  std::streamsize(sizeof(double)) * p.value.size());
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

struct LoadedCheckpoint {
    Model model;
    uint64_t vocab_version = 0;
    long step = 0;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    std::string header_line;
    if (!std::getline(in, header_line)) throw std::runtime_error("checkpoint missing header: " + path);
    nlohmann::ordered_json header;
    try {
        header = nlohmann::ordered_json::parse(header_line);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("checkpoint header is not valid JSON: " + std::string(e.what()));
    }
    if (header.value("format", "") != "ldt-checkpoint-v1")
        throw std::runtime_error("unknown checkpoint format in " + path);

    ModelConfig config = header.at("config").get<ModelConfig>();
    LoadedCheckpoint out{Model(config, Model::Uninitialized{}),
                         header.at("vocab_version").get<uint64_t>(),
                         header.at("step").get<long>()};

    const auto& tensors = header.at("tensors");
    if (tensors.size() != out.model.store().size())
        throw std::runtime_error("checkpoint tensor count mismatch in " + path);
    for (size_t i = 0; i < tensors.size(); ++i) {
        auto& p = out.model.store().at(i);
        const auto& t = tensors[i];
        if (t.at("name").get<std::string>() != p.name ||
            t.at("rows").get<Eigen::Index>() != p.value.rows() ||
            t.at("cols").get<Eigen::Index>() != p.value.cols())
            throw std::runtime_error("checkpoint tensor directory mismatch at " + p.name);
        in.read(reinterpret_cast<char*>(p.value.data()),
                std::streamsize(sizeof(double)) * p.value.size());
        if (!in) throw std::runtime_error("checkpoint truncated at tensor " + p.name);
    }
    return out;
}

}  // namespace ldt
