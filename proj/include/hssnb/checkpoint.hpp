#ifndef HSSNB_CHECKPOINT_HPP
#define HSSNB_CHECKPOINT_HPP

// Model checkpoint file: a 16-byte magic/version tag ("HSSNBMDL" + u32
// version + u32 header length), a JSON header (architecture, seed, epoch)
// and all parameter tensors flat in declaration order as IEEE-754 64-bit
// little-endian. Round-trips bit-exactly.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>

#include <json.hpp>

#include "hssnb/dataset.hpp"
#include "hssnb/errors.hpp"
#include "hssnb/network.hpp"

namespace hssnb {

inline constexpr char kCheckpointMagic[8] = {'H', 'S', 'S', 'N', 'B', 'M', 'D', 'L'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline nlohmann::json architecture_to_json(const Architecture& a) {
    return nlohmann::json{
        {"window", a.window},
        {"spectral_depth", a.spectral_depth},
        {"classes", a.classes},
        {"conv3d_filters", a.conv3d_filters},
        {"conv3d_kernels", a.conv3d_kernels},
        {"conv2d_filters", a.conv2d_filters},
        {"conv2d_kernels", a.conv2d_kernels},
        {"lstm_hidden", a.lstm_hidden},
        {"dropout_rate", double(a.dropout_rate)},
        {"peepholes", a.peepholes},
    };
}

inline Architecture architecture_from_json(const nlohmann::json& j) {
    Architecture a;
    a.window = j.at("window").get<std::size_t>();
    a.spectral_depth = j.at("spectral_depth").get<std::size_t>();
    a.classes = j.at("classes").get<std::size_t>();
    a.conv3d_filters = j.at("conv3d_filters").get<std::array<std::size_t, 3>>();
    a.conv3d_kernels = j.at("conv3d_kernels").get<std::array<std::array<std::size_t, 3>, 3>>();
    a.conv2d_filters = j.at("conv2d_filters").get<std::array<std::size_t, 2>>();
    a.conv2d_kernels = j.at("conv2d_kernels").get<std::array<std::array<std::size_t, 2>, 2>>();
    a.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
    a.dropout_rate = Real(j.at("dropout_rate").get<double>());
    a.peepholes = j.at("peepholes").get<bool>();
    return a;
}

namespace detail {

inline void write_u32_le(std::ostream& os, std::uint32_t v) {
    const char b[4] = {char(v & 0xFF), char((v >> 8) & 0xFF), char((v >> 16) & 0xFF),
                       char((v >> 24) & 0xFF)};
    os.write(b, 4);
}

inline void write_f64_le(std::ostream& os, double v) {
    const auto u = std::bit_cast<std::uint64_t>(v);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char((u >> (8 * i)) & 0xFF);
    os.write(b, 8);
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const HssnbModel& model,
                            std::uint64_t seed, std::size_t epoch) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);

    nlohmann::json header = architecture_to_json(model.arch);
    header["seed"] = seed;
    header["epoch"] = epoch;
    const std::string header_str = header.dump();

    out.write(kCheckpointMagic, 8);
    detail::write_u32_le(out, kCheckpointVersion);
    detail::write_u32_le(out, std::uint32_t(header_str.size()));
    out.write(header_str.data(), std::streamsize(header_str.size()));

    for (const auto& [name, t] : parameter_tensors(model))
        for (std::size_t i = 0; i < t->size(); ++i)
            detail::write_f64_le(out, double((*t)[i]));
    if (!out) throw DataError("failed writing checkpoint: " + path);
}

struct Checkpoint {
    HssnbModel model;
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    const auto bytes = detail::read_file_bytes(path);
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
        throw DataError("not a checkpoint file: " + path);
    const std::uint32_t version = std::uint32_t(bytes[8]) | (std::uint32_t(bytes[9]) << 8) |
                                  (std::uint32_t(bytes[10]) << 16) |
                                  (std::uint32_t(bytes[11]) << 24);
    if (version != kCheckpointVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t header_len = std::uint32_t(bytes[12]) | (std::uint32_t(bytes[13]) << 8) |
                                     (std::uint32_t(bytes[14]) << 16) |
                                     (std::uint32_t(bytes[15]) << 24);
    if (bytes.size() < 16 + std::size_t(header_len))
        throw DataError("checkpoint truncated: " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + header_len);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed checkpoint header: ") + e.what());
    }

    Checkpoint ck;
    Rng init_rng(0);  // weights are overwritten below
    ck.model = build_model(architecture_from_json(header), init_rng);
    ck.seed = header.at("seed").get<std::uint64_t>();
    ck.epoch = header.at("epoch").get<std::size_t>();

    std::size_t offset = 16 + header_len;
    for (auto& [name, t] : parameter_tensors(ck.model)) {
        const std::size_t need = t->size() * 8;
        if (bytes.size() < offset + need)
            throw DataError("checkpoint truncated in tensor " + name);
        for (std::size_t i = 0; i < t->size(); ++i)
            (*t)[i] = Real(std::bit_cast<double>(detail::read_u64_le(bytes.data() + offset + 8 * i)));
        offset += need;
    }
    if (offset != bytes.size())
        throw DataError("checkpoint has " + std::to_string(bytes.size() - offset) +
                        " trailing bytes");
    return ck;
}

}  // namespace hssnb

#endif  // HSSNB_CHECKPOINT_HPP
