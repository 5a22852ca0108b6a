#ifndef HSSNB_DATASET_HPP
#define HSSNB_DATASET_HPP

// Hyperspectral cube + label map, the on-disk dataset directory format, and
// a synthetic-scene generator for desk-scale experiments.
//
// Directory layout (bit-exact):
//   header.json  {"width","height","bands","classes","dtype":"f32le",
//                 "label_dtype":"u16le","name"}
//   cube.f32     width*height*bands IEEE-754 32-bit little-endian,
//                ordered (row, col, band), band fastest
//   labels.u16   width*height u16 little-endian, row-major, 0 = unlabeled

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hssnb/errors.hpp"
#include "hssnb/tensor.hpp"

namespace hssnb {

struct HsiCube {
    std::size_t width = 0;   // A, pixels per row
    std::size_t height = 0;  // B, rows
    std::size_t bands = 0;   // C
    Tensor values;           // [height][width][bands]

    Real at(std::size_t row, std::size_t col, std::size_t band) const {
        return values(row, col, band);
    }
    Real& at(std::size_t row, std::size_t col, std::size_t band) {
        return values(row, col, band);
    }
};

struct LabelMap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t class_count = 0;         // N; valid labels are 1..N, 0 = unlabeled
    std::vector<std::uint16_t> labels;   // row-major

    std::uint16_t label(std::size_t row, std::size_t col) const {
        return labels[row * width + col];
    }
    std::uint16_t& label(std::size_t row, std::size_t col) {
        return labels[row * width + col];
    }

    std::size_t labeled_count() const {
        std::size_t n = 0;
        for (auto l : labels) n += (l != 0);
        return n;
    }
};

namespace detail {

inline void write_u16_le(std::ostream& os, std::uint16_t v) {
    const char b[2] = {char(v & 0xFF), char((v >> 8) & 0xFF)};
    os.write(b, 2);
}

inline std::uint16_t read_u16_le(const unsigned char* p) {
    return std::uint16_t(p[0] | (std::uint16_t(p[1]) << 8));
}

inline void write_f32_le(std::ostream& os, float v) {
    const auto u = std::bit_cast<std::uint32_t>(v);
    const char b[4] = {char(u & 0xFF), char((u >> 8) & 0xFF), char((u >> 16) & 0xFF),
                       char((u >> 24) & 0xFF)};
    os.write(b, 4);
}

inline float read_f32_le(const unsigned char* p) {
    const std::uint32_t u = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
                            (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
    return std::bit_cast<float>(u);
}

inline void write_u64_le(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xFF);
    os.write(b, 8);
}

inline std::uint64_t read_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
    return v;
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("missing file: " + path.string());
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace detail

inline void save_dataset(const std::string& dir, const HsiCube& cube, const LabelMap& labels,
                         const std::string& name = "dataset") {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);

    nlohmann::json header = {
        {"width", cube.width},   {"height", cube.height},       {"bands", cube.bands},
        {"classes", labels.class_count}, {"dtype", "f32le"},    {"label_dtype", "u16le"},
        {"name", name},
    };
    {
        std::ofstream out(fs::path(dir) / "header.json");
        if (!out) throw DataError("cannot write header.json in " + dir);
        out << header.dump(2) << "\n";
    }
    {
        std::ofstream out(fs::path(dir) / "cube.f32", std::ios::binary);
        if (!out) throw DataError("cannot write cube.f32 in " + dir);
        for (std::size_t i = 0; i < cube.values.size(); ++i)
            detail::write_f32_le(out, static_cast<float>(cube.values[i]));
    }
    {
        std::ofstream out(fs::path(dir) / "labels.u16", std::ios::binary);
        if (!out) throw DataError("cannot write labels.u16 in " + dir);
        for (auto l : labels.labels) detail::write_u16_le(out, l);
    }
}

inline std::pair<HsiCube, LabelMap> load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path header_path = fs::path(dir) / "header.json";
    std::ifstream hin(header_path);
    if (!hin) throw DataError("missing file: " + header_path.string());

    nlohmann::json header;
    try {
        hin >> header;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed header.json in " + dir + ": " + e.what());
    }

    std::size_t width, height, bands, classes;
    std::string dtype, label_dtype;
    try {
        width = header.at("width").get<std::size_t>();
        height = header.at("height").get<std::size_t>();
        bands = header.at("bands").get<std::size_t>();
        classes = header.at("classes").get<std::size_t>();
        dtype = header.at("dtype").get<std::string>();
        label_dtype = header.at("label_dtype").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed header.json in " + dir + ": " + e.what());
    }
    if (width < 1 || height < 1 || bands < 1)
        throw DataError("malformed header.json in " + dir + ": non-positive dimensions");
    if (dtype != "f32le") throw DataError("unsupported cube dtype \"" + dtype + "\"");
    if (label_dtype != "u16le")
        throw DataError("unsupported label dtype \"" + label_dtype + "\"");

    const auto cube_bytes = detail::read_file_bytes(fs::path(dir) / "cube.f32");
    const std::size_t expect_cube = width * height * bands * 4;
    if (cube_bytes.size() != expect_cube)
        throw DataError("cube.f32 byte count mismatch: expected " + std::to_string(expect_cube) +
                        ", got " + std::to_string(cube_bytes.size()));

    const auto label_bytes = detail::read_file_bytes(fs::path(dir) / "labels.u16");
    const std::size_t expect_labels = width * height * 2;
    if (label_bytes.size() != expect_labels)
        throw DataError("labels.u16 byte count mismatch: expected " +
                        std::to_string(expect_labels) + ", got " +
                        std::to_string(label_bytes.size()));

    HsiCube cube;
    cube.width = width;
    cube.height = height;
    cube.bands = bands;
    cube.values = Tensor({height, width, bands});
    for (std::size_t i = 0; i < cube.values.size(); ++i)
        cube.values[i] = Real(detail::read_f32_le(cube_bytes.data() + 4 * i));

    LabelMap labels;
    labels.width = width;
    labels.height = height;
    labels.class_count = classes;
    labels.labels.resize(width * height);
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        const std::uint16_t l = detail::read_u16_le(label_bytes.data() + 2 * i);
        if (l > classes)
            throw DataError("label " + std::to_string(l) + " exceeds class count " +
                            std::to_string(classes));
        labels.labels[i] = l;
    }
    return {std::move(cube), std::move(labels)};
}

namespace detail {

// Smooth per-class spectral signature: a Gaussian bump whose center walks
// across the band axis with the class index, over a gentle sloped baseline.
inline Real class_signature(std::size_t cls, std::size_t band, std::size_t bands,
                            std::size_t classes) {
    const Real x = Real(band) / Real(bands > 1 ? bands - 1 : 1);
    const Real center = (Real(cls - 1) + Real(0.5)) / Real(classes);
    const Real width = Real(0.5) / Real(classes);
    const Real bump = std::exp(-(x - center) * (x - center) / (2 * width * width));
    const Real baseline = Real(0.2) + Real(0.1) * x;
    return baseline + bump;
}

}  // namespace detail

// Blocky label regions with one smooth signature per class plus Gaussian
// noise. Every generated value is rounded through float32 so cube data
// round-trips bit-exactly through the f32 on-disk format.
inline std::pair<HsiCube, LabelMap> synth_generate(std::size_t width, std::size_t height,
                                                   std::size_t bands, std::size_t classes,
                                                   Real noise_sigma, Rng& rng) {
    if (classes < 2) throw ParamError("synth_generate: classes must be >= 2");
    if (bands < classes) throw ParamError("synth_generate: bands must be >= classes");
    if (width < 1 || height < 1) throw ParamError("synth_generate: empty image");

    // Pick a block size small enough that every class gets at least one block.
    std::size_t block = 8;
    auto blocks_for = [&](std::size_t b) {
        return ((width + b - 1) / b) * ((height + b - 1) / b);
    };
    while (block > 1 && blocks_for(block) < classes) block /= 2;
    const std::size_t bx = (width + block - 1) / block;
    const std::size_t by = (height + block - 1) / block;
    const std::size_t nblocks = bx * by;
    if (nblocks < classes) throw ParamError("synth_generate: image too small for class count");

    // Round-robin class assignment over a shuffled block order: all classes
    // present, spatial layout random.
    std::vector<std::size_t> order(nblocks);
    for (std::size_t i = 0; i < nblocks; ++i) order[i] = i;
    for (std::size_t i = nblocks - 1; i > 0; --i) {
        const std::size_t j = rng.below(i + 1);
        std::swap(order[i], order[j]);
    }
    std::vector<std::uint16_t> block_class(nblocks);
    for (std::size_t i = 0; i < nblocks; ++i)
        block_class[order[i]] = std::uint16_t(1 + (i % classes));

    LabelMap labels;
    labels.width = width;
    labels.height = height;
    labels.class_count = classes;
    labels.labels.resize(width * height);

    HsiCube cube;
    cube.width = width;
    cube.height = height;
    cube.bands = bands;
    cube.values = Tensor({height, width, bands});

    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            const std::size_t bidx = (r / block) * bx + (c / block);
            const std::uint16_t cls = block_class[bidx];
            labels.label(r, c) = cls;
            for (std::size_t b = 0; b < bands; ++b) {
                Real v = detail::class_signature(cls, b, bands, classes);
                if (noise_sigma > 0) v += noise_sigma * rng.normal();
                cube.at(r, c, b) = Real(static_cast<float>(v));
            }
        }
    }
    return {std::move(cube), std::move(labels)};
}

}  // namespace hssnb

#endif  // HSSNB_DATASET_HPP
