#pragma once

// Binary blob format shared by grids and field snapshots:
//
//   bytes 0..7   header length L, unsigned 64-bit little-endian
//   bytes 8..    L bytes of UTF-8 JSON
//   then         8-byte little-endian IEEE doubles, the arrays listed in
//                header["arrays"] concatenated in order
//
// The header carries gamma, extents, counts and grading; node coordinates
// and values travel as the trailing doubles.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "fracsig/error.hpp"
#include "fracsig/mesh.hpp"

namespace fracsig::io {

using json = nlohmann::json;

struct Blob {
    json header;
    std::vector<std::pair<std::string, std::vector<double>>> arrays;

    const std::vector<double>& array(const std::string& name) const {
        for (const auto& [n, a] : arrays)
            if (n == name) return a;
        throw Error("blob has no array '" + name + "'");
    }
    bool has(const std::string& name) const {
        for (const auto& [n, a] : arrays)
            if (n == name) return true;
        return false;
    }
};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

inline std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
    return v;
}

} // namespace detail

inline std::string encode(const Blob& blob) {
    json header = blob.header;
    json arrays = json::array();
    for (const auto& [name, a] : blob.arrays) arrays.push_back({{"name", name}, {"count", a.size()}});
    header["arrays"] = arrays;
    const std::string text = header.dump();
    std::string out;
    detail::put_u64(out, text.size());
    out += text;
    for (const auto& [name, a] : blob.arrays)
        for (double v : a) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
    return out;
}

inline Blob decode(const std::string& bytes) {
    if (bytes.size() < 8) throw Error("blob too short for header length");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint64_t len = detail::get_u64(p);
    if (len > bytes.size() - 8) throw Error("blob header length exceeds data");
    Blob blob;
    blob.header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(len));
    std::size_t off = 8 + len;
    for (const auto& a : blob.header.at("arrays")) {
        const std::size_t count = a.at("count").get<std::size_t>();
        if (off + 8 * count > bytes.size()) throw Error("blob truncated in array " + a.at("name").get<std::string>());
        std::vector<double> v(count);
        for (std::size_t k = 0; k < count; ++k) v[k] = std::bit_cast<double>(detail::get_u64(p + off + 8 * k));
        off += 8 * count;
        blob.arrays.emplace_back(a.at("name").get<std::string>(), std::move(v));
    }
    blob.header.erase("arrays");
    return blob;
}

inline json grid_header(const Grid& g) {
    const auto& s = g.spec();
    return {{"format", "fracsig-grid"},   {"version", 1},           {"gamma", s.gamma},
            {"x_extent", s.x_extent},     {"y_extent", s.y_extent}, {"nx", s.nx},
            {"ny", s.ny},                 {"grading", to_string(s.grading)}};
}

inline Blob grid_blob(const Grid& g) {
    Blob b;
    b.header = grid_header(g);
    b.arrays.emplace_back("x_nodes", g.x_nodes());
    b.arrays.emplace_back("y_nodes", g.y_nodes());
    return b;
}

/// Rebuilds the grid and checks the stored node arrays against it.
inline GridPtr grid_from_blob(const Blob& b) {
    GridSpec s;
    s.gamma = b.header.at("gamma").get<double>();
    s.x_extent = b.header.at("x_extent").get<double>();
    s.y_extent = b.header.at("y_extent").get<double>();
    s.nx = b.header.at("nx").get<int>();
    s.ny = b.header.at("ny").get<int>();
    s.grading = grading_from_string(b.header.at("grading").get<std::string>());
    auto g = build_grid(s);
    const auto& xs = b.array("x_nodes");
    const auto& ys = b.array("y_nodes");
    if (xs.size() != g->x_nodes().size() || ys.size() != g->y_nodes().size())
        throw Error("stored node arrays do not match the grid spec");
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (std::abs(xs[i] - g->x(static_cast<int>(i))) > 1e-12 * (1.0 + std::abs(xs[i])))
            throw Error("stored x nodes do not match the grid spec");
    for (std::size_t j = 0; j < ys.size(); ++j)
        if (std::abs(ys[j] - g->y(static_cast<int>(j))) > 1e-12 * (1.0 + std::abs(ys[j])))
            throw Error("stored y nodes do not match the grid spec");
    return g;
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "'");
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

inline void save_grid(const std::string& path, const Grid& g) { write_file(path, encode(grid_blob(g))); }
inline GridPtr load_grid(const std::string& path) { return grid_from_blob(decode(read_file(path))); }

} // namespace fracsig::io
