#include "bagreg/dataset_io.hpp"

#include "bagreg/errors.hpp"

#include <json.hpp>
#include <zlib.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <variant>

namespace bagreg {

namespace {

using nlohmann::json;

void append_number(std::string& out, double v) {
    if (!std::isfinite(v)) throw InvalidArgument("cannot serialize a non-finite value");
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    out.append(buf, res.ptr);
}

void append_string(std::string& out, const std::string& s) { out += json(s).dump(); }

std::string format_line(const Bag& bag) {
    std::string line = "{\"id\":";
    append_string(line, bag.id);
    if (bag.label) {
        line += ",\"y\":";
        append_number(line, *bag.label);
    }
    line += ",\"points\":[";
    for (Index r = 0; r < bag.points.rows(); ++r) {
        if (r) line += ',';
        line += '[';
        for (Index c = 0; c < bag.points.cols(); ++c) {
            if (c) line += ',';
            append_number(line, bag.points(r, c));
        }
        line += ']';
    }
    line += "]}";
    return line;
}

Bag parse_line(const std::string& text, std::size_t line_no, Index expected_dim) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!j.is_object()) throw DataError("record must be an object", line_no);
    Bag bag;
    if (!j.contains("id") || !j["id"].is_string()) throw DataError("missing string field \"id\"", line_no);
    bag.id = j["id"].get<std::string>();
    if (j.contains("y") && !j["y"].is_null()) {
        if (!j["y"].is_number()) throw DataError("field \"y\" must be a number", line_no);
        bag.label = j["y"].get<double>();
    }
    if (!j.contains("points") || !j["points"].is_array()) throw DataError("missing array field \"points\"", line_no);
    const auto& pts = j["points"];
    if (pts.empty()) throw DataError("bag must contain at least one point", line_no);
    if (!pts[0].is_array() || pts[0].empty()) throw DataError("each point must be a nonempty array", line_no);
    const Index p = static_cast<Index>(pts[0].size());
    if (expected_dim > 0 && p != expected_dim) {
        throw DataError("point dimension " + std::to_string(p) + " differs from " + std::to_string(expected_dim),
                        line_no);
    }
    bag.points.resize(static_cast<Index>(pts.size()), p);
    for (std::size_t r = 0; r < pts.size(); ++r) {
        const auto& row = pts[r];
        if (!row.is_array() || static_cast<Index>(row.size()) != p) {
            throw DataError("ragged point rows: point " + std::to_string(r) + " has inconsistent dimension", line_no);
        }
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (!row[c].is_number()) throw DataError("point coordinates must be numbers", line_no);
            bag.points(static_cast<Index>(r), static_cast<Index>(c)) = row[c].get<double>();
        }
    }
    return bag;
}

}  // namespace

void write_dataset(std::ostream& out, const BagDataset& data) {
    for (const auto& bag : data.bags) out << format_line(bag) << '\n';
}

void write_dataset(const std::string& path, const BagDataset& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    write_dataset(out, data);
    if (!out) throw Error("failed writing '" + path + "'");
}

BagDataset read_dataset(std::istream& in) {
    BagDataset data;
    std::string line;
    std::size_t line_no = 0;
    Index dim = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        data.bags.push_back(parse_line(line, line_no, dim));
        dim = data.bags.back().points.cols();
    }
    return data;
}

BagDataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset '" + path + "'");
    return read_dataset(in);
}

std::uint32_t file_crc32(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    uLong crc = crc32(0L, Z_NULL, 0);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto got = in.gcount();
        if (got > 0) crc = crc32(crc, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(got));
    }
    return static_cast<std::uint32_t>(crc);
}

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
    json j;
    j["format_version"] = manifest.format_version;
    j["generator"] = manifest.generator;
    j["p"] = manifest.dim;
    j["seed"] = manifest.seed;
    json splits = json::object();
    for (const auto& [name, e] : manifest.splits) {
        char hex[9];
        std::snprintf(hex, sizeof(hex), "%08x", e.crc32);
        splits[name] = {{"file", e.file}, {"count", e.count}, {"crc32", hex}};
    }
    j["splits"] = std::move(splits);
    j["parameters"] = manifest.parameters;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open manifest '" + path + "'");
    DatasetManifest m;
    try {
        const json j = json::parse(in);
        m.format_version = j.at("format_version").get<int>();
        if (m.format_version != 1) throw DataError("unsupported manifest version");
        m.generator = j.value("generator", "");
        m.dim = j.at("p").get<Index>();
        m.seed = j.value("seed", std::uint64_t{0});
        for (const auto& [name, e] : j.at("splits").items()) {
            SplitEntry entry;
            entry.file = e.at("file").get<std::string>();
            entry.count = e.at("count").get<std::size_t>();
            entry.crc32 = static_cast<std::uint32_t>(std::stoul(e.at("crc32").get<std::string>(), nullptr, 16));
            m.splits[name] = entry;
        }
        if (j.contains("parameters")) m.parameters = j.at("parameters").get<std::map<std::string, std::string>>();
    } catch (const json::exception& e) {
        throw DataError("malformed manifest '" + path + "': " + e.what());
    } catch (const std::logic_error& e) {
        throw DataError("malformed manifest '" + path + "': " + e.what());
    }
    return m;
}

DatasetManifest write_gamma_splits(const std::string& dir, const GammaSplits& splits, const GammaConfig& config) {
    std::filesystem::create_directories(dir);
    DatasetManifest m;
    m.generator = "gamma";
    m.dim = config.dim;
    m.seed = config.seed;
    auto num = [](double v) {
        std::string s;
        append_number(s, v);
        return s;
    };
    m.parameters["noise_sd"] = num(config.noise_sd);
    m.parameters["convention"] = config.convention == GammaConvention::Rate ? "rate" : "scale";
    m.parameters["label_lo"] = num(config.label_lo);
    m.parameters["label_hi"] = num(config.label_hi);
    if (const auto* f = std::get_if<FixedBagSize>(&config.bag_size)) {
        m.parameters["bag_size"] = std::to_string(f->n);
    } else {
        m.parameters["s5"] = num(std::get<MixedBagSizes>(config.bag_size).s5);
    }
    for (Split s : kAllSplits) {
        const std::string name = to_string(s);
        const std::string file = name + ".jsonl";
        const std::string path = (std::filesystem::path(dir) / file).string();
        write_dataset(path, splits.get(s));
        m.splits[name] = {file, splits.get(s).size(), file_crc32(path)};
    }
    write_manifest((std::filesystem::path(dir) / kManifestName).string(), m);
    return m;
}

BagDataset read_split(const std::string& dir, Split split) {
    const DatasetManifest m = read_manifest((std::filesystem::path(dir) / kManifestName).string());
    const std::string name = to_string(split);
    const auto it = m.splits.find(name);
    if (it == m.splits.end()) throw DataError("manifest in '" + dir + "' lists no " + name + " split");
    const std::string path = (std::filesystem::path(dir) / it->second.file).string();
    const std::uint32_t crc = file_crc32(path);
    if (crc != it->second.crc32) throw DataError("checksum mismatch for '" + path + "'");
    BagDataset data = read_dataset(path);
    if (data.size() != it->second.count) throw DataError("bag count of '" + path + "' does not match the manifest");
    return data;
}

}  // namespace bagreg
