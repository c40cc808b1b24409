#pragma once

#include "bagreg/datagen.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

namespace bagreg {

/// One bag per line: {"id": ..., "y": ... (optional), "points": [[...], ...]}.
/// Numbers are written with 17 significant digits so reading back is exact.
void write_dataset(std::ostream& out, const BagDataset& data);
void write_dataset(const std::string& path, const BagDataset& data);

/// Throws DataError naming the offending line.
BagDataset read_dataset(std::istream& in);
BagDataset read_dataset(const std::string& path);

struct SplitEntry {
    std::string file;
    std::size_t count = 0;
    std::uint32_t crc32 = 0;
};

struct DatasetManifest {
    int format_version = 1;
    std::string generator;
    Index dim = 0;
    std::uint64_t seed = 0;
    std::map<std::string, SplitEntry> splits;          ///< keyed by split name
    std::map<std::string, std::string> parameters;     ///< generator settings, echoed as text
};

std::uint32_t file_crc32(const std::string& path);

void write_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& path);

inline constexpr const char* kManifestName = "manifest.json";

/// Writes <split>.jsonl for the four splits plus the manifest into dir (created if needed).
DatasetManifest write_gamma_splits(const std::string& dir, const GammaSplits& splits, const GammaConfig& config);

/// Reads one split listed in dir's manifest after verifying its checksum.
BagDataset read_split(const std::string& dir, Split split);

}  // namespace bagreg
