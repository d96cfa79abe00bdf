#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dasphys/model.hpp"
#include "dasphys/signal.hpp"

namespace dasphys {

// Frame file, all fields little-endian:
//   0  "DASF"
//   4  u16 version (1)
//   6  u8 column axis (0 space, 1 frequency)
//   7  u8 units (0 phase_rad, 1 energy_db)
//   8  u32 T, 12 u32 S
//   16 f64 dt, 24 f64 spacing
//   32 T*S f64 row-major payload
//   then u32 CRC32 of every preceding byte.
constexpr std::uint16_t frame_format_version = 1;

std::vector<std::uint8_t> encode_frame(const DasFrame& frame);
DasFrame decode_frame(const std::vector<std::uint8_t>& bytes);
void write_frame(const std::filesystem::path& path, const DasFrame& frame);
DasFrame read_frame(const std::filesystem::path& path);

// Model file, little-endian:
//   "DASM", u16 version (1), u64 fingerprint,
//   u32 length + architecture text, u32 length + config JSON text,
//   u32 parameter count, then per parameter: u32 length + name, u32 rank, u64 dims,
//   then every payload as f64 in table order, then u32 CRC32 of every preceding byte.
constexpr std::uint16_t model_format_version = 1;

std::vector<std::uint8_t> encode_model(const ModelBundle& model);
ModelBundle decode_model(const std::vector<std::uint8_t>& bytes);
void save_model(const std::filesystem::path& path, const ModelBundle& model);
ModelBundle load_model(const std::filesystem::path& path);
// Also rejects a bundle whose fingerprint differs from `expected_fingerprint`.
ModelBundle load_model(const std::filesystem::path& path, std::uint64_t expected_fingerprint);

// Dataset directory: frame files plus `manifest.json`:
//   {"format": "das-dataset", "version": 1,
//    "generator": {"name": str, "fingerprint": hex},
//    "entries": [{"file", "label", "seed", "event", "noise"}],
//    "hash": hex}
// `hash` is FNV-1a over the canonical entries/generator JSON followed by the
// bytes of every listed file in order.
struct ManifestEntry {
  std::string file;  // relative to the dataset directory
  std::string label;
  std::uint64_t seed = 0;
  nlohmann::json event;  // event spec, or null for background frames
  nlohmann::json noise;  // noise / site parameters, or null
  bool operator==(const ManifestEntry& other) const = default;
};

struct Manifest {
  std::string generator;
  std::uint64_t generator_fingerprint = 0;
  std::vector<ManifestEntry> entries;
  std::uint64_t hash = 0;  // filled by write_manifest / read_manifest
};

inline constexpr const char* manifest_name = "manifest.json";

std::uint64_t manifest_hash(const std::filesystem::path& dir, const Manifest& manifest);
// Computes the hash, stores it in `manifest` and writes the document.
void write_manifest(const std::filesystem::path& dir, Manifest& manifest);
// Integrity error when a listed file is missing or the hash disagrees; frame files must parse.
Manifest read_manifest(const std::filesystem::path& dir);

struct Dataset {
  Manifest manifest;
  std::vector<DasFrame> frames;
};
Dataset load_dataset(const std::filesystem::path& dir);
// Writes frames as frame_NNNNN.dasf with matching entries and the manifest.
void write_dataset(const std::filesystem::path& dir, Manifest manifest, const std::vector<DasFrame>& frames);

std::string hex64(std::uint64_t value);
std::uint64_t parse_hex64(const std::string& text);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace dasphys
