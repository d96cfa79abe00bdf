#include "dasphys/datastore.hpp"

#include <zlib.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "dasphys/error.hpp"

namespace dasphys {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t frame_header_bytes = 32;

class ByteWriter {
 public:
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void text(const std::string& s) {
    u32(checked_u32(s.size(), "string"));
    raw(s.data(), s.size());
  }
  void crc() { u32(crc32_of(bytes_.data(), bytes_.size())); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

  static std::uint32_t checked_u32(std::size_t n, const char* what) {
    if (n > std::numeric_limits<std::uint32_t>::max()) {
      throw Error(ErrorKind::format, std::string(what) + " length " + std::to_string(n) + " exceeds u32");
    }
    return static_cast<std::uint32_t>(n);
  }
  static std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
    uLong c = crc32(0L, Z_NULL, 0);
    while (n > 0) {
      const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
      c = crc32(c, data, chunk);
      data += chunk;
      n -= chunk;
    }
    return static_cast<std::uint32_t>(c);
  }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::size_t end, const char* what)
      : bytes_(bytes), end_(end), what_(what) {}

  std::size_t offset() const { return pos_; }
  void need(std::size_t n) const {
    if (n > end_ - pos_) {
      throw Error(ErrorKind::format, std::string(what_) + " truncated at offset " + std::to_string(pos_) +
                                         " (need " + std::to_string(n) + " more bytes)");
    }
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string text() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void magic(const char* expected) {
    const std::size_t at = pos_;
    need(4);
    if (std::memcmp(bytes_.data() + pos_, expected, 4) != 0) {
      throw Error(ErrorKind::format, std::string(what_) + ": bad magic at offset " + std::to_string(at) +
                                         " (expected " + expected + ")");
    }
    pos_ += 4;
  }
  [[noreturn]] void fail(std::size_t at, const std::string& message) const {
    throw Error(ErrorKind::format, std::string(what_) + ": " + message + " at offset " + std::to_string(at));
  }

 private:
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
  const char* what_;
};

// Checks a trailing CRC32 and returns the length of the covered body.
std::size_t verify_crc(const std::vector<std::uint8_t>& bytes, std::size_t min_body, const char* what) {
  if (bytes.size() < min_body + 4) {
    throw Error(ErrorKind::format, std::string(what) + " truncated at offset " + std::to_string(bytes.size()) +
                                       " (file has " + std::to_string(bytes.size()) + " bytes)");
  }
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[body + i]) << (8 * i);
  const std::uint32_t actual = ByteWriter::crc32_of(bytes.data(), body);
  if (stored != actual) {
    throw Error(ErrorKind::checksum, std::string(what) + ": CRC32 mismatch (stored " + hex64(stored) +
                                         ", computed " + hex64(actual) + ")");
  }
  return body;
}

std::uint8_t axis_code(ColumnAxis a) { return a == ColumnAxis::space ? 0 : 1; }
std::uint8_t units_code(Units u) { return u == Units::phase_rad ? 0 : 1; }

}  // namespace

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t parse_hex64(const std::string& text) {
  if (text.empty() || text.size() > 16 || text.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos) {
    throw Error(ErrorKind::format, "'" + text + "' is not a 64-bit hex value");
  }
  return std::stoull(text, nullptr, 16);
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "write to '" + path.string() + "' failed");
}

std::vector<std::uint8_t> encode_frame(const DasFrame& frame) {
  ByteWriter w;
  w.raw("DASF", 4);
  w.u16(frame_format_version);
  w.u8(axis_code(frame.column_axis()));
  w.u8(units_code(frame.units()));
  w.u32(ByteWriter::checked_u32(frame.time_samples(), "time samples"));
  w.u32(ByteWriter::checked_u32(frame.channels(), "channels"));
  w.f64(frame.dt());
  w.f64(frame.spacing());
  for (double v : frame.data()) w.f64(v);
  w.crc();
  return w.take();
}

DasFrame decode_frame(const std::vector<std::uint8_t>& bytes) {
  {
    // Magic and size are checked before the CRC so that a wrong file type, an
    // empty file or a truncated one reports a format error rather than a checksum error.
    ByteReader head(bytes, bytes.size(), "frame file");
    head.magic("DASF");
    head.u16();
    head.u8();
    head.u8();
    const std::uint64_t t = head.u32(), s = head.u32();
    const std::uint64_t need = frame_header_bytes + 8 * t * s + 4;
    if (bytes.size() < need) {
      throw Error(ErrorKind::format, "frame file truncated at offset " + std::to_string(bytes.size()) + ": dimensions " +
                                         std::to_string(t) + "x" + std::to_string(s) + " at offset 8 need " +
                                         std::to_string(need) + " bytes");
    }
  }
  const std::size_t body = verify_crc(bytes, frame_header_bytes, "frame file");
  ByteReader r(bytes, body, "frame file");
  r.magic("DASF");
  const std::size_t version_at = r.offset();
  if (r.u16() != frame_format_version) r.fail(version_at, "unsupported version");
  const std::size_t axis_at = r.offset();
  const std::uint8_t axis = r.u8();
  if (axis > 1) r.fail(axis_at, "invalid axis code " + std::to_string(axis));
  const std::size_t units_at = r.offset();
  const std::uint8_t units = r.u8();
  if (units > 1) r.fail(units_at, "invalid units code " + std::to_string(units));
  const std::size_t dims_at = r.offset();
  const std::uint64_t t = r.u32();
  const std::uint64_t s = r.u32();
  const double dt = r.f64();
  const double spacing = r.f64();
  const std::uint64_t cells = t * s;  // both < 2^32, so no overflow in 64 bits
  if (cells > (body - frame_header_bytes) / 8 || cells * 8 != body - frame_header_bytes) {
    r.fail(dims_at, "dimensions " + std::to_string(t) + "x" + std::to_string(s) + " do not match the payload of " +
                        std::to_string(body - frame_header_bytes) + " bytes");
  }
  std::vector<double> data(cells);
  for (double& v : data) v = r.f64();
  try {
    return DasFrame(t, s, std::move(data), dt, axis == 0 ? ColumnAxis::space : ColumnAxis::frequency, spacing,
                    units == 0 ? Units::phase_rad : Units::energy_db);
  } catch (const Error& e) {
    r.fail(dims_at, std::string("invalid frame header (") + e.what() + ")");
  }
}

void write_frame(const fs::path& path, const DasFrame& frame) { write_bytes(path, encode_frame(frame)); }

DasFrame read_frame(const fs::path& path) {
  try {
    return decode_frame(read_bytes(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::io) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_model(const ModelBundle& model) {
  ByteWriter w;
  w.raw("DASM", 4);
  w.u16(model_format_version);
  w.u64(model.fingerprint());
  w.text(model.architecture);
  w.text(model.config.dump());
  w.u32(ByteWriter::checked_u32(model.parameters.size(), "parameter count"));
  for (const auto& p : model.parameters) {
    w.text(p.name);
    w.u32(ByteWriter::checked_u32(p.value.rank(), "rank"));
    for (std::size_t d : p.value.shape()) w.u64(d);
  }
  for (const auto& p : model.parameters) {
    for (double v : p.value.data()) w.f64(v);
  }
  w.crc();
  return w.take();
}

ModelBundle decode_model(const std::vector<std::uint8_t>& bytes) {
  {
    ByteReader head(bytes, bytes.size(), "model file");
    head.magic("DASM");
  }
  const std::size_t body = verify_crc(bytes, 4, "model file");
  ByteReader r(bytes, body, "model file");
  r.magic("DASM");
  const std::size_t version_at = r.offset();
  if (r.u16() != model_format_version) r.fail(version_at, "unsupported version");
  const std::uint64_t stored_fingerprint = r.u64();
  ModelBundle model;
  model.architecture = r.text();
  const std::size_t config_at = r.offset();
  const std::string config_text = r.text();
  try {
    model.config = nlohmann::json::parse(config_text);
  } catch (const nlohmann::json::exception& e) {
    r.fail(config_at, std::string("config is not valid JSON (") + e.what() + ")");
  }
  const std::uint32_t count = r.u32();
  std::vector<std::pair<std::string, ad::Shape>> table;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.text();
    const std::size_t rank_at = r.offset();
    const std::uint32_t rank = r.u32();
    if (rank > 8) r.fail(rank_at, "parameter rank " + std::to_string(rank) + " is implausible");
    ad::Shape shape;
    std::uint64_t cells = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const std::uint64_t d = r.u64();
      if (d != 0 && cells > (body / 8) / d) r.fail(rank_at, "parameter '" + name + "' dimensions overflow the file");
      cells *= d;
      shape.push_back(static_cast<std::size_t>(d));
    }
    table.emplace_back(std::move(name), std::move(shape));
  }
  for (auto& [name, shape] : table) {
    const std::size_t at = r.offset();
    const std::size_t n = ad::numel(shape);
    if (n > (body - at) / 8) r.fail(at, "payload of parameter '" + name + "' is truncated");
    std::vector<double> values(n);
    for (double& v : values) v = r.f64();
    model.parameters.push_back({name, ad::Tensor::from(shape, std::move(values), true)});
  }
  if (r.offset() != body) r.fail(r.offset(), "unexpected trailing bytes");
  if (model.fingerprint() != stored_fingerprint) {
    throw Error(ErrorKind::fingerprint, "model file fingerprint " + hex64(stored_fingerprint) +
                                            " does not match its contents (" + hex64(model.fingerprint()) + ")");
  }
  return model;
}

void save_model(const fs::path& path, const ModelBundle& model) { write_bytes(path, encode_model(model)); }

ModelBundle load_model(const fs::path& path) {
  try {
    return decode_model(read_bytes(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::io) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

ModelBundle load_model(const fs::path& path, std::uint64_t expected_fingerprint) {
  ModelBundle model = load_model(path);
  if (model.fingerprint() != expected_fingerprint) {
    throw Error(ErrorKind::fingerprint, path.string() + ": model fingerprint " + hex64(model.fingerprint()) +
                                            " differs from the expected " + hex64(expected_fingerprint));
  }
  return model;
}

namespace {

nlohmann::json entries_json(const Manifest& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"file", e.file}, {"label", e.label}, {"seed", e.seed}, {"event", e.event}, {"noise", e.noise}});
  }
  return entries;
}

nlohmann::json generator_json(const Manifest& m) {
  return {{"name", m.generator}, {"fingerprint", hex64(m.generator_fingerprint)}};
}

fs::path listed_path(const fs::path& dir, const ManifestEntry& e) {
  const fs::path rel(e.file);
  if (e.file.empty() || rel.is_absolute() || rel.has_parent_path()) {
    throw Error(ErrorKind::integrity, "manifest entry '" + e.file + "' must be a plain file name");
  }
  return dir / rel;
}

}  // namespace

std::uint64_t manifest_hash(const fs::path& dir, const Manifest& manifest) {
  const std::string meta = nlohmann::json{{"generator", generator_json(manifest)}, {"entries", entries_json(manifest)}}.dump();
  std::uint64_t h = fnv1a(meta.data(), meta.size());
  for (const auto& e : manifest.entries) {
    const fs::path p = listed_path(dir, e);
    if (!fs::exists(p)) throw Error(ErrorKind::integrity, "manifest lists missing file '" + e.file + "'");
    const auto bytes = read_bytes(p);
    h = fnv1a(bytes.data(), bytes.size(), h);
  }
  return h;
}

void write_manifest(const fs::path& dir, Manifest& manifest) {
  manifest.hash = manifest_hash(dir, manifest);
  const nlohmann::json doc = {{"format", "das-dataset"},
                              {"version", 1},
                              {"generator", generator_json(manifest)},
                              {"entries", entries_json(manifest)},
                              {"hash", hex64(manifest.hash)}};
  const std::string text = doc.dump(2) + "\n";
  write_bytes(dir / manifest_name, std::vector<std::uint8_t>(text.begin(), text.end()));
}

Manifest read_manifest(const fs::path& dir) {
  const auto bytes = read_bytes(dir / manifest_name);
  Manifest m;
  std::uint64_t stored = 0;
  try {
    const auto doc = nlohmann::json::parse(bytes.begin(), bytes.end());
    if (doc.at("format").get<std::string>() != "das-dataset" || doc.at("version").get<int>() != 1) {
      throw Error(ErrorKind::format, "unsupported manifest format");
    }
    m.generator = doc.at("generator").at("name").get<std::string>();
    m.generator_fingerprint = parse_hex64(doc.at("generator").at("fingerprint").get<std::string>());
    for (const auto& e : doc.at("entries")) {
      m.entries.push_back({e.at("file").get<std::string>(), e.at("label").get<std::string>(),
                           e.at("seed").get<std::uint64_t>(), e.at("event"), e.at("noise")});
    }
    stored = parse_hex64(doc.at("hash").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, (dir / manifest_name).string() + ": " + e.what());
  }
  m.hash = manifest_hash(dir, m);
  if (m.hash != stored) {
    throw Error(ErrorKind::integrity, (dir / manifest_name).string() + ": content hash " + hex64(m.hash) +
                                          " differs from the recorded " + hex64(stored));
  }
  for (const auto& e : m.entries) read_frame(listed_path(dir, e));
  return m;
}

Dataset load_dataset(const fs::path& dir) {
  Dataset d{read_manifest(dir), {}};
  for (const auto& e : d.manifest.entries) d.frames.push_back(read_frame(listed_path(dir, e)));
  return d;
}

void write_dataset(const fs::path& dir, Manifest manifest, const std::vector<DasFrame>& frames) {
  if (manifest.entries.size() != frames.size()) {
    throw Error(ErrorKind::dimension, "dataset has " + std::to_string(frames.size()) + " frames but " +
                                          std::to_string(manifest.entries.size()) + " entries");
  }
  fs::create_directories(dir);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05zu.dasf", i);
    manifest.entries[i].file = name;
    write_frame(dir / name, frames[i]);
  }
  write_manifest(dir, manifest);
}

}  // namespace dasphys
