#include "detectrack/sidecar.hpp"

#include "detectrack/kitti_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace detectrack {

namespace {

static_assert(std::endian::native == std::endian::little,
              "sidecar I/O assumes a little-endian host");

constexpr char kEmbeddingMagic[4] = {'D', 'T', 'E', 'M'};
constexpr char kMapMagic[4] = {'D', 'T', 'F', 'M'};

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw std::runtime_error(path + ": cannot open for writing");
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void f32(float v) { bytes(&v, 4); }
  void f64(double v) { bytes(&v, 8); }
  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error(path_ + ": write failed");
  }

 private:
  std::ofstream out_;
  std::string path_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw ParseError(path + ": cannot open file");
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw ParseError(path_ + ": truncated at byte offset " + std::to_string(offset_));
    }
    offset_ += n;
  }
  std::uint32_t u32() { std::uint32_t v; bytes(&v, 4); return v; }
  float f32() { float v; bytes(&v, 4); return v; }
  double f64() { double v; bytes(&v, 8); return v; }
  std::size_t offset() const { return offset_; }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(path_ + ": " + what + " (byte offset " + std::to_string(offset_) + ")");
  }

 private:
  std::ifstream in_;
  std::string path_;
  std::size_t offset_ = 0;
};

void read_header(Reader& r, const char (&magic)[4], std::uint32_t& dim, std::uint32_t& count) {
  char got[4];
  r.bytes(got, 4);
  if (std::memcmp(got, magic, 4) != 0) r.fail("bad magic");
  const std::uint32_t version = r.u32();
  if (version != kSidecarVersion) r.fail("unsupported version " + std::to_string(version));
  dim = r.u32();
  count = r.u32();
}

}  // namespace

void write_embeddings(const std::string& path, const EmbeddingSidecar& sidecar) {
  Writer w(path);
  w.bytes(kEmbeddingMagic, 4);
  w.u32(kSidecarVersion);
  w.u32(sidecar.dim);
  w.u32(static_cast<std::uint32_t>(sidecar.records.size()));
  for (const auto& rec : sidecar.records) {
    if (rec.values.size() != static_cast<Eigen::Index>(sidecar.dim)) {
      throw std::invalid_argument("write_embeddings: record dimension mismatch");
    }
    w.u32(rec.frame);
    w.u32(rec.detection_index);
    for (Eigen::Index i = 0; i < rec.values.size(); ++i) w.f32(rec.values(i));
  }
  w.finish();
}

EmbeddingSidecar read_embeddings(const std::string& path) {
  Reader r(path);
  EmbeddingSidecar out;
  std::uint32_t count = 0;
  read_header(r, kEmbeddingMagic, out.dim, count);
  out.records.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    EmbeddingRecord rec;
    rec.frame = r.u32();
    rec.detection_index = r.u32();
    rec.values.resize(out.dim);
    for (std::uint32_t i = 0; i < out.dim; ++i) rec.values(i) = r.f32();
    if (!rec.values.allFinite()) r.fail("non-finite embedding value");
    out.records.push_back(std::move(rec));
  }
  if (!r.at_end()) r.fail("trailing bytes after last record");
  return out;
}

void validate_embeddings(const EmbeddingSidecar& sidecar,
                         const std::vector<std::size_t>& detections_per_frame) {
  std::size_t expected = 0;
  for (auto n : detections_per_frame) expected += n;
  if (sidecar.records.size() != expected) {
    throw ParseError("embedding count " + std::to_string(sidecar.records.size()) +
                     " does not match detection count " + std::to_string(expected));
  }
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> seen;
  for (const auto& rec : sidecar.records) {
    if (rec.frame >= detections_per_frame.size() ||
        rec.detection_index >= detections_per_frame[rec.frame]) {
      throw ParseError("embedding key (" + std::to_string(rec.frame) + ", " +
                       std::to_string(rec.detection_index) + ") has no detection");
    }
    if (++seen[{rec.frame, rec.detection_index}] > 1) {
      throw ParseError("duplicate embedding for (" + std::to_string(rec.frame) + ", " +
                       std::to_string(rec.detection_index) + ")");
    }
  }
}

void write_feature_maps(const std::string& path, const std::vector<StoredFeatureMap>& maps) {
  const std::uint32_t channels =
      maps.empty() ? 0 : static_cast<std::uint32_t>(maps.front().map.tensor.dimension(0));
  Writer w(path);
  w.bytes(kMapMagic, 4);
  w.u32(kSidecarVersion);
  w.u32(channels);
  w.u32(static_cast<std::uint32_t>(maps.size()));
  for (const auto& m : maps) {
    const auto& t = m.map.tensor;
    if (t.dimension(0) != static_cast<Eigen::Index>(channels)) {
      throw std::invalid_argument("write_feature_maps: channel count differs between maps");
    }
    w.u32(static_cast<std::uint32_t>(m.map.timestamp));
    w.u32(m.map.view == View::kBev ? 1u : 0u);
    w.u32(static_cast<std::uint32_t>(t.dimension(1)));
    w.u32(static_cast<std::uint32_t>(t.dimension(2)));
    w.f64(m.grid.origin_x);
    w.f64(m.grid.origin_y);
    w.f64(m.grid.cell_size);
    for (Eigen::Index i = 0; i < t.size(); ++i) w.f32(static_cast<float>(t.data()[i]));
  }
  w.finish();
}

std::vector<StoredFeatureMap> read_feature_maps(const std::string& path) {
  Reader r(path);
  std::uint32_t channels = 0, count = 0;
  read_header(r, kMapMagic, channels, count);
  std::vector<StoredFeatureMap> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    StoredFeatureMap m;
    m.map.timestamp = static_cast<int>(r.u32());
    const std::uint32_t view = r.u32();
    if (view > 1) r.fail("unknown view tag");
    m.map.view = view == 1 ? View::kBev : View::kCameraView;
    const std::uint32_t nx = r.u32(), ny = r.u32();
    m.grid.origin_x = r.f64();
    m.grid.origin_y = r.f64();
    m.grid.cell_size = r.f64();
    if (!(m.grid.cell_size > 0)) r.fail("cell size must be positive");
    m.map.tensor.resize(channels, nx, ny);
    for (Eigen::Index i = 0; i < m.map.tensor.size(); ++i) m.map.tensor.data()[i] = r.f32();
    out.push_back(std::move(m));
  }
  if (!r.at_end()) r.fail("trailing bytes after last map");
  return out;
}

}  // namespace detectrack
