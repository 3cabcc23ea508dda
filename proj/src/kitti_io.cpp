#include "detectrack/kitti_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <type_traits>

namespace detectrack {

namespace {

const std::array<const char*, 8> kClassNames = {"Car",    "Van",        "Truck",
                                                "Pedestrian", "Person_sitting", "Cyclist",
                                                "Tram",   "Misc"};

template <typename T>
T parse_number(const std::string& token, const std::string& source, int line_no,
               const char* field) {
  T value{};
  const char* begin = token.data();
  const char* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  bool finite = true;
  if constexpr (std::is_floating_point_v<T>) finite = std::isfinite(value);
  if (ec != std::errc() || ptr != end || !finite) {
    throw ParseError(source + ":" + std::to_string(line_no) + ": invalid " + field + " '" +
                     token + "'");
  }
  return value;
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace

int class_id_for(const std::string& type) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i) {
    if (type == kClassNames[i]) return static_cast<int>(i);
  }
  return static_cast<int>(kClassNames.size()) - 1;  // Misc
}

std::string class_name_for(int class_id) {
  if (class_id < 0 || class_id >= static_cast<int>(kClassNames.size())) return "Misc";
  return kClassNames[static_cast<std::size_t>(class_id)];
}

std::vector<KittiRecord> parse_kitti_tracking(std::istream& in, const std::string& source) {
  std::vector<KittiRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() != 17 && tok.size() != 18) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected 17 or 18 fields, got " +
                       std::to_string(tok.size()));
    }
    if (tok[2] == "DontCare") continue;
    KittiRecord r;
    r.frame = parse_number<int>(tok[0], source, line_no, "frame");
    r.track_id = parse_number<int>(tok[1], source, line_no, "track_id");
    r.type = tok[2];
    r.truncated = parse_number<double>(tok[3], source, line_no, "truncated");
    r.occluded = parse_number<double>(tok[4], source, line_no, "occluded");
    r.alpha = parse_number<double>(tok[5], source, line_no, "alpha");
    for (int k = 0; k < 4; ++k) r.bbox[k] = parse_number<double>(tok[6 + k], source, line_no, "bbox");
    r.h = parse_number<double>(tok[10], source, line_no, "h");
    r.w = parse_number<double>(tok[11], source, line_no, "w");
    r.l = parse_number<double>(tok[12], source, line_no, "l");
    r.x = parse_number<double>(tok[13], source, line_no, "x");
    r.y = parse_number<double>(tok[14], source, line_no, "y");
    r.z = parse_number<double>(tok[15], source, line_no, "z");
    r.rotation_y = parse_number<double>(tok[16], source, line_no, "rotation_y");
    if (tok.size() == 18) r.score = parse_number<double>(tok[17], source, line_no, "score");
    if (r.frame < 0) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": negative frame index");
    }
    records.push_back(std::move(r));
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const KittiRecord& a, const KittiRecord& b) { return a.frame < b.frame; });
  return records;
}

std::vector<KittiRecord> parse_kitti_tracking_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  return parse_kitti_tracking(in, path);
}

std::string format_kitti_record(const KittiRecord& r) {
  std::string out = std::to_string(r.frame) + ' ' + std::to_string(r.track_id) + ' ' + r.type;
  const double fields[] = {r.truncated, r.occluded, r.alpha,   r.bbox[0], r.bbox[1],
                           r.bbox[2],   r.bbox[3],  r.h,       r.w,       r.l,
                           r.x,         r.y,        r.z,       r.rotation_y};
  for (double v : fields) {
    out += ' ';
    out += format_double(v);
  }
  if (r.score) {
    out += ' ';
    out += format_double(*r.score);
  }
  return out;
}

void write_kitti(std::ostream& out, const std::vector<KittiRecord>& records) {
  for (const auto& r : records) out << format_kitti_record(r) << '\n';
}

void write_kitti_file(const std::string& path, const std::vector<KittiRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  write_kitti(out, records);
}

Box3D kitti_to_box(const KittiRecord& r) {
  const Eigen::Vector3d center(r.x, r.z, -r.y + r.h / 2);
  const Eigen::Vector3d dims(r.l, r.w, r.h);
  return Box3D(center, dims, -r.rotation_y, r.score.value_or(1.0), class_id_for(r.type));
}

KittiRecord box_to_kitti(const Box3D& box, int frame, int track_id, bool with_score) {
  KittiRecord r;
  r.frame = frame;
  r.track_id = track_id;
  r.type = class_name_for(box.class_id());
  r.truncated = -1;
  r.occluded = -1;
  r.h = box.height();
  r.w = box.width();
  r.l = box.length();
  r.x = box.center().x();
  r.z = box.center().y();
  r.y = box.height() / 2 - box.center().z();
  r.rotation_y = normalize_angle(-box.yaw());
  r.alpha = normalize_angle(r.rotation_y - std::atan2(r.x, r.z));
  if (with_score) r.score = box.score();
  return r;
}

SequenceObjects records_to_sequence(const std::vector<KittiRecord>& records, int num_frames) {
  SequenceObjects seq(static_cast<std::size_t>(std::max(num_frames, 0)));
  for (const auto& r : records) {
    if (r.frame >= num_frames) {
      throw ParseError("record frame " + std::to_string(r.frame) + " beyond sequence length " +
                       std::to_string(num_frames));
    }
    seq[static_cast<std::size_t>(r.frame)].push_back({r.track_id, kitti_to_box(r)});
  }
  return seq;
}

}  // namespace detectrack
