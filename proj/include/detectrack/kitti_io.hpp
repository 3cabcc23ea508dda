#pragma once

// KITTI tracking label / result files.
//
// Line layout (space separated):
//   frame track_id type truncated occluded alpha
//   bbox_left bbox_top bbox_right bbox_bottom h w l x y z rotation_y [score]
// Coordinates are in the KITTI camera frame (x right, y down, z forward,
// location at the bottom face center). kitti_to_box / box_to_kitti convert to
// the ground-plane frame used everywhere else: (x, z_cam, -y_cam + h/2) with
// yaw = -rotation_y.

#include "detectrack/geometry.hpp"
#include "detectrack/metrics.hpp"
#include "detectrack/types.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace detectrack {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KittiRecord {
  int frame = 0;
  int track_id = -1;
  std::string type = "Car";
  double truncated = 0;
  double occluded = 0;
  double alpha = -10;
  double bbox[4] = {-1, -1, -1, -1};
  double h = 0, w = 0, l = 0;
  double x = 0, y = 0, z = 0;
  double rotation_y = 0;
  std::optional<double> score;

  bool operator==(const KittiRecord&) const = default;
};

int class_id_for(const std::string& type);
std::string class_name_for(int class_id);

// Parses every line; DontCare lines are dropped and records are stably sorted
// by frame. Malformed lines raise ParseError naming the source and line.
std::vector<KittiRecord> parse_kitti_tracking(std::istream& in,
                                              const std::string& source = "<stream>");
std::vector<KittiRecord> parse_kitti_tracking_file(const std::string& path);

// Shortest round-trip decimal formatting for every numeric field.
std::string format_kitti_record(const KittiRecord& r);
void write_kitti(std::ostream& out, const std::vector<KittiRecord>& records);
void write_kitti_file(const std::string& path, const std::vector<KittiRecord>& records);

Box3D kitti_to_box(const KittiRecord& r);
// Result-format record for a tracked box (2D fields set to -1).
KittiRecord box_to_kitti(const Box3D& box, int frame, int track_id, bool with_score);

// Groups records into per-frame object lists covering frames [0, num_frames).
SequenceObjects records_to_sequence(const std::vector<KittiRecord>& records, int num_frames);

}  // namespace detectrack
