#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "polereloc/cluster_map.hpp"
#include "polereloc/pose.hpp"
#include "polereloc/types.hpp"

namespace polereloc {

/// Raw class ids (lower 16 bits of a label word) that mean pole or trunk.
/// The first id of each list is the one written out.
struct LabelDictionary {
  std::vector<std::uint16_t> pole_ids{80};
  std::vector<std::uint16_t> trunk_ids{71};

  SemanticLabel classify(std::uint32_t raw) const;
  std::uint32_t encode(SemanticLabel label) const;
  void validate() const;
};

struct RawPoint {
  float x = 0.0F;
  float y = 0.0F;
  float z = 0.0F;
  float intensity = 0.0F;
};

std::string encode_points(const std::vector<RawPoint>& points);
/// 16 bytes per point, little-endian floats. Throws kData when the size is
/// not a multiple of 16.
std::vector<RawPoint> decode_points(std::string_view bytes);

std::string encode_labels(const std::vector<std::uint32_t>& labels);
std::vector<std::uint32_t> decode_labels(std::string_view bytes);

/// Pairs points with labels; the counts must agree.
Frame assemble_frame(const std::vector<RawPoint>& points, const std::vector<std::uint32_t>& labels,
                     const LabelDictionary& dict, double timestamp);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

Frame load_frame(const std::filesystem::path& points_path, const std::filesystem::path& labels_path,
                 const LabelDictionary& dict, double timestamp);
/// Coordinates are stored as 32-bit floats.
void save_frame(const std::filesystem::path& points_path, const std::filesystem::path& labels_path, const Frame& frame,
                const LabelDictionary& dict);

/// One line of a TUM trajectory: timestamp tx ty tz qx qy qz qw.
struct PoseRecord {
  double timestamp = 0.0;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();

  PoseSE3 pose() const { return {rotation, translation}; }
  static PoseRecord From(const StampedPose& pose);
};

/// Shortest round-trip decimal, so parse(format(x)) == x.
std::string format_double(double value);
double parse_double(std::string_view token);

std::string format_poses(const std::vector<PoseRecord>& poses);
/// Blank lines and lines starting with '#' are skipped. Errors name the line.
std::vector<PoseRecord> parse_poses(std::string_view text);

std::vector<PoseRecord> load_poses(const std::filesystem::path& path);
void save_poses(const std::filesystem::path& path, const std::vector<PoseRecord>& poses);
std::vector<StampedPose> to_stamped(const std::vector<PoseRecord>& records);
std::vector<PoseRecord> to_records(const std::vector<StampedPose>& poses);

inline constexpr int kMapFormatVersion = 1;

struct EncodedMap {
  std::string text;
  std::string points;  // binary sidecar: per cluster, point_count x 3 doubles
};

EncodedMap encode_map(const ClusterMap& map, const LabelDictionary& dict);
/// Without a sidecar the clusters carry centroids and counts but no points.
/// Nothing is returned unless the whole document decodes.
ClusterMap decode_map(std::string_view text, const std::optional<std::string_view>& points = std::nullopt);

/// Writes `path` and, when `with_points`, `path` + ".pts".
void save_map(const ClusterMap& map, const std::filesystem::path& path, const LabelDictionary& dict,
              bool with_points = true);
/// Reads the sidecar when it exists.
ClusterMap load_map(const std::filesystem::path& path);

/// DIR/velodyne/NNNNNN.bin, DIR/labels/NNNNNN.label, DIR/poses.txt (ground
/// truth, one line per frame) and optionally DIR/odometry.txt.
struct Dataset {
  std::vector<Frame> frames;
  std::vector<PoseRecord> poses;
  std::vector<PoseRecord> odometry;
};

std::filesystem::path frame_points_path(const std::filesystem::path& dir, std::size_t index);
std::filesystem::path frame_labels_path(const std::filesystem::path& dir, std::size_t index);

void save_dataset(const std::filesystem::path& dir, const Dataset& data, const LabelDictionary& dict);
Dataset load_dataset(const std::filesystem::path& dir, const LabelDictionary& dict);
/// Number of frames in DIR/velodyne; files must be numbered contiguously.
std::size_t count_frames(const std::filesystem::path& dir);
Frame load_dataset_frame(const std::filesystem::path& dir, std::size_t index, const LabelDictionary& dict,
                         double timestamp);

}  // namespace polereloc
