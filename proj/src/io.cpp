#include "polereloc/io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace polereloc {

namespace fs = std::filesystem;

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  return v;
}

void put_f32(std::string& out, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, sizeof v);
  put_u32(out, v);
}

float get_f32(std::string_view bytes, std::size_t offset) {
  const std::uint32_t v = get_u32(bytes, offset);
  float f;
  std::memcpy(&f, &v, sizeof f);
  return f;
}

void put_f64(std::string& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, sizeof v);
  put_u32(out, static_cast<std::uint32_t>(v));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

double get_f64(std::string_view bytes, std::size_t offset) {
  const std::uint64_t v = get_u32(bytes, offset) | (static_cast<std::uint64_t>(get_u32(bytes, offset + 4)) << 32);
  double d;
  std::memcpy(&d, &v, sizeof d);
  return d;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

// Splits on '\n'; a final line without terminator is kept.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

[[noreturn]] void fail_line(std::size_t line, const std::string& what) {
  throw Error(ErrorKind::kData, "line " + std::to_string(line) + ": " + what);
}

template <typename Int>
Int parse_int(std::string_view token) {
  Int value{};
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw Error(ErrorKind::kData, "invalid integer '" + std::string(token) + "'");
  }
  return value;
}

// Re-throws a token error with the line number attached.
template <typename F>
auto on_line(std::size_t line, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    fail_line(line, e.what());
  }
}

}  // namespace

SemanticLabel LabelDictionary::classify(std::uint32_t raw) const {
  const auto cls = static_cast<std::uint16_t>(raw & 0xffffU);
  if (std::find(pole_ids.begin(), pole_ids.end(), cls) != pole_ids.end()) return SemanticLabel::Pole();
  if (std::find(trunk_ids.begin(), trunk_ids.end(), cls) != trunk_ids.end()) return SemanticLabel::Trunk();
  return SemanticLabel::Other(cls);
}

std::uint32_t LabelDictionary::encode(SemanticLabel label) const {
  switch (label.cls) {
    case LabelClass::kPole:
      return pole_ids.front();
    case LabelClass::kTrunk:
      return trunk_ids.front();
    case LabelClass::kOther:
      break;
  }
  return label.category;
}

void LabelDictionary::validate() const {
  if (pole_ids.empty() || trunk_ids.empty()) throw Error(ErrorKind::kConfig, "label dictionary needs pole and trunk ids");
  for (std::uint16_t p : pole_ids) {
    if (std::find(trunk_ids.begin(), trunk_ids.end(), p) != trunk_ids.end()) {
      throw Error(ErrorKind::kConfig, "class id " + std::to_string(p) + " is both pole and trunk");
    }
  }
}

std::string encode_points(const std::vector<RawPoint>& points) {
  std::string out;
  out.reserve(points.size() * 16);
  for (const RawPoint& p : points) {
    put_f32(out, p.x);
    put_f32(out, p.y);
    put_f32(out, p.z);
    put_f32(out, p.intensity);
  }
  return out;
}

std::vector<RawPoint> decode_points(std::string_view bytes) {
  if (bytes.size() % 16 != 0) {
    throw Error(ErrorKind::kData, "point data is " + std::to_string(bytes.size()) +
                                      " bytes; trailing record at byte " + std::to_string(bytes.size() / 16 * 16) +
                                      " is incomplete");
  }
  std::vector<RawPoint> points(bytes.size() / 16);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::size_t o = 16 * i;
    points[i] = {get_f32(bytes, o), get_f32(bytes, o + 4), get_f32(bytes, o + 8), get_f32(bytes, o + 12)};
  }
  return points;
}

std::string encode_labels(const std::vector<std::uint32_t>& labels) {
  std::string out;
  out.reserve(labels.size() * 4);
  for (std::uint32_t l : labels) put_u32(out, l);
  return out;
}

std::vector<std::uint32_t> decode_labels(std::string_view bytes) {
  if (bytes.size() % 4 != 0) {
    throw Error(ErrorKind::kData, "label data is " + std::to_string(bytes.size()) + " bytes; trailing record at byte " +
                                      std::to_string(bytes.size() / 4 * 4) + " is incomplete");
  }
  std::vector<std::uint32_t> labels(bytes.size() / 4);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = get_u32(bytes, 4 * i);
  return labels;
}

Frame assemble_frame(const std::vector<RawPoint>& points, const std::vector<std::uint32_t>& labels,
                     const LabelDictionary& dict, double timestamp) {
  if (points.size() != labels.size()) {
    throw Error(ErrorKind::kData, std::to_string(points.size()) + " points but " + std::to_string(labels.size()) +
                                      " labels (label byte offset " + std::to_string(4 * labels.size()) + ")");
  }
  Frame frame;
  frame.timestamp = timestamp;
  frame.points.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const RawPoint& p = points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw Error(ErrorKind::kData, "non-finite point at byte " + std::to_string(16 * i));
    }
    frame.points.push_back({p.x, p.y, p.z, dict.classify(labels[i])});
  }
  return frame;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::kIo, "read error on " + path.string());
  return std::move(ss).str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "write error on " + path.string());
}

Frame load_frame(const fs::path& points_path, const fs::path& labels_path, const LabelDictionary& dict,
                 double timestamp) {
  try {
    return assemble_frame(decode_points(read_file(points_path)), decode_labels(read_file(labels_path)), dict,
                          timestamp);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kData) throw;
    throw Error(ErrorKind::kData, points_path.string() + ": " + e.what());
  }
}

void save_frame(const fs::path& points_path, const fs::path& labels_path, const Frame& frame,
                const LabelDictionary& dict) {
  std::vector<RawPoint> points;
  std::vector<std::uint32_t> labels;
  points.reserve(frame.points.size());
  labels.reserve(frame.points.size());
  for (const LabeledPoint& p : frame.points) {
    points.push_back({static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.z), 0.0F});
    labels.push_back(dict.encode(p.label));
  }
  write_file(points_path, encode_points(points));
  write_file(labels_path, encode_labels(labels));
}

PoseRecord PoseRecord::From(const StampedPose& pose) {
  return {pose.timestamp, pose.pose.translation(), pose.pose.quaternion()};
}

std::string format_double(double value) {
  std::array<char, 64> buf;
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw Error(ErrorKind::kInvalidArgument, "cannot format number");
  return std::string(buf.data(), ptr);
}

double parse_double(std::string_view token) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value)) {
    throw Error(ErrorKind::kData, "invalid number '" + std::string(token) + "'");
  }
  return value;
}

std::string format_poses(const std::vector<PoseRecord>& poses) {
  std::string out;
  for (const PoseRecord& p : poses) {
    const double fields[] = {p.timestamp,     p.translation.x(), p.translation.y(), p.translation.z(),
                             p.rotation.x(), p.rotation.y(),    p.rotation.z(),    p.rotation.w()};
    for (std::size_t i = 0; i < 8; ++i) {
      if (i > 0) out.push_back(' ');
      out += format_double(fields[i]);
    }
    out.push_back('\n');
  }
  return out;
}

std::vector<PoseRecord> parse_poses(std::string_view text) {
  std::vector<PoseRecord> poses;
  const auto lines = split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto tokens = split_ws(lines[n]);
    if (tokens.empty() || tokens.front().front() == '#') continue;
    if (tokens.size() != 8) fail_line(n + 1, "expected 8 fields, found " + std::to_string(tokens.size()));
    std::array<double, 8> v{};
    for (std::size_t i = 0; i < 8; ++i) v[i] = on_line(n + 1, [&] { return parse_double(tokens[i]); });
    PoseRecord rec;
    rec.timestamp = v[0];
    rec.translation = {v[1], v[2], v[3]};
    rec.rotation = Eigen::Quaterniond(v[7], v[4], v[5], v[6]);
    if (std::abs(rec.rotation.norm() - 1.0) > 1e-6) fail_line(n + 1, "quaternion is not unit-norm");
    poses.push_back(rec);
  }
  return poses;
}

std::vector<PoseRecord> load_poses(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_poses(text);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void save_poses(const fs::path& path, const std::vector<PoseRecord>& poses) { write_file(path, format_poses(poses)); }

std::vector<StampedPose> to_stamped(const std::vector<PoseRecord>& records) {
  std::vector<StampedPose> out;
  out.reserve(records.size());
  for (const PoseRecord& r : records) out.push_back({r.timestamp, r.pose()});
  return out;
}

std::vector<PoseRecord> to_records(const std::vector<StampedPose>& poses) {
  std::vector<PoseRecord> out;
  out.reserve(poses.size());
  for (const StampedPose& p : poses) out.push_back(PoseRecord::From(p));
  return out;
}

namespace {

std::string_view label_token(SemanticLabel label) {
  switch (label.cls) {
    case LabelClass::kPole:
      return "pole";
    case LabelClass::kTrunk:
      return "trunk";
    case LabelClass::kOther:
      break;
  }
  throw Error(ErrorKind::kInvalidArgument, "map cluster with non-landmark label " + to_string(label));
}

SemanticLabel parse_label_token(std::string_view token) {
  if (token == "pole") return SemanticLabel::Pole();
  if (token == "trunk") return SemanticLabel::Trunk();
  throw Error(ErrorKind::kData, "unknown cluster label '" + std::string(token) + "'");
}

void expect_tokens(const std::vector<std::string_view>& tokens, std::size_t count, std::string_view keyword,
                   std::size_t line) {
  if (tokens.empty() || tokens.front() != keyword) fail_line(line, "expected '" + std::string(keyword) + "'");
  if (tokens.size() != count) fail_line(line, "malformed '" + std::string(keyword) + "' record");
}

}  // namespace

EncodedMap encode_map(const ClusterMap& map, const LabelDictionary& dict) {
  EncodedMap out;
  std::string& t = out.text;
  t += "polemap " + std::to_string(kMapFormatVersion) + "\n";
  for (std::uint16_t id : dict.pole_ids) t += "label pole " + std::to_string(id) + "\n";
  for (std::uint16_t id : dict.trunk_ids) t += "label trunk " + std::to_string(id) + "\n";
  t += "next_id " + std::to_string(map.next_id()) + "\n";
  t += "clusters " + std::to_string(map.size()) + "\n";
  for (const auto& [id, c] : map) {
    t += "cluster " + std::to_string(id) + " " + std::string(label_token(c.label));
    for (double v : {c.centroid3d.x(), c.centroid3d.y(), c.centroid3d.z(), c.centroid2d.x(), c.centroid2d.y()}) {
      t += " " + format_double(v);
    }
    t += " " + std::to_string(c.point_count) + "\n";
    for (const LabeledPoint& p : c.points) {
      put_f64(out.points, p.x);
      put_f64(out.points, p.y);
      put_f64(out.points, p.z);
    }
  }
  t += "end\n";
  return out;
}

ClusterMap decode_map(std::string_view text, const std::optional<std::string_view>& points) {
  const auto lines = split_lines(text);
  std::size_t n = 0;
  auto next = [&]() -> std::vector<std::string_view> {
    if (n >= lines.size()) fail_line(n + 1, "unexpected end of map file");
    return split_ws(lines[n++]);
  };

  auto header = next();
  expect_tokens(header, 2, "polemap", n);
  const int version = on_line(n, [&] { return parse_int<int>(header[1]); });
  if (version != kMapFormatVersion) {
    throw Error(ErrorKind::kData, "unsupported map format version " + std::to_string(version));
  }

  auto tokens = next();
  while (!tokens.empty() && tokens.front() == "label") {
    if (tokens.size() != 3 || (tokens[1] != "pole" && tokens[1] != "trunk")) fail_line(n, "malformed label record");
    on_line(n, [&] { return parse_int<std::uint16_t>(tokens[2]); });
    tokens = next();
  }
  expect_tokens(tokens, 2, "next_id", n);
  const auto next_id = on_line(n, [&] { return parse_int<ClusterId>(tokens[1]); });
  tokens = next();
  expect_tokens(tokens, 2, "clusters", n);
  const auto count = on_line(n, [&] { return parse_int<std::size_t>(tokens[1]); });

  ClusterMap map;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < count; ++i) {
    tokens = next();
    expect_tokens(tokens, 9, "cluster", n);
    Cluster c;
    on_line(n, [&] {
      c.id = parse_int<ClusterId>(tokens[1]);
      c.label = parse_label_token(tokens[2]);
      c.centroid3d = {parse_double(tokens[3]), parse_double(tokens[4]), parse_double(tokens[5])};
      c.centroid2d = {parse_double(tokens[6]), parse_double(tokens[7])};
      c.point_count = parse_int<std::size_t>(tokens[8]);
      if (c.centroid2d != c.centroid3d.head<2>()) throw Error(ErrorKind::kData, "2D centroid is not the projection");
      if (c.point_count == 0) throw Error(ErrorKind::kData, "cluster without points");
      if (map.contains(c.id)) throw Error(ErrorKind::kData, "duplicate cluster id " + std::to_string(c.id));
      return 0;
    });
    if (points) {
      const std::size_t bytes = 24 * c.point_count;
      if (offset + bytes > points->size()) {
        throw Error(ErrorKind::kData, "point sidecar ends at byte " + std::to_string(points->size()) +
                                          " inside cluster " + std::to_string(c.id));
      }
      c.points.reserve(c.point_count);
      for (std::size_t k = 0; k < c.point_count; ++k, offset += 24) {
        c.points.push_back({get_f64(*points, offset), get_f64(*points, offset + 8), get_f64(*points, offset + 16),
                            c.label});
      }
    }
    map.insert_with_id(std::move(c));
  }
  tokens = next();
  expect_tokens(tokens, 1, "end", n);
  for (; n < lines.size(); ++n) {
    if (!split_ws(lines[n]).empty()) fail_line(n + 1, "trailing data after 'end'");
  }
  if (points && offset != points->size()) {
    throw Error(ErrorKind::kData, "point sidecar has trailing data at byte " + std::to_string(offset));
  }
  on_line(n, [&] {
    map.set_next_id(next_id);
    return 0;
  });
  return map;
}

void save_map(const ClusterMap& map, const fs::path& path, const LabelDictionary& dict, bool with_points) {
  const EncodedMap encoded = encode_map(map, dict);
  write_file(path, encoded.text);
  fs::path sidecar = path;
  sidecar += ".pts";
  if (with_points) {
    write_file(sidecar, encoded.points);
  } else {
    std::error_code ec;
    fs::remove(sidecar, ec);
  }
}

ClusterMap load_map(const fs::path& path) {
  const std::string text = read_file(path);
  fs::path sidecar = path;
  sidecar += ".pts";
  std::optional<std::string> points;
  if (fs::exists(sidecar)) points = read_file(sidecar);
  try {
    return points ? decode_map(text, std::string_view(*points)) : decode_map(text);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

fs::path frame_points_path(const fs::path& dir, std::size_t index) {
  std::ostringstream name;
  name << std::setw(6) << std::setfill('0') << index << ".bin";
  return dir / "velodyne" / name.str();
}

fs::path frame_labels_path(const fs::path& dir, std::size_t index) {
  std::ostringstream name;
  name << std::setw(6) << std::setfill('0') << index << ".label";
  return dir / "labels" / name.str();
}

void save_dataset(const fs::path& dir, const Dataset& data, const LabelDictionary& dict) {
  if (data.frames.size() != data.poses.size()) {
    throw Error(ErrorKind::kInvalidArgument, "dataset needs one pose per frame");
  }
  if (!data.odometry.empty() && data.odometry.size() != data.frames.size()) {
    throw Error(ErrorKind::kInvalidArgument, "dataset needs one odometry pose per frame");
  }
  std::error_code ec;
  fs::create_directories(dir / "velodyne", ec);
  fs::create_directories(dir / "labels", ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < data.frames.size(); ++i) {
    save_frame(frame_points_path(dir, i), frame_labels_path(dir, i), data.frames[i], dict);
  }
  save_poses(dir / "poses.txt", data.poses);
  if (!data.odometry.empty()) {
    save_poses(dir / "odometry.txt", data.odometry);
  } else {
    fs::remove(dir / "odometry.txt", ec);
  }
}

std::size_t count_frames(const fs::path& dir) {
  if (!fs::is_directory(dir / "velodyne")) throw Error(ErrorKind::kIo, "missing " + (dir / "velodyne").string());
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(dir / "velodyne")) {
    if (entry.path().extension() == ".bin") ++files;
  }
  for (std::size_t i = 0; i < files; ++i) {
    if (!fs::exists(frame_points_path(dir, i))) {
      throw Error(ErrorKind::kData, "frame files are not numbered 0.." + std::to_string(files - 1));
    }
  }
  return files;
}

Frame load_dataset_frame(const fs::path& dir, std::size_t index, const LabelDictionary& dict, double timestamp) {
  return load_frame(frame_points_path(dir, index), frame_labels_path(dir, index), dict, timestamp);
}

Dataset load_dataset(const fs::path& dir, const LabelDictionary& dict) {
  Dataset data;
  data.poses = load_poses(dir / "poses.txt");
  const std::size_t frames = count_frames(dir);
  if (frames != data.poses.size()) {
    throw Error(ErrorKind::kData, std::to_string(frames) + " frames but " + std::to_string(data.poses.size()) +
                                      " poses in " + (dir / "poses.txt").string());
  }
  if (fs::exists(dir / "odometry.txt")) {
    data.odometry = load_poses(dir / "odometry.txt");
    if (data.odometry.size() != frames) throw Error(ErrorKind::kData, "odometry.txt needs one pose per frame");
  }
  data.frames.reserve(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    data.frames.push_back(load_dataset_frame(dir, i, dict, data.poses[i].timestamp));
  }
  return data;
}

}  // namespace polereloc
