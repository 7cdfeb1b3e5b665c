#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace polereloc {

/// Error categories; the CLI maps each one to a distinct exit code.
enum class ErrorKind {
  kInvalidArgument,
  kData,
  kIo,
  kConfig,
  kDegenerate,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

enum class LabelClass : std::uint8_t { kPole, kTrunk, kOther };

/// Semantic class of a LiDAR return. Only poles and trunks become landmarks;
/// everything else keeps its raw category id.
struct SemanticLabel {
  LabelClass cls = LabelClass::kOther;
  std::uint16_t category = 0;  // meaningful only for kOther

  static constexpr SemanticLabel Pole() { return {LabelClass::kPole, 0}; }
  static constexpr SemanticLabel Trunk() { return {LabelClass::kTrunk, 0}; }
  static constexpr SemanticLabel Other(std::uint16_t id) { return {LabelClass::kOther, id}; }

  constexpr bool is_landmark() const { return cls != LabelClass::kOther; }
  friend constexpr bool operator==(const SemanticLabel&, const SemanticLabel&) = default;
};

std::string to_string(SemanticLabel label);

struct LabeledPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  SemanticLabel label;

  Eigen::Vector3d position() const { return {x, y, z}; }
};

struct Frame {
  double timestamp = 0.0;
  std::vector<LabeledPoint> points;
};

using ClusterId = std::uint64_t;

}  // namespace polereloc
