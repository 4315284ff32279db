#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skidsteer/simulate.hpp"

namespace skidsteer {

inline constexpr int kLogFormatVersion = 1;

struct LogHeader {
  int version = kLogFormatVersion;
  double encoder_rate = 100.0;
  double imu_rate = 200.0;
  double camera_rate = 10.0;
  double nominal_focal_px = kNominalFocalPx;
  double sigma_pixel_px = 0.6;
  std::uint64_t seed = 0;
  std::string profile = "general";
  SensorRig rig = SensorRig::default_rig();
};

struct StampedPose {
  double t = 0.0;
  Pose pose;
};

struct StampedXi {
  double t = 0.0;
  Vec5 xi = Vec5::Zero();
};

struct MeasurementLog {
  LogHeader header;
  std::vector<EncoderReading> encoders;
  std::vector<ImuReading> imu;
  std::vector<FeatureObservation> features;
  std::vector<StampedPose> ground_truth;
  std::vector<StampedXi> xi_truth;

  bool has_ground_truth() const { return !ground_truth.empty(); }
};

// Text layout: a header block of "key value..." lines closed by
// "end_header", then one record per line prefixed E (encoder), I (imu),
// F (feature), G (ground-truth pose), X (ground-truth xi). Numbers use the
// shortest round-trip representation.
std::string format_log(const MeasurementLog& log);
MeasurementLog parse_log(const std::string& text);

void write_log_file(const std::string& path, const MeasurementLog& log);
MeasurementLog read_log_file(const std::string& path);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace skidsteer
