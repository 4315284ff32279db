#include "skidsteer/log_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "skidsteer/errors.hpp"

namespace skidsteer {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

void put(std::string& out, double v) {
  out += ' ';
  out += format_double(v);
}

void put_pose(std::string& out, const Pose& p) {
  put(out, p.q.w());
  put(out, p.q.x());
  put(out, p.q.y());
  put(out, p.q.z());
  for (int i = 0; i < 3; ++i) put(out, p.p[i]);
}

class LineReader {
 public:
  LineReader(const std::string& line, int lineno) : line_(line), lineno_(lineno) {
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) toks_.push_back(tok);
  }
  std::size_t size() const { return toks_.size(); }
  const std::string& word(std::size_t i) const { return toks_.at(i); }
  void expect(std::size_t n) const {
    if (toks_.size() != n) fail("expected " + std::to_string(n) + " fields");
  }
  double num(std::size_t i) const {
    const std::string& s = toks_.at(i);
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail("bad number '" + s + "'");
    return v;
  }
  long integer(std::size_t i) const {
    const std::string& s = toks_.at(i);
    long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail("bad integer '" + s + "'");
    return v;
  }
  std::uint64_t u64(std::size_t i) const {
    const std::string& s = toks_.at(i);
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail("bad integer '" + s + "'");
    return v;
  }
  Pose pose(std::size_t i) const {
    Pose p;
    p.q = Quat(num(i), num(i + 1), num(i + 2), num(i + 3));
    p.p = Vec3(num(i + 4), num(i + 5), num(i + 6));
    return p;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCategory::LogParse, "line " + std::to_string(lineno_) + ": " + msg);
  }

 private:
  std::string line_;
  int lineno_;
  std::vector<std::string> toks_;
};

}  // namespace

std::string format_log(const MeasurementLog& log) {
  const LogHeader& h = log.header;
  std::string out;
  out += "skidsteer-log\n";
  out += "version " + std::to_string(h.version) + "\n";
  out += "encoder_rate";
  put(out, h.encoder_rate);
  out += "\nimu_rate";
  put(out, h.imu_rate);
  out += "\ncamera_rate";
  put(out, h.camera_rate);
  out += "\nnominal_focal_px";
  put(out, h.nominal_focal_px);
  out += "\nsigma_pixel_px";
  put(out, h.sigma_pixel_px);
  out += "\nseed " + std::to_string(h.seed);
  out += "\nprofile " + h.profile;
  out += "\nextrinsics_oc";
  put_pose(out, h.rig.extrinsics_OC);
  out += "\nextrinsics_oi";
  put_pose(out, h.rig.extrinsics_OI);
  out += "\ngravity";
  for (int i = 0; i < 3; ++i) put(out, h.rig.gravity[i]);
  out += "\nfov_half_angle";
  put(out, h.rig.fov_half_angle);
  out += "\nmax_range";
  put(out, h.rig.max_range);
  out += "\nmin_depth";
  put(out, h.rig.min_depth);
  out += "\nend_header\n";
  for (const auto& e : log.encoders) {
    out += 'E';
    put(out, e.t);
    put(out, e.o_l);
    put(out, e.o_r);
    out += '\n';
  }
  for (const auto& m : log.imu) {
    out += 'I';
    put(out, m.t);
    for (int i = 0; i < 3; ++i) put(out, m.gyro[i]);
    for (int i = 0; i < 3; ++i) put(out, m.accel[i]);
    out += '\n';
  }
  for (const auto& f : log.features) {
    out += 'F';
    put(out, f.frame_t);
    out += ' ' + std::to_string(f.frame_id) + ' ' + std::to_string(f.landmark_id);
    put(out, f.uv.x());
    put(out, f.uv.y());
    out += '\n';
  }
  for (const auto& g : log.ground_truth) {
    out += 'G';
    put(out, g.t);
    put_pose(out, g.pose);
    out += '\n';
  }
  for (const auto& x : log.xi_truth) {
    out += 'X';
    put(out, x.t);
    for (int i = 0; i < 5; ++i) put(out, x.xi[i]);
    out += '\n';
  }
  return out;
}

MeasurementLog parse_log(const std::string& text) {
  MeasurementLog log;
  LogHeader& h = log.header;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool header_done = false;
  bool have_version = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    LineReader r(line, lineno);
    if (lineno == 1) {
      if (r.size() != 1 || r.word(0) != "skidsteer-log") r.fail("missing 'skidsteer-log' magic");
      continue;
    }
    const std::string& key = r.word(0);
    if (!header_done) {
      if (key == "end_header") {
        header_done = true;
        if (!have_version) r.fail("header has no version");
      } else if (key == "version") {
        r.expect(2);
        h.version = static_cast<int>(r.integer(1));
        if (h.version != kLogFormatVersion) {
          r.fail("unsupported log version " + std::to_string(h.version));
        }
        have_version = true;
      } else if (key == "encoder_rate") {
        r.expect(2);
        h.encoder_rate = r.num(1);
      } else if (key == "imu_rate") {
        r.expect(2);
        h.imu_rate = r.num(1);
      } else if (key == "camera_rate") {
        r.expect(2);
        h.camera_rate = r.num(1);
      } else if (key == "nominal_focal_px") {
        r.expect(2);
        h.nominal_focal_px = r.num(1);
      } else if (key == "sigma_pixel_px") {
        r.expect(2);
        h.sigma_pixel_px = r.num(1);
      } else if (key == "seed") {
        r.expect(2);
        h.seed = r.u64(1);
      } else if (key == "profile") {
        r.expect(2);
        h.profile = r.word(1);
      } else if (key == "extrinsics_oc") {
        r.expect(8);
        h.rig.extrinsics_OC = r.pose(1);
      } else if (key == "extrinsics_oi") {
        r.expect(8);
        h.rig.extrinsics_OI = r.pose(1);
      } else if (key == "gravity") {
        r.expect(4);
        h.rig.gravity = Vec3(r.num(1), r.num(2), r.num(3));
      } else if (key == "fov_half_angle") {
        r.expect(2);
        h.rig.fov_half_angle = r.num(1);
      } else if (key == "max_range") {
        r.expect(2);
        h.rig.max_range = r.num(1);
      } else if (key == "min_depth") {
        r.expect(2);
        h.rig.min_depth = r.num(1);
      } else {
        r.fail("unknown header key '" + key + "'");
      }
      continue;
    }
    if (key == "E") {
      r.expect(4);
      EncoderReading e{r.num(1), r.num(2), r.num(3)};
      if (!log.encoders.empty() && e.t <= log.encoders.back().t) r.fail("encoder time not increasing");
      log.encoders.push_back(e);
    } else if (key == "I") {
      r.expect(8);
      ImuReading m{r.num(1), Vec3(r.num(2), r.num(3), r.num(4)), Vec3(r.num(5), r.num(6), r.num(7))};
      if (!log.imu.empty() && m.t <= log.imu.back().t) r.fail("imu time not increasing");
      log.imu.push_back(m);
    } else if (key == "F") {
      r.expect(6);
      FeatureObservation f;
      f.frame_t = r.num(1);
      f.frame_id = static_cast<int>(r.integer(2));
      f.landmark_id = static_cast<int>(r.integer(3));
      f.uv = Vec2(r.num(4), r.num(5));
      if (!log.features.empty() && f.frame_t < log.features.back().frame_t) {
        r.fail("feature time decreasing");
      }
      log.features.push_back(f);
    } else if (key == "G") {
      r.expect(9);
      StampedPose g{r.num(1), r.pose(2)};
      if (!log.ground_truth.empty() && g.t <= log.ground_truth.back().t) {
        r.fail("ground-truth time not increasing");
      }
      log.ground_truth.push_back(g);
    } else if (key == "X") {
      r.expect(7);
      StampedXi x;
      x.t = r.num(1);
      for (int i = 0; i < 5; ++i) x.xi[i] = r.num(2 + static_cast<std::size_t>(i));
      log.xi_truth.push_back(x);
    } else {
      r.fail("unknown record type '" + key + "'");
    }
  }
  if (!header_done) throw Error(ErrorCategory::LogParse, "log has no end_header line");
  return log;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCategory::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCategory::Io, "cannot write '" + path + "'");
  f << text;
  if (!f) throw Error(ErrorCategory::Io, "write failed for '" + path + "'");
}

void write_log_file(const std::string& path, const MeasurementLog& log) {
  write_text_file(path, format_log(log));
}

MeasurementLog read_log_file(const std::string& path) { return parse_log(read_text_file(path)); }

}  // namespace skidsteer
