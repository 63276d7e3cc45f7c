#include "objslam/io.hpp"

#include <Eigen/Eigenvalues>
#include "json.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "objslam/errors.hpp"

namespace objslam {

using nlohmann::json;

std::array<double, 21> pack_upper(const Mat6& m) {
  std::array<double, 21> v{};
  std::size_t k = 0;
  for (int r = 0; r < 6; ++r) {
    for (int c = r; c < 6; ++c) v[k++] = m(r, c);
  }
  return v;
}

Mat6 unpack_upper(const std::array<double, 21>& v) {
  Mat6 m;
  std::size_t k = 0;
  for (int r = 0; r < 6; ++r) {
    for (int c = r; c < 6; ++c) {
      m(r, c) = v[k];
      m(c, r) = v[k];
      ++k;
    }
  }
  return m;
}

MeasurementRecord make_record(std::size_t step, const Odometry& u) {
  MeasurementRecord r;
  r.step = step;
  r.kind = RecordKind::Odom;
  r.rotation = rotation_to_quaternion(u.rot);
  r.position = u.pos;
  r.cov = pack_upper(u.noise_cov);
  return r;
}

MeasurementRecord make_record(std::size_t step, const PoseObservation& z) {
  MeasurementRecord r;
  r.step = step;
  r.kind = RecordKind::Obs;
  r.feature_id = z.feature_id;
  r.rotation = rotation_to_quaternion(z.rot);
  r.position = z.pos;
  r.cov = pack_upper(z.noise_cov);
  return r;
}

MeasurementRecord make_truth_record(std::size_t step, const FeatureId& id, const Rot3& R,
                                    const Vec3& p) {
  MeasurementRecord r;
  r.step = step;
  r.kind = RecordKind::Truth;
  r.feature_id = id;
  r.rotation = rotation_to_quaternion(R);
  r.position = p;
  return r;
}

Odometry to_odometry(const MeasurementRecord& r) {
  Odometry u;
  u.rot = quaternion_to_rotation(r.rotation);
  u.pos = r.position;
  u.noise_cov = unpack_upper(r.cov);
  return u;
}

PoseObservation to_observation(const MeasurementRecord& r) {
  PoseObservation z;
  z.feature_id = r.feature_id;
  z.rot = quaternion_to_rotation(r.rotation);
  z.pos = r.position;
  z.noise_cov = unpack_upper(r.cov);
  return z;
}

namespace {

std::string_view kind_name(RecordKind k) {
  switch (k) {
    case RecordKind::Odom: return "odom";
    case RecordKind::Obs: return "obs";
    case RecordKind::Truth: return "truth";
  }
  return "?";
}

template <typename Array>
void read_array(const json& j, const char* key, Array& out, std::size_t n, std::size_t line) {
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != n) {
    throw ParseError(std::string("field '") + key + "' must be an array of " +
                         std::to_string(n) + " numbers",
                     line);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = j.at(key)[i];
    if (!v.is_number()) throw ParseError(std::string("non-numeric entry in '") + key + "'", line);
    out[static_cast<decltype(out.size())>(i)] = v.get<double>();
  }
}

MeasurementRecord parse_record(const std::string& text, std::size_t line) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), line);
  }
  if (!j.is_object()) throw ParseError("record must be a JSON object", line);
  MeasurementRecord r;
  if (!j.contains("step") || !j.at("step").is_number_unsigned()) {
    throw ParseError("field 'step' must be a non-negative integer", line);
  }
  r.step = j.at("step").get<std::size_t>();
  if (!j.contains("kind") || !j.at("kind").is_string()) {
    throw ParseError("field 'kind' missing", line);
  }
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "odom") {
    r.kind = RecordKind::Odom;
  } else if (kind == "obs") {
    r.kind = RecordKind::Obs;
  } else if (kind == "truth") {
    r.kind = RecordKind::Truth;
  } else {
    throw ParseError("unknown record kind '" + kind + "'", line);
  }
  if (r.kind != RecordKind::Odom) {
    if (!j.contains("feature_id") || !j.at("feature_id").is_string()) {
      throw ParseError("field 'feature_id' missing", line);
    }
    r.feature_id = j.at("feature_id").get<std::string>();
    if (r.kind == RecordKind::Obs && r.feature_id.empty()) {
      throw ParseError("observation with empty feature_id", line);
    }
  }
  read_array(j, "rotation", r.rotation, 4, line);
  read_array(j, "position", r.position, 3, line);
  if (std::abs(r.rotation.norm() - 1.0) > 1e-9) {
    throw ParseError("rotation quaternion is not unit norm", line);
  }
  if (r.kind != RecordKind::Truth) {
    read_array(j, "cov", r.cov, 21, line);
    const Mat6 C = unpack_upper(r.cov);
    const Eigen::SelfAdjointEigenSolver<Mat6> es(C, Eigen::EigenvaluesOnly);
    if (!C.allFinite() || es.eigenvalues().minCoeff() < -1e-12) {
      throw ParseError("covariance is not positive semidefinite", line);
    }
  }
  return r;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace

std::vector<MeasurementRecord> read_measurement_log(std::istream& in) {
  std::vector<MeasurementRecord> records;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto r = parse_record(text, line);
    if (!records.empty() && r.step < records.back().step) {
      throw ParseError("step numbers must be non-decreasing", line);
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<MeasurementRecord> read_measurement_log(const std::string& path) {
  auto in = open_in(path);
  return read_measurement_log(in);
}

void write_measurement_log(std::ostream& out, std::span<const MeasurementRecord> records) {
  for (const auto& r : records) {
    json j;
    j["step"] = r.step;
    j["kind"] = kind_name(r.kind);
    if (r.kind != RecordKind::Odom) j["feature_id"] = r.feature_id;
    j["rotation"] = {r.rotation(0), r.rotation(1), r.rotation(2), r.rotation(3)};
    j["position"] = {r.position(0), r.position(1), r.position(2)};
    if (r.kind != RecordKind::Truth) j["cov"] = r.cov;
    out << j.dump() << '\n';
  }
}

void write_measurement_log(const std::string& path, std::span<const MeasurementRecord> records) {
  auto out = open_out(path);
  write_measurement_log(out, records);
}

namespace {

void write_matrix(std::ostream& out, const char* tag, const MatX& m) {
  out << tag << ' ' << m.rows() << ' ' << m.cols();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << ' ' << m(r, c);
  }
  out << '\n';
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::istringstream next(const std::string& expect) {
    std::string text;
    while (std::getline(in_, text)) {
      ++line_;
      if (text.find_first_not_of(" \t\r") != std::string::npos) break;
      text.clear();
    }
    if (text.empty()) throw ParseError("unexpected end of file, expected '" + expect + "'", line_);
    std::istringstream ss(text);
    std::string key;
    ss >> key;
    if (key != expect) throw ParseError("expected '" + expect + "', got '" + key + "'", line_);
    return ss;
  }

  template <typename T>
  T value(std::istringstream& ss) {
    T v;
    if (!(ss >> v)) throw ParseError("malformed value", line_);
    return v;
  }

  MatX matrix(const char* tag) {
    auto ss = next(tag);
    const auto rows = value<Eigen::Index>(ss);
    const auto cols = value<Eigen::Index>(ss);
    if (rows < 0 || cols < 0) throw ParseError("negative matrix size", line_);
    MatX m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = value<double>(ss);
    }
    std::string extra;
    if (ss >> extra) throw ParseError("trailing values after matrix", line_);
    return m;
  }

  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

}  // namespace

void write_jacobian_log(std::ostream& out, const JacobianLog& log) {
  out << std::setprecision(17);
  out << "objslam-jacobian-log 1\n";
  out << "filter " << log.filter << '\n';
  out << "mode " << mode_name(log.mode) << '\n';
  out << "features " << log.num_features << '\n';
  out << "robot_anchor " << log.robot_anchor.x() << ' ' << log.robot_anchor.y() << ' '
      << log.robot_anchor.z() << '\n';
  for (const auto& a : log.feature_anchors) {
    out << "feature_anchor " << a.x() << ' ' << a.y() << ' ' << a.z() << '\n';
  }
  out << "steps " << log.steps.size() << '\n';
  for (const auto& s : log.steps) {
    write_matrix(out, "F", s.F);
    write_matrix(out, "H", s.H);
  }
}

void write_jacobian_log(const std::string& path, const JacobianLog& log) {
  auto out = open_out(path);
  write_jacobian_log(out, log);
}

JacobianLog read_jacobian_log(std::istream& in) {
  LineReader rd(in);
  JacobianLog log;
  {
    auto ss = rd.next("objslam-jacobian-log");
    if (rd.value<int>(ss) != 1) throw ParseError("unsupported Jacobian log version", rd.line());
  }
  {
    auto ss = rd.next("filter");
    log.filter = rd.value<std::string>(ss);
  }
  {
    auto ss = rd.next("mode");
    const auto m = rd.value<std::string>(ss);
    try {
      log.mode = parse_mode(m);
    } catch (const Error&) {
      throw ParseError("unknown mode '" + m + "'", rd.line());
    }
  }
  {
    auto ss = rd.next("features");
    log.num_features = rd.value<std::size_t>(ss);
  }
  {
    auto ss = rd.next("robot_anchor");
    for (int i = 0; i < 3; ++i) log.robot_anchor(i) = rd.value<double>(ss);
  }
  for (std::size_t j = 0; j < log.num_features; ++j) {
    auto ss = rd.next("feature_anchor");
    Vec3 a;
    for (int i = 0; i < 3; ++i) a(i) = rd.value<double>(ss);
    log.feature_anchors.push_back(a);
  }
  std::size_t steps = 0;
  {
    auto ss = rd.next("steps");
    steps = rd.value<std::size_t>(ss);
  }
  const auto n = static_cast<Eigen::Index>(log.dim());
  for (std::size_t k = 0; k < steps; ++k) {
    JacobianStep s;
    s.F = rd.matrix("F");
    s.H = rd.matrix("H");
    if ((s.F.size() > 0 && (s.F.rows() != n || s.F.cols() != n)) ||
        (s.H.rows() > 0 && s.H.cols() != n)) {
      throw ParseError("matrix dimensions disagree with the feature count", rd.line());
    }
    log.steps.push_back(std::move(s));
  }
  return log;
}

JacobianLog read_jacobian_log(const std::string& path) {
  auto in = open_in(path);
  return read_jacobian_log(in);
}

}  // namespace objslam
