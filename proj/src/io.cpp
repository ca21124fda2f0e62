// Copyright 2026 The lidarprobe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lidarprobe/io.hpp"

#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lidarprobe/errors.hpp"

namespace lidarprobe::io {
namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& token, const fs::path& path, std::size_t line_no) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  while (first < last && *first == ' ') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    fail(ErrorKind::kInvalidInput, path.string() + ":" + std::to_string(line_no) +
                                       ": cannot parse number '" + token + "'");
  }
  return v;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open '" + path.string() + "' for writing");
  return out;
}

void expect_header(std::istream& in, const std::string& expected, const fs::path& path) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kInvalidInput, path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected) {
    fail(ErrorKind::kInvalidInput,
         path.string() + ": expected header '" + expected + "', got '" + line + "'");
  }
}

enum class PlyType { kI8, kU8, kI16, kU16, kI32, kU32, kF32, kF64 };

PlyType ply_type(const std::string& name, const fs::path& path) {
  if (name == "char" || name == "int8") return PlyType::kI8;
  if (name == "uchar" || name == "uint8") return PlyType::kU8;
  if (name == "short" || name == "int16") return PlyType::kI16;
  if (name == "ushort" || name == "uint16") return PlyType::kU16;
  if (name == "int" || name == "int32") return PlyType::kI32;
  if (name == "uint" || name == "uint32") return PlyType::kU32;
  if (name == "float" || name == "float32") return PlyType::kF32;
  if (name == "double" || name == "float64") return PlyType::kF64;
  fail(ErrorKind::kInvalidInput, path.string() + ": unsupported PLY type '" + name + "'");
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::kI8:
    case PlyType::kU8: return 1;
    case PlyType::kI16:
    case PlyType::kU16: return 2;
    case PlyType::kI32:
    case PlyType::kU32:
    case PlyType::kF32: return 4;
    case PlyType::kF64: return 8;
  }
  return 8;
}

template <typename T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double ply_value(PlyType t, const char* p) {
  switch (t) {
    case PlyType::kI8: return load_le<std::int8_t>(p);
    case PlyType::kU8: return load_le<std::uint8_t>(p);
    case PlyType::kI16: return load_le<std::int16_t>(p);
    case PlyType::kU16: return load_le<std::uint16_t>(p);
    case PlyType::kI32: return load_le<std::int32_t>(p);
    case PlyType::kU32: return load_le<std::uint32_t>(p);
    case PlyType::kF32: return load_le<float>(p);
    case PlyType::kF64: return load_le<double>(p);
  }
  return 0.0;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) fail(ErrorKind::kInternal, "number formatting failed");
  return std::string(buf, ptr);
}

void write_ply(const fs::path& path, const PointCloud& cloud, PlyFormat format,
               const std::vector<int>* labels) {
  if (labels && labels->size() != cloud.size()) {
    fail(ErrorKind::kInvalidInput, "label count does not match point count");
  }
  auto out = open_out(path, std::ios::out | std::ios::binary);
  const bool normals = cloud.has_normals();
  out << "ply\n"
      << (format == PlyFormat::kAscii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n")
      << "comment frame " << cloud.frame().name() << "\n"
      << "element vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
  if (labels) out << "property int label\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points()[i];
    if (format == PlyFormat::kAscii) {
      out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z());
      if (normals) {
        const Vec3& n = cloud.normals()[i];
        out << ' ' << format_double(n.x()) << ' ' << format_double(n.y()) << ' '
            << format_double(n.z());
      }
      if (labels) out << ' ' << (*labels)[i];
      out << '\n';
    } else {
      auto put = [&](double v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
      put(p.x());
      put(p.y());
      put(p.z());
      if (normals) {
        const Vec3& n = cloud.normals()[i];
        put(n.x());
        put(n.y());
        put(n.z());
      }
      if (labels) {
        const std::int32_t l = (*labels)[i];
        out.write(reinterpret_cast<const char*>(&l), sizeof l);
      }
    }
  }
  if (!out) fail(ErrorKind::kIo, "failed writing '" + path.string() + "'");
}

PlyData read_ply(const fs::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  std::string line;
  std::getline(in, line);
  if (line != "ply") fail(ErrorKind::kInvalidInput, path.string() + ": not a PLY file");
  bool ascii = true;
  std::string frame = "base";
  std::size_t count = 0;
  bool in_vertex = false;
  bool seen_vertex = false;
  std::vector<std::pair<std::string, PlyType>> props;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string f;
      ls >> f;
      if (f == "ascii") {
        ascii = true;
      } else if (f == "binary_little_endian") {
        ascii = false;
      } else {
        fail(ErrorKind::kInvalidInput, path.string() + ": unsupported PLY format '" + f + "'");
      }
    } else if (word == "comment") {
      std::string key;
      ls >> key;
      if (key == "frame") ls >> frame;
    } else if (word == "element") {
      std::string name;
      ls >> name;
      in_vertex = name == "vertex";
      if (in_vertex) {
        if (seen_vertex) fail(ErrorKind::kInvalidInput, path.string() + ": repeated vertex element");
        if (!props.empty()) {
          fail(ErrorKind::kInvalidInput, path.string() + ": vertex element must come first");
        }
        ls >> count;
        seen_vertex = true;
      }
    } else if (word == "property") {
      if (!in_vertex) continue;
      std::string type;
      std::string name;
      ls >> type;
      if (type == "list") fail(ErrorKind::kInvalidInput, path.string() + ": list vertex property");
      ls >> name;
      props.emplace_back(name, ply_type(type, path));
    } else if (word == "end_header") {
      break;
    }
  }
  if (!seen_vertex) fail(ErrorKind::kInvalidInput, path.string() + ": no vertex element");
  auto find = [&](const std::string& n) -> int {
    for (std::size_t i = 0; i < props.size(); ++i) {
      if (props[i].first == n) return static_cast<int>(i);
    }
    return -1;
  };
  const int ix = find("x"), iy = find("y"), iz = find("z");
  const int inx = find("nx"), iny = find("ny"), inz = find("nz");
  const int il = find("label");
  if (ix < 0 || iy < 0 || iz < 0) fail(ErrorKind::kInvalidInput, path.string() + ": missing x/y/z");
  const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;

  std::vector<Vec3> pts(count);
  std::vector<Vec3> nrm(has_normals ? count : 0);
  std::vector<int> labels(il >= 0 ? count : 0);
  std::vector<double> row(props.size());
  std::size_t stride = 0;
  for (const auto& p : props) stride += ply_size(p.second);
  std::vector<char> buf(stride);
  for (std::size_t i = 0; i < count; ++i) {
    if (ascii) {
      if (!std::getline(in, line)) fail(ErrorKind::kInvalidInput, path.string() + ": truncated");
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::size_t pos = 0;
      for (std::size_t j = 0; j < props.size(); ++j) {
        while (pos < line.size() && line[pos] == ' ') ++pos;
        std::size_t end = line.find(' ', pos);
        if (end == std::string::npos) end = line.size();
        row[j] = parse_double(line.substr(pos, end - pos), path, i + 1);
        pos = end;
      }
    } else {
      in.read(buf.data(), static_cast<std::streamsize>(stride));
      if (!in) fail(ErrorKind::kInvalidInput, path.string() + ": truncated binary body");
      std::size_t off = 0;
      for (std::size_t j = 0; j < props.size(); ++j) {
        row[j] = ply_value(props[j].second, buf.data() + off);
        off += ply_size(props[j].second);
      }
    }
    pts[i] = Vec3(row[ix], row[iy], row[iz]);
    if (has_normals) nrm[i] = Vec3(row[inx], row[iny], row[inz]);
    if (il >= 0) labels[i] = static_cast<int>(row[il]);
  }
  PlyData data{has_normals ? PointCloud(std::move(pts), std::move(nrm), FrameId(frame))
                           : PointCloud(std::move(pts), FrameId(frame)),
               std::nullopt};
  if (il >= 0) data.labels = std::move(labels);
  return data;
}

void write_cloud_csv(const fs::path& path, const PointCloud& cloud) {
  auto out = open_out(path);
  const bool normals = cloud.has_normals();
  out << (normals ? "x,y,z,nx,ny,nz\n" : "x,y,z\n");
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points()[i];
    out << format_double(p.x()) << ',' << format_double(p.y()) << ',' << format_double(p.z());
    if (normals) {
      const Vec3& n = cloud.normals()[i];
      out << ',' << format_double(n.x()) << ',' << format_double(n.y()) << ','
          << format_double(n.z());
    }
    out << '\n';
  }
}

PointCloud read_cloud_csv(const fs::path& path, const FrameId& frame) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kInvalidInput, path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  bool normals = false;
  if (line == "x,y,z,nx,ny,nz") {
    normals = true;
  } else if (line != "x,y,z") {
    fail(ErrorKind::kInvalidInput, path.string() + ": expected header 'x,y,z[,nx,ny,nz]'");
  }
  std::vector<Vec3> pts;
  std::vector<Vec3> nrm;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto tok = split(line, ',');
    if (tok.size() != (normals ? 6u : 3u)) {
      fail(ErrorKind::kInvalidInput, path.string() + ":" + std::to_string(line_no) +
                                         ": wrong column count");
    }
    pts.emplace_back(parse_double(tok[0], path, line_no), parse_double(tok[1], path, line_no),
                     parse_double(tok[2], path, line_no));
    if (normals) {
      nrm.emplace_back(parse_double(tok[3], path, line_no), parse_double(tok[4], path, line_no),
                       parse_double(tok[5], path, line_no));
    }
  }
  return normals ? PointCloud(std::move(pts), std::move(nrm), frame)
                 : PointCloud(std::move(pts), frame);
}

PointCloud read_cloud(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorKind::kIo, "no such file: '" + path.string() + "'");
  if (path.extension() == ".csv") return read_cloud_csv(path);
  return read_ply(path).cloud;
}

void write_cloud(const fs::path& path, const PointCloud& cloud, PlyFormat format) {
  if (path.extension() == ".csv") {
    write_cloud_csv(path, cloud);
  } else {
    write_ply(path, cloud, format);
  }
}

void write_scan_log(const fs::path& path, const std::vector<PolarScan>& scans) {
  auto out = open_out(path);
  out << "timestamp,theta,range,valid\n";
  for (const auto& scan : scans) {
    for (const auto& s : scan.samples) {
      out << format_double(s.timestamp) << ',' << format_double(s.angle) << ','
          << format_double(s.range) << ',' << (s.valid ? 1 : 0) << '\n';
    }
  }
}

std::vector<PolarScan> read_scan_log(const fs::path& path) {
  auto in = open_in(path);
  expect_header(in, "timestamp,theta,range,valid", path);
  std::vector<PolarScan> scans;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto tok = split(line, ',');
    if (tok.size() != 4) {
      fail(ErrorKind::kInvalidInput, path.string() + ":" + std::to_string(line_no) +
                                         ": expected 4 columns");
    }
    const double ts = parse_double(tok[0], path, line_no);
    const double theta = parse_double(tok[1], path, line_no);
    const double range = parse_double(tok[2], path, line_no);
    const bool valid = parse_double(tok[3], path, line_no) != 0.0;
    PolarSample s = PolarSample::make(range, theta, ts, valid);
    if (scans.empty() || !(s.angle > scans.back().samples.back().angle)) {
      scans.emplace_back();
      scans.back().scan_timestamp = ts;
    }
    scans.back().samples.push_back(s);
  }
  return scans;
}

void write_pose_log(const fs::path& path, const std::vector<StampedPose>& poses) {
  auto out = open_out(path);
  out << "timestamp,tx,ty,tz,qx,qy,qz,qw\n";
  for (const auto& sp : poses) {
    const Vec3& t = sp.pose.translation();
    const Eigen::Quaterniond q = sp.pose.quaternion();
    out << format_double(sp.timestamp) << ',' << format_double(t.x()) << ','
        << format_double(t.y()) << ',' << format_double(t.z()) << ',' << format_double(q.x())
        << ',' << format_double(q.y()) << ',' << format_double(q.z()) << ','
        << format_double(q.w()) << '\n';
  }
}

std::vector<StampedPose> read_pose_log(const fs::path& path, const FrameId& from,
                                       const FrameId& to) {
  auto in = open_in(path);
  expect_header(in, "timestamp,tx,ty,tz,qx,qy,qz,qw", path);
  std::vector<StampedPose> poses;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto tok = split(line, ',');
    if (tok.size() != 8) {
      fail(ErrorKind::kInvalidInput, path.string() + ":" + std::to_string(line_no) +
                                         ": expected 8 columns");
    }
    double v[8];
    for (int i = 0; i < 8; ++i) v[i] = parse_double(tok[i], path, line_no);
    const Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (std::abs(q.norm() - 1.0) > 1e-6) {
      fail(ErrorKind::kInvalidInput, path.string() + ":" + std::to_string(line_no) +
                                         ": quaternion is not unit length");
    }
    poses.push_back({v[0], RigidTransform::from_quaternion(q, Vec3(v[1], v[2], v[3]), from, to)});
  }
  return poses;
}

std::string read_text(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorKind::kIo, "no such file: '" + path.string() + "'");
  auto in = open_in(path, std::ios::in | std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out << text;
  if (!out) fail(ErrorKind::kIo, "failed writing '" + path.string() + "'");
}

nlohmann::json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::kInvalidInput, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& value) {
  write_text(path, value.dump(2) + "\n");
}

nlohmann::json to_json(const RigidTransform& transform) {
  const Vec3& t = transform.translation();
  const Vec3 w = transform.rotation_vector().omega;
  const Eigen::Quaterniond q = transform.quaternion();
  return {{"from", transform.from_frame().name()},
          {"to", transform.to_frame().name()},
          {"translation_m", {t.x(), t.y(), t.z()}},
          {"rotation_vector_rad", {w.x(), w.y(), w.z()}},
          {"quaternion_xyzw", {q.x(), q.y(), q.z(), q.w()}}};
}

RigidTransform transform_from_json(const nlohmann::json& value) {
  try {
    const auto& t = value.at("translation_m");
    const Vec3 trans(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
    const FrameId from(value.at("from").get<std::string>());
    const FrameId to(value.at("to").get<std::string>());
    if (value.contains("quaternion_xyzw")) {
      const auto& q = value.at("quaternion_xyzw");
      return RigidTransform::from_quaternion(
          Eigen::Quaterniond(q.at(3).get<double>(), q.at(0).get<double>(), q.at(1).get<double>(),
                             q.at(2).get<double>()),
          trans, from, to);
    }
    const auto& w = value.at("rotation_vector_rad");
    return RigidTransform::from_rotation_vector(
        Vec3(w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>()), trans, from, to);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidInput, std::string("malformed transform: ") + e.what());
  }
}

nlohmann::json vec3_to_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 vec3_from_json(const nlohmann::json& value, const std::string& context) {
  if (!value.is_array() || value.size() != 3) {
    fail(ErrorKind::kInvalidInput, context + ": expected an array of 3 numbers");
  }
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!value[static_cast<std::size_t>(i)].is_number()) {
      fail(ErrorKind::kInvalidInput, context + ": expected an array of 3 numbers");
    }
    v[i] = value[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

}  // namespace lidarprobe::io
