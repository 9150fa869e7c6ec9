#include "posefield/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace posefield {

namespace {

constexpr std::uint32_t kContainerVersion = 1;
constexpr char kCorpusMagic[4] = {'P', 'D', 'F', 'C'};
constexpr char kDatasetMagic[4] = {'P', 'D', 'F', 'L'};
constexpr std::uint32_t kMaxNameLength = 1u << 20;

// Explicit little-endian packing keeps the containers portable.
void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s += static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_u64(std::string& s, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) s += static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_f64(std::string& s, double v) { put_u64(s, std::bit_cast<std::uint64_t>(v)); }

struct Reader {
  std::string data;
  std::size_t pos = 0;
  std::string path;

  void need(std::size_t n) const {
    if (pos + n > data.size()) {
      throw IoError("'" + path + "' is truncated");
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    }
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    }
    pos += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data[pos++]);
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string out = data.substr(pos, n);
    pos += n;
    return out;
  }
};

Reader open_reader(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failed for '" + path + "'");
  Reader r;
  r.data = buf.str();
  r.path = path;
  return r;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failed for '" + path + "'");
}

// Shared container header: magic, version, n_joints, count, robot name.
void put_header(std::string& s, const char magic[4], std::uint32_t n_joints, std::uint64_t count,
                const std::string& robot_name) {
  s.append(magic, 4);
  put_u32(s, kContainerVersion);
  put_u32(s, n_joints);
  put_u64(s, count);
  put_u32(s, static_cast<std::uint32_t>(robot_name.size()));
  s += robot_name;
}

struct Header {
  std::uint32_t n_joints = 0;
  std::uint64_t count = 0;
  std::string robot_name;
};

Header read_header(Reader& r, const char magic[4], const char* kind) {
  const std::string m = r.bytes(4);
  if (std::memcmp(m.data(), magic, 4) != 0) {
    throw FormatVersionError("'" + r.path + "' is not a " + kind + " file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kContainerVersion) {
    throw FormatVersionError("'" + r.path + "' has unsupported " + kind + " version " +
                             std::to_string(version));
  }
  Header h;
  h.n_joints = r.u32();
  h.count = r.u64();
  const std::uint32_t name_len = r.u32();
  if (name_len > kMaxNameLength) {
    throw FormatVersionError("'" + r.path + "' has an implausible robot name length");
  }
  h.robot_name = r.bytes(name_len);
  return h;
}

std::vector<double> parse_csv_doubles(const std::string& line, const std::string& path,
                                      std::size_t line_no) {
  std::vector<double> out;
  const char* p = line.c_str();
  for (;;) {
    char* end = nullptr;
    const double v = std::strtod(p, &end);
    if (end == p) {
      throw ParseError("'" + path + "' line " + std::to_string(line_no) + ": expected a number");
    }
    out.push_back(v);
    p = end;
    while (*p == ' ' || *p == '\t') ++p;
    if (*p == '\0') break;
    if (*p != ',') {
      throw ParseError("'" + path + "' line " + std::to_string(line_no) + ": expected ','");
    }
    ++p;
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_corpus(const std::string& path, const std::string& robot_name,
                  const RowMatrixXd& poses) {
  std::string s;
  s.reserve(64 + static_cast<std::size_t>(poses.size()) * 8);
  put_header(s, kCorpusMagic, static_cast<std::uint32_t>(poses.cols()),
             static_cast<std::uint64_t>(poses.rows()), robot_name);
  for (Eigen::Index i = 0; i < poses.rows(); ++i) {
    for (Eigen::Index j = 0; j < poses.cols(); ++j) put_f64(s, poses(i, j));
  }
  write_file(path, s);
}

CorpusFile read_corpus(const std::string& path) {
  Reader r = open_reader(path);
  const Header h = read_header(r, kCorpusMagic, "corpus");
  if (h.count == 0) throw EmptyCorpus("'" + path + "' contains no poses");
  if (h.n_joints == 0) throw FormatVersionError("'" + path + "' has n_joints = 0");

  CorpusFile out;
  out.robot_name = h.robot_name;
  out.poses.resize(static_cast<Eigen::Index>(h.count), static_cast<Eigen::Index>(h.n_joints));
  for (Eigen::Index i = 0; i < out.poses.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.poses.cols(); ++j) out.poses(i, j) = r.f64();
  }
  return out;
}

void write_dataset(const std::string& path, const std::string& robot_name, Eigen::Index n_joints,
                   const std::vector<LabeledSample>& samples) {
  std::string s;
  s.reserve(64 + samples.size() * (static_cast<std::size_t>(n_joints) * 8 + 9));
  put_header(s, kDatasetMagic, static_cast<std::uint32_t>(n_joints),
             static_cast<std::uint64_t>(samples.size()), robot_name);
  for (const auto& sample : samples) {
    if (sample.q.size() != n_joints) {
      throw DimensionMismatch("write_dataset: sample length " + std::to_string(sample.q.size()) +
                              " != n_joints " + std::to_string(n_joints));
    }
    for (Eigen::Index j = 0; j < n_joints; ++j) put_f64(s, sample.q[j]);
    put_f64(s, sample.label);
    s += static_cast<char>(sample.source);
  }
  write_file(path, s);
}

DatasetFile read_dataset(const std::string& path) {
  Reader r = open_reader(path);
  const Header h = read_header(r, kDatasetMagic, "dataset");
  if (h.count == 0) throw EmptyDataset("'" + path + "' contains no samples");
  if (h.n_joints == 0) throw FormatVersionError("'" + path + "' has n_joints = 0");

  DatasetFile out;
  out.robot_name = h.robot_name;
  out.n_joints = static_cast<Eigen::Index>(h.n_joints);
  out.samples.resize(h.count);
  for (auto& sample : out.samples) {
    sample.q.resize(out.n_joints);
    for (Eigen::Index j = 0; j < out.n_joints; ++j) sample.q[j] = r.f64();
    sample.label = r.f64();
    const std::uint8_t src = r.u8();
    if (src > 2) throw FormatVersionError("'" + path + "' has an unknown sample source tag");
    sample.source = static_cast<SampleSource>(src);
  }
  return out;
}

void write_pose_lines(const std::string& path, const RowMatrixXd& poses) {
  std::string s;
  for (Eigen::Index i = 0; i < poses.rows(); ++i) {
    for (Eigen::Index j = 0; j < poses.cols(); ++j) {
      if (j) s += ',';
      s += format_double(poses(i, j));
    }
    s += '\n';
  }
  write_file(path, s);
}

RowMatrixXd read_pose_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    rows.push_back(parse_csv_doubles(line, path, line_no));
    if (rows.size() > 1 && rows.back().size() != rows.front().size()) {
      throw ParseError("'" + path + "' line " + std::to_string(line_no) +
                       ": inconsistent column count");
    }
  }
  if (in.bad()) throw IoError("read failed for '" + path + "'");
  if (rows.empty()) return RowMatrixXd(0, 0);

  RowMatrixXd out(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      out(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return out;
}

void write_trajectory(const std::string& path, const Trajectory& trajectory) {
  if (trajectory.empty()) throw EmptyTrajectory("write_trajectory: no frames");
  const Eigen::Index n_joints = trajectory.front().q.size();
  std::string s;
  s += std::to_string(n_joints);
  s += ',';
  s += std::to_string(trajectory.size());
  s += '\n';
  for (const auto& frame : trajectory) {
    if (frame.q.size() != n_joints) {
      throw DimensionMismatch("write_trajectory: inconsistent joint counts across frames");
    }
    const Eigen::Vector3d rot = log_so3(frame.root_orientation);
    for (int i = 0; i < 3; ++i) {
      if (i) s += ',';
      s += format_double(frame.root_position[i]);
    }
    for (int i = 0; i < 3; ++i) {
      s += ',';
      s += format_double(rot[i]);
    }
    for (Eigen::Index i = 0; i < n_joints; ++i) {
      s += ',';
      s += format_double(frame.q[i]);
    }
    s += '\n';
  }
  write_file(path, s);
}

Trajectory read_trajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("'" + path + "': missing header line");
  const auto header = parse_csv_doubles(line, path, 1);
  if (header.size() != 2 || header[0] < 1 || header[1] < 1 ||
      header[0] != std::floor(header[0]) || header[1] != std::floor(header[1])) {
    throw ParseError("'" + path + "': header must be 'n_joints,frame_count'");
  }
  const auto n_joints = static_cast<Eigen::Index>(header[0]);
  const auto n_frames = static_cast<std::size_t>(header[1]);

  Trajectory traj;
  traj.reserve(n_frames);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto vals = parse_csv_doubles(line, path, line_no);
    if (static_cast<Eigen::Index>(vals.size()) != 6 + n_joints) {
      throw ParseError("'" + path + "' line " + std::to_string(line_no) + ": expected " +
                       std::to_string(6 + n_joints) + " values");
    }
    TrajectoryFrame frame;
    frame.root_position = Eigen::Vector3d(vals[0], vals[1], vals[2]);
    const Eigen::Vector3d rot(vals[3], vals[4], vals[5]);
    const double angle = rot.norm();
    frame.root_orientation =
        angle > 0.0 ? exp_so3(Eigen::Vector3d(rot / angle), angle) : Rotation::Identity();
    frame.q.resize(n_joints);
    for (Eigen::Index i = 0; i < n_joints; ++i) frame.q[i] = vals[6 + i];
    traj.push_back(std::move(frame));
  }
  if (in.bad()) throw IoError("read failed for '" + path + "'");
  if (traj.size() != n_frames) {
    throw ParseError("'" + path + "': header promised " + std::to_string(n_frames) +
                     " frames, found " + std::to_string(traj.size()));
  }
  if (traj.empty()) throw EmptyTrajectory("'" + path + "' contains no frames");
  return traj;
}

std::vector<std::vector<KeypointTarget>> read_keypoint_targets(const std::string& path,
                                                               const RobotModel& robot) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");

  std::vector<std::vector<KeypointTarget>> frames;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;

    std::vector<std::string> tokens;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) tokens.push_back(tok);
    if (tokens.size() < 2) {
      throw ParseError("'" + path + "' line " + std::to_string(line_no) +
                       ": expected 'frame,joint_name,...'");
    }

    const auto bad = [&](const std::string& why) {
      return ParseError("'" + path + "' line " + std::to_string(line_no) + ": " + why);
    };
    const auto to_double = [&](const std::string& text) {
      char* end = nullptr;
      const double v = std::strtod(text.c_str(), &end);
      if (end == text.c_str() || *end != '\0') throw bad("'" + text + "' is not a number");
      return v;
    };

    const long frame = std::strtol(tokens[0].c_str(), nullptr, 10);
    if (frame < 0) throw bad("frame index must be >= 0");

    KeypointTarget target;
    target.joint_index = robot.joint_index(tokens[1]);
    if (target.joint_index < 0) throw bad("unknown joint '" + tokens[1] + "'");

    std::size_t i = 2;
    while (i < tokens.size()) {
      const std::string& key = tokens[i];
      if (key == "pos") {
        if (i + 3 >= tokens.size()) throw bad("'pos' needs 3 values");
        target.position = Eigen::Vector3d(to_double(tokens[i + 1]), to_double(tokens[i + 2]),
                                          to_double(tokens[i + 3]));
        i += 4;
      } else if (key == "rot") {
        if (i + 3 >= tokens.size()) throw bad("'rot' needs 3 values");
        const Eigen::Vector3d rot(to_double(tokens[i + 1]), to_double(tokens[i + 2]),
                                  to_double(tokens[i + 3]));
        const double angle = rot.norm();
        target.orientation =
            angle > 0.0 ? exp_so3(Eigen::Vector3d(rot / angle), angle) : Rotation::Identity();
        i += 4;
      } else if (key == "wpos") {
        if (i + 1 >= tokens.size()) throw bad("'wpos' needs a value");
        target.position_weight = to_double(tokens[i + 1]);
        i += 2;
      } else if (key == "wrot") {
        if (i + 1 >= tokens.size()) throw bad("'wrot' needs a value");
        target.orientation_weight = to_double(tokens[i + 1]);
        i += 2;
      } else {
        throw bad("unknown token '" + key + "'");
      }
    }
    if (!target.position && !target.orientation) {
      throw bad("target needs a 'pos' or 'rot' group");
    }

    if (static_cast<std::size_t>(frame) >= frames.size()) {
      frames.resize(static_cast<std::size_t>(frame) + 1);
    }
    frames[static_cast<std::size_t>(frame)].push_back(std::move(target));
  }
  if (in.bad()) throw IoError("read failed for '" + path + "'");
  if (frames.empty()) throw ParseError("'" + path + "' contains no keypoint targets");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].empty()) {
      throw ParseError("'" + path + "': frame " + std::to_string(t) + " has no targets");
    }
  }
  return frames;
}

}  // namespace posefield
