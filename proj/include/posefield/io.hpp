#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "posefield/ik.hpp"
#include "posefield/pose_corpus.hpp"
#include "posefield/prior_ops.hpp"
#include "posefield/robot_model.hpp"
#include "posefield/sampler.hpp"

namespace posefield {

// Binary corpus container ("PDFC"): little-endian, magic + u32 version +
// u32 n_joints + u64 count + length-prefixed robot name + row-major f64
// poses. Round trips are bitwise.
void write_corpus(const std::string& path, const std::string& robot_name,
                  const RowMatrixXd& poses);

struct CorpusFile {
  std::string robot_name;
  RowMatrixXd poses;
};

/// IoError on unreadable/truncated data, FormatVersionError on a bad magic
/// or version, EmptyCorpus on a zero-row file. Never returns partial data.
CorpusFile read_corpus(const std::string& path);

// Binary labeled-sample container ("PDFL"): same header layout as the
// corpus, then per record n_joints f64 angles + f64 label + u8 source.
void write_dataset(const std::string& path, const std::string& robot_name, Eigen::Index n_joints,
                   const std::vector<LabeledSample>& samples);

struct DatasetFile {
  std::string robot_name;
  Eigen::Index n_joints = 0;
  std::vector<LabeledSample> samples;
};

DatasetFile read_dataset(const std::string& path);

// Textual poses: one pose per line, comma-separated decimal with 17
// significant digits, so text round trips reproduce doubles bitwise.
void write_pose_lines(const std::string& path, const RowMatrixXd& poses);
RowMatrixXd read_pose_lines(const std::string& path);

// Textual trajectory: header "n_joints,frame_count", then one frame per
// line: root position (3), root orientation as a rotation vector (3), joint
// angles (n_joints), comma-separated.
void write_trajectory(const std::string& path, const Trajectory& trajectory);
Trajectory read_trajectory(const std::string& path);

// Keypoint target script: one constraint per line,
//   frame,joint_name,pos,px,py,pz[,rot,rx,ry,rz][,wpos,w][,wrot,w]
// (the rot group may appear without pos; '#' lines and blank lines are
// skipped). Frames must be contiguous from 0; every frame needs at least
// one constraint. Rotations are given as rotation vectors.
std::vector<std::vector<KeypointTarget>> read_keypoint_targets(const std::string& path,
                                                               const RobotModel& robot);

/// Formats one double with 17 significant digits (lossless round trip).
std::string format_double(double v);

}  // namespace posefield
