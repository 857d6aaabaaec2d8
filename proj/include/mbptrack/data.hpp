#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "mbptrack/geometry.hpp"
#include "mbptrack/losses.hpp"

namespace mbp {

struct Sequence {
  std::vector<PointCloud> frames;
  std::vector<Box3D> gt_boxes;
  std::string category;
  std::string id;

  std::size_t size() const { return frames.size(); }
  void validate() const;
};

// Pedestrians and cyclists are treated as non-rigid.
Rigidity rigidity_of(const std::string& category);

enum class ObjectTemplate { kCar, kPedestrian };

struct SynthConfig {
  ObjectTemplate object = ObjectTemplate::kCar;
  std::size_t target_points = 160;      // surface samples on the target per frame
  std::size_t background_points = 96;   // ground returns per frame
  double background_radius = 7.0;
  double max_translation = 0.6;         // meters per frame
  double max_dtheta = 0.06;             // radians per frame
  double occlusion_fraction = 0.0;      // angular share of the target hidden when occluded
  double occlusion_probability = 0.0;   // chance a frame is occluded
  std::size_t distractors = 1;
  double noise_std = 0.02;
  std::uint64_t seed = 0;

  void validate() const;
};

Sequence generate_sequence(const SynthConfig& cfg, std::size_t length);

// Sequence i is generated from `base` with seed base.seed + i.
std::vector<Sequence> generate_dataset(const SynthConfig& base, std::size_t count,
                                       std::size_t length);

// --- KITTI tracking format ---------------------------------------------------

struct KittiError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingFrameError : KittiError {
  using KittiError::KittiError;
};
struct MalformedLabelError : KittiError {
  using KittiError::KittiError;
};
struct UnknownTrackError : KittiError {
  using KittiError::KittiError;
};
struct MalformedCalibError : KittiError {
  using KittiError::KittiError;
};

using VelodynePoint = std::array<float, 4>;  // x, y, z, intensity

std::vector<VelodynePoint> read_velodyne_bin(const std::filesystem::path& path);
void write_velodyne_bin(const std::filesystem::path& path, const std::vector<VelodynePoint>& pts);

struct KittiLabel {
  std::size_t frame = 0;
  long track_id = -1;
  std::string type;
  double truncated = 0, occluded = 0, alpha = 0;
  std::array<double, 4> bbox2d{};
  double h = 0, w = 0, l = 0;
  double x = 0, y = 0, z = 0;  // bottom center, rectified camera frame
  double rotation_y = 0;
};

std::vector<KittiLabel> parse_kitti_labels(const std::filesystem::path& label_file);

// Rectified-camera to LiDAR mapping built from R_rect and Tr_velo_cam.
struct KittiCalib {
  std::array<double, 9> r_rect{1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::array<double, 12> velo_to_cam{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};

  Vec3 rect_to_velo(const Vec3& p) const;
  Vec3 rect_dir_to_velo(const Vec3& d) const;
};

KittiCalib parse_kitti_calib(const std::filesystem::path& calib_file);

Box3D kitti_label_to_box(const KittiLabel& label, const KittiCalib& calib);

Sequence load_kitti_tracklet(const std::filesystem::path& velodyne_dir,
                             const std::filesystem::path& label_file,
                             const std::filesystem::path& calib_file, long track_id);

// --- Dataset directory -------------------------------------------------------
//
//   <root>/index.txt                 one sequence id per line
//   <root>/<id>/meta.txt             "category <name>" and "frames <n>"
//   <root>/<id>/boxes.txt            trajectory format (see tracker.hpp)
//   <root>/<id>/frames/%06d.bin      float32 x y z intensity (intensity 0)

void save_dataset(const std::filesystem::path& root, const std::vector<Sequence>& seqs);
std::vector<Sequence> load_dataset(const std::filesystem::path& root);

// --- Training windows --------------------------------------------------------

struct TrainingSample {
  std::size_t sequence = 0;  // index into the sequence list
  std::size_t start = 0;
  std::size_t length = 8;
  std::size_t memory = 2;    // previous frames each step may attend to
};

// Stride-1 windows of `sample_len` frames; sequences that are too short yield
// nothing (and `skipped` is incremented when provided).
std::vector<TrainingSample> make_training_samples(const Sequence& seq, std::size_t seq_index,
                                                  std::size_t sample_len,
                                                  std::size_t train_memory,
                                                  std::size_t* skipped = nullptr);

}  // namespace mbp
