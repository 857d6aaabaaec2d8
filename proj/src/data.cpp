#include "mbptrack/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "mbptrack/tracker.hpp"

namespace mbp {

void Sequence::validate() const {
  if (frames.size() != gt_boxes.size()) {
    throw std::invalid_argument("sequence " + id + ": frame and box counts differ");
  }
  if (frames.size() < 2) throw std::invalid_argument("sequence " + id + ": fewer than 2 frames");
}

Rigidity rigidity_of(const std::string& category) {
  std::string c = category;
  std::transform(c.begin(), c.end(), c.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (c == "pedestrian" || c == "cyclist" || c == "person_sitting") return Rigidity::kNonRigid;
  return Rigidity::kRigid;
}

void SynthConfig::validate() const {
  auto frac = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!frac(occlusion_fraction) || !frac(occlusion_probability)) {
    throw std::invalid_argument("synth: occlusion fraction/probability must be in [0,1]");
  }
  if (!(max_translation >= 0.0) || !(max_dtheta >= 0.0) || !(noise_std >= 0.0) ||
      !(background_radius > 0.0)) {
    throw std::invalid_argument("synth: negative motion/noise parameter");
  }
  if (target_points == 0) throw std::invalid_argument("synth: target_points must be >= 1");
}

namespace {

constexpr double kPi = std::numbers::pi;
// Surface samples sit just inside the nominal box.
constexpr double kInset = 0.99;
constexpr double kGroundDrop = 0.25;

struct Shape {
  double w, l, h;
};

Shape sample_shape(ObjectTemplate t, std::mt19937_64& rng) {
  auto u = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  if (t == ObjectTemplate::kCar) return {u(1.6, 2.0), u(3.8, 4.6), u(1.4, 1.7)};
  return {u(0.55, 0.75), u(0.65, 0.9), u(1.6, 1.85)};
}

// Points on the object surface in its own canonical frame.
PointCloud sample_surface(ObjectTemplate t, const Shape& s, std::size_t count,
                          std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  PointCloud out;
  out.reserve(count);
  const double hl = 0.5 * s.l * kInset, hw = 0.5 * s.w * kInset, hh = 0.5 * s.h * kInset;
  if (t == ObjectTemplate::kCar) {
    // Top plus four sides, area weighted; no bottom face.
    const double a_top = 4 * hl * hw, a_front = 4 * hw * hh, a_side = 4 * hl * hh;
    const double total = a_top + 2 * a_front + 2 * a_side;
    for (std::size_t i = 0; i < count; ++i) {
      const double pick = u01(rng) * total;
      const double a = 2 * u01(rng) - 1, b = 2 * u01(rng) - 1;
      if (pick < a_top) {
        out.push_back({a * hl, b * hw, hh});
      } else if (pick < a_top + a_front) {
        out.push_back({hl, a * hw, b * hh});
      } else if (pick < a_top + 2 * a_front) {
        out.push_back({-hl, a * hw, b * hh});
      } else if (pick < a_top + 2 * a_front + a_side) {
        out.push_back({a * hl, hw, b * hh});
      } else {
        out.push_back({a * hl, -hw, b * hh});
      }
    }
  } else {
    const double r = std::min(hl, hw);
    const double a_side = 2 * kPi * r * 2 * hh, a_top = kPi * r * r;
    for (std::size_t i = 0; i < count; ++i) {
      const double ang = 2 * kPi * u01(rng);
      if (u01(rng) * (a_side + a_top) < a_side) {
        out.push_back({r * std::cos(ang), r * std::sin(ang), (2 * u01(rng) - 1) * hh});
      } else {
        const double rr = r * std::sqrt(u01(rng));
        out.push_back({rr * std::cos(ang), rr * std::sin(ang), hh});
      }
    }
  }
  return out;
}

}  // namespace

Sequence generate_sequence(const SynthConfig& cfg, std::size_t length) {
  cfg.validate();
  if (length < 2) throw std::invalid_argument("generate_sequence: length must be >= 2");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);

  Sequence seq;
  seq.category = cfg.object == ObjectTemplate::kCar ? "Car" : "Pedestrian";
  std::ostringstream id;
  id << "synth_" << seq.category << "_" << cfg.seed;
  seq.id = id.str();

  const Shape shape = sample_shape(cfg.object, rng);
  Box3D box = Box3D::make({0.0, 0.0, 0.5 * shape.h}, shape.w, shape.l, shape.h,
                          (2 * u01(rng) - 1) * kPi);
  double speed = (0.3 + 0.7 * u01(rng)) * cfg.max_translation;
  double yaw_rate = 0.0;
  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0) {
      yaw_rate = std::clamp(0.7 * yaw_rate + 0.5 * cfg.max_dtheta * n01(rng), -cfg.max_dtheta,
                            cfg.max_dtheta);
      speed = std::clamp(speed + 0.1 * cfg.max_translation * n01(rng), 0.0, cfg.max_translation);
      box.heading = normalize_angle(box.heading + yaw_rate);
      box.center = box.center + rotate_z({speed, 0.0, 0.0}, box.heading);
    }
    seq.gt_boxes.push_back(box);
  }

  struct Distractor {
    Box3D box;
    Shape shape;
  };
  std::vector<Distractor> distractors;
  for (std::size_t d = 0; d < cfg.distractors; ++d) {
    const Shape s = sample_shape(cfg.object, rng);
    const std::size_t anchor = static_cast<std::size_t>(u01(rng) * static_cast<double>(length - 1));
    const double ang = 2 * kPi * u01(rng);
    const double r = 0.5 * (shape.l + s.l) + 0.8 + 2.5 * u01(rng);
    const Vec3 c = seq.gt_boxes[anchor].center + Vec3{r * std::cos(ang), r * std::sin(ang), 0.0};
    distractors.push_back({Box3D::make({c.x, c.y, 0.5 * s.h}, s.w, s.l, s.h,
                                       (2 * u01(rng) - 1) * kPi),
                           s});
  }

  const double ground_z = -kGroundDrop;
  for (std::size_t t = 0; t < length; ++t) {
    const Box3D& gt = seq.gt_boxes[t];
    PointCloud frame;
    PointCloud local = sample_surface(cfg.object, shape, cfg.target_points, rng);
    if (u01(rng) < cfg.occlusion_probability && cfg.occlusion_fraction > 0.0) {
      const double start = 2 * kPi * u01(rng);
      const double width = 2 * kPi * cfg.occlusion_fraction;
      std::erase_if(local, [&](const Vec3& p) {
        double a = std::atan2(p.y, p.x) - start;
        a = std::fmod(a + 4 * kPi, 2 * kPi);
        return a < width;
      });
    }
    for (const auto& p : local) {
      Vec3 q = to_world(p, gt);
      if (cfg.noise_std > 0.0) {
        q = q + Vec3{n01(rng), n01(rng), n01(rng)} * cfg.noise_std;
      }
      frame.push_back(q);
    }
    auto add_foreign = [&](const Vec3& p) {
      if (!point_in_box(p, gt)) frame.push_back(p);
    };
    for (const auto& d : distractors) {
      for (const auto& p : sample_surface(cfg.object, d.shape, cfg.target_points, rng)) {
        Vec3 q = to_world(p, d.box);
        if (cfg.noise_std > 0.0) q = q + Vec3{n01(rng), n01(rng), n01(rng)} * cfg.noise_std;
        add_foreign(q);
      }
    }
    for (std::size_t i = 0; i < cfg.background_points; ++i) {
      const double r = cfg.background_radius * std::sqrt(u01(rng));
      const double a = 2 * kPi * u01(rng);
      add_foreign({gt.center.x + r * std::cos(a), gt.center.y + r * std::sin(a),
                   ground_z + cfg.noise_std * n01(rng)});
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

std::vector<Sequence> generate_dataset(const SynthConfig& base, std::size_t count,
                                       std::size_t length) {
  std::vector<Sequence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SynthConfig c = base;
    c.seed = base.seed + i;
    out.push_back(generate_sequence(c, length));
  }
  return out;
}

// --- KITTI -------------------------------------------------------------------

std::vector<VelodynePoint> read_velodyne_bin(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingFrameError("missing point file: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() % sizeof(VelodynePoint) != 0) {
    throw KittiError("point file size is not a multiple of 16 bytes: " + path.string());
  }
  std::vector<VelodynePoint> pts(bytes.size() / sizeof(VelodynePoint));
  // Files are little-endian float32, matching every supported host.
  std::memcpy(pts.data(), bytes.data(), bytes.size());
  return pts;
}

void write_velodyne_bin(const std::filesystem::path& path, const std::vector<VelodynePoint>& pts) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write point file: " + path.string());
  f.write(reinterpret_cast<const char*>(pts.data()),
          static_cast<std::streamsize>(pts.size() * sizeof(VelodynePoint)));
}

std::vector<KittiLabel> parse_kitti_labels(const std::filesystem::path& label_file) {
  std::ifstream f(label_file);
  if (!f) throw KittiError("cannot open label file: " + label_file.string());
  std::vector<KittiLabel> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    KittiLabel l;
    if (!(ss >> l.frame >> l.track_id >> l.type >> l.truncated >> l.occluded >> l.alpha >>
          l.bbox2d[0] >> l.bbox2d[1] >> l.bbox2d[2] >> l.bbox2d[3] >> l.h >> l.w >> l.l >> l.x >>
          l.y >> l.z >> l.rotation_y)) {
      throw MalformedLabelError(label_file.string() + ":" + std::to_string(lineno) +
                                ": expected 17 label fields");
    }
    out.push_back(l);
  }
  return out;
}

namespace {

std::array<double, 9> inverse3(const std::array<double, 9>& m) {
  const double a = m[0], b = m[1], c = m[2], d = m[3], e = m[4], f = m[5], g = m[6], h = m[7],
               i = m[8];
  const double det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
  if (std::abs(det) < 1e-12) throw MalformedCalibError("calibration matrix is singular");
  const double s = 1.0 / det;
  return {(e * i - f * h) * s, (c * h - b * i) * s, (b * f - c * e) * s,
          (f * g - d * i) * s, (a * i - c * g) * s, (c * d - a * f) * s,
          (d * h - e * g) * s, (b * g - a * h) * s, (a * e - b * d) * s};
}

Vec3 mul3(const std::array<double, 9>& m, const Vec3& p) {
  return {m[0] * p.x + m[1] * p.y + m[2] * p.z, m[3] * p.x + m[4] * p.y + m[5] * p.z,
          m[6] * p.x + m[7] * p.y + m[8] * p.z};
}

std::array<double, 9> rotation_part(const std::array<double, 12>& t) {
  return {t[0], t[1], t[2], t[4], t[5], t[6], t[8], t[9], t[10]};
}

}  // namespace

Vec3 KittiCalib::rect_dir_to_velo(const Vec3& d) const {
  const Vec3 cam = mul3(inverse3(r_rect), d);
  return mul3(inverse3(rotation_part(velo_to_cam)), cam);
}

Vec3 KittiCalib::rect_to_velo(const Vec3& p) const {
  const Vec3 cam = mul3(inverse3(r_rect), p);
  const Vec3 t{velo_to_cam[3], velo_to_cam[7], velo_to_cam[11]};
  return mul3(inverse3(rotation_part(velo_to_cam)), cam - t);
}

KittiCalib parse_kitti_calib(const std::filesystem::path& calib_file) {
  std::ifstream f(calib_file);
  if (!f) throw KittiError("cannot open calibration file: " + calib_file.string());
  KittiCalib calib;
  bool have_rect = false, have_tr = false;
  std::string line;
  while (std::getline(f, line)) {
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key)) continue;
    if (!key.empty() && key.back() == ':') key.pop_back();
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);
    if (key == "R_rect" || key == "R0_rect") {
      if (vals.size() != 9) throw MalformedCalibError(key + ": expected 9 values");
      std::copy(vals.begin(), vals.end(), calib.r_rect.begin());
      have_rect = true;
    } else if (key == "Tr_velo_cam" || key == "Tr_velo_to_cam") {
      if (vals.size() != 12) throw MalformedCalibError(key + ": expected 12 values");
      std::copy(vals.begin(), vals.end(), calib.velo_to_cam.begin());
      have_tr = true;
    }
  }
  if (!have_rect || !have_tr) {
    throw MalformedCalibError("calibration file lacks R_rect or Tr_velo_cam: " +
                              calib_file.string());
  }
  return calib;
}

Box3D kitti_label_to_box(const KittiLabel& label, const KittiCalib& calib) {
  Vec3 c = calib.rect_to_velo({label.x, label.y, label.z});
  c.z += 0.5 * label.h;
  // Object length axis in the camera frame is x rotated by rotation_y about +y.
  const Vec3 dir = calib.rect_dir_to_velo(
      {std::cos(label.rotation_y), 0.0, -std::sin(label.rotation_y)});
  return Box3D::make(c, label.w, label.l, label.h, std::atan2(dir.y, dir.x));
}

Sequence load_kitti_tracklet(const std::filesystem::path& velodyne_dir,
                             const std::filesystem::path& label_file,
                             const std::filesystem::path& calib_file, long track_id) {
  const auto labels = parse_kitti_labels(label_file);
  const KittiCalib calib = parse_kitti_calib(calib_file);
  std::map<std::size_t, const KittiLabel*> by_frame;
  for (const auto& l : labels)
    if (l.track_id == track_id) by_frame.emplace(l.frame, &l);
  if (by_frame.empty()) {
    throw UnknownTrackError("track id " + std::to_string(track_id) + " not found in " +
                            label_file.string());
  }
  Sequence seq;
  seq.category = by_frame.begin()->second->type;
  seq.id = label_file.stem().string() + "_" + std::to_string(track_id);
  std::size_t expected = by_frame.begin()->first;
  for (const auto& [frame, label] : by_frame) {
    if (frame != expected) break;  // first contiguous run only
    std::ostringstream name;
    name << std::setw(6) << std::setfill('0') << frame << ".bin";
    const auto pts = read_velodyne_bin(velodyne_dir / name.str());
    PointCloud cloud;
    cloud.reserve(pts.size());
    for (const auto& p : pts) cloud.push_back({p[0], p[1], p[2]});
    seq.frames.push_back(std::move(cloud));
    seq.gt_boxes.push_back(kitti_label_to_box(*label, calib));
    ++expected;
  }
  return seq;
}

// --- Dataset directory -------------------------------------------------------

void save_dataset(const std::filesystem::path& root, const std::vector<Sequence>& seqs) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  std::ofstream index(root / "index.txt");
  for (const auto& s : seqs) {
    s.validate();
    const fs::path dir = root / s.id;
    fs::create_directories(dir / "frames");
    index << s.id << '\n';
    std::ofstream meta(dir / "meta.txt");
    meta << "category " << s.category << "\nframes " << s.size() << '\n';
    std::vector<TrajectoryRecord> recs;
    for (std::size_t t = 0; t < s.size(); ++t) {
      recs.push_back({t, s.gt_boxes[t], TrackStatus::kNormal});
      std::vector<VelodynePoint> pts;
      pts.reserve(s.frames[t].size());
      for (const auto& p : s.frames[t])
        pts.push_back({static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.z), 0.0f});
      std::ostringstream name;
      name << std::setw(6) << std::setfill('0') << t << ".bin";
      write_velodyne_bin(dir / "frames" / name.str(), pts);
    }
    std::ofstream boxes(dir / "boxes.txt");
    write_trajectory(boxes, recs);
  }
}

std::vector<Sequence> load_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::ifstream index(root / "index.txt");
  if (!index) throw std::runtime_error("dataset index not found: " + (root / "index.txt").string());
  std::vector<Sequence> out;
  std::string id;
  while (std::getline(index, id)) {
    if (id.empty()) continue;
    const fs::path dir = root / id;
    Sequence s;
    s.id = id;
    std::ifstream meta(dir / "meta.txt");
    if (!meta) throw std::runtime_error("missing meta.txt for sequence " + id);
    std::string key;
    std::size_t frames = 0;
    while (meta >> key) {
      if (key == "category") meta >> s.category;
      else if (key == "frames") meta >> frames;
      else throw std::runtime_error("meta.txt: unknown key '" + key + "' in " + id);
    }
    std::ifstream boxes(dir / "boxes.txt");
    if (!boxes) throw std::runtime_error("missing boxes.txt for sequence " + id);
    for (const auto& r : read_trajectory(boxes)) s.gt_boxes.push_back(r.box);
    for (std::size_t t = 0; t < frames; ++t) {
      std::ostringstream name;
      name << std::setw(6) << std::setfill('0') << t << ".bin";
      PointCloud cloud;
      for (const auto& p : read_velodyne_bin(dir / "frames" / name.str()))
        cloud.push_back({p[0], p[1], p[2]});
      s.frames.push_back(std::move(cloud));
    }
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TrainingSample> make_training_samples(const Sequence& seq, std::size_t seq_index,
                                                  std::size_t sample_len,
                                                  std::size_t train_memory,
                                                  std::size_t* skipped) {
  if (sample_len < 2) throw std::invalid_argument("make_training_samples: sample_len must be >= 2");
  if (train_memory == 0) throw std::invalid_argument("make_training_samples: train_memory must be >= 1");
  std::vector<TrainingSample> out;
  if (seq.size() < sample_len) {
    if (skipped) ++*skipped;
    return out;
  }
  for (std::size_t s = 0; s + sample_len <= seq.size(); ++s)
    out.push_back({seq_index, s, sample_len, train_memory});
  return out;
}

}  // namespace mbp
