#include "mbptrack/train.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "mbptrack/tracker.hpp"

namespace mbp {

Adam::Adam(nn::ParameterStore& store, AdamConfig cfg) : store_(store), cfg_(cfg) {
  if (!(cfg_.lr > 0.0)) throw std::invalid_argument("adam: lr must be positive");
  for (const auto& e : store_.entries()) {
    m_.emplace_back(e.var.rows(), e.var.cols());
    v_.emplace_back(e.var.rows(), e.var.cols());
  }
}

void Adam::step(double grad_scale) {
  auto& entries = store_.entries();
  if (entries.size() != m_.size()) throw std::logic_error("adam: parameter set changed");
  double clip = 1.0;
  if (cfg_.grad_clip > 0.0) {
    double sq = 0.0;
    for (auto& e : entries) {
      if (!e.var.has_grad()) continue;
      for (double g : e.var.grad().storage()) sq += g * g * grad_scale * grad_scale;
    }
    const double norm = std::sqrt(sq);
    if (norm > cfg_.grad_clip) clip = cfg_.grad_clip / norm;
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ad::Var& p = entries[i].var;
    if (!p.has_grad()) continue;
    const auto& g = p.grad().storage();
    auto& w = p.mutable_value().storage();
    auto& m = m_[i].storage();
    auto& v = v_[i].storage();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j] * grad_scale * clip;
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
      w[j] -= cfg_.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.eps);
    }
  }
  store_.zero_grad();
}

Trainer::Trainer(MbpNetwork& net, TrainConfig cfg)
    : net_(net), cfg_(cfg), adam_(net.params(), cfg.adam), rng_(cfg.seed) {
  if (cfg_.sample_len < 2) throw std::invalid_argument("train: sample_len must be >= 2");
  if (cfg_.train_memory < 1) throw std::invalid_argument("train: train_memory must be >= 1");
  if (cfg_.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
}

namespace {

// Mirror across the x-z plane and rotate about z by `angle`.
Sequence augment(const Sequence& seq, std::size_t start, std::size_t len, bool flip,
                 double angle) {
  Sequence out;
  out.category = seq.category;
  out.id = seq.id;
  for (std::size_t t = start; t < start + len; ++t) {
    PointCloud pts = seq.frames[t];
    Box3D b = seq.gt_boxes[t];
    for (auto& p : pts) {
      if (flip) p.y = -p.y;
      p = rotate_z(p, angle);
    }
    if (flip) {
      b.center.y = -b.center.y;
      b.heading = -b.heading;
    }
    b.center = rotate_z(b.center, angle);
    b.heading = normalize_angle(b.heading + angle);
    out.frames.push_back(std::move(pts));
    out.gt_boxes.push_back(b);
  }
  return out;
}

}  // namespace

LossRecord Trainer::run_sample(const Sequence& full, const TrainingSample& sample) {
  if (sample.start + sample.length > full.size()) {
    throw std::out_of_range("train: sample window exceeds sequence " + full.id);
  }
  const bool flip = cfg_.yaw_flip && std::bernoulli_distribution(0.5)(rng_);
  const double angle =
      cfg_.max_global_rotation > 0.0
          ? std::uniform_real_distribution<double>(-cfg_.max_global_rotation,
                                                   cfg_.max_global_rotation)(rng_)
          : 0.0;
  const Sequence seq = augment(full, sample.start, sample.length, flip, angle);
  const std::size_t crop = net_.config().backbone.input_points;
  const Rigidity rigidity = rigidity_of(seq.category);

  MemoryBank memory(sample.memory);
  const Box3D& first = seq.gt_boxes[0];
  const Vec3 extent = grid_extent(first);
  {
    const SearchRegion region = crop_search_region(seq.frames[0], first, cfg_.margin, crop, rng_);
    const Box3D canonical{{}, first.w, first.l, first.h, 0.0};
    memory.push(net_.bootstrap_entry(region.points, points_in_box(region.points, canonical), first));
  }

  LossRecord rec;
  std::size_t supervised = 0;
  std::normal_distribution<double> jt(0.0, cfg_.jitter_translation);
  std::normal_distribution<double> jy(0.0, cfg_.jitter_yaw);
  for (std::size_t t = 1; t < seq.size(); ++t) {
    Box3D frame = seq.gt_boxes[t - 1];
    if (cfg_.jitter_translation > 0.0) {
      frame.center.x += jt(rng_);
      frame.center.y += jt(rng_);
      frame.center.z += 0.5 * jt(rng_);
    }
    if (cfg_.jitter_yaw > 0.0) frame.heading = normalize_angle(frame.heading + jy(rng_));

    const SearchRegion region = crop_search_region(seq.frames[t], frame, cfg_.margin, crop, rng_);
    const Box3D& gt = seq.gt_boxes[t];
    FrameTargets targets;
    targets.gt_motion = relative_motion(frame, gt);
    targets.gt_center = to_canonical(gt.center, frame);
    targets.gt_box = Box3D{targets.gt_center, gt.w, gt.l, gt.h, targets.gt_motion.dtheta};

    Bploc::OverrideFn overrides;
    if (cfg_.positive_sampling && rigidity == Rigidity::kNonRigid) {
      overrides = [&](const PointCloud& centers) {
        return positive_sampling_overrides(centers, targets.gt_center, rigidity, cfg_.sampling,
                                           rng_);
      };
    }
    const auto mem = memory.view_in_frame(frame, memory.capacity());
    FrameForward fwd = net_.forward(region.points, mem, extent, std::nullopt, overrides);
    targets.gt_mask = points_in_box(fwd.seeds.coords, targets.gt_box);

    LossTerms terms = compute_losses(fwd.vote, fwd.proposals, targets, cfg_.weights, cfg_.loss);
    ad::backward(terms.total);
    rec.total += terms.total.value()[0];
    rec.mask += terms.mask;
    rec.center += terms.center;
    rec.quality += terms.quality;
    rec.score += terms.score;
    rec.bbox += terms.bbox;
    ++supervised;

    const TargetnessMask mask = cfg_.gt_memory_masks ? targets.gt_mask : fwd.vote.mask();
    memory.push(MbpNetwork::make_entry(fwd, mask, frame));
  }
  const double inv = 1.0 / static_cast<double>(std::max<std::size_t>(supervised, 1));
  rec.total *= inv;
  rec.mask *= inv;
  rec.center *= inv;
  rec.quality *= inv;
  rec.score *= inv;
  rec.bbox *= inv;
  return rec;
}

std::vector<LossRecord> Trainer::fit(const std::vector<Sequence>& data,
                                     const std::function<void(const LossRecord&)>& on_step) {
  std::vector<TrainingSample> samples;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto s = make_training_samples(data[i], i, cfg_.sample_len, cfg_.train_memory, &skipped);
    samples.insert(samples.end(), s.begin(), s.end());
  }
  if (samples.empty()) throw std::invalid_argument("train: no sequence is long enough to sample");

  std::vector<LossRecord> log;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::shuffle(samples.begin(), samples.end(), rng_);
    for (std::size_t b = 0; b < samples.size(); b += cfg_.batch_size) {
      const std::size_t end = std::min(samples.size(), b + cfg_.batch_size);
      LossRecord acc;
      for (std::size_t i = b; i < end; ++i) {
        const LossRecord r = run_sample(data[samples[i].sequence], samples[i]);
        acc.total += r.total;
        acc.mask += r.mask;
        acc.center += r.center;
        acc.quality += r.quality;
        acc.score += r.score;
        acc.bbox += r.bbox;
      }
      // Each frame's loss is backpropagated unscaled; average here.
      const double frames = static_cast<double>((end - b) * (cfg_.sample_len - 1));
      adam_.step(1.0 / frames);
      const double inv = 1.0 / static_cast<double>(end - b);
      acc.total *= inv;
      acc.mask *= inv;
      acc.center *= inv;
      acc.quality *= inv;
      acc.score *= inv;
      acc.bbox *= inv;
      acc.epoch = epoch;
      acc.step = step++;
      log.push_back(acc);
      if (on_step) on_step(acc);
    }
  }
  return log;
}

void write_loss_log(std::ostream& os, const std::vector<LossRecord>& records) {
  os << "epoch,step,total,mask,center,quality,score,bbox\n";
  for (const auto& r : records) {
    os << r.epoch << ',' << r.step << ',' << std::setprecision(9) << r.total << ',' << r.mask << ','
       << r.center << ',' << r.quality << ',' << r.score << ',' << r.bbox << '\n';
  }
}

}  // namespace mbp
