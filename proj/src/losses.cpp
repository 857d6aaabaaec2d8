#include "mbptrack/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mbp {
namespace {

void require_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw std::invalid_argument(std::string("compute_losses: NaN/Inf in ") + what);
}

double dist(const Tensor& centers, std::size_t r, const Vec3& c) {
  return Vec3{centers(r, 0) - c.x, centers(r, 1) - c.y, centers(r, 2) - c.z}.norm();
}

}  // namespace

LossTerms compute_losses(const VoteOutput& vote, const ProposalSet& proposals,
                         const FrameTargets& targets, const LossWeights& weights,
                         const LossOptions& options) {
  const Tensor& centers = vote.centers.value();
  const std::size_t n = centers.rows();
  require_finite(centers, "voted centers");
  require_finite(vote.mask_logits.value(), "mask logits");
  require_finite(vote.quality_logits.value(), "quality logits");
  require_finite(proposals.centers.value(), "proposal centers");
  require_finite(proposals.box_params.value(), "box parameters");
  require_finite(proposals.score_logits.value(), "score logits");
  if (targets.gt_mask.size() != n) {
    throw std::invalid_argument("compute_losses: gt mask length does not match seed count");
  }
  const Vec3& gt = targets.gt_center;
  if (!std::isfinite(gt.x) || !std::isfinite(gt.y) || !std::isfinite(gt.z) ||
      !std::isfinite(targets.gt_motion.dtheta)) {
    throw std::invalid_argument("compute_losses: NaN/Inf in targets");
  }

  LossTerms out;
  const double inv_n = 1.0 / static_cast<double>(n);

  // Mask: BCE averaged over seeds.
  const std::vector<double> seed_w(n, inv_n);
  const ad::Var l_mask = ad::bce_with_logits_sum(vote.mask_logits, targets.gt_mask, seed_w);

  // Center: squared distance to the target center over foreground seeds.
  const double fg = std::accumulate(targets.gt_mask.begin(), targets.gt_mask.end(), 0.0);
  ad::Var l_center;
  if (fg > 0.0) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = targets.gt_mask[i] / fg;
    Tensor gt_rows(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
      gt_rows(i, 0) = gt.x;
      gt_rows(i, 1) = gt.y;
      gt_rows(i, 2) = gt.z;
    }
    const ad::Var diff = ad::sub(vote.centers, ad::constant(std::move(gt_rows)));
    l_center = ad::row_weighted_sum(ad::mul(diff, diff), w);
  } else {
    out.no_foreground = true;
    l_center = ad::constant(Tensor(1, 1, 0.0));
  }

  // Quality: voted center within the positive radius.
  std::vector<double> q_label(n);
  for (std::size_t i = 0; i < n; ++i)
    q_label[i] = dist(centers, i, gt) < options.positive_radius ? 1.0 : 0.0;
  const ad::Var l_quality = ad::bce_with_logits_sum(vote.quality_logits, q_label, seed_w);

  // Score: refined center (proposal center + residual) within the radius.
  const Tensor& pc = proposals.centers.value();
  const Tensor& bp = proposals.box_params.value();
  const std::size_t np = pc.rows();
  std::vector<double> s_label(np), prop_w(np, 1.0 / static_cast<double>(std::max<std::size_t>(np, 1)));
  std::vector<double> pos_w(np, 0.0);
  Tensor bbox_target(np, 4);
  std::size_t positives = 0;
  for (std::size_t p = 0; p < np; ++p) {
    const Vec3 refined{pc(p, 0) + bp(p, 0), pc(p, 1) + bp(p, 1), pc(p, 2) + bp(p, 2)};
    s_label[p] = (refined - gt).norm() < options.positive_radius ? 1.0 : 0.0;
    if (dist(pc, p, gt) < options.positive_radius) {
      pos_w[p] = 1.0;
      ++positives;
    }
    bbox_target(p, 0) = gt.x;
    bbox_target(p, 1) = gt.y;
    bbox_target(p, 2) = gt.z;
    bbox_target(p, 3) = targets.gt_motion.dtheta;
  }
  const ad::Var l_score = ad::bce_with_logits_sum(proposals.score_logits, s_label, prop_w);

  // Box: smooth-L1 over positive proposals, mean over their 4 parameters.
  ad::Var l_bbox;
  if (positives > 0) {
    for (auto& w : pos_w) w /= 4.0 * static_cast<double>(positives);
    // Refined center c + residual against the ground truth; gradients reach
    // the proposal centers as well.
    const ad::Var offsets[] = {proposals.centers, ad::constant(Tensor(np, 1))};
    const ad::Var refined = ad::add(proposals.box_params, ad::concat_cols(offsets));
    l_bbox = ad::smooth_l1_sum(refined, bbox_target, pos_w, options.smooth_l1_beta);
  } else {
    l_bbox = ad::constant(Tensor(1, 1, 0.0));
  }
  out.positive_proposals = positives;

  out.mask = l_mask.value()[0];
  out.center = l_center.value()[0];
  out.quality = l_quality.value()[0];
  out.score = l_score.value()[0];
  out.bbox = l_bbox.value()[0];
  const ad::Var terms[] = {ad::scale(l_mask, weights.mask), ad::scale(l_center, weights.center),
                           ad::scale(l_quality, weights.quality), ad::scale(l_score, weights.score),
                           l_bbox};
  ad::Var total = terms[0];
  for (std::size_t i = 1; i < 5; ++i) total = ad::add(total, terms[i]);
  out.total = total;
  return out;
}

double smooth_l1(std::span<const double> pred, std::span<const double> gt, double beta) {
  if (pred.size() != gt.size()) throw std::invalid_argument("smooth_l1: length mismatch");
  if (!(beta > 0.0)) throw std::invalid_argument("smooth_l1: beta must be positive");
  if (pred.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = std::abs(pred[i] - gt[i]);
    s += e < beta ? 0.5 * e * e / beta : e - 0.5 * beta;
  }
  return s / static_cast<double>(pred.size());
}

std::vector<Bploc::CenterOverride> positive_sampling_overrides(
    const PointCloud& proposal_centers, const Vec3& gt_center, Rigidity rigidity,
    const PositiveSamplingConfig& cfg, std::mt19937_64& rng) {
  if (!(cfg.fraction >= 0.0 && cfg.fraction <= 1.0) || !(cfg.sigma >= 0.0)) {
    throw std::invalid_argument("positive_sampling: fraction must be in [0,1], sigma >= 0");
  }
  std::vector<Bploc::CenterOverride> out;
  if (rigidity == Rigidity::kRigid) return out;
  const std::size_t np = proposal_centers.size();
  const auto count = static_cast<std::size_t>(std::lround(cfg.fraction * static_cast<double>(np)));
  if (count == 0) return out;
  std::vector<std::size_t> order(np);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return (proposal_centers[a] - gt_center).squared_norm() >
           (proposal_centers[b] - gt_center).squared_norm();
  });
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    const double nx = noise(rng), ny = noise(rng), nz = noise(rng);
    out.push_back({order[i], gt_center + Vec3{nx * cfg.sigma, ny * cfg.sigma, nz * 0.5 * cfg.sigma}});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.row < b.row; });
  return out;
}

PointCloud positive_sampling(const PointCloud& proposal_centers, const Vec3& gt_center,
                             Rigidity rigidity, const PositiveSamplingConfig& cfg,
                             std::mt19937_64& rng) {
  PointCloud out = proposal_centers;
  for (const auto& o : positive_sampling_overrides(proposal_centers, gt_center, rigidity, cfg, rng))
    out[o.row] = o.center;
  return out;
}

}  // namespace mbp
