#pragma once

#include <random>
#include <span>
#include <vector>

#include "mbptrack/autodiff.hpp"
#include "mbptrack/bploc.hpp"
#include "mbptrack/geometry.hpp"

namespace mbp {

struct LossWeights {
  double mask = 0.2;      // lambda_m
  double center = 10.0;   // lambda_c
  double quality = 1.0;   // lambda_q
  double score = 1.0;     // lambda_s
};

// Supervision for one frame, expressed in that frame's canonical (search) frame.
struct FrameTargets {
  Box3D gt_box;
  TargetnessMask gt_mask;  // seed resolution, binary
  Vec3 gt_center;
  Motion4DOF gt_motion;
};

struct LossOptions {
  double positive_radius = 0.3;  // strict: distance < radius is positive
  double smooth_l1_beta = 1.0;
};

struct LossTerms {
  ad::Var total;
  double mask = 0.0;
  double center = 0.0;
  double quality = 0.0;
  double score = 0.0;
  double bbox = 0.0;
  bool no_foreground = false;
  std::size_t positive_proposals = 0;
};

LossTerms compute_losses(const VoteOutput& vote, const ProposalSet& proposals,
                         const FrameTargets& targets, const LossWeights& weights,
                         const LossOptions& options = {});

// Mean elementwise smooth-L1.
double smooth_l1(std::span<const double> pred, std::span<const double> gt, double beta = 1.0);

enum class Rigidity { kRigid, kNonRigid };

struct PositiveSamplingConfig {
  double fraction = 0.5;
  double sigma = 0.075;  // meters; z noise uses sigma / 2
};

// Rows of the proposal centers to replace (the round(fraction * N_p) farthest
// from the target) and their jittered replacements. Empty for rigid targets.
std::vector<Bploc::CenterOverride> positive_sampling_overrides(
    const PointCloud& proposal_centers, const Vec3& gt_center, Rigidity rigidity,
    const PositiveSamplingConfig& cfg, std::mt19937_64& rng);

PointCloud positive_sampling(const PointCloud& proposal_centers, const Vec3& gt_center,
                             Rigidity rigidity, const PositiveSamplingConfig& cfg,
                             std::mt19937_64& rng);

}  // namespace mbp
