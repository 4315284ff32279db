#pragma once

#include <string>
#include <vector>

#include "skidsteer/geom.hpp"
#include "skidsteer/kinematics.hpp"
#include "skidsteer/simulate.hpp"

namespace skidsteer {

struct ScenarioConfig;

// Noiseless camera-derived velocities and wheel speeds at one instant.
// omega: yaw rate in the odometer frame. v: camera velocity in odometer axes
// divided by the visual scale. v_C: the same in camera axes.
struct MotionSample {
  double t = 0.0;
  double omega = 0.0;
  Vec3 v = Vec3::Zero();
  Vec3 v_C = Vec3::Zero();
  double o_l = 0.0;
  double o_r = 0.0;
};

struct InferredMotion {
  std::vector<MotionSample> samples;
  double scale = 1.0;
};

// Uses the planar body velocities of the trajectory. The scale divides the
// camera velocity only when use_imu is false. Samples are taken on a uniform
// stride so that at most max_samples remain.
InferredMotion infer_motion(const Trajectory& traj, const KinematicParams& xi,
                            const SensorRig& rig, bool use_imu, double scale = 1.0,
                            int max_samples = 200);

// Residuals of the three camera-odometer constraints at one sample for the
// five-parameter model: [c_x, c_y, c_omega].
Vec3 constraint_residual(const MotionSample& m, const KinematicParams& xi, double scale,
                         const Pose& extrinsics_OC);

// Column layouts:
//   mono5     [Y_l, dY, X_v, beta_l, beta_r, s]
//   mono3     [Y_l, dY, X_v, s]
//   vio5      [Y_l, dY, X_v, beta_l, beta_r]
//   ext_p     vio5 + [x_C, y_C, z_C]
//   ext_theta vio5 + three rotation error components (camera frame)
enum class ObsVariant { Mono5, Mono3, Vio5, ExtP, ExtTheta };

const char* variant_name(ObsVariant v);
ObsVariant parse_variant(const std::string& s);
std::vector<ObsVariant> all_variants();

struct ParamSet {
  ObsVariant variant = ObsVariant::Vio5;
  KinematicParams xi;
  double scale = 1.0;
  Pose extrinsics_OC;

  double beta_l() const { return xi.alpha_l / xi.delta_y(); }
  double beta_r() const { return xi.alpha_r / xi.delta_y(); }
  int columns() const;
  std::vector<std::string> column_names() const;
};

// Three rows per sample, as derived from the constraints.
MatX build_matrix(const InferredMotion& motion, const ParamSet& params);

// Column-reduced form for mono3, vio5 and ext_theta; the raw matrix for the
// other variants.
MatX build_reduced_matrix(const InferredMotion& motion, const ParamSet& params);

enum class Degeneracy {
  ZeroOl,
  ZeroOr,
  ZeroOmega,
  AllConstant,
  ProportionalWheels,
  OmegaProportionalOl,
};

const char* degeneracy_name(Degeneracy d);

struct MatchedDirection {
  std::string label;
  double angle_deg = 90.0;  // angle between the vector and the kernel
  bool matched = false;
};

struct ObservabilityReport {
  std::string variant;
  MatX matrix;
  int rank = 0;
  int columns = 0;
  VecX singular_values;  // descending
  MatX nullspace_basis;  // one column per kernel direction
  std::vector<MatchedDirection> matched_null_directions;
  std::vector<Degeneracy> degeneracy;  // from kernel membership
  std::vector<Degeneracy> motion_flags;  // from the signals themselves

  int nullity() const { return columns - rank; }
};

inline constexpr double kDefaultRankTol = 1e-8;
inline constexpr double kAlignmentTolDeg = 1.0;

ObservabilityReport analyze(const MatX& matrix, double tol_ratio = kDefaultRankTol);

// Angle in degrees between k and its projection onto the kernel of a report.
double kernel_angle_deg(const ObservabilityReport& r, const VecX& k);

struct LabeledVector {
  std::string label;
  VecX k;
  // Set for the vectors that signal a degenerate motion class.
  bool has_class = false;
  Degeneracy cls = Degeneracy::ZeroOl;
};

// Kernel vectors stated for a variant with every free scalar set to one, in
// the coordinates of build_reduced_matrix (build_matrix for mono5 and ext_p).
// The "-ratio" entries carry no class; they use signal ratios fitted from
// the motion where the unit-vector form is not a kernel vector.
std::vector<LabeledVector> analytic_null_vectors(const InferredMotion& motion,
                                                 const ParamSet& params);

// Requires at least 10 samples.
std::vector<Degeneracy> classify_motion(const InferredMotion& motion);

// Builds the reduced matrix, analyzes it, and matches the analytic vectors.
ObservabilityReport observability_report(const InferredMotion& motion, const ParamSet& params,
                                         double tol_ratio = kDefaultRankTol);

struct IdentifiabilityResult {
  std::string variant;
  std::string mode;
  std::vector<std::string> parameters;  // names of the online parameters
  std::vector<double> initial_std;
  std::vector<double> final_std;
  std::vector<double> contraction;  // initial / final
  std::vector<bool> contracted;     // contraction >= 2
  bool run_failed = false;
  std::string error;
  ObservabilityReport analytic;
};

// Runs the estimator for the variant's mode on the scenario (mono5: vo_xi5,
// mono3: vo_icr3, vio5: vio_xi5) and compares marginal stds of the kinematic
// parameters at the first keyframe and at the end of the first `fraction` of
// the run. The extrinsic variants have no estimator counterpart.
IdentifiabilityResult empirical_identifiability(const ScenarioConfig& cfg, ObsVariant variant,
                                                std::uint64_t seed, double fraction = 1.0);

}  // namespace skidsteer
