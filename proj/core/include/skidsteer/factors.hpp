#pragma once

#include <compare>
#include <map>
#include <memory>
#include <vector>

#include "skidsteer/geom.hpp"
#include "skidsteer/imu.hpp"
#include "skidsteer/kinematics.hpp"
#include "skidsteer/manifold.hpp"
#include "skidsteer/noise.hpp"
#include "skidsteer/odometry.hpp"
#include "skidsteer/simulate.hpp"

namespace skidsteer {

enum class BlockKind : int { Pose = 0, Xi = 1, SpeedBias = 2, Manifold = 3, Landmark = 4 };

struct BlockKey {
  BlockKind kind = BlockKind::Pose;
  long id = 0;
  auto operator<=>(const BlockKey&) const = default;
};

int tangent_dim(BlockKind kind);

// All estimated quantities, keyed by block id. Maps keep the iteration order
// deterministic.
struct Values {
  std::map<long, Pose> poses;
  std::map<long, Vec5> xi;
  std::map<long, Vec9> sb;
  std::map<long, Vec6> m;
  std::map<long, Vec3> lm;

  bool contains(const BlockKey& k) const;
  void retract(const BlockKey& k, const VecX& delta);
  // Tangent-space difference a [-] b for one block.
  VecX local(const BlockKey& k, const Values& b) const;
  // Jacobian of local(k, b) with respect to a perturbation of this value.
  MatX local_jacobian(const BlockKey& k, const Values& b) const;
  void copy_block(const BlockKey& k, const Values& from);
  void erase(const BlockKey& k);
};

enum class FactorKind : int { Prior = 0, Visual = 1, Imu = 2, Odometer = 3, Manifold = 4 };
const char* factor_kind_name(FactorKind k);

class Factor {
 public:
  virtual ~Factor() = default;
  virtual FactorKind kind() const = 0;
  const std::vector<BlockKey>& keys() const { return keys_; }
  // Residual, and one Jacobian per key over the block's full tangent space.
  virtual VecX evaluate(const Values& v, std::vector<MatX>* J) const = 0;
  const MatX& information() const { return info_; }
  // Constant term added to 0.5 r^T W r (used by the linear prior).
  virtual double extra_cost(const VecX& /*r*/) const { return 0.0; }
  virtual VecX extra_gradient() const { return VecX(); }

 protected:
  std::vector<BlockKey> keys_;
  MatX info_;
};

using FactorPtr = std::shared_ptr<const Factor>;

class VisualFactor final : public Factor {
 public:
  VisualFactor(long pose_id, long landmark_key, const Vec2& uv, const SensorRig& rig,
               double sigma_pixel);
  FactorKind kind() const override { return FactorKind::Visual; }
  VecX evaluate(const Values& v, std::vector<MatX>* J) const override;
  const Vec2& uv() const { return uv_; }

 private:
  Vec2 uv_;
  SensorRig rig_;
};

// Re-integrates the encoder slice at the current parameter estimate on every
// evaluation; the weight is fixed when the factor is created.
class OdometerFactor final : public Factor {
 public:
  OdometerFactor(long id_km1, long id_k, std::vector<EncoderReading> slice, double t0, double t1,
                 const MatX& information);
  FactorKind kind() const override { return FactorKind::Odometer; }
  VecX evaluate(const Values& v, std::vector<MatX>* J) const override;

 private:
  std::vector<EncoderReading> slice_;
  double t0_, t1_;
};

class ImuFactor final : public Factor {
 public:
  ImuFactor(long id_km1, long id_k, const ImuPreintegration& pre, const Vec3& gravity,
            const Pose& ext_OI);
  FactorKind kind() const override { return FactorKind::Imu; }
  VecX evaluate(const Values& v, std::vector<MatX>* J) const override;
  const ImuPreintegration& preintegration() const { return pre_; }

 private:
  ImuPreintegration pre_;
  Vec3 gravity_;
  Pose ext_;
};

// With a previous manifold block the residual has 9 rows; without one, only
// the height and the two attitude rows remain.
class ManifoldFactor final : public Factor {
 public:
  ManifoldFactor(long pose_id, long m_id, long m_prev_id, const Vec9& weights);
  ManifoldFactor(long pose_id, long m_id, const Vec9& weights);
  FactorKind kind() const override { return FactorKind::Manifold; }
  VecX evaluate(const Values& v, std::vector<MatX>* J) const override;

 private:
  bool has_prev_;
};

// 0.5 * (x [-] x0)^T L (x [-] x0) + g^T (x [-] x0) over the concatenated
// tangent spaces of its keys.
class PriorFactor final : public Factor {
 public:
  PriorFactor(std::vector<BlockKey> keys, Values lin_point, const MatX& information,
              const VecX& gradient);
  FactorKind kind() const override { return FactorKind::Prior; }
  VecX evaluate(const Values& v, std::vector<MatX>* J) const override;
  double extra_cost(const VecX& r) const override { return g_.dot(r); }
  VecX extra_gradient() const override { return g_; }
  const Values& linearization_point() const { return lin_; }
  const VecX& gradient() const { return g_; }

 private:
  Values lin_;
  VecX g_;
};

}  // namespace skidsteer
