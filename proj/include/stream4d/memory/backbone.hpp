#pragma once

#include "stream4d/memory/memory_pool.hpp"

#include <cstdint>
#include <functional>

namespace stream4d::memory {

struct FrameInput {
  const Image* image = nullptr;
  int t_index = 0;
  double timestamp = 0.0;
  int sensor = 0;
};

struct DecodedPair {
  TokenGrid target;
  TokenGrid reference;
};

struct HeadOutput {
  Pointmap points;  // sequence frame
  ConfidenceMap confidence;
};

struct MemoryKV {
  TokenGrid keys;
  TokenGrid values;
};

// Fixed-size patch tokenizer; partial patches at the borders average the
// pixels they cover.
struct PatchGrid {
  int patch = 16;
  int width = 0;
  int height = 0;

  int cols() const { return (width + patch - 1) / patch; }
  int rows() const { return (height + patch - 1) / patch; }
  int count() const { return cols() * rows(); }
  int token_of(int u, int v) const { return (v / patch) * cols() + (u / patch); }
};

// Encoder, paired decoders, point/confidence head, memory encoder and query
// head of the streaming model.
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual int feature_dim() const = 0;
  virtual TokenGrid encode(const FrameInput& frame) const = 0;
  virtual DecodedPair decode(const TokenGrid& target, const TokenGrid& reference) const = 0;
  virtual HeadOutput point_head(const TokenGrid& reference, const FrameInput& frame) const = 0;
  virtual MemoryKV memory_encode(const TokenGrid& reference, const TokenGrid& encoded,
                                 const Pointmap& points) const = 0;
  virtual TokenGrid query_head(const TokenGrid& target) const = 0;
};

// Emits ground-truth pointmaps so geometric stages can be checked exactly.
// Features are a fixed sinusoidal positional encoding concatenated with a
// sinusoidal encoding of each patch's mean intensity.
class OracleBackbone : public Backbone {
 public:
  // Returns the ground-truth pointmap of a frame, already in the sequence frame.
  using PointmapOracle = std::function<Pointmap(const FrameInput&)>;

  OracleBackbone(int dim, PatchGrid grid, PointmapOracle oracle, double confidence = 2.0);

  int feature_dim() const override { return dim_; }
  TokenGrid encode(const FrameInput& frame) const override;
  DecodedPair decode(const TokenGrid& target, const TokenGrid& reference) const override;
  HeadOutput point_head(const TokenGrid& reference, const FrameInput& frame) const override;
  MemoryKV memory_encode(const TokenGrid& reference, const TokenGrid& encoded,
                         const Pointmap& points) const override;
  TokenGrid query_head(const TokenGrid& target) const override;

 private:
  int dim_;
  PatchGrid grid_;
  PointmapOracle oracle_;
  double confidence_raw_;
};

// Seeded affine maps everywhere. The point head is linear in the reference
// feature, so its parameters can be trained by gradient descent.
class ToyLinearBackbone : public Backbone {
 public:
  ToyLinearBackbone(int dim, PatchGrid grid, std::uint64_t seed);

  int feature_dim() const override { return dim_; }
  TokenGrid encode(const FrameInput& frame) const override;
  DecodedPair decode(const TokenGrid& target, const TokenGrid& reference) const override;
  HeadOutput point_head(const TokenGrid& reference, const FrameInput& frame) const override;
  MemoryKV memory_encode(const TokenGrid& reference, const TokenGrid& encoded,
                         const Pointmap& points) const override;
  TokenGrid query_head(const TokenGrid& target) const override;

  // Point head: for token j, out = head_weight * f_j + head_bias, with
  // out laid out as patch*patch pixels x (x, y, z, raw confidence).
  Eigen::MatrixXd& head_weight() { return head_weight_; }
  Eigen::VectorXd& head_bias() { return head_bias_; }
  const Eigen::MatrixXd& head_weight() const { return head_weight_; }
  const Eigen::VectorXd& head_bias() const { return head_bias_; }

  // Chain rule through the point head: gradients of a scalar loss with
  // respect to head_weight and head_bias, given its gradients with respect to
  // the predicted points and raw confidences.
  void head_gradient(const TokenGrid& reference, const Grid<Eigen::Vector3d>& d_points,
                     const Grid<double>& d_raw, Eigen::MatrixXd* d_weight,
                     Eigen::VectorXd* d_bias) const;

 private:
  int dim_;
  PatchGrid grid_;
  Eigen::MatrixXd encode_weight_;
  Eigen::VectorXd encode_bias_;
  Eigen::MatrixXd dec_tt_, dec_tr_, dec_rt_, dec_rr_;
  Eigen::MatrixXd key_ref_, key_enc_, value_ref_;
  Eigen::MatrixXd head_weight_;
  Eigen::VectorXd head_bias_;
};

}  // namespace stream4d::memory
