#include "stream4d/memory/backbone.hpp"

#include "stream4d/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace stream4d::memory {
namespace {

Eigen::VectorXd patch_means(const Image& image, const PatchGrid& grid) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(grid.count());
  Eigen::VectorXd count = Eigen::VectorXd::Zero(grid.count());
  for (int v = 0; v < image.height; ++v) {
    for (int u = 0; u < image.width; ++u) {
      const int t = grid.token_of(u, v);
      sum(t) += image(u, v);
      count(t) += 1.0;
    }
  }
  return sum.cwiseQuotient(count.cwiseMax(1.0));
}

void check_frame(const FrameInput& frame, const PatchGrid& grid) {
  if (!frame.image) throw DimensionMismatch("frame has no image");
  if (frame.image->width != grid.width || frame.image->height != grid.height) {
    throw DimensionMismatch("image is " + std::to_string(frame.image->width) + "x" +
                            std::to_string(frame.image->height) + ", backbone expects " +
                            std::to_string(grid.width) + "x" + std::to_string(grid.height));
  }
}

Eigen::MatrixXd gaussian(int rows, int cols, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, sigma);
  Eigen::MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = n(rng);
  }
  return m;
}

Eigen::MatrixXd near_identity(int dim, double gain, double sigma, std::mt19937_64& rng) {
  return gain * Eigen::MatrixXd::Identity(dim, dim) + gaussian(dim, dim, sigma, rng);
}

}  // namespace

OracleBackbone::OracleBackbone(int dim, PatchGrid grid, PointmapOracle oracle, double confidence)
    : dim_(dim),
      grid_(grid),
      oracle_(std::move(oracle)),
      confidence_raw_(ConfidenceMap::raw_for(confidence)) {
  if (dim < 8) throw ConfigError("oracle backbone needs feature dimension >= 8");
}

TokenGrid OracleBackbone::encode(const FrameInput& frame) const {
  check_frame(frame, grid_);
  const Eigen::VectorXd means = patch_means(*frame.image, grid_);
  const int pos_dims = dim_ / 2;
  const int content_dims = dim_ - pos_dims;
  TokenGrid f = TokenGrid::Zero(grid_.count(), dim_);
  for (int t = 0; t < grid_.count(); ++t) {
    const double col = t % grid_.cols();
    const double row = t / grid_.cols();
    for (int k = 0; 4 * k + 3 < pos_dims; ++k) {
      const double w = std::pow(0.5, k);
      f(t, 4 * k) = std::sin(w * col);
      f(t, 4 * k + 1) = std::cos(w * col);
      f(t, 4 * k + 2) = std::sin(w * row);
      f(t, 4 * k + 3) = std::cos(w * row);
    }
    for (int k = 0; 2 * k + 1 < content_dims; ++k) {
      const double w = std::numbers::pi * std::pow(2.0, k);
      f(t, pos_dims + 2 * k) = std::sin(w * means(t));
      f(t, pos_dims + 2 * k + 1) = std::cos(w * means(t));
    }
  }
  return f;
}

DecodedPair OracleBackbone::decode(const TokenGrid& target, const TokenGrid& reference) const {
  if (target.cols() != dim_ || reference.cols() != dim_) {
    throw DimensionMismatch("decoder input dimension mismatch");
  }
  return {target, target};
}

HeadOutput OracleBackbone::point_head(const TokenGrid& reference, const FrameInput& frame) const {
  if (reference.rows() != grid_.count()) throw DimensionMismatch("token count mismatch");
  HeadOutput out;
  out.points = oracle_(frame);
  if (out.points.width() != grid_.width || out.points.height() != grid_.height) {
    throw DimensionMismatch("oracle pointmap shape does not match the image");
  }
  out.confidence = ConfidenceMap(grid_.width, grid_.height, confidence_raw_);
  return out;
}

MemoryKV OracleBackbone::memory_encode(const TokenGrid& reference, const TokenGrid& encoded,
                                       const Pointmap&) const {
  return {encoded, reference};
}

TokenGrid OracleBackbone::query_head(const TokenGrid& target) const { return target; }

ToyLinearBackbone::ToyLinearBackbone(int dim, PatchGrid grid, std::uint64_t seed)
    : dim_(dim), grid_(grid) {
  if (dim < 1) throw ConfigError("feature dimension must be positive");
  std::mt19937_64 rng(seed);
  const int pix = grid.patch * grid.patch;
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  encode_weight_ = gaussian(dim, pix, 1.0 / std::sqrt(static_cast<double>(pix)), rng);
  encode_bias_ = gaussian(dim, 1, 0.1, rng);
  dec_tt_ = near_identity(dim, 0.8, 0.1 * s, rng);
  dec_tr_ = gaussian(dim, dim, 0.1 * s, rng);
  dec_rt_ = near_identity(dim, 0.8, 0.1 * s, rng);
  dec_rr_ = gaussian(dim, dim, 0.1 * s, rng);
  key_ref_ = near_identity(dim, 1.0, 0.2 * s, rng);
  key_enc_ = gaussian(dim, dim, 0.2 * s, rng);
  value_ref_ = near_identity(dim, 1.0, 0.2 * s, rng);
  head_weight_ = gaussian(4 * pix, dim, 0.05 * s, rng);
  head_bias_ = Eigen::VectorXd::Zero(4 * pix);
  for (int p = 0; p < pix; ++p) head_bias_(4 * p + 2) = 5.0;
}

TokenGrid ToyLinearBackbone::encode(const FrameInput& frame) const {
  check_frame(frame, grid_);
  const int pix = grid_.patch * grid_.patch;
  Eigen::MatrixXd patches = Eigen::MatrixXd::Zero(pix, grid_.count());
  for (int v = 0; v < grid_.height; ++v) {
    for (int u = 0; u < grid_.width; ++u) {
      const int local = (v % grid_.patch) * grid_.patch + (u % grid_.patch);
      patches(local, grid_.token_of(u, v)) = (*frame.image)(u, v);
    }
  }
  return ((encode_weight_ * patches).colwise() + encode_bias_).transpose();
}

DecodedPair ToyLinearBackbone::decode(const TokenGrid& target, const TokenGrid& reference) const {
  if (target.cols() != dim_ || reference.cols() != dim_ || target.rows() != reference.rows()) {
    throw DimensionMismatch("decoder input dimension mismatch");
  }
  return {target * dec_tt_.transpose() + reference * dec_tr_.transpose(),
          target * dec_rt_.transpose() + reference * dec_rr_.transpose()};
}

HeadOutput ToyLinearBackbone::point_head(const TokenGrid& reference, const FrameInput&) const {
  if (reference.rows() != grid_.count() || reference.cols() != dim_) {
    throw DimensionMismatch("point head input shape mismatch");
  }
  const Eigen::MatrixXd out = (head_weight_ * reference.transpose()).colwise() + head_bias_;
  HeadOutput head;
  head.points = Pointmap(grid_.width, grid_.height, FrameTag::kSequence);
  head.confidence = ConfidenceMap(grid_.width, grid_.height, 0.0);
  for (int v = 0; v < grid_.height; ++v) {
    for (int u = 0; u < grid_.width; ++u) {
      const int t = grid_.token_of(u, v);
      const int local = (v % grid_.patch) * grid_.patch + (u % grid_.patch);
      const std::size_t i = head.points.points.index(u, v);
      head.points.points[i] = out.block<3, 1>(4 * local, t);
      head.points.valid[i] = 1;
      head.confidence.raw[i] = out(4 * local + 3, t);
    }
  }
  return head;
}

void ToyLinearBackbone::head_gradient(const TokenGrid& reference,
                                      const Grid<Eigen::Vector3d>& d_points,
                                      const Grid<double>& d_raw, Eigen::MatrixXd* d_weight,
                                      Eigen::VectorXd* d_bias) const {
  Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(head_weight_.rows(), grid_.count());
  for (int v = 0; v < grid_.height; ++v) {
    for (int u = 0; u < grid_.width; ++u) {
      const int t = grid_.token_of(u, v);
      const int local = (v % grid_.patch) * grid_.patch + (u % grid_.patch);
      d_out.block<3, 1>(4 * local, t) = d_points(u, v);
      d_out(4 * local + 3, t) = d_raw(u, v);
    }
  }
  *d_weight = d_out * reference;
  *d_bias = d_out.rowwise().sum();
}

MemoryKV ToyLinearBackbone::memory_encode(const TokenGrid& reference, const TokenGrid& encoded,
                                          const Pointmap&) const {
  return {reference * key_ref_.transpose() + encoded * key_enc_.transpose(),
          reference * value_ref_.transpose()};
}

TokenGrid ToyLinearBackbone::query_head(const TokenGrid& target) const { return target; }

}  // namespace stream4d::memory
