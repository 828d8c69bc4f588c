#include "loss_fixtures.hpp"

#include "stream4d/errors.hpp"
#include "stream4d/memory/backbone.hpp"
#include "stream4d/geometry/camera.hpp"
#include "stream4d/synth/scene.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace stream4d;
using namespace stream4d::loss;
using stream4d::testing::LossInstance;
using stream4d::testing::random_instance;

namespace {

// Plain recomputation of the confidence term, pixel by pixel.
double conf_loss_scalar(const LossInstance& in, double alpha) {
  double sp = 0.0;
  double ss = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < in.mask.size(); ++i) {
    if (!in.mask[i] || !in.prediction.valid[i] || !in.supervision.valid[i]) continue;
    sp += std::sqrt(in.prediction.points[i].squaredNorm());
    ss += std::sqrt(in.supervision.points[i].squaredNorm());
    ++n;
  }
  sp /= n;
  ss /= n;
  double total = 0.0;
  for (std::size_t i = 0; i < in.mask.size(); ++i) {
    if (!in.mask[i] || !in.prediction.valid[i] || !in.supervision.valid[i]) continue;
    const Eigen::Vector3d a = in.prediction.points[i] / sp;
    const Eigen::Vector3d b = in.supervision.points[i] / ss;
    const double c = 1.0 + std::exp(in.confidence.raw[i]);
    total += c * std::sqrt((a - b).squaredNorm()) - alpha * std::log(c);
  }
  return total;
}

LossInstance single_pixel(double angle) {
  LossInstance in{Pointmap(1, 1, FrameTag::kCamera), Pointmap(1, 1, FrameTag::kCamera),
                  ConfidenceMap(1, 1, 0.0), DynamicMask(1, 1, 1)};
  in.prediction.points[0] = Eigen::Vector3d(std::sin(angle), 0.0, std::cos(angle)) * 3.0;
  in.supervision.points[0] = Eigen::Vector3d(0.0, 0.0, 7.0);
  in.prediction.valid[0] = 1;
  in.supervision.valid[0] = 1;
  return in;
}

}  // namespace

TEST(Normalize, ConstantDistanceAndHomogeneity) {
  Pointmap p(4, 4, FrameTag::kCamera);
  Mask m(4, 4, 1);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = 0.3 * i;
    p.points[i] = 2.0 * Eigen::Vector3d(std::cos(a), std::sin(a), 0.0);
    p.valid[i] = 1;
  }
  const Normalized n = normalize(p, m);
  EXPECT_NEAR(n.scale, 2.0, 1e-15);
  for (const auto& x : n.points.points.data) EXPECT_NEAR(x.norm(), 1.0, 1e-15);

  Pointmap q = p;
  for (auto& x : q.points.data) x *= 3.5;
  const Normalized nq = normalize(q, m);
  EXPECT_NEAR(nq.scale, 3.5 * n.scale, 1e-12);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_LE((nq.points.points[i] - n.points.points[i]).norm(), 1e-12);
  }
}

TEST(Normalize, RandomCloudMatchesMeanOfNorms) {
  const LossInstance in = random_instance(4);
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < in.mask.size(); ++i) {
    if (in.mask[i] && in.prediction.valid[i]) {
      sum += std::sqrt(in.prediction.points[i].squaredNorm());
      ++n;
    }
  }
  EXPECT_NEAR(normalize(in.prediction, in.mask).scale, sum / n, 1e-12);
  EXPECT_THROW(normalize(in.prediction, Mask(8, 8, 0)), EmptyMask);
}

TEST(ConfLoss, ZeroAtSupervisionWithUnitConfidence) {
  LossInstance in = random_instance(1);
  in.prediction = in.supervision;
  for (auto& r : in.confidence.raw.data) r = ConfidenceMap::raw_for(1.0);
  const LossValue v = conf_loss(in.bundle());
  EXPECT_EQ(v.confidence, 0.0);
}

TEST(ConfLoss, MatchesScalarRecomputation) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const LossInstance in = random_instance(seed);
    EXPECT_NEAR(conf_loss(in.bundle()).confidence, conf_loss_scalar(in, 0.5), 1e-10);
    LossOptions o;
    o.alpha = 1.7;
    EXPECT_NEAR(conf_loss(in.bundle(), o).confidence, conf_loss_scalar(in, 1.7), 1e-10);
  }
}

TEST(ConfLoss, OptimalConfidenceClosedForm) {
  const double alpha = 0.5;
  for (double angle : {0.05, 0.1, 0.2, 0.3, 0.6, 1.0}) {
    LossInstance in = single_pixel(angle);
    const double r = 2.0 * std::sin(angle / 2.0);
    auto f = [&](double raw) {
      in.confidence.raw[0] = raw;
      return conf_loss(in.bundle()).confidence;
    };
    // Golden-section search over the raw parameter.
    double lo = -30.0;
    double hi = 30.0;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 200; ++it) {
      const double a = hi - g * (hi - lo);
      const double b = lo + g * (hi - lo);
      if (f(a) < f(b)) hi = b; else lo = a;
    }
    const double c_star = 1.0 + std::exp(0.5 * (lo + hi));
    EXPECT_NEAR(c_star, std::max(1.0, alpha / r), 1e-6) << "r=" << r;
  }
}

TEST(ConfLoss, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    LossInstance in = random_instance(100 + seed);
    auto f = [&](const Eigen::VectorXd& x) {
      in.set_parameters(x);
      return conf_loss(in.bundle()).confidence;
    };
    auto grad = [&](const Eigen::VectorXd& x) {
      in.set_parameters(x);
      return LossInstance::flatten(conf_loss(in.bundle()).gradients[0]);
    };
    const Eigen::VectorXd x0 = in.parameters();
    EXPECT_LT(grad_check(f, grad, x0, 1e-5, 8, seed), 1e-4) << "seed " << seed;
  }
}

TEST(ConfLoss, InvariantToJointScaling) {
  const LossInstance in = random_instance(8);
  LossInstance scaled = in;
  for (auto& p : scaled.prediction.points.data) p *= 4.0;
  for (auto& p : scaled.supervision.points.data) p *= 4.0;
  EXPECT_NEAR(conf_loss(in.bundle()).confidence, conf_loss(scaled.bundle()).confidence, 1e-10);
}

TEST(ScaleLoss, HingeCases) {
  LossInstance in = random_instance(2);
  LossInstance smaller = in;
  for (auto& p : smaller.prediction.points.data) p *= 0.1;
  EXPECT_EQ(scale_loss(smaller.bundle()).scale, 0.0);

  LossInstance twice = in;
  twice.prediction = in.supervision;
  for (auto& p : twice.prediction.points.data) p *= 2.0;
  double x_sup = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < in.mask.size(); ++i) {
    if (in.mask[i]) {
      x_sup += in.supervision.points[i].norm();
      ++n;
    }
  }
  EXPECT_NEAR(scale_loss(twice.bundle()).scale, x_sup / n, 1e-12);
}

TEST(ScaleLoss, GradientAwayFromKink) {
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 50 && seed < 500; ++seed) {
    LossInstance in = random_instance(200 + seed);
    const double v = scale_loss(in.bundle()).scale;
    if (v <= 1e-3) continue;  // kink excluded
    auto f = [&](const Eigen::VectorXd& x) {
      in.set_parameters(x);
      return scale_loss(in.bundle()).scale;
    };
    auto grad = [&](const Eigen::VectorXd& x) {
      in.set_parameters(x);
      return LossInstance::flatten(scale_loss(in.bundle()).gradients[0]);
    };
    EXPECT_LT(grad_check(f, grad, in.parameters(), 1e-5, 8, seed), 1e-4);
    ++checked;
  }
  EXPECT_EQ(checked, 50);
}

TEST(ScaleLoss, RotationInvariant) {
  const LossInstance in = random_instance(6);
  LossInstance rotated = in;
  const Eigen::Matrix3d r = exp_so3(Eigen::Vector3d(0.3, -0.2, 0.9));
  for (auto& p : rotated.prediction.points.data) p = r * p;
  EXPECT_NEAR(scale_loss(in.bundle()).scale, scale_loss(rotated.bundle()).scale, 1e-12);
}

TEST(TotalLoss, SumOfTermsAndModes) {
  const LossInstance in = random_instance(12);
  const LossValue t = total_loss(in.bundle());
  EXPECT_NEAR(t.total, t.confidence + t.scale, 1e-12);
  EXPECT_EQ(t.confidence, conf_loss(in.bundle()).confidence);
  EXPECT_EQ(t.scale, scale_loss(in.bundle()).scale);

  LossOptions full;
  full.mode = MaskMode::kFullFrame;
  EXPECT_NE(total_loss(in.bundle(), full).total, t.total);
  EXPECT_EQ(mask_mode_for_step(0, 10), MaskMode::kFullFrame);
  EXPECT_EQ(mask_mode_for_step(10, 10), MaskMode::kDynamicOnly);
  EXPECT_EQ(mask_mode_for_step(0, 0), MaskMode::kDynamicOnly);

  LossOptions mean;
  mean.mean_reduction = true;
  int n = 0;
  for (std::size_t i = 0; i < in.mask.size(); ++i) {
    n += (in.mask[i] && in.prediction.valid[i]) ? 1 : 0;
  }
  EXPECT_NEAR(conf_loss(in.bundle(), mean).confidence * n, t.confidence, 1e-9);

  LossInstance empty = in;
  empty.mask = DynamicMask(8, 8, 0);
  EXPECT_THROW(total_loss(empty.bundle()), EmptyMask);
}

TEST(GradCheck, QuadraticIsExact) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(6, 6);
  a = a * a.transpose() + Eigen::MatrixXd::Identity(6, 6);
  const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(6, -1.0, 1.0);
  auto f = [&](const Eigen::VectorXd& x) { return 0.5 * x.dot(a * x) + b.dot(x); };
  auto g = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return a * x + b; };
  EXPECT_LT(grad_check(f, g, Eigen::VectorXd::Constant(6, 0.3)), 1e-8);
}

TEST(TotalLoss, GradientDescentOnToyHeadDecreases) {
  synth::SceneSpec scene = synth::default_scene();
  synth::RigOptions rig;
  rig.image_size = 64;
  rig.focal = 30.0;
  scene.sensors = synth::ring_rig(rig);
  // Sensor 0 at t = 2 sees a moving body.
  const synth::FrameBundle f = synth::render_frame(scene, 2, 0);
  ASSERT_GT(std::count(f.dynamic_mask.data.begin(), f.dynamic_mask.data.end(), 1), 20);
  const Pointmap supervision = transform(f.world_points, f.pose.inverse(), FrameTag::kCamera);

  memory::ToyLinearBackbone net(16, memory::PatchGrid{16, 64, 64}, 3);
  const memory::FrameInput in{&f.image, 2, f.timestamp, 0};
  const memory::TokenGrid enc = net.encode(in);
  const memory::TokenGrid ref = net.decode(enc, enc).reference;

  auto evaluate = [&](LossValue* out) {
    const memory::HeadOutput head = net.point_head(ref, in);
    const SupervisionBundle b{{&head.points, &head.confidence, &supervision, &f.dynamic_mask, 0, 2}};
    *out = total_loss(b);
    return out->total;
  };
  LossValue value;
  double current = evaluate(&value);
  const double initial = current;
  double step = 1e-3;
  for (int it = 0; it < 200; ++it) {
    Eigen::MatrixXd dw;
    Eigen::VectorXd db;
    net.head_gradient(ref, value.gradients[0].d_points, value.gradients[0].d_raw, &dw, &db);
    const Eigen::MatrixXd w0 = net.head_weight();
    const Eigen::VectorXd b0 = net.head_bias();
    bool improved = false;
    for (int halving = 0; halving < 60 && !improved; ++halving) {
      net.head_weight() = w0 - step * dw;
      net.head_bias() = b0 - step * db;
      LossValue trial;
      const double next = evaluate(&trial);
      if (next < current) {
        current = next;
        value = trial;
        improved = true;
        step *= 1.5;
      } else {
        step *= 0.5;
      }
    }
    ASSERT_TRUE(improved) << "step " << it;
  }
  EXPECT_LT(current, initial);
}
