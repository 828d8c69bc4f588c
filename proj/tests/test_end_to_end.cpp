#include "stream4d/align/aligner.hpp"
#include "stream4d/metrics/metrics.hpp"
#include "stream4d/pipeline/commands.hpp"
#include "stream4d/pipeline/manifest.hpp"
#include "stream4d/synth/scene.hpp"

#include <gtest/gtest.h>

#include <chrono>

namespace {

using namespace stream4d;
namespace fs = std::filesystem;
using nlohmann::json;

fs::path dataset(const std::string& name, const synth::SceneSpec& scene) {
  const fs::path p = fs::temp_directory_path() / ("stream4d_e2e_" + name);
  fs::remove_all(p);
  pipeline::cmd_synth(scene, p);
  return p / "manifest.json";
}

synth::SceneSpec scene_with(int timestamps) {
  synth::SceneSpec s = synth::default_scene();
  s.timestamps.clear();
  for (int t = 0; t < timestamps; ++t) s.timestamps.push_back(0.5 * t);
  s.ego_poses = synth::straight_trajectory(s.timestamps, 3.0);
  return s;
}

class DefaultScene : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    manifest_ = new fs::path(dataset("default", synth::default_scene()));
    data_ = new pipeline::Dataset(pipeline::load_dataset(io::load_manifest(*manifest_)));
    rec_ = new pipeline::Reconstruction(pipeline::reconstruct(*data_, {}));
  }
  static void TearDownTestSuite() {
    delete rec_;
    delete data_;
    delete manifest_;
  }
  static fs::path* manifest_;
  static pipeline::Dataset* data_;
  static pipeline::Reconstruction* rec_;
};
fs::path* DefaultScene::manifest_ = nullptr;
pipeline::Dataset* DefaultScene::data_ = nullptr;
pipeline::Reconstruction* DefaultScene::rec_ = nullptr;

TEST_F(DefaultScene, OracleReconstructionMatchesGroundTruthCloud) {
  for (std::size_t t = 0; t < rec_->clouds.size(); ++t) {
    std::vector<Eigen::Vector3d> pred;
    for (const auto& p : rec_->clouds[t]) pred.push_back(p.position);
    std::vector<Eigen::Vector3d> gt;
    for (int c = 0; c < 6; ++c) {
      for (const auto& p : data_->gt_world[data_->index(t, c)]->valid_points()) gt.push_back(p);
    }
    ASSERT_EQ(pred.size(), gt.size());
    const metrics::Summary acc = metrics::accuracy(pred, gt);
    EXPECT_LE(acc.mean, 1e-3) << "t=" << t;
    // Pixel-aligned oracle: each point against its own pixel's GT point.
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) sum += (pred[i] - gt[i]).norm();
    EXPECT_LE(sum / pred.size(), 1e-3) << "t=" << t;
  }
}

TEST_F(DefaultScene, CrossSensorConsistencyInOverlaps) {
  for (int t = 0; t < 5; ++t) {
    std::vector<align::AlignedFrame> frames;
    for (int c = 0; c < 6; ++c) {
      const auto& f = rec_->frames[data_->index(t, c)];
      frames.push_back({&f.world_points, data_->manifest.sensors[c].intrinsics,
                        data_->manifest.frame(t, c).pose, c});
    }
    const align::ConsistencyReport r = align::cross_sensor_consistency(frames);
    EXPECT_GT(r.samples, 1000u);
    EXPECT_LE(r.max, 1e-3) << "t=" << t;
  }
}

TEST_F(DefaultScene, GammaSweepOnlyChangesPointCount) {
  std::vector<align::FrameCloud> frames;
  std::vector<ConfidenceMap> varied;
  // Vary confidence per pixel so the sweep actually filters.
  for (const auto& f : rec_->frames) {
    ConfidenceMap c(f.confidence.width(), f.confidence.height(), 0.0);
    for (std::size_t i = 0; i < c.raw.size(); ++i) {
      c.raw[i] = ConfidenceMap::raw_for(1.0 + (i % 41) / 10.0);
    }
    varied.push_back(c);
  }
  for (std::size_t i = 0; i < rec_->frames.size(); ++i) {
    const auto& f = rec_->frames[i];
    frames.push_back({&f.world_points, &varied[i], f.sensor_index, f.t_index});
  }
  const auto all = align::assemble_scene(frames, 1.0);
  std::size_t prev = all.size();
  for (double g : {1.5, 2.0, 3.0, 4.5}) {
    const auto some = align::assemble_scene(frames, g);
    EXPECT_LT(some.size(), prev);
    prev = some.size();
    std::size_t j = 0;
    for (const auto& p : some) {
      while (j < all.size() && !(all[j].position == p.position && all[j].sensor == p.sensor &&
                                 all[j].t_index == p.t_index)) {
        ++j;
      }
      ASSERT_LT(j, all.size());
    }
  }
}

TEST_F(DefaultScene, PipelineMasksMatchGroundTruth) {
  const json s = pipeline::reconstruction_summary(*data_, {}, *rec_);
  for (const auto& f : s["per_frame"]) {
    EXPECT_GE(f["mask_iou"].get<double>(), 0.9) << "t=" << f["t"] << " sensor=" << f["sensor"];
  }
}

TEST_F(DefaultScene, BenchWithinBudgetAndDeterministic) {
  const auto start = std::chrono::steady_clock::now();
  const json a = pipeline::cmd_bench(*manifest_, {}, 3);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(seconds, 60.0);
  const json b = pipeline::cmd_bench(*manifest_, {}, 3);
  EXPECT_EQ(pipeline::without_timing(a), pipeline::without_timing(b));
  EXPECT_GT(a["timing"]["fps"].get<double>(), 0.0);
  EXPECT_EQ(a["frames"], 30);
}

// Streaming without global optimization: twice the frames, about twice the time.
TEST(Scaling, DoublingSequenceRoughlyDoublesTime) {
  const fs::path five = dataset("five", scene_with(5));
  const fs::path ten = dataset("ten", scene_with(10));
  const double t5 = pipeline::cmd_bench(five, {}, 3)["timing"]["t4d_s_median"].get<double>();
  const double t10 = pipeline::cmd_bench(ten, {}, 3)["timing"]["t4d_s_median"].get<double>();
  const double ratio = t10 / t5;
  EXPECT_GE(ratio, 2.0 * 0.7) << t5 << " s vs " << t10 << " s";
  EXPECT_LE(ratio, 2.0 * 1.3) << t5 << " s vs " << t10 << " s";
}

}  // namespace
