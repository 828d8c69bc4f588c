// Runs the linked test suites grouped by acceptance criterion, one child
// process per criterion, and prints one PASS/FAIL line for each.
#include <gtest/gtest.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <string>

namespace {

struct Criterion {
  int id;
  const char* title;
  const char* filter;
  double time_limit_s;  // 0: no limit
};

const Criterion kCriteria[] = {
    {1, "geometry oracles",
     "Projection.*:Unproject.*:Transform.*:SE3Pose.*:EstimateFocal.*:EstimatePose.*:"
     "PoseEstimate.*",
     10.0},
    {2, "ego flow vs analytic flow", "Pairs.*:EgoFlow.*", 0.0},
    {3, "dynamic mask quality",
     "Residual.*:Binarize.*:Refine.*:Predict.*:Reconstruct.StaticSceneHasNoDynamicPixels:"
     "DefaultScene.PipelineMasksMatchGroundTruth",
     0.0},
    {4, "world alignment",
     "Align.*:Assemble.*:DefaultScene.OracleReconstructionMatchesGroundTruthCloud:"
     "DefaultScene.CrossSensorConsistencyInOverlaps:DefaultScene.GammaSweepOnlyChangesPointCount:"
     "SynthDataset.OracleReconstructionIsAccurateAndDeterministic",
     0.0},
    {5, "memory pool mechanics", "Attention.*:SensorPool.*:Selection.*:Snapshot.*:Streaming.*",
     0.0},
    {6, "losses", "Normalize.*:ConfLoss.*:ScaleLoss.*:TotalLoss.*:GradCheck.*", 0.0},
    {7, "metrics", "KdTree.*:Accuracy.*:Completion.*:NormalConsistency.*:DepthMetrics.*", 0.0},
    {8, "streaming cost and bench",
     "Reconstruct.PerFrameOpsIndependentOfSequenceLength:SynthDataset.BenchReport:"
     "DefaultScene.BenchWithinBudgetAndDeterministic",
     0.0},
};

struct ChildResult {
  int status = -1;
  int tests = 0;
  std::string log;
};

ChildResult run_child(const std::string& self, const char* filter) {
  const std::string cmd = "'" + self + "' --child --gtest_filter='" + filter + "' 2>&1";
  ChildResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  while (fgets(buf.data(), buf.size(), pipe)) {
    r.log += buf.data();
    if (std::strncmp(buf.data(), "[       OK ]", 12) == 0) ++r.tests;
  }
  r.status = pclose(pipe);
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1 && std::strcmp(argv[1], "--child") == 0) {
    argv[1] = argv[0];
    --argc;
    ++argv;
    ::testing::InitGoogleTest(&argc, argv);
    return RUN_ALL_TESTS();
  }
  bool all = true;
  for (const Criterion& c : kCriteria) {
    const auto start = std::chrono::steady_clock::now();
    const ChildResult r = run_child(argv[0], c.filter);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool pass = r.status == 0 && r.tests > 0;
    std::string detail = std::to_string(r.tests) + " tests, " + std::to_string(seconds) + " s";
    if (c.time_limit_s > 0.0 && seconds >= c.time_limit_s) {
      pass = false;
      detail += " (limit " + std::to_string(c.time_limit_s) + " s)";
    }
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.title << " ["
              << detail << "]" << std::endl;
    if (!pass) {
      std::cerr << r.log;
      all = false;
    }
  }
  return all ? 0 : 1;
}
