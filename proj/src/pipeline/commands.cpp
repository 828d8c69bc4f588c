#include "stream4d/pipeline/commands.hpp"

#include "stream4d/errors.hpp"
#include "stream4d/geometry/camera.hpp"
#include "stream4d/memory/backbone.hpp"
#include "stream4d/memory/streaming.hpp"
#include "stream4d/metrics/metrics.hpp"
#include "stream4d/pipeline/grid_io.hpp"
#include "stream4d/pipeline/ply.hpp"
#include "stream4d/synth/scene_json.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <memory>

namespace stream4d::pipeline {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Runs `fn`, rethrowing library errors with the frame context attached.
template <typename Fn>
auto with_frame(int t_index, int sensor_id, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const FrameError&) {
    throw;
  } catch (const Error& e) {
    throw FrameError(e, t_index, sensor_id);
  }
}

class FileFlowProvider : public flow::FlowProvider {
 public:
  FileFlowProvider(const io::Manifest& m, int sensor_index) : m_(m), c_(sensor_index) {}

  flow::FlowPair flow(const flow::FramePair& pair) override {
    const io::FlowRecord* r = m_.flow(c_, pair.first);
    if (!r) {
      throw MalformedManifest("no flow listed for sensor " + std::to_string(m_.sensors[c_].id) +
                              " between t=" + std::to_string(pair.first) + " and t=" +
                              std::to_string(pair.second));
    }
    return {io::flow_from_raw(io::read_grid(r->forward), r->forward.string()),
            io::flow_from_raw(io::read_grid(r->backward), r->backward.string())};
  }

 private:
  const io::Manifest& m_;
  int c_;
};

// Observation equal to the ego flow of the given cameras.
class EgoFlowProvider : public flow::FlowProvider {
 public:
  EgoFlowProvider(const std::vector<Pointmap>& points, const std::vector<CameraEstimate>& cams)
      : points_(points), cams_(cams) {}

  flow::FlowPair flow(const flow::FramePair& pair) override {
    const flow::EgoFlow e = flow::ego_flow(points_[pair.first], cams_[pair.first],
                                           points_[pair.second], cams_[pair.second]);
    return {e.forward, e.backward};
  }

 private:
  const std::vector<Pointmap>& points_;
  const std::vector<CameraEstimate>& cams_;
};

void fnv(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
}


}  // namespace

std::string frame_stem(int t_index, int sensor_id) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "t%03d_s%02d", t_index, sensor_id);
  return buf;
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json without_timing(json report) {
  report.erase("timing");
  return report;
}

Dataset load_dataset(const io::Manifest& manifest) {
  Dataset d;
  d.manifest = manifest;
  for (const auto& f : manifest.frames) {
    const int c = manifest.sensor_index(f.sensor);
    const Intrinsics& k = manifest.sensors[c].intrinsics;
    with_frame(f.t_index, f.sensor, [&] {
      Image img = io::image_from_pgm(f.image);
      if (img.width != k.width || img.height != k.height) {
        throw BadDimensions(f.image.string() + " does not match the sensor intrinsics");
      }
      d.images.push_back(std::move(img));
      if (f.depth) {
        const DepthMap depth = io::depth_from_raw(io::read_grid(*f.depth), f.depth->string());
        if (depth.width() != k.width || depth.height() != k.height) {
          throw BadDimensions(f.depth->string() + " does not match the sensor intrinsics");
        }
        d.gt_world.push_back(unproject(depth, k, f.pose, FrameTag::kWorld));
      } else {
        d.gt_world.emplace_back();
      }
      if (f.dynamic_mask) {
        d.gt_masks.push_back(io::mask_from_pgm(*f.dynamic_mask));
      } else {
        d.gt_masks.emplace_back();
      }
    });
  }
  return d;
}

Reconstruction reconstruct(const Dataset& data, const io::RunConfig& config) {
  config.validate();
  const io::Manifest& m = data.manifest;
  const int T = m.num_timestamps();
  const int S = m.num_sensors();
  if (T < 2) throw SequenceTooShort("reconstruction needs at least 2 timestamps");
  const auto start = Clock::now();

  Reconstruction rec;
  rec.stage = config.stage.value_or(m.stage);

  std::vector<memory::CameraFrustum> frusta;
  for (const auto& s : m.sensors) frusta.push_back({s.intrinsics, s.rig});
  rec.adjacency = memory::fov_adjacency(frusta);

  // Sequence frame: first camera of each sensor (temporal) or of the first
  // sensor (spatial), so that pointmaps read across sensors agree.
  std::vector<SE3Pose> seq_from_world(S);
  for (int c = 0; c < S; ++c) {
    seq_from_world[c] = m.frame(0, rec.stage == memory::Stage::kSpatial ? 0 : c).pose.inverse();
  }

  const int w0 = m.sensors[0].intrinsics.width;
  const int h0 = m.sensors[0].intrinsics.height;
  for (const auto& s : m.sensors) {
    if (s.intrinsics.width != w0 || s.intrinsics.height != h0) {
      throw BadDimensions("all sensors must share one image size");
    }
  }
  const memory::PatchGrid grid{config.patch, w0, h0};
  std::unique_ptr<memory::Backbone> backbone;
  if (config.backbone == io::BackboneKind::kOracle) {
    backbone = std::make_unique<memory::OracleBackbone>(
        config.feature_dim, grid,
        [&](const memory::FrameInput& f) {
          const auto& gt = data.gt_world[data.index(f.t_index, f.sensor)];
          if (!gt) throw ConfigError("the oracle backbone needs ground-truth depth");
          return transform(*gt, seq_from_world[f.sensor], FrameTag::kSequence);
        },
        config.oracle_confidence);
  } else {
    backbone = std::make_unique<memory::ToyLinearBackbone>(config.feature_dim, grid, config.seed);
  }

  for (int c = 0; c < S; ++c) rec.pools.emplace_back(c, config.feature_dim, config.pool);
  std::vector<memory::StreamState> states(S);
  memory::StreamContext ctx;
  ctx.stage = rec.stage;
  ctx.adjacency = &rec.adjacency;
  ctx.select = config.select;

  rec.frames.resize(static_cast<std::size_t>(T) * S);
  for (int t = 0; t < T; ++t) {
    std::vector<memory::StepResult> results(S);
    for (int c = 0; c < S; ++c) {
      const auto frame_start = Clock::now();
      const int id = m.sensors[c].id;
      const memory::FrameInput in{&data.images[data.index(t, c)], t, m.timestamps[t], c};
      results[c] = with_frame(t, id, [&] {
        auto r = memory::step_read(in, states[c], rec.pools, *backbone, ctx);
        // The spatial stage defers inserts until every sensor has read.
        if (rec.stage == memory::Stage::kTemporal) memory::commit(rec.pools, r);
        return r;
      });
      rec.frames[data.index(t, c)].seconds = seconds_since(frame_start);
    }
    if (rec.stage == memory::Stage::kSpatial) {
      for (int c = 0; c < S; ++c) {
        const auto commit_start = Clock::now();
        with_frame(t, m.sensors[c].id, [&] { memory::commit(rec.pools, results[c]); });
        rec.frames[data.index(t, c)].seconds += seconds_since(commit_start);
      }
    }
    std::size_t pool_entries = 0;
    for (const auto& p : rec.pools) pool_entries += p.size();
    rec.peak_pool_entries = std::max(rec.peak_pool_entries, pool_entries);

    for (int c = 0; c < S; ++c) {
      memory::StepResult& r = results[c];
      FrameOutput& out = rec.frames[data.index(t, c)];
      out.t_index = t;
      out.sensor_index = c;
      out.attention_ops = r.attention_ops;
      out.attended_entries = r.attended_entries;
      for (int s : r.attended_sensors) out.attended_sensors.push_back(m.sensors[s].id);
      out.insert_stats = r.insert_stats;
      // Readable entries never exceed what the pools may hold for this frame.
      const std::uint64_t tokens = r.entries.size();
      const std::uint64_t readable =
          rec.stage == memory::Stage::kTemporal
              ? config.pool.working_frames * tokens + config.pool.long_term_capacity
              : (rec.adjacency[c].size() * config.select.related_timestamps +
                 config.select.similar_frames) *
                    tokens;
      out.op_bound = tokens * readable;
      if (out.attention_ops > out.op_bound) {
        throw std::logic_error("attention work exceeded the pool capacity bound");
      }
      out.sequence_points = std::move(r.points);
      out.confidence = std::move(r.confidence);
    }
    rec.cumulative_seconds.push_back(seconds_since(start));
  }

  PoseOptions pose_options;
  pose_options.ransac = config.ransac;
  pose_options.seed = config.seed;
  flow::PredictOptions predict_options;
  predict_options.threshold = config.flow_threshold;
  predict_options.percentile = config.flow_percentile;
  predict_options.pose = pose_options;
  std::unique_ptr<flow::MaskRefiner> refiner;
  if (config.refiner == io::RefinerKind::kRegionGrowing) {
    refiner = std::make_unique<flow::RegionGrowingRefiner>(config.refiner_tolerance);
  } else {
    refiner = std::make_unique<flow::IdentityRefiner>();
  }

  for (int c = 0; c < S; ++c) {
    const auto sensor_start = Clock::now();
    const int id = m.sensors[c].id;
    std::vector<Pointmap> points;
    std::vector<Image> images;
    std::vector<CameraEstimate> cameras;
    for (int t = 0; t < T; ++t) {
      const FrameOutput& f = rec.frames[data.index(t, c)];
      points.push_back(f.sequence_points);
      images.push_back(data.images[data.index(t, c)]);
      cameras.push_back(with_frame(t, id, [&] {
        if (config.camera_mode == io::CameraMode::kGroundTruth) {
          const io::FrameRecord& r = m.frame(t, c);
          return CameraEstimate{m.sensors[c].intrinsics, seq_from_world[c] * r.pose};
        }
        return pose_estimate(f.sequence_points, pose_options);
      }));
    }
    std::unique_ptr<flow::FlowProvider> provider;
    if (config.flow_source == io::FlowSource::kFiles) {
      provider = std::make_unique<FileFlowProvider>(m, c);
    } else {
      provider = std::make_unique<EgoFlowProvider>(points, cameras);
    }
    // Sequence-level failures are reported against the sensor's last frame.
    flow::PredictResult pred = with_frame(T - 1, id, [&] {
      return flow::predict(points, images, *provider, *refiner, predict_options, &cameras);
    });
    for (int t = 0; t < T; ++t) {
      FrameOutput& f = rec.frames[data.index(t, c)];
      f.mask = std::move(pred.masks[t]);
      f.coarse = std::move(pred.coarse[t]);
      const io::FrameRecord& r = m.frame(t, c);
      f.world_points = with_frame(t, id, [&] {
        return align::align_to_world(f.sequence_points, cameras[t], m.sensors[c].intrinsics,
                                     r.pose);
      });
    }
    const double share = seconds_since(sensor_start) / T;
    for (int t = 0; t < T; ++t) rec.frames[data.index(t, c)].seconds += share;
  }

  for (int t = 0; t < T; ++t) {
    std::vector<align::FrameCloud> clouds;
    for (int c = 0; c < S; ++c) {
      const FrameOutput& f = rec.frames[data.index(t, c)];
      clouds.push_back({&f.world_points, &f.confidence, m.sensors[c].id, t});
    }
    rec.clouds.push_back(align::assemble_scene(clouds, config.confidence_threshold));
    for (const auto& p : rec.clouds.back()) {
      ++rec.frames[data.index(t, m.sensor_index(p.sensor))].points_kept;
    }
  }
  rec.total_seconds = seconds_since(start);
  // Post-sequence stages are charged to the last timestamp.
  rec.cumulative_seconds.back() = std::max(rec.cumulative_seconds.back(), rec.total_seconds);
  return rec;
}

std::string output_checksum(const Reconstruction& rec) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& cloud : rec.clouds) {
    for (const auto& p : cloud) {
      fnv(h, p.position.data(), 3 * sizeof(double));
      fnv(h, &p.confidence, sizeof(double));
      fnv(h, &p.sensor, sizeof(int));
      fnv(h, &p.t_index, sizeof(int));
    }
  }
  for (const auto& f : rec.frames) fnv(h, f.mask.data.data(), f.mask.size());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json reconstruction_summary(const Dataset& data, const io::RunConfig& config,
                            const Reconstruction& rec) {
  const io::Manifest& m = data.manifest;
  json j;
  j["stage"] = memory::to_string(rec.stage);
  j["config"] = io::config_to_json(config);
  j["timestamps"] = m.num_timestamps();
  j["sensors"] = m.num_sensors();
  j["frames"] = rec.frames.size();
  json adjacency = json::object();
  for (int c = 0; c < m.num_sensors(); ++c) {
    std::vector<int> ids;
    for (int o : rec.adjacency[c]) ids.push_back(m.sensors[o].id);
    adjacency[std::to_string(m.sensors[c].id)] = ids;
  }
  j["adjacency"] = adjacency;

  std::size_t dynamic_pixels = 0;
  std::size_t points = 0;
  std::uint64_t total_ops = 0;
  std::uint64_t max_ops = 0;
  json per_frame = json::array();
  for (const auto& f : rec.frames) {
    const std::size_t dyn = flow::count_set(f.mask);
    dynamic_pixels += dyn;
    points += f.points_kept;
    total_ops += f.attention_ops;
    max_ops = std::max(max_ops, f.attention_ops);
    json fj = {{"t", f.t_index},
               {"sensor", m.sensors[f.sensor_index].id},
               {"attended_entries", f.attended_entries},
               {"attended_sensors", f.attended_sensors},
               {"attention_ops", f.attention_ops},
               {"op_bound", f.op_bound},
               {"kept", f.insert_stats.kept},
               {"discarded", f.insert_stats.discarded},
               {"migrated", f.insert_stats.migrated},
               {"pruned", f.insert_stats.pruned},
               {"dynamic_pixels", dyn},
               {"points_kept", f.points_kept}};
    const auto& gt = data.gt_masks[data.index(f.t_index, f.sensor_index)];
    if (gt) fj["mask_iou"] = flow::iou(f.mask, *gt);
    per_frame.push_back(fj);
  }
  j["per_frame"] = per_frame;
  j["dynamic_pixels"] = dynamic_pixels;
  j["points_kept"] = points;
  j["total_attention_ops"] = total_ops;
  j["max_attention_ops_per_frame"] = max_ops;
  j["peak_pool_entries"] = rec.peak_pool_entries;
  json pools = json::array();
  for (const auto& p : rec.pools) {
    pools.push_back({{"sensor", m.sensors[p.sensor()].id},
                     {"working_entries", p.working().size()},
                     {"long_term_entries", p.long_term().size()},
                     {"pruned", p.total_pruned()},
                     {"discarded", p.total_discarded()}});
  }
  j["pools"] = pools;
  j["checksum"] = output_checksum(rec);
  return j;
}

json cmd_synth(const synth::SceneSpec& scene, const fs::path& out) {
  scene.validate();
  const auto start = Clock::now();
  fs::create_directories(out);
  io::Manifest m;
  m.root = out;
  m.timestamps = scene.timestamps;
  for (int c = 0; c < scene.num_sensors(); ++c) {
    m.sensors.push_back({c, scene.sensors[c].intrinsics, scene.sensors[c].rig});
  }
  std::size_t files = 0;
  for (int t = 0; t < scene.num_timestamps(); ++t) {
    for (int c = 0; c < scene.num_sensors(); ++c) {
      const synth::FrameBundle b = synth::render_frame(scene, t, c);
      const std::string stem = frame_stem(t, c);
      io::FrameRecord r;
      r.t_index = t;
      r.sensor = c;
      r.image = out / "images" / (stem + ".pgm");
      r.depth = out / "depth" / (stem + ".d4rg");
      r.dynamic_mask = out / "masks" / (stem + ".pgm");
      r.pose = b.pose;
      io::write_pgm(r.image, b.image);
      io::write_grid(*r.depth, io::to_raw(b.depth));
      io::write_pgm(*r.dynamic_mask, b.dynamic_mask);
      files += 3;
      if (t + 1 < scene.num_timestamps()) {
        io::FlowRecord fr;
        fr.sensor = c;
        fr.t_index = t;
        fr.forward = out / "flow" / (stem + "_fwd.d4rg");
        fr.backward = out / "flow" / (stem + "_bwd.d4rg");
        io::write_grid(fr.forward, io::to_raw(synth::gt_flow_from(scene, b, t + 1)));
        io::write_grid(fr.backward, io::to_raw(synth::gt_flow(scene, t + 1, t, c)));
        m.flows.push_back(fr);
        files += 2;
      }
      m.frames.push_back(std::move(r));
    }
  }
  write_json(out / "manifest.json", io::manifest_to_json(m));
  write_json(out / "scene.json", synth::scene_to_json(scene));
  return {{"command", "synth"},
          {"bundles", m.frames.size()},
          {"sensors", scene.num_sensors()},
          {"timestamps", scene.num_timestamps()},
          {"files", files + 2},
          {"manifest", (out / "manifest.json").string()},
          {"timing", {{"total_s", seconds_since(start)}}}};
}

namespace {

json timing_json(const Reconstruction& rec) {
  json per_frame = json::array();
  for (const auto& f : rec.frames) per_frame.push_back(f.seconds * 1e3);
  return {{"total_s", rec.total_seconds},
          {"cumulative_timestamp_s", rec.cumulative_seconds},
          {"per_frame_ms", per_frame}};
}

void write_masks(const Dataset& data, const Reconstruction& rec, const fs::path& out) {
  for (const auto& f : rec.frames) {
    const std::string stem = frame_stem(f.t_index, data.manifest.sensors[f.sensor_index].id);
    io::write_pgm(out / "masks" / (stem + ".pgm"), f.mask);
    io::write_grid(out / "residuals" / (stem + ".d4rg"),
                   io::to_raw(f.coarse.residual, f.coarse.valid));
  }
}

}  // namespace

json cmd_reconstruct(const fs::path& manifest, const io::RunConfig& config, const fs::path& out) {
  const Dataset data = load_dataset(io::load_manifest(manifest));
  const Reconstruction rec = reconstruct(data, config);
  fs::create_directories(out);
  for (const auto& f : rec.frames) {
    const std::string stem = frame_stem(f.t_index, data.manifest.sensors[f.sensor_index].id);
    io::write_grid(out / "pointmaps" / (stem + ".d4rg"), io::to_raw(f.world_points));
    Grid<double> conf(f.confidence.width(), f.confidence.height(), 0.0);
    for (std::size_t i = 0; i < conf.size(); ++i) conf[i] = f.confidence.value(i);
    io::write_grid(out / "confidence" / (stem + ".d4rg"), io::to_raw(conf, f.world_points.valid));
  }
  write_masks(data, rec, out);
  for (std::size_t t = 0; t < rec.clouds.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "t%03zu.ply", t);
    io::write_ply(out / "clouds" / name, rec.clouds[t], config.ply_format);
  }
  json j = reconstruction_summary(data, config, rec);
  j["command"] = "reconstruct";
  j["timing"] = timing_json(rec);
  write_json(out / "summary.json", j);
  return j;
}

json cmd_masks(const fs::path& manifest, const io::RunConfig& config, const fs::path& out) {
  const Dataset data = load_dataset(io::load_manifest(manifest));
  const Reconstruction rec = reconstruct(data, config);
  write_masks(data, rec, out);
  json j = reconstruction_summary(data, config, rec);
  j["command"] = "masks";
  std::vector<double> ious;
  for (const auto& f : j["per_frame"]) {
    if (f.contains("mask_iou")) ious.push_back(f["mask_iou"].get<double>());
  }
  if (!ious.empty()) {
    j["mask_iou_min"] = *std::min_element(ious.begin(), ious.end());
    j["mask_iou_mean"] = metrics::summarize(ious).mean;
  }
  j["timing"] = timing_json(rec);
  write_json(out / "summary.json", j);
  return j;
}

json cmd_eval(const fs::path& pred_dir, const fs::path& manifest, double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  const auto start = Clock::now();
  const Dataset data = load_dataset(io::load_manifest(manifest));
  const io::Manifest& m = data.manifest;
  const int T = m.num_timestamps();
  const int S = m.num_sensors();

  std::vector<double> acc_mean, acc_median, comp_mean, comp_median, nc_mean, nc_median;
  std::vector<std::vector<metrics::DepthReport>> depth(S);
  for (int t = 0; t < T; ++t) {
    std::vector<Eigen::Vector3d> pred_cloud;
    std::vector<Eigen::Vector3d> gt_cloud;
    metrics::NormalCloud pred_normals;
    metrics::NormalCloud gt_normals;
    for (int c = 0; c < S; ++c) {
      const int id = m.sensors[c].id;
      const io::FrameRecord& r = m.frame(t, c);
      const auto& gt = data.gt_world[data.index(t, c)];
      if (!gt) throw FrameError(MalformedManifest("frame has no ground-truth depth"), t, id);
      const std::string stem = frame_stem(t, id);
      const fs::path pm_path = pred_dir / "pointmaps" / (stem + ".d4rg");
      const fs::path conf_path = pred_dir / "confidence" / (stem + ".d4rg");
      for (const auto& p : {pm_path, conf_path}) {
        if (!fs::exists(p)) {
          throw FrameError(MalformedManifest("missing prediction file " + p.string()), t, id);
        }
      }
      with_frame(t, id, [&] {
        Pointmap pred = io::pointmap_from_raw(io::read_grid(pm_path), FrameTag::kWorld,
                                              pm_path.string());
        Mask conf_valid;
        const Grid<double> conf =
            io::scalar_from_raw(io::read_grid(conf_path), conf_path.string(), &conf_valid);
        if (!pred.points.same_shape(gt->points) || !conf.same_shape(gt->points)) {
          throw BadDimensions("prediction " + stem + " does not match the sensor image size");
        }
        // Depth in the sensor's own frame, before confidence filtering.
        const SE3Pose to_camera = r.pose.inverse();
        DepthMap pred_depth(pred.width(), pred.height());
        DepthMap gt_depth(pred.width(), pred.height());
        for (std::size_t i = 0; i < pred.size(); ++i) {
          if (gt->valid[i]) {
            gt_depth.depth[i] = to_camera.apply(gt->points[i]).z();
            gt_depth.valid[i] = 1;
          }
          if (pred.valid[i]) {
            const double z = to_camera.apply(pred.points[i]).z();
            if (z > 0.0) {
              pred_depth.depth[i] = z;
              pred_depth.valid[i] = 1;
            }
          }
        }
        depth[c].push_back(metrics::depth_metrics(pred_depth, gt_depth));

        for (std::size_t i = 0; i < pred.size(); ++i) {
          if (pred.valid[i] && !(conf_valid[i] && conf[i] >= gamma)) pred.valid[i] = 0;
        }
        for (const auto& p : pred.valid_points()) pred_cloud.push_back(p);
        for (const auto& p : gt->valid_points()) gt_cloud.push_back(p);
        const metrics::NormalCloud pn = metrics::grid_normals(pred);
        const metrics::NormalCloud gn = metrics::grid_normals(*gt);
        pred_normals.points.insert(pred_normals.points.end(), pn.points.begin(), pn.points.end());
        pred_normals.normals.insert(pred_normals.normals.end(), pn.normals.begin(),
                                    pn.normals.end());
        gt_normals.points.insert(gt_normals.points.end(), gn.points.begin(), gn.points.end());
        gt_normals.normals.insert(gt_normals.normals.end(), gn.normals.begin(), gn.normals.end());
      });
    }
    if (pred_cloud.empty()) {
      throw EmptyCloud("no predicted point at t=" + std::to_string(t) + " passes gamma");
    }
    const metrics::Summary a = metrics::accuracy(pred_cloud, gt_cloud);
    const metrics::Summary b = metrics::completion(pred_cloud, gt_cloud);
    const metrics::Summary n = metrics::normal_consistency(pred_normals, gt_normals);
    acc_mean.push_back(a.mean);
    acc_median.push_back(a.median);
    comp_mean.push_back(b.mean);
    comp_median.push_back(b.median);
    nc_mean.push_back(n.mean);
    nc_median.push_back(n.median);
  }

  auto mean = [](const std::vector<double>& v) { return metrics::summarize(v).mean; };
  json recon = {{"Acc", {{"mean", mean(acc_mean)}, {"median", mean(acc_median)}}},
                {"Comp", {{"mean", mean(comp_mean)}, {"median", mean(comp_median)}}},
                {"NC", {{"mean", mean(nc_mean)}, {"median", mean(nc_median)}}}};

  auto depth_json = [](const metrics::DepthReport& d) {
    return json{{"Abs Rel", d.abs_rel}, {"Sq Rel", d.sq_rel},         {"RMSE", d.rmse},
                {"RMSE log", d.rmse_log}, {"δ < 1.25", d.delta1},      {"δ < 1.25^2", d.delta2},
                {"δ < 1.25^3", d.delta3}};
  };
  auto average = [](const std::vector<metrics::DepthReport>& v) {
    metrics::DepthReport out;
    for (const auto& d : v) {
      out.abs_rel += d.abs_rel;
      out.sq_rel += d.sq_rel;
      out.rmse += d.rmse;
      out.rmse_log += d.rmse_log;
      out.delta1 += d.delta1;
      out.delta2 += d.delta2;
      out.delta3 += d.delta3;
      out.pixels += d.pixels;
    }
    const double n = static_cast<double>(v.size());
    for (double* x : {&out.abs_rel, &out.sq_rel, &out.rmse, &out.rmse_log, &out.delta1,
                      &out.delta2, &out.delta3}) {
      *x /= n;
    }
    return out;
  };
  json per_sensor = json::object();
  std::vector<metrics::DepthReport> sensor_means;
  for (int c = 0; c < S; ++c) {
    sensor_means.push_back(average(depth[c]));
    per_sensor[std::to_string(m.sensors[c].id)] = depth_json(sensor_means.back());
  }
  json depth_report = depth_json(average(sensor_means));
  depth_report["per_sensor"] = per_sensor;

  return {{"command", "eval"},
          {"gamma", gamma},
          {"reconstruction", recon},
          {"depth", depth_report},
          {"timing", {{"total_s", seconds_since(start)}}}};
}

json cmd_bench(const fs::path& manifest, const io::RunConfig& config, int repeats) {
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  const Dataset data = load_dataset(io::load_manifest(manifest));
  std::vector<Reconstruction> runs;
  std::vector<double> totals;
  json summary;
  for (int r = 0; r < repeats; ++r) {
    Reconstruction rec = reconstruct(data, config);
    json s = reconstruction_summary(data, config, rec);
    if (r == 0) {
      summary = s;
    } else if (s != summary) {
      throw std::logic_error("bench repeats produced different outputs");
    }
    totals.push_back(rec.total_seconds);
    runs.push_back(std::move(rec));
  }
  // Median run by total time.
  std::vector<std::size_t> order(runs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return totals[a] < totals[b]; });
  const Reconstruction& med = runs[order[order.size() / 2]];
  const double t4d = metrics::summarize(totals).median;
  std::vector<double> frame_ms;
  for (const auto& f : med.frames) frame_ms.push_back(f.seconds * 1e3);

  json j = {{"command", "bench"},
            {"repeats", repeats},
            {"stage", summary["stage"]},
            {"frames", summary["frames"]},
            {"sensors", summary["sensors"]},
            {"timestamps", summary["timestamps"]},
            {"peak_pool_entries", summary["peak_pool_entries"]},
            {"max_attention_ops_per_frame", summary["max_attention_ops_per_frame"]},
            {"total_attention_ops", summary["total_attention_ops"]},
            {"checksum", summary["checksum"]},
            {"note",
             "single-process CPU wall clock on this machine; not comparable to GPU "
             "throughput figures"}};
  if (repeats < 3) j["warning"] = "fewer than 3 repeats; the median is not robust";
  j["timing"] = {{"t4d_s_median", t4d},
                 {"t4d_s_repeats", totals},
                 {"per_frame_ms_median", metrics::summarize(frame_ms).median},
                 {"fps", static_cast<double>(med.frames.size()) / t4d},
                 {"cumulative_timestamp_s", med.cumulative_seconds}};
  return j;
}

}  // namespace stream4d::pipeline
