#include "lomo/cli/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "lomo/codec/codec.hpp"
#include "lomo/core/gif.hpp"
#include "lomo/core/image.hpp"
#include "lomo/core/serialize.hpp"
#include "lomo/diffusion/train.hpp"
#include "lomo/eval/metrics.hpp"
#include "lomo/finetune/finetune.hpp"
#include "lomo/flow/lofnet.hpp"
#include "lomo/pipeline/transfer.hpp"
#include "lomo/synth/clipio.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lomo::cli {

namespace {

std::string out_dir(const RunConfig& cfg) {
  const std::string out = cfg.str("run", "out");
  fs::create_directories(out);
  return out;
}

// paths.* entries default to a well-known name under the output directory.
std::string path_or(const RunConfig& cfg, const std::string& key,
                    const std::string& fallback) {
  const std::string& v = cfg.str("paths", key);
  if (!v.empty()) return v;
  return (fs::path(cfg.str("run", "out")) / fallback).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void write_snapshot(const RunConfig& cfg, const std::string& command) {
  write_text((fs::path(out_dir(cfg)) / (command + ".resolved.ini")).string(),
             cfg.snapshot());
}

std::string hash_hex(const std::string& path) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                (unsigned long long)ser::file_hash(path));
  return buf;
}

diffusion::NoiseSchedule schedule_from_meta(const json& meta) {
  return diffusion::make_schedule(meta.value("schedule_T", 1000),
                                  meta.value("beta_start", 1e-4),
                                  meta.value("beta_end", 2e-2));
}

int cond_of(const synth::VideoClip& clip) {
  return synth::class_id(synth::body_shape_from_string(clip.label));
}

// Frame-0 latent replicated across the driving clip's frame slots, for the
// single-frame input mode.
codec::LatentClip replicate_frame0(const codec::LatentClip& src, int frames) {
  codec::LatentClip out;
  const int64_t n =
      src.latents.numel() / src.latents.dim(0);
  out.latents = Tensor<float>(
      {frames, src.latents.dim(1), src.latents.dim(2), src.latents.dim(3)});
  for (int f = 0; f < frames; ++f)
    std::copy(src.latents.data(), src.latents.data() + n,
              out.latents.data() + size_t(f) * n);
  out.source_size = src.source_size;
  out.label = src.label;
  out.preset_name = src.preset_name;
  if (!src.keypoints.empty())
    out.keypoints.assign(frames, src.keypoints[0]);
  return out;
}

json metrics_json(const eval::MotionFidelity& mf, double consistency,
                  double identity, bool single_frame) {
  json m;
  m["frame_consistency"] = consistency;
  m["motion_fidelity"] = {
      {"x", mf.x},           {"x_defined", mf.x_defined},
      {"y", mf.y},           {"y_defined", mf.y_defined},
      {"combined", mf.combined}, {"combined_defined", mf.combined_defined}};
  m["identity_proxy"] = identity;
  m["single_frame"] = single_frame;
  return m;
}

}  // namespace

RunConfig resolve_config(const CommandOptions& opts) {
  RunConfig cfg;
  if (!opts.config_path.empty()) cfg.apply_file(opts.config_path);
  for (const auto& spec : opts.overrides) cfg.apply_override(spec);
  if (opts.seed) cfg.set("run", "seed", std::to_string(*opts.seed));
  if (!opts.out.empty()) cfg.set("run", "out", opts.out);
  return cfg;
}

int cmd_gen_data(const RunConfig& cfg) {
  synth::DatasetConfig dc;
  dc.n_videos = cfg.num("data", "n_videos");
  dc.frames = cfg.num("data", "frames");
  dc.size = cfg.num("data", "size");
  const auto clips = synth::make_dataset(dc, cfg.seed());
  const std::string dir = path_or(cfg, "dataset", "dataset");
  synth::save_dataset(clips, dir);
  write_snapshot(cfg, "gen-data");
  std::cout << "wrote " << clips.size() << " clips to " << dir << "\n";
  return 0;
}

int cmd_train_codec(const RunConfig& cfg) {
  const auto clips = synth::load_dataset(path_or(cfg, "dataset", "dataset"));
  codec::Codec codec(cfg.num("data", "size"));
  Rng rng(cfg.seed());
  codec.init(rng);
  codec::CodecConfig cc;
  cc.size = cfg.num("data", "size");
  cc.epochs = cfg.num("codec", "epochs");
  cc.batch = cfg.num("codec", "batch");
  cc.lr = float(cfg.real("codec", "lr"));
  cc.holdout_frac = float(cfg.real("codec", "holdout_frac"));
  cc.seed = int(cfg.seed());
  const auto stats = codec::train_codec(codec, clips, cc);
  const std::string path = path_or(cfg, "codec", "codec.ckpt");
  codec.save(path);
  write_snapshot(cfg, "train-codec");
  std::cout << "codec: holdout mse " << stats.untrained_holdout_mse << " -> "
            << stats.holdout_mse << ", psnr " << stats.holdout_psnr
            << " dB, saved " << path << "\n";
  return 0;
}

int cmd_train_lofnet(const RunConfig& cfg) {
  codec::Codec codec(path_or(cfg, "codec", "codec.ckpt"));
  const auto clips = synth::load_dataset(path_or(cfg, "dataset", "dataset"));
  std::vector<codec::LatentClip> latents;
  latents.reserve(clips.size());
  for (const auto& c : clips)
    latents.push_back(codec::make_latent_clip(codec, c));
  const std::string lat_path = path_or(cfg, "latents", "latents.ckpt");
  codec::save_latent_dataset(lat_path, latents);

  flow::LOFNet net(codec.latent_size(), synth::kDatasetKeypoints,
                   float(cfg.real("lofnet", "sigma")),
                   cfg.num("lofnet", "hidden"));
  Rng rng(cfg.seed());
  net.init(rng);
  flow::LOFNetConfig lc;
  lc.iters = cfg.num("lofnet", "iters");
  lc.lr = float(cfg.real("lofnet", "lr"));
  lc.holdout_frac = float(cfg.real("lofnet", "holdout_frac"));
  lc.seed = cfg.seed();
  const auto stats = flow::train_lofnet(net, latents, lc);
  const std::string path = path_or(cfg, "lofnet", "lofnet.ckpt");
  net.save(path, stats.loss);
  write_snapshot(cfg, "train-lofnet");
  std::cout << "lofnet: holdout " << stats.holdout_initial << " -> "
            << stats.holdout_final << " (ratio "
            << (stats.holdout_initial > 0
                    ? stats.holdout_final / stats.holdout_initial
                    : 0.0f)
            << "), latents " << lat_path << ", saved " << path << "\n";
  return 0;
}

int cmd_train_diffusion(const RunConfig& cfg) {
  const std::string lat_path = path_or(cfg, "latents", "latents.ckpt");
  if (!fs::exists(lat_path))
    throw std::runtime_error("latent dataset not found at " + lat_path +
                             " (train-lofnet writes it)");
  const auto latents = codec::load_latent_dataset(lat_path);

  diffusion::UNetConfig uc;
  uc.width = cfg.num("diffusion", "width");
  uc.heads = cfg.num("diffusion", "heads");
  uc.groups = cfg.num("diffusion", "groups");
  uc.time_dim = cfg.num("diffusion", "time_dim");
  uc.cond_dim = cfg.num("diffusion", "cond_dim");
  uc.num_classes = synth::num_classes();
  uc.frames = cfg.num("data", "frames");
  diffusion::UNet<float> net(uc);
  Rng rng(cfg.seed());
  net.init(rng);

  const auto s = diffusion::make_schedule();
  diffusion::DiffusionTrainConfig tc;
  tc.iters = cfg.num("diffusion", "iters");
  tc.lr = float(cfg.real("diffusion", "lr"));
  tc.log_every = cfg.num("diffusion", "log_every");
  tc.seed = int(cfg.seed());
  const auto stats = diffusion::train_base(net, latents, s, tc);

  const std::string path = path_or(cfg, "denoiser", "denoiser.ckpt");
  json extra;
  extra["schedule_T"] = s.T;
  extra["beta_start"] = 1e-4;
  extra["beta_end"] = 2e-2;
  extra["loss_log"] = stats.loss_log;
  diffusion::save_denoiser(net, extra, path);
  write_snapshot(cfg, "train-diffusion");
  std::cout << "diffusion: loss " << stats.initial_loss << " -> "
            << stats.final_loss << ", saved " << path << "\n";
  return 0;
}

int cmd_finetune(const RunConfig& cfg) {
  codec::Codec codec(path_or(cfg, "codec", "codec.ckpt"));
  flow::LOFNet lofnet(path_or(cfg, "lofnet", "lofnet.ckpt"));
  json meta;
  auto net = diffusion::load_denoiser(path_or(cfg, "denoiser", "denoiser.ckpt"),
                                      &meta);
  const auto s = schedule_from_meta(meta);
  const auto source = synth::load_clip(cfg.str("paths", "source"));
  const auto driving = synth::load_clip(cfg.str("paths", "driving"));
  if (!source.has_keypoints() || !driving.has_keypoints())
    throw std::runtime_error("finetune: source and driving need keypoints");

  codec::LatentClip z_src = codec::make_latent_clip(codec, source);
  const bool single_frame = cfg.flag("finetune", "single_frame");
  if (single_frame)
    z_src = replicate_frame0(z_src, int(driving.frames.size()));

  const auto warped = finetune::build_warped_clip(
      lofnet, z_src.frame(0), source.keypoints[0], driving.keypoints);

  finetune::FinetuneConfig fc;
  fc.rank = cfg.num("finetune", "rank");
  fc.alpha = float(cfg.real("finetune", "alpha"));
  fc.iterations = cfg.num("finetune", "iterations");
  fc.lr = float(cfg.real("finetune", "lr"));
  fc.warp_window =
      finetune::warp_window_from_string(cfg.str("finetune", "warp_window"));
  fc.seed = cfg.seed();
  const auto stats =
      finetune::finetune(*net, z_src, warped, cond_of(source), s, fc);

  const std::string path = path_or(cfg, "adapter", "adapter.ckpt");
  json extra;
  extra["warp_window"] = finetune::to_string(fc.warp_window);
  extra["iterations"] = fc.iterations;
  extra["single_frame"] = single_frame;
  extra["warp_reads"] = warped.reads;
  finetune::save_adapter(*net, fc.rank, fc.alpha, extra, path);
  write_snapshot(cfg, "finetune");
  std::cout << "finetune: " << fc.iterations << " iters, window "
            << finetune::to_string(fc.warp_window);
  if (!stats.loss_source.empty())
    std::cout << ", D_s " << stats.loss_source.front() << " -> "
              << stats.loss_source.back();
  std::cout << ", saved " << path << "\n";
  return 0;
}

int cmd_transfer(const RunConfig& cfg) {
  const std::string codec_path = path_or(cfg, "codec", "codec.ckpt");
  const std::string lofnet_path = path_or(cfg, "lofnet", "lofnet.ckpt");
  const std::string den_path = path_or(cfg, "denoiser", "denoiser.ckpt");
  const std::string adapter_path = path_or(cfg, "adapter", "adapter.ckpt");

  codec::Codec codec(codec_path);
  flow::LOFNet lofnet(lofnet_path);
  json meta;
  auto net = diffusion::load_denoiser(den_path, &meta);
  const auto s = schedule_from_meta(meta);
  const bool with_adapter = cfg.str("paths", "adapter") != "none";
  json adapter_meta;
  if (with_adapter) adapter_meta = finetune::load_adapter(*net, adapter_path);

  synth::VideoClip source = synth::load_clip(cfg.str("paths", "source"));
  const auto driving = synth::load_clip(cfg.str("paths", "driving"));
  const bool single_frame =
      cfg.flag("finetune", "single_frame") || source.frames.size() == 1;
  if (single_frame && source.frames.size() > 1) {
    source.frames.resize(1);
    source.keypoints.resize(1);
  }

  pipeline::TransferConfig tc;
  tc.t_inv = cfg.num("transfer", "t_inv");
  tc.steps = cfg.num("transfer", "steps");
  tc.gamma = float(cfg.real("transfer", "gamma"));
  tc.hist_match = cfg.flag("transfer", "hist_match");
  tc.seed = cfg.seed();

  const fs::path run_dir = out_dir(cfg);
  if (fs::exists(run_dir / "manifest.json"))
    throw std::runtime_error("refusing to overwrite existing run directory " +
                             run_dir.string());

  const auto res =
      single_frame
          ? pipeline::single_frame_transfer(source, driving, codec, lofnet,
                                            *net, s, tc)
          : pipeline::transfer(source, driving, codec, lofnet, *net, s, tc);

  // metrics on the freshly produced clip
  const auto embed = eval::codec_embedder(codec);
  const double consistency = eval::frame_consistency(res.output, embed);
  const auto mf = eval::motion_fidelity(res);
  const Tensor<float> ref = codec.decode(codec.encode(source.frames[0]));
  const double identity = eval::identity_proxy(res.output.frames, ref);
  const json metrics =
      metrics_json(mf, consistency, identity, res.single_frame);

  // run directory: manifest.json (doubles as clip metadata), frames/,
  // output.gif, grid.png, metrics.json
  fs::create_directories(run_dir / "frames");
  char name[32];
  for (size_t f = 0; f < res.output.frames.size(); ++f) {
    std::snprintf(name, sizeof(name), "%05zu.png", f);
    img::save_png((run_dir / "frames" / name).string(),
                  res.output.frames[f]);
  }
  gifio::write_gif((run_dir / "output.gif").string(), res.output.frames,
                   int(std::lround(100.0 / res.output.fps)));
  std::vector<Tensor<float>> grid_frames = driving.frames;
  grid_frames.insert(grid_frames.end(), res.output.frames.begin(),
                     res.output.frames.end());
  img::save_png((run_dir / "grid.png").string(),
                img::make_grid(grid_frames, int(driving.frames.size())));

  json manifest;
  manifest["command"] = "transfer";
  manifest["fps"] = res.output.fps;
  manifest["label"] = res.output.label;
  manifest["preset"] = res.output.preset_name;
  manifest["n_frames"] = res.output.frames.size();
  json jkp = json::array();
  for (const auto& ks : res.output.keypoints)
    jkp.push_back(synth::keypoints_to_json(ks));
  manifest["keypoints"] = jkp;
  manifest["seed"] = tc.seed;
  manifest["single_frame"] = res.single_frame;
  manifest["resolved_config"] = cfg.snapshot();
  manifest["models"] = {{"codec", hash_hex(codec_path)},
                        {"lofnet", hash_hex(lofnet_path)},
                        {"denoiser", hash_hex(den_path)}};
  if (with_adapter) {
    manifest["models"]["adapter"] = hash_hex(adapter_path);
    manifest["adapter"] = adapter_meta.value("warp_window", "");
  }
  manifest["metrics"] = metrics;
  write_text((run_dir / "manifest.json").string(), manifest.dump(2) + "\n");
  write_text((run_dir / "metrics.json").string(), metrics.dump(2) + "\n");

  std::cout << "transfer: " << res.output.frames.size()
            << " frames, consistency " << consistency << ", motion r "
            << (mf.combined_defined ? std::to_string(mf.combined)
                                    : std::string("undefined"))
            << ", run dir " << run_dir.string() << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, bool ablation) {
  const std::string runs_spec = cfg.str("paths", "runs");
  std::vector<std::string> run_dirs;
  for (size_t pos = 0; pos < runs_spec.size();) {
    size_t comma = runs_spec.find(',', pos);
    if (comma == std::string::npos) comma = runs_spec.size();
    const std::string item = runs_spec.substr(pos, comma - pos);
    if (!item.empty()) run_dirs.push_back(item);
    pos = comma + 1;
  }
  if (run_dirs.empty() && cfg.str("paths", "dataset").empty())
    throw std::runtime_error(
        "eval: set paths.runs (comma-separated run dirs) or paths.dataset");

  json report;

  if (!run_dirs.empty()) {
    const std::string codec_path = path_or(cfg, "codec", "codec.ckpt");
    codec::Codec codec(codec_path);
    const auto embed = eval::codec_embedder(codec);
    json rows = json::array();
    if (ablation)
      std::cout << "variant      consistency  motion_r    identity\n";
    for (const auto& dir : run_dirs) {
      const auto clip = synth::load_clip(dir);
      std::ifstream mfs(fs::path(dir) / "manifest.json");
      if (!mfs) throw std::runtime_error("eval: no manifest in " + dir);
      const json manifest = json::parse(mfs);
      const double consistency = eval::frame_consistency(clip, embed);
      const auto mf =
          eval::motion_fidelity(eval::centroid_track(clip.frames),
                                eval::keypoint_centroid_track(clip.keypoints));
      const double identity = manifest.contains("metrics")
                                  ? manifest["metrics"]
                                        .value("identity_proxy", 0.0)
                                  : 0.0;
      const std::string variant = manifest.value("adapter", std::string());
      json row;
      row["run"] = dir;
      row["variant"] = variant;
      row["frame_consistency"] = consistency;
      row["motion_r"] = mf.combined;
      row["motion_r_defined"] = mf.combined_defined;
      row["identity_proxy"] = identity;
      rows.push_back(row);
      if (ablation) {
        std::printf("%-12s %10.4f  %9.4f  %9.5f\n",
                    variant.empty() ? "-" : variant.c_str(), consistency,
                    mf.combined, identity);
      } else {
        std::cout << dir << ": consistency " << consistency << ", motion r "
                  << (mf.combined_defined ? std::to_string(mf.combined)
                                          : std::string("undefined"))
                  << ", identity " << identity << "\n";
      }
    }
    report["runs"] = rows;
  }

  if (!cfg.str("paths", "dataset").empty()) {
    const std::string codec_path = path_or(cfg, "codec", "codec.ckpt");
    codec::Codec codec(codec_path);
    const auto embed = eval::codec_embedder(codec);
    auto clips = synth::load_dataset(cfg.str("paths", "dataset"));
    Rng rng(cfg.seed());
    for (size_t i = clips.size(); i > 1; --i)
      std::swap(clips[i - 1], clips[rng.uniform_int(0, int(i))]);
    const size_t holdout = std::max<size_t>(
        1, size_t(double(clips.size()) * cfg.real("eval", "holdout_frac")));
    std::vector<synth::VideoClip> train(clips.begin() + holdout, clips.end());
    const auto protos = eval::class_prototypes(train, embed);
    int own_wins = 0, total = 0;
    for (size_t i = 0; i < holdout; ++i) {
      const auto& clip = clips[i];
      const double own = eval::class_score(clip, clip.label, embed, protos);
      double best_cross = -2;
      for (const auto& [label, proto] : protos) {
        (void)proto;
        if (label == clip.label) continue;
        best_cross =
            std::max(best_cross, eval::class_score(clip, label, embed, protos));
      }
      ++total;
      if (own > best_cross) ++own_wins;
    }
    const double frac = total ? double(own_wins) / total : 0.0;
    report["class_separability"] = {{"holdout", total},
                                    {"own_beats_cross", own_wins},
                                    {"fraction", frac}};
    std::cout << "class separability: own > cross on " << own_wins << "/"
              << total << " holdout clips (" << frac * 100 << "%)\n";
  }

  write_text((fs::path(out_dir(cfg)) / "eval.json").string(),
             report.dump(2) + "\n");
  write_snapshot(cfg, "eval");
  return 0;
}

int run_command(const std::string& name, const CommandOptions& opts) {
  try {
    const RunConfig cfg = resolve_config(opts);
    if (name == "gen-data") return cmd_gen_data(cfg);
    if (name == "train-codec") return cmd_train_codec(cfg);
    if (name == "train-lofnet") return cmd_train_lofnet(cfg);
    if (name == "train-diffusion") return cmd_train_diffusion(cfg);
    if (name == "finetune") return cmd_finetune(cfg);
    if (name == "transfer") return cmd_transfer(cfg);
    if (name == "eval") return cmd_eval(cfg, opts.ablation);
    std::cerr << "unknown command: " << name << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace lomo::cli
