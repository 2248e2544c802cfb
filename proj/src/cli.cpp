#include "pitchlab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "pitchlab/error.hpp"
#include "pitchlab/imputation.hpp"
#include "pitchlab/io.hpp"
#include "pitchlab/metrics.hpp"
#include "pitchlab/projection.hpp"
#include "pitchlab/rollout.hpp"

namespace pitchlab::cli {

namespace {

namespace fs = std::filesystem;

std::string format_index(const char* f, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, i);
  return buf;
}

std::vector<Segment> load_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  auto segs = io::read_segment_dir(dir);
  if (segs.empty()) throw Error(ErrorCode::IoError, "no .seg files in " + dir.string());
  return segs;
}

std::vector<Segment> load_input(const fs::path& p) {
  if (fs::is_directory(p)) return load_dir(p);
  return {io::read_segment(p)};
}

std::vector<metrics::GridConfig> parse_grids(const std::vector<std::string>& labels) {
  std::vector<metrics::GridConfig> out;
  for (const auto& l : labels) {
    const auto g = metrics::parse_grid(l);
    if (!g) throw CLI::ValidationError("--grids", "unrecognized grid '" + l + "'");
    metrics::validate_grid(*g);
    out.push_back(*g);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct GenSynth {
  std::string out;
  std::size_t count = 20;
  std::size_t matches = 0;
  std::string scenario = "all";
  double duration = 10.0;
  double noise = 0.002;
  double fps = 25.0;
  std::uint64_t seed = 0;

  void attach(CLI::App& app) {
    app.add_option("--out", out, "Output directory")->required();
    app.add_option("--count", count, "Number of segments")->check(CLI::PositiveNumber);
    app.add_option("--matches", matches, "Distinct match ids (0: one per segment)");
    app.add_option("--scenario", scenario, "Scenario name or 'all' to cycle through every scenario");
    app.add_option("--duration", duration, "Seconds per segment")->check(CLI::PositiveNumber);
    app.add_option("--noise", noise, "Positional noise sigma (normalized units)")->check(CLI::NonNegativeNumber);
    app.add_option("--fps", fps, "Frame rate")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "Random seed");
  }

  int run(std::ostream& out_s) const {
    std::vector<io::Scenario> pool;
    if (scenario == "all") {
      pool = io::all_scenarios();
    } else if (const auto s = io::parse_scenario(scenario)) {
      pool = {*s};
    } else {
      throw CLI::ValidationError("--scenario", "unknown scenario '" + scenario + "'");
    }
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
      io::ScenarioSpec spec;
      spec.scenario = pool[i % pool.size()];
      spec.duration_s = duration;
      spec.noise_sigma = noise;
      spec.fps = fps;
      spec.seed = rng();
      spec.segment_id = format_index("synth-%05zu-", i) + io::to_string(spec.scenario);
      spec.match_id = format_index("match-%04zu", matches == 0 ? i : i % matches);
      io::write_segment(fs::path(out) / (spec.segment_id + ".seg"), io::generate_synthetic(spec));
    }
    out_s << "wrote " << count << " segments to " << out << "\n";
    return kExitOk;
  }
};

struct SplitCmd {
  std::string data;
  std::string out;
  std::uint64_t seed = 0;

  void attach(CLI::App& app) {
    app.add_option("--data", data, "Segment directory")->required();
    app.add_option("--out", out, "Manifest file")->required();
    app.add_option("--seed", seed, "Shuffle seed");
  }

  int run(std::ostream& out_s) const {
    std::vector<std::string> ids;
    for (const auto& s : load_dir(data)) ids.push_back(s.match_id);
    const auto m = io::split_dataset(ids, seed);
    io::write_manifest(out, m);
    out_s << "train " << m.count(io::Split::Train) << ", val " << m.count(io::Split::Val) << ", test "
          << m.count(io::Split::Test) << " matches\n";
    return kExitOk;
  }
};

struct Calibrate {
  std::string correspondences;
  std::string out;

  void attach(CLI::App& app) {
    app.add_option("--correspondences", correspondences, "CSV of frame,u,v,X,Y")->required();
    app.add_option("--out", out, "Homography file")->required();
  }

  int run(std::ostream& out_s, std::ostream& err) const {
    projection::CalibrationTrack track;
    std::size_t skipped = 0;
    for (const auto& [frame, pairs] : io::read_correspondences(correspondences)) {
      try {
        const auto h = projection::estimate_homography(pairs);
        track.set(frame, h);
        out_s << "frame " << frame << ": reprojection RMS " << projection::reprojection_error(h, pairs) << " m\n";
      } catch (const Error& e) {
        ++skipped;
        err << "frame " << frame << ": " << e.what() << "\n";
      }
    }
    if (track.empty()) throw Error(ErrorCode::InsufficientCorrespondences, "no frame could be calibrated");
    io::write_homographies(out, track);
    out_s << track.frames().size() << " frames calibrated, " << skipped << " skipped\n";
    return kExitOk;
  }
};

struct Project {
  std::string detections;
  std::string calibration;
  std::string out;
  std::size_t frames = 0;
  double fps = 25.0;
  std::string segment_id = "projected";
  std::string match_id = "match-0000";
  std::size_t max_gap = projection::CalibrationTrack::kDefaultMaxGap;

  void attach(CLI::App& app) {
    app.add_option("--detections", detections, "CSV of frame,agent_id,x_min,y_min,x_max,y_max")->required();
    app.add_option("--calibration", calibration, "Homography file")->required();
    app.add_option("--out", out, "Output segment file")->required();
    app.add_option("--frames", frames, "Segment length (default: last detection frame + 1)");
    app.add_option("--fps", fps, "Frame rate")->check(CLI::PositiveNumber);
    app.add_option("--segment-id", segment_id, "Segment id");
    app.add_option("--match-id", match_id, "Match id");
    app.add_option("--max-gap", max_gap, "Longest calibration gap bridged, in frames");
  }

  int run(std::ostream& out_s) const {
    const auto track = io::read_homographies(calibration);
    const auto dets = io::read_detections(detections);
    std::size_t n = frames;
    if (n == 0) {
      for (const auto& d : dets) n = std::max(n, d.frame_idx + 1);
    }
    if (n == 0) throw Error(ErrorCode::InsufficientFrames, "no detections in " + detections);

    Segment s;
    s.segment_id = segment_id;
    s.match_id = match_id;
    s.fps = fps;
    s.frames.assign(n, Frame(kNumAgents));
    s.observed.assign(n, FrameMask(kNumAgents, 0));
    std::size_t placed = 0;
    for (const auto& d : dets) {
      if (!d.agent || d.frame_idx >= n) continue;
      const auto h = track.resolve(d.frame_idx, max_gap);
      if (!h) continue;
      s.frames[d.frame_idx][*d.agent] = projection::project_detection(*h, d);
      s.observed[d.frame_idx][*d.agent] = 1;
      ++placed;
    }
    io::write_segment(out, s);
    out_s << placed << " of " << n * kNumAgents << " slots observed\n";
    return kExitOk;
  }
};

struct Impute {
  std::string in;
  std::string checkpoint;
  std::string out;

  void attach(CLI::App& app) {
    app.add_option("--in", in, "Segment file or directory")->required();
    app.add_option("--checkpoint", checkpoint, "Imputer checkpoint (spline guide only when omitted)");
    app.add_option("--out", out, "Output directory")->required();
  }

  int run(std::ostream& out_s) const {
    std::optional<imputation::ImputerParams> params;
    if (!checkpoint.empty()) params = io::read_imputer(checkpoint);
    std::size_t filled = 0;
    for (auto s : load_input(in)) {
      const auto seq = imputation::ObservedSequence::from_segment(s);
      imputation::Tensor3 x;
      if (params) {
        x = imputation::impute(*params, seq).x_full;
      } else {
        x = imputation::guide_fill(seq);
      }
      for (std::size_t t = 0; t < s.num_frames(); ++t) {
        for (std::size_t i = 0; i < kNumAgents; ++i) {
          if (!s.is_observed(t, i)) ++filled;
          s.frames[t][i] = x.point(i, t);
        }
      }
      s.observed.clear();
      io::write_segment(fs::path(out) / (s.segment_id + ".seg"), s);
    }
    out_s << filled << " entries filled\n";
    return kExitOk;
  }
};

struct TrainImputer {
  std::string data;
  std::string out;
  std::size_t epochs = 5;
  std::size_t hidden = 16;
  std::size_t latent = 4;
  std::size_t crop = 50;
  std::size_t max_agents = 8;
  double lr = 3e-3;
  double mask_rate = 0.3;
  std::uint64_t seed = 0;

  void attach(CLI::App& app) {
    app.add_option("--data", data, "Segment directory")->required();
    app.add_option("--out", out, "Checkpoint file")->required();
    app.add_option("--epochs", epochs, "Training epochs");
    app.add_option("--hidden", hidden, "Recurrent hidden size")->check(CLI::PositiveNumber);
    app.add_option("--latent", latent, "Latent size")->check(CLI::PositiveNumber);
    app.add_option("--crop", crop, "Frames per training crop (0: full segments)");
    app.add_option("--max-agents", max_agents, "Agents per training sample (0: all)");
    app.add_option("--lr", lr, "Adam learning rate")->check(CLI::PositiveNumber);
    app.add_option("--mask-rate", mask_rate, "Fraction of frames hidden per agent")->check(CLI::Range(0.0, 0.95));
    app.add_option("--seed", seed, "Random seed");
  }

  int run(std::ostream& out_s) const {
    const auto segs = load_dir(data);
    imputation::LatentConfig cfg;
    cfg.hidden_dim = hidden;
    cfg.latent_dim = latent;
    imputation::TrainConfig tc;
    tc.epochs = epochs;
    tc.optimizer = {nn::OptimizerKind::Adam, lr};
    tc.optimizer.clip_norm = 5.0;
    tc.mask_rate = mask_rate;
    tc.crop_frames = crop;
    tc.max_agents = max_agents;
    tc.seed = seed;
    const auto r = imputation::train_imputer(segs, cfg, tc);
    io::write_imputer(out, r.params);
    out_s << "probe loss " << r.initial_loss << " -> " << r.final_loss << (r.reverted ? " (kept initial weights)" : "")
          << "\n";
    return kExitOk;
  }
};

struct TrainBC {
  std::string data;
  std::string manifest;
  std::string out;
  std::size_t epochs = 100;
  std::size_t hidden = 64;
  std::size_t windows = 64;
  std::size_t batch = 8;
  std::size_t predict_frames = 25;
  std::size_t refine_steps = 0;
  std::vector<std::size_t> contexts{1, 10, 25, 50};
  double lr = 3e-3;
  std::uint64_t seed = 0;

  void attach(CLI::App& app) {
    app.add_option("--data", data, "Segment directory")->required();
    app.add_option("--manifest", manifest, "Split manifest; trains on its train matches");
    app.add_option("--out", out, "Checkpoint file")->required();
    app.add_option("--epochs", epochs, "Training epochs");
    app.add_option("--hidden", hidden, "Hidden units")->check(CLI::PositiveNumber);
    app.add_option("--windows", windows, "Windows per epoch per context length")->check(CLI::PositiveNumber);
    app.add_option("--batch", batch, "Windows per update per context length")->check(CLI::PositiveNumber);
    app.add_option("--predict-frames", predict_frames, "Teacher-forced steps per window")->check(CLI::PositiveNumber);
    app.add_option("--contexts", contexts, "Context lengths in frames")->delimiter(',');
    app.add_option("--refine-steps", refine_steps, "Closed-loop fine-tuning steps (0 disables)");
    app.add_option("--lr", lr, "Adam learning rate")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "Random seed");
  }

  int run(std::ostream& out_s) const {
    auto segs = load_dir(data);
    std::vector<Segment> train, held;
    if (!manifest.empty()) {
      const auto m = io::read_manifest(manifest);
      for (auto& s : segs) {
        const auto it = m.assignment.find(s.match_id);
        if (it == m.assignment.end()) continue;
        (it->second == io::Split::Train ? train : held).push_back(std::move(s));
      }
      if (train.empty()) throw Error(ErrorCode::InsufficientFrames, "manifest leaves no training segments");
    } else {
      train = std::move(segs);
    }
    if (held.empty()) held = train;

    rollout::RolloutConfig rc;
    rc.context_lengths = contexts;
    rc.predict_frames = predict_frames;
    rc.closed_loop_steps = refine_steps;
    rc.validate();
    rollout::BCTrainConfig tc;
    tc.hidden_dim = hidden;
    tc.epochs = epochs;
    tc.windows_per_epoch = windows;
    tc.batch_windows = batch;
    tc.optimizer.learning_rate = lr;
    tc.seed = seed;

    auto params = rollout::bc_train(train, rc, tc);
    out_s << "teacher-forced loss " << rollout::bc_dataset_loss(params, held, rc, seed) << "\n";
    if (refine_steps > 0) {
      const auto r = rollout::closed_loop_refine(params, train, held, rc, tc);
      out_s << "closed-loop refine: rmse " << r.rmse_before << " -> " << r.rmse_after
            << (r.accepted ? "" : " (rejected)") << "\n";
      params = r.params;
    }
    io::write_bc(out, params);
    return kExitOk;
  }
};

struct RolloutCmd {
  std::string data;
  std::string policy = "bc";
  std::string checkpoint;
  std::string out;
  double seconds = 0.0;
  double sigma = 0.002;
  std::uint64_t seed = 0;

  void attach(CLI::App& app) {
    app.add_option("--data", data, "Ground-truth segment file or directory; frame 0 seeds each rollout")->required();
    app.add_option("--policy", policy, "zero, cv, bc or random-walk")
        ->check(CLI::IsMember({"zero", "cv", "bc", "random-walk"}));
    app.add_option("--checkpoint", checkpoint, "BC checkpoint (policy bc)");
    app.add_option("--out", out, "Output directory")->required();
    app.add_option("--seconds", seconds, "Rollout length (default: ground-truth length)")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--sigma", sigma, "Step sigma for random-walk")->check(CLI::NonNegativeNumber);
    app.add_option("--seed", seed, "Seed for random-walk");
  }

  int run(std::ostream& out_s) const {
    std::unique_ptr<rollout::Policy> p;
    if (policy == "zero") {
      p = std::make_unique<rollout::ZeroPolicy>();
    } else if (policy == "cv") {
      p = std::make_unique<rollout::ConstantVelocityPolicy>();
    } else if (policy == "random-walk") {
      p = std::make_unique<rollout::RandomWalkPolicy>(seed, sigma);
    } else {
      if (checkpoint.empty()) throw CLI::ValidationError("--checkpoint", "required for policy bc");
      p = std::make_unique<rollout::BCPolicy>(io::read_bc(checkpoint));
    }
    const auto segs = load_input(data);
    for (const auto& gt : segs) {
      const std::size_t total =
          seconds > 0.0 ? std::max<std::size_t>(1, metrics::horizon_to_frames(seconds, gt.fps)) : gt.num_frames();
      const auto pred = rollout::predict_segment(*p, gt, total);
      io::write_segment(fs::path(out) / (gt.segment_id + ".seg"), pred);
    }
    out_s << "rolled out " << segs.size() << " segments with " << p->name() << "\n";
    return kExitOk;
  }
};

struct Evaluate {
  std::string pred;
  std::string gt;
  std::vector<std::string> grids{"15x10"};
  std::vector<double> horizons{3.0, 5.0, 10.0};
  std::string out;
  std::size_t target = kBallIndex;
  bool harmonic = false;
  bool serial = false;

  void attach(CLI::App& app) {
    app.add_option("--pred", pred, "Predicted segment directory")->required();
    app.add_option("--gt", gt, "Ground-truth segment directory")->required();
    app.add_option("--grids", grids, "Grid labels, e.g. 15x10 or adaptive:0.5:0.05:0.5")->delimiter(',');
    app.add_option("--horizons", horizons, "Horizons in seconds")->delimiter(',');
    app.add_option("--out", out, "Report directory (default: $PITCHLAB_OUT_DIR or pitchlab-out)");
    app.add_option("--target", target, "Agent slot to score (22 is the ball)")->check(CLI::Range(0, 22));
    app.add_flag("--harmonic", harmonic, "Combine S_t and S_v with the harmonic mean");
    app.add_flag("--serial", serial, "Disable parallel evaluation");
  }

  int run(std::ostream& out_s) const {
    const auto gcfg = parse_grids(grids);
    for (double h : horizons) {
      if (!(h > 0.0)) throw CLI::ValidationError("--horizons", "horizons must be positive");
    }
    const auto gts = load_dir(gt);
    const auto preds = load_dir(pred);
    std::map<std::string, const Segment*> by_id;
    for (const auto& p : preds) by_id[p.segment_id] = &p;
    std::vector<metrics::SegmentPair> pairs;
    for (const auto& g : gts) {
      const auto it = by_id.find(g.segment_id);
      if (it == by_id.end()) {
        throw Error(ErrorCode::IoError, "no prediction for segment '" + g.segment_id + "' in " + pred);
      }
      pairs.push_back({&g, it->second});
    }
    metrics::EvalOptions opt;
    opt.target = target;
    opt.mean = harmonic ? metrics::ScoreMean::Harmonic : metrics::ScoreMean::Arithmetic;
    opt.keep_grids = true;
    metrics::EvalReport report;
    report.rows = metrics::evaluate_dataset(pairs, gcfg, horizons, opt,
                                            serial ? metrics::Execution::Serial : metrics::Execution::Parallel);
    report.summary = metrics::aggregate(report.rows);
    const fs::path dir = out.empty() ? io::default_output_dir() : fs::path(out);
    const auto files = io::emit_report(report, dir);
    out_s << io::format_summary_markdown(report.summary);
    out_s << "wrote " << files.size() << " files to " << dir.string() << "\n";
    return kExitOk;
  }
};

struct Report {
  std::string rows;
  std::string out;

  void attach(CLI::App& app) {
    app.add_option("--rows", rows, "rows.csv from a previous evaluation")->required();
    app.add_option("--out", out, "Report directory (default: $PITCHLAB_OUT_DIR or pitchlab-out)");
  }

  int run(std::ostream& out_s) const {
    metrics::EvalReport report;
    report.rows = io::read_rows_csv(rows);
    if (report.rows.empty()) throw Error(ErrorCode::EmptyReport, rows + " holds no rows");
    report.summary = metrics::aggregate(report.rows);
    const fs::path dir = out.empty() ? io::default_output_dir() : fs::path(out);
    io::emit_report(report, dir);
    out_s << io::format_summary_markdown(report.summary);
    return kExitOk;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trajectory benchmarking toolkit for football possessions", "pitchlab"};
  app.require_subcommand(1);
  app.fallthrough(false);

  GenSynth gen_synth;
  SplitCmd split;
  Calibrate calibrate;
  Project project;
  Impute impute;
  TrainImputer train_imputer;
  TrainBC train_bc;
  RolloutCmd roll;
  Evaluate evaluate;
  Report report;

  auto* c_gen = app.add_subcommand("gen-synth", "Generate synthetic possession segments");
  gen_synth.attach(*c_gen);
  auto* c_split = app.add_subcommand("split", "Assign matches to train/val/test");
  split.attach(*c_split);
  auto* c_cal = app.add_subcommand("calibrate", "Estimate per-frame homographies from correspondences");
  calibrate.attach(*c_cal);
  auto* c_proj = app.add_subcommand("project", "Project detections onto the pitch as a segment");
  project.attach(*c_proj);
  auto* c_imp = app.add_subcommand("impute", "Fill missing entries of partially observed segments");
  impute.attach(*c_imp);
  auto* c_timp = app.add_subcommand("train-imputer", "Train the latent imputer");
  train_imputer.attach(*c_timp);
  auto* c_bc = app.add_subcommand("train-bc", "Train a behavior-cloning policy");
  train_bc.attach(*c_bc);
  auto* c_roll = app.add_subcommand("rollout", "Roll out a policy from each segment's first frame");
  roll.attach(*c_roll);
  auto* c_eval = app.add_subcommand("evaluate", "Score predictions against ground truth");
  evaluate.attach(*c_eval);
  auto* c_rep = app.add_subcommand("report", "Re-render summaries from a rows.csv");
  report.attach(*c_rep);

  const auto usage_for = [&]() -> std::string {
    for (auto* sub : app.get_subcommands()) return sub->help();
    return app.help();
  };

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << usage_for();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << usage_for();
    return kExitUsage;
  }

  try {
    if (c_gen->parsed()) return gen_synth.run(out);
    if (c_split->parsed()) return split.run(out);
    if (c_cal->parsed()) return calibrate.run(out, err);
    if (c_proj->parsed()) return project.run(out);
    if (c_imp->parsed()) return impute.run(out);
    if (c_timp->parsed()) return train_imputer.run(out);
    if (c_bc->parsed()) return train_bc.run(out);
    if (c_roll->parsed()) return roll.run(out);
    if (c_eval->parsed()) return evaluate.run(out);
    if (c_rep->parsed()) return report.run(out);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n\n" << usage_for();
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  err << app.help();
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace pitchlab::cli
