#include "gsreg_cli/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gsreg/error.hpp"
#include "gsreg/evalkit.hpp"
#include "gsreg/fusion.hpp"
#include "gsreg/json_io.hpp"
#include "gsreg/pipeline.hpp"
#include "gsreg/ply_io.hpp"
#include "gsreg/splat_render.hpp"
#include "gsreg/synthetic.hpp"

namespace gsreg::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

class Log {
 public:
  Log(std::ostream& err, bool quiet) : err_(err), quiet_(quiet) {}
  void operator()(const std::string& msg) const {
    if (!quiet_) err_ << "[gsreg] " << msg << '\n';
  }

 private:
  std::ostream& err_;
  bool quiet_;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNoOverlap:
    case ErrorCode::kRegistrationFailure:
    case ErrorCode::kDegenerate:
    case ErrorCode::kEmptyCloud:
      return kExitRegistrationFailure;
    case ErrorCode::kInsufficientOverlap:
      return kExitInsufficientOverlap;
    default:
      return kExitUsage;
  }
}

void report_error(std::ostream& err, std::string_view code, const std::string& message) {
  err << json{{"error", code}, {"message", message}}.dump() << '\n';
}

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

GaussianModel load_model(const fs::path& ply, const std::optional<fs::path>& cams, const Log& log) {
  GaussianModel model = load_ply(ply);
  if (cams) model.cameras = load_cameras(*cams);
  log("loaded " + ply.string() + ": " + std::to_string(model.size()) + " gaussians, " +
      std::to_string(model.cameras.size()) + " cameras");
  return model;
}

struct RegisterArgs {
  std::string a, b, cams_a, cams_b, out, config;
  bool coarse_only = false;
  bool timings = false;
  std::optional<std::uint64_t> seed;
  std::optional<double> opacity_threshold;
  std::optional<std::size_t> max_points;
};

int cmd_register(const RegisterArgs& args, std::ostream& out, const Log& log) {
  PipelineConfig cfg =
      args.config.empty() ? PipelineConfig{} : parse_pipeline_config(read_text_file(args.config));
  if (args.seed) cfg.seed = *args.seed;
  if (args.opacity_threshold) cfg.opacity_threshold = *args.opacity_threshold;
  if (args.max_points) cfg.max_points = *args.max_points;
  if (args.coarse_only) cfg.coarse_only = true;
  cfg.validate();

  const GaussianModel a = load_model(args.a, args.cams_a, log);
  const GaussianModel b = load_model(args.b, args.cams_b, log);
  log(cfg.coarse_only ? "registering (coarse only)" : "registering (coarse to fine)");
  const RegistrationReport report = register_models(a, b, cfg);
  log("coarse stage: " + std::to_string(report.coarse.inlier_count) + " ICP pairs, " +
      fixed(report.coarse_seconds, 2) + " s");
  if (!cfg.coarse_only) log("fine stage: " + fixed(report.fine_seconds, 2) + " s");
  if (!report.note.empty()) log(report.note);

  const std::string text = registration_to_json(report, args.timings);
  write_text_file(args.out, text + "\n");
  out << text << '\n';
  log("stage " + std::string(to_string(report.stage)) + ", wrote " + args.out);
  return report.insufficient_overlap ? kExitInsufficientOverlap : kExitOk;
}

struct FuseArgs {
  std::string a, b, transform, out, cams_a, cams_b, cams_out;
};

int cmd_fuse(const FuseArgs& args, std::ostream& out, const Log& log) {
  auto opt = [](const std::string& s) {
    return s.empty() ? std::nullopt : std::optional<fs::path>(s);
  };
  const GaussianModel a = load_model(args.a, opt(args.cams_a), log);
  const GaussianModel b = load_model(args.b, opt(args.cams_b), log);
  const Sim3 x = load_sim3(args.transform);
  const GaussianModel b_in_a = transform_model(b, x);
  const GaussianModel merged = merge_models(a, b_in_a);
  save_ply(merged, args.out);
  log("wrote " + args.out + " (" + std::to_string(merged.size()) + " gaussians)");

  json summary = {{"gaussians_a", a.size()},
                  {"gaussians_b", b.size()},
                  {"gaussians_out", merged.size()},
                  {"ply", args.out}};
  if (!merged.cameras.empty()) {
    fs::path cams_out = args.cams_out;
    if (cams_out.empty()) cams_out = fs::path(args.out).replace_extension(".cameras.json");
    save_cameras(merged.cameras, cams_out);
    summary["cameras"] = cams_out.string();
    log("wrote " + cams_out.string() + " (" + std::to_string(merged.cameras.size()) + " cameras)");
  }
  out << summary.dump(2) << '\n';
  return kExitOk;
}

struct RenderArgs {
  std::string model, cams, outdir;
  bool depth = false;
  bool color = false;
  int width = 0;
  int height = 0;
  double opacity_threshold = 0.7;
};

int cmd_render(const RenderArgs& args, std::ostream& out, const Log& log) {
  if (!args.depth && !args.color) fail(ErrorCode::kInvalidArgument, "render needs --depth or --color");
  const GaussianModel model = load_model(args.model, fs::path(args.cams), log);
  fs::create_directories(args.outdir);
  RenderOptions opts;
  opts.opacity_threshold = args.opacity_threshold;
  json written = json::array();
  for (std::size_t i = 0; i < model.cameras.size(); ++i) {
    const CameraPose& cam = model.cameras[i];
    const int w = args.width > 0 ? args.width : cam.width;
    const int h = args.height > 0 ? args.height : cam.height;
    const RenderResult r = render(model, cam, w, h, args.color, opts);
    char name[64];
    if (args.depth) {
      std::snprintf(name, sizeof(name), "depth_%04zu.pgm", i);
      write_depth_pgm(r.depth, fs::path(args.outdir) / name);
      written.push_back(name);
    }
    if (args.color) {
      std::snprintf(name, sizeof(name), "color_%04zu.ppm", i);
      write_color_ppm(r.color, fs::path(args.outdir) / name);
      written.push_back(name);
    }
  }
  log("rendered " + std::to_string(model.cameras.size()) + " cameras into " + args.outdir);
  out << json{{"outdir", args.outdir}, {"files", written}}.dump(2) << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string est, gt, batch, csv;
  std::string est_name = "est.json";
  std::string gt_name = "gt.json";
  double success_deg = kSuccessRreDeg;
};

double seconds_from(const fs::path& est_path) {
  const json j = json::parse(read_text_file(est_path), nullptr, false);
  if (j.is_discarded()) return 0.0;
  if (j.contains("diagnostics") && j["diagnostics"].contains("seconds") &&
      j["diagnostics"]["seconds"].is_number()) {
    return j["diagnostics"]["seconds"].get<double>();
  }
  return 0.0;
}

int cmd_eval(const EvalArgs& args, std::ostream& out, const Log& log) {
  if (args.batch.empty()) {
    if (args.est.empty() || args.gt.empty()) {
      fail(ErrorCode::kInvalidArgument, "eval needs EST and GT files, or --batch DIR");
    }
    const MetricReport report =
        evaluate(load_sim3(args.est), load_sim3(args.gt), args.success_deg);
    out << report_to_json(report) << '\n';
    return kExitOk;
  }
  if (!fs::is_directory(args.batch)) {
    fail(ErrorCode::kIo, "batch directory not found: " + args.batch);
  }
  std::vector<fs::path> scenes;
  for (const auto& entry : fs::directory_iterator(args.batch)) {
    if (entry.is_directory() && fs::exists(entry.path() / args.est_name) &&
        fs::exists(entry.path() / args.gt_name)) {
      scenes.push_back(entry.path());
    }
  }
  std::sort(scenes.begin(), scenes.end());
  std::vector<BatchRow> rows;
  for (const fs::path& dir : scenes) {
    BatchRow row;
    row.scene = dir.filename().string();
    row.report = evaluate(load_sim3(dir / args.est_name), load_sim3(dir / args.gt_name),
                          args.success_deg);
    row.seconds = seconds_from(dir / args.est_name);
    rows.push_back(std::move(row));
  }
  log("evaluated " + std::to_string(rows.size()) + " scenes");
  const std::string csv = batch_to_csv(rows);
  if (!args.csv.empty()) write_text_file(args.csv, csv);
  out << csv;
  return kExitOk;
}

struct SynthArgs {
  std::string outdir, config;
  std::uint64_t seed = 42;
  std::optional<double> overlap;
};

int cmd_synth(const SynthArgs& args, std::ostream& out, const Log& log) {
  SyntheticConfig cfg =
      args.config.empty() ? SyntheticConfig{} : parse_synthetic_config(read_text_file(args.config));
  if (args.overlap) cfg.overlap = *args.overlap;
  cfg.validate();
  log("generating synthetic pair, seed " + std::to_string(args.seed));
  const SyntheticPair pair = make_synthetic_scene_pair(args.seed, cfg);
  const fs::path dir(args.outdir);
  fs::create_directories(dir);
  save_ply(pair.a, dir / "a.ply");
  save_ply(pair.b, dir / "b.ply");
  save_cameras(pair.a.cameras, dir / "cams_a.json");
  save_cameras(pair.b.cameras, dir / "cams_b.json");
  write_text_file(dir / "gt.json", sim3_to_json(pair.ground_truth) + "\n");
  log("wrote a.ply (" + std::to_string(pair.a.size()) + "), b.ply (" +
      std::to_string(pair.b.size()) + "), cameras and gt.json to " + args.outdir);
  out << json{{"outdir", args.outdir},
              {"gaussians_a", pair.a.size()},
              {"gaussians_b", pair.b.size()},
              {"shared_frames", pair.shared_frames}}
             .dump(2)
      << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Registration and fusion of Gaussian splatting scenes", "gsreg"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress logging");

  RegisterArgs reg;
  auto* c_reg = app.add_subcommand("register", "Estimate the Sim3 mapping B onto A");
  c_reg->add_option("a", reg.a, "Model A (.ply)")->required()->check(CLI::ExistingFile);
  c_reg->add_option("b", reg.b, "Model B (.ply)")->required()->check(CLI::ExistingFile);
  c_reg->add_option("cams_a", reg.cams_a, "Cameras of A (.json)")->required()->check(CLI::ExistingFile);
  c_reg->add_option("cams_b", reg.cams_b, "Cameras of B (.json)")->required()->check(CLI::ExistingFile);
  c_reg->add_option("out", reg.out, "Output transform (.json)")->required();
  c_reg->add_flag("--coarse-only", reg.coarse_only, "Skip overlap selection and fine registration");
  c_reg->add_option("--config", reg.config, "Pipeline config (.json)")->check(CLI::ExistingFile);
  c_reg->add_option("--seed", reg.seed, "Seed for every random choice");
  c_reg->add_option("--opacity-threshold", reg.opacity_threshold, "Override opacity_threshold");
  c_reg->add_option("--max-points", reg.max_points, "Override max_points");
  c_reg->add_flag("--timings", reg.timings, "Include stage timings in the diagnostics");

  FuseArgs fuse;
  auto* c_fuse = app.add_subcommand("fuse", "Transform B into A's frame and merge");
  c_fuse->add_option("a", fuse.a, "Model A (.ply)")->required()->check(CLI::ExistingFile);
  c_fuse->add_option("b", fuse.b, "Model B (.ply)")->required()->check(CLI::ExistingFile);
  c_fuse->add_option("transform", fuse.transform, "Transform B -> A (.json)")
      ->required()
      ->check(CLI::ExistingFile);
  c_fuse->add_option("out", fuse.out, "Merged model (.ply)")->required();
  c_fuse->add_option("--cams-a", fuse.cams_a, "Cameras of A")->check(CLI::ExistingFile);
  c_fuse->add_option("--cams-b", fuse.cams_b, "Cameras of B")->check(CLI::ExistingFile);
  c_fuse->add_option("--cams-out", fuse.cams_out,
                     "Merged cameras (default: OUT with .cameras.json extension)");

  RenderArgs ren;
  auto* c_ren = app.add_subcommand("render", "Render one image per camera");
  c_ren->add_option("model", ren.model, "Model (.ply)")->required()->check(CLI::ExistingFile);
  c_ren->add_option("cams", ren.cams, "Cameras (.json)")->required()->check(CLI::ExistingFile);
  c_ren->add_option("outdir", ren.outdir, "Output directory")->required();
  c_ren->add_flag("--depth", ren.depth, "Write 16-bit depth PGM (millimetres)");
  c_ren->add_flag("--color", ren.color, "Write colour PPM");
  c_ren->add_option("--width", ren.width, "Override image width");
  c_ren->add_option("--height", ren.height, "Override image height");
  c_ren->add_option("--opacity-threshold", ren.opacity_threshold, "Minimum opacity drawn");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Compare an estimated transform with ground truth");
  c_ev->add_option("est", ev.est, "Estimated transform (.json)")->check(CLI::ExistingFile);
  c_ev->add_option("gt", ev.gt, "Ground-truth transform (.json)")->check(CLI::ExistingFile);
  c_ev->add_option("--batch", ev.batch, "Directory with one sub-directory per scene");
  c_ev->add_option("--est-name", ev.est_name, "Estimate file name inside each scene directory");
  c_ev->add_option("--gt-name", ev.gt_name, "Ground-truth file name inside each scene directory");
  c_ev->add_option("--csv", ev.csv, "Also write the batch CSV here");
  c_ev->add_option("--success-deg", ev.success_deg, "RRE bound for a successful registration");

  SynthArgs syn;
  auto* c_syn = app.add_subcommand("synth", "Generate a synthetic registration pair");
  c_syn->add_option("outdir", syn.outdir, "Output directory")->required();
  c_syn->add_option("--seed", syn.seed, "Scene seed");
  c_syn->add_option("--config", syn.config, "Synthetic scene config (.json)")
      ->check(CLI::ExistingFile);
  c_syn->add_option("--overlap", syn.overlap, "Override the overlap fraction");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    report_error(err, "usage", e.what());
    return kExitUsage;
  }

  const Log log(err, quiet);
  try {
    if (*c_reg) return cmd_register(reg, out, log);
    if (*c_fuse) return cmd_fuse(fuse, out, log);
    if (*c_ren) return cmd_render(ren, out, log);
    if (*c_ev) return cmd_eval(ev, out, log);
    if (*c_syn) return cmd_synth(syn, out, log);
  } catch (const Error& e) {
    report_error(err, to_string(e.code()), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    report_error(err, "io", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace gsreg::cli
