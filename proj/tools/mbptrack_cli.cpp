// Command-line front end: generate-data, import-kitti, train, track, eval, plot.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "mbptrack/checkpoint.hpp"
#include "mbptrack/config.hpp"
#include "mbptrack/eval.hpp"
#include "mbptrack/simd.hpp"
#include "mbptrack/tracker.hpp"
#include "mbptrack/train.hpp"

namespace fs = std::filesystem;
using namespace mbp;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  long long seed = -1;
};

RunConfig resolve_config(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
  for (const auto& o : c.overrides) apply_override(cfg, o);
  if (c.seed >= 0) {
    const auto s = static_cast<std::uint64_t>(c.seed);
    cfg.model.init_seed = s;
    cfg.train.seed = s;
    cfg.tracker.seed = s;
    cfg.synth.seed = s;
  }
  cfg.validate();
  return cfg;
}

// Explicit flag, then MBPTRACK_DATA_ROOT, then the config value.
fs::path data_root(const std::string& flag, const RunConfig& cfg) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("MBPTRACK_DATA_ROOT"); env && *env) return env;
  return cfg.data_dir;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config_path, "Config file (key = value)");
  app->add_option("--set", c.overrides, "Override a config key, key=value (repeatable)");
  app->add_option("--seed", c.seed, "Seed for every random source");
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  return out;
}

std::vector<CurvePoint> read_curve_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open curve file '" + path + "'");
  return read_curve_csv(in);
}

void write_svg(const fs::path& path, const std::string& title, const std::string& xlabel,
               const std::vector<std::pair<std::string, std::vector<CurvePoint>>>& series) {
  const double w = 480, h = 360, left = 60, right = 20, top = 40, bottom = 50;
  const double pw = w - left - right, ph = h - top - bottom;
  double xmax = 0.0;
  for (const auto& [_, s] : series)
    for (const auto& p : s) xmax = std::max(xmax, p.threshold);
  if (xmax <= 0.0) xmax = 1.0;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ofstream out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title
      << "</text>\n"
      << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double fx = i / 5.0;
    out << "<text x=\"" << left + fx * pw << "\" y=\"" << top + ph + 16
        << "\" text-anchor=\"middle\">" << fx * xmax << "</text>\n"
        << "<text x=\"" << left - 6 << "\" y=\"" << top + ph - fx * ph + 4
        << "\" text-anchor=\"end\">" << fx << "</text>\n";
  }
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">"
      << xlabel << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& [name, pts] = series[k];
    const char* color = colors[k % 5];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : pts)
      out << left + p.threshold / xmax * pw << ',' << top + ph - p.ratio * ph << ' ';
    out << "\"/>\n<text x=\"" << left + pw - 8 << "\" y=\"" << top + 16 + 14.0 * k
        << "\" text-anchor=\"end\" fill=\"" << color << "\">" << name << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MBPTrack: memory-based 3D single object tracking"};
  app.require_subcommand(1);
  std::string isa;
  app.add_option("--isa", isa, "Force a kernel set: scalar, avx2 or neon");

  Common common;

  // generate-data
  auto* gen = app.add_subcommand("generate-data", "Write a synthetic dataset directory");
  add_common(gen, common);
  std::string gen_out;
  gen->add_option("-o,--out", gen_out, "Dataset directory (default: data root)");

  // import-kitti
  auto* imp = app.add_subcommand("import-kitti", "Convert one KITTI tracklet to a dataset directory");
  std::string kitti_velo, kitti_label, kitti_calib, kitti_out;
  long kitti_track = 0;
  imp->add_option("--velodyne", kitti_velo, "Directory of NNNNNN.bin scans")->required();
  imp->add_option("--labels", kitti_label, "label_02 file of the sequence")->required();
  imp->add_option("--calib", kitti_calib, "calib file of the sequence")->required();
  imp->add_option("--track-id", kitti_track, "Track id to extract")->required();
  imp->add_option("-o,--out", kitti_out, "Dataset directory to write")->required();

  // train
  auto* train = app.add_subcommand("train", "Train a network and write a checkpoint");
  add_common(train, common);
  std::string train_data, train_ckpt, train_log;
  train->add_option("-d,--data", train_data, "Dataset directory");
  train->add_option("-o,--out", train_ckpt, "Checkpoint path (default: config checkpoint)");
  train->add_option("--log", train_log, "Loss log CSV path");

  // track
  auto* track = app.add_subcommand("track", "Track one sequence with a trained checkpoint");
  add_common(track, common);
  std::string track_ckpt, track_data, track_seq, track_out;
  track->add_option("-m,--checkpoint", track_ckpt, "Checkpoint path")->required();
  track->add_option("-d,--data", track_data, "Dataset directory");
  track->add_option("-s,--sequence", track_seq, "Sequence id")->required();
  track->add_option("-o,--out", track_out, "Trajectory file")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "One Pass Evaluation over a dataset");
  add_common(eval, common);
  std::string eval_ckpt, eval_data, eval_out, eval_tracker = "model";
  bool eval_drop = false;
  eval->add_option("-m,--checkpoint", eval_ckpt, "Checkpoint path (model tracker)");
  eval->add_option("-d,--data", eval_data, "Dataset directory");
  eval->add_option("-o,--out-dir", eval_out, "Output directory (default: config output_dir)");
  eval->add_option("--tracker", eval_tracker, "model, oracle or static")
      ->check(CLI::IsMember({"model", "oracle", "static"}));
  eval->add_flag("--drop-far", eval_drop, "Leave frames beyond 2 m out of Precision");

  // plot
  auto* plot = app.add_subcommand("plot", "Render curve CSV files to SVG");
  std::vector<std::string> plot_success, plot_precision;
  std::string plot_out = ".";
  plot->add_option("--success", plot_success, "Success curve CSV files");
  plot->add_option("--precision", plot_precision, "Precision curve CSV files");
  plot->add_option("-o,--out-dir", plot_out, "Directory for the SVG files");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!isa.empty()) {
      if (isa == "scalar") simd::set_active(simd::Isa::kScalar);
      else if (isa == "avx2") simd::set_active(simd::Isa::kAvx2);
      else if (isa == "neon") simd::set_active(simd::Isa::kNeon);
      else throw std::invalid_argument("unknown --isa '" + isa + "'");
    }

    if (*gen) {
      const RunConfig cfg = resolve_config(common);
      const fs::path out = data_root(gen_out, cfg);
      const auto seqs = generate_dataset(cfg.synth, cfg.synth_sequences, cfg.synth_length);
      save_dataset(out, seqs);
      std::cout << "wrote " << seqs.size() << " sequences to " << out.string() << '\n';
    } else if (*imp) {
      const Sequence seq = load_kitti_tracklet(kitti_velo, kitti_label, kitti_calib, kitti_track);
      save_dataset(kitti_out, {seq});
      std::cout << "wrote track " << kitti_track << " (" << seq.size() << " frames) to "
                << kitti_out << '\n';
    } else if (*train) {
      const RunConfig cfg = resolve_config(common);
      const auto data = load_dataset(data_root(train_data, cfg));
      MbpNetwork net(cfg.model);
      Trainer trainer(net, cfg.train);
      const auto log = trainer.fit(data, [](const LossRecord& r) {
        if (r.step % 100 == 0) {
          std::cerr << "epoch " << r.epoch << " step " << r.step << " loss " << r.total << '\n';
        }
      });
      const std::string ckpt = train_ckpt.empty() ? cfg.checkpoint : train_ckpt;
      if (fs::path(ckpt).has_parent_path()) fs::create_directories(fs::path(ckpt).parent_path());
      save_checkpoint(ckpt, cfg, net);
      if (!train_log.empty()) {
        auto out = open_out(train_log);
        write_loss_log(out, log);
      }
      std::cout << "checkpoint " << ckpt << " hash " << file_hash(ckpt) << '\n';
    } else if (*track) {
      RunConfig cfg;
      auto net = load_network(read_checkpoint(track_ckpt), &cfg);
      const RunConfig user = resolve_config(common);
      cfg.tracker.memory_size = user.tracker.memory_size;
      cfg.tracker.lost_threshold = user.tracker.lost_threshold;
      cfg.tracker.seed = user.tracker.seed;
      const auto data = load_dataset(data_root(track_data, user));
      const Sequence* seq = nullptr;
      for (const auto& s : data)
        if (s.id == track_seq) seq = &s;
      if (!seq) throw std::runtime_error("sequence '" + track_seq + "' not in dataset");
      MbpTracker tracker(net, cfg.tracker);
      const auto steps = track_sequence(tracker, seq->frames, seq->gt_boxes.front());
      std::vector<TrajectoryRecord> recs;
      for (std::size_t t = 0; t < steps.size(); ++t) recs.push_back({t, steps[t].box, steps[t].status});
      auto out = open_out(track_out);
      write_trajectory(out, recs);
      std::cout << "wrote " << recs.size() << " boxes to " << track_out << '\n';
    } else if (*eval) {
      RunConfig cfg = resolve_config(common);
      std::shared_ptr<MbpNetwork> net;
      if (eval_tracker == "model") {
        if (eval_ckpt.empty()) throw std::invalid_argument("eval: --checkpoint is required for the model tracker");
        const RunConfig user = cfg;
        net = load_network(read_checkpoint(eval_ckpt), &cfg);
        cfg.tracker.memory_size = user.tracker.memory_size;
        cfg.tracker.lost_threshold = user.tracker.lost_threshold;
        cfg.tracker.seed = user.tracker.seed;
        cfg.output_dir = user.output_dir;
      }
      const auto data = load_dataset(data_root(eval_data, cfg));
      OpeOptions opt;
      opt.drop_far_frames = eval_drop;
      std::vector<std::pair<std::string, OpeResult>> results;
      std::vector<double> ious, dists;
      for (const auto& seq : data) {
        TrackerFactory factory;
        if (eval_tracker == "oracle") {
          factory = [&] { return std::make_unique<OracleTracker>(seq.gt_boxes); };
        } else if (eval_tracker == "static") {
          factory = [] { return std::make_unique<StaticTracker>(); };
        } else {
          factory = [&] { return std::make_unique<MbpTracker>(net, cfg.tracker); };
        }
        OpeResult r = ope_run(factory, seq, opt);
        ious.insert(ious.end(), r.ious.begin(), r.ious.end());
        dists.insert(dists.end(), r.distances.begin(), r.distances.end());
        results.emplace_back(seq.category, std::move(r));
      }
      const AggregateTable table = aggregate(results);
      const fs::path dir = eval_out.empty() ? fs::path(cfg.output_dir) : fs::path(eval_out);
      fs::create_directories(dir);
      {
        auto out = open_out(dir / "table.txt");
        write_table_text(out, table);
      }
      {
        auto out = open_out(dir / "table.csv");
        write_table_csv(out, table);
      }
      {
        auto out = open_out(dir / "success_curve.csv");
        write_curve_csv(out, success_curve(ious));
      }
      {
        auto out = open_out(dir / "precision_curve.csv");
        write_curve_csv(out, precision_curve(dists));
      }
      write_table_text(std::cout, table);
    } else if (*plot) {
      if (plot_success.empty() && plot_precision.empty()) {
        throw std::invalid_argument("plot: give --success and/or --precision curve files");
      }
      auto load = [](const std::vector<std::string>& files) {
        std::vector<std::pair<std::string, std::vector<CurvePoint>>> s;
        for (const auto& f : files) s.emplace_back(fs::path(f).parent_path().filename().string(), read_curve_file(f));
        return s;
      };
      if (!plot_success.empty())
        write_svg(fs::path(plot_out) / "success.svg", "Success", "IoU threshold", load(plot_success));
      if (!plot_precision.empty())
        write_svg(fs::path(plot_out) / "precision.svg", "Precision", "center distance (m)",
                  load(plot_precision));
      std::cout << "wrote plots to " << plot_out << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
