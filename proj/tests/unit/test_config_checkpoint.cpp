#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mbptrack/checkpoint.hpp"
#include "mbptrack/config.hpp"
#include "test_util.hpp"

using namespace mbp;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mbptrack_cfg_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig parse(const std::string& text) {
  std::istringstream ss(text);
  return parse_config(ss);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MBPTRACK_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// Small enough for the CLI to train in about a second.
const char* kTinyOverrides =
    "--set crop_size=32 --set num_seeds=16 --set channels=16 --set edge_widths=8,16 "
    "--set edge_k=4 --set group_k=4 --set model_dim=16 --set ffn_hidden=16 --set proposals=4 "
    "--set grid_x=2 --set grid_y=2 --set grid_z=2 --set reference_k=4 --set epochs=1 "
    "--set synth_sequences=2 --set synth_length=9 --set synth_target_points=60 "
    "--set synth_background_points=30";

}  // namespace

TEST(Config, DefaultsMatchReferenceValues) {
  const RunConfig c;
  EXPECT_EQ(c.train.weights.mask, 0.2);
  EXPECT_EQ(c.train.weights.center, 10.0);
  EXPECT_EQ(c.train.loss.positive_radius, 0.3);
  EXPECT_EQ(c.train.train_memory, 2u);
  EXPECT_EQ(c.tracker.memory_size, 3u);
  EXPECT_EQ(c.tracker.lost_threshold, 0.2);
  EXPECT_EQ(c.model.defpm.layers, 2u);
  EXPECT_EQ(c.train.sample_len, 8u);
}

TEST(Config, ShippedFileParsesToDefaults) {
  const RunConfig c = load_config(std::string(MBPTRACK_FIXTURE_DIR) + "/../../configs/default.cfg");
  EXPECT_EQ(serialize_config(c), serialize_config(RunConfig{}));
}

TEST(Config, SerializeRoundTrip) {
  RunConfig c;
  apply_override(c, "lr=0.0003");
  apply_override(c, "memory_test = 5");
  apply_override(c, "edge_widths=16,24,32");
  apply_override(c, "synth_object=pedestrian");
  const std::string text = serialize_config(c);
  const RunConfig back = parse(text);
  EXPECT_EQ(serialize_config(back), text);
  EXPECT_EQ(back.train.adam.lr, 0.0003);
  EXPECT_EQ(back.tracker.memory_size, 5u);
  EXPECT_EQ(back.model.backbone.edge_widths, (std::vector<std::size_t>{16, 24, 32}));
  EXPECT_EQ(back.synth.object, ObjectTemplate::kPedestrian);
  EXPECT_EQ(config_keys().size(), static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')));
}

TEST(Config, RejectsUnknownAndDuplicateKeys) {
  try {
    parse("layers = 2\nlayerz = 3\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("layerz"), std::string::npos);
  }
  EXPECT_THROW(parse("layers = 2\nlayers = 3\n"), ConfigError);
  EXPECT_THROW(parse("layers = two\n"), ConfigError);
  EXPECT_THROW(parse("layers\n"), ConfigError);
  EXPECT_THROW(parse("yaw_flip = maybe\n"), ConfigError);
  RunConfig c;
  EXPECT_THROW(apply_override(c, "nope=1"), ConfigError);
  EXPECT_NO_THROW(parse("# comment only\n\n  layers = 3  # trailing\n"));
}

TEST(Checkpoint, RoundTripAndHash) {
  RunConfig cfg;
  cfg.model = mbp::testing::tiny_model();
  MbpNetwork net(cfg.model);
  const fs::path dir = temp_dir("ckpt");
  const std::string a = (dir / "a.ckpt").string(), b = (dir / "b.ckpt").string();
  save_checkpoint(a, cfg, net);
  save_checkpoint(b, cfg, net);
  EXPECT_EQ(file_hash(a), file_hash(b));
  EXPECT_EQ(file_hash(a).size(), 16u);
  RunConfig loaded_cfg;
  auto loaded = load_network(read_checkpoint(a), &loaded_cfg);
  EXPECT_EQ(serialize_config(loaded_cfg), serialize_config(cfg));
  const auto& pa = net.params().entries();
  const auto& pb = loaded->params().entries();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].name, pb[i].name);
    EXPECT_EQ(pa[i].var.value(), pb[i].var.value());
  }
  // A different architecture cannot take these weights.
  ModelConfig other = mbp::testing::tiny_model(32, 16, 8);
  MbpNetwork wrong(other);
  EXPECT_THROW(load_parameters(wrong, read_checkpoint(a)), std::runtime_error);
  std::ofstream(dir / "junk.ckpt") << "not a checkpoint";
  EXPECT_THROW(read_checkpoint((dir / "junk.ckpt").string()), std::runtime_error);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli(""), 106);
  EXPECT_NE(run_cli("no-such-command"), 0);
  EXPECT_EQ(run_cli("--help"), 0);
  const fs::path dir = temp_dir("cli");
  EXPECT_EQ(run_cli("eval --tracker model -d " + (dir / "missing").string()), 1);
  EXPECT_EQ(run_cli("generate-data --set bogus=1 -o " + (dir / "x").string()), 1);
}

TEST(Cli, EndToEnd) {
  const fs::path dir = temp_dir("e2e");
  const std::string data = (dir / "data").string(), ckpt = (dir / "m.ckpt").string();
  ASSERT_EQ(run_cli("generate-data " + std::string(kTinyOverrides) + " -o " + data), 0);
  ASSERT_EQ(run_cli("train " + std::string(kTinyOverrides) + " -d " + data + " -o " + ckpt +
                    " --log " + (dir / "loss.csv").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "loss.csv"));
  ASSERT_EQ(run_cli("eval -m " + ckpt + " -d " + data + " -o " + (dir / "ev").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "ev" / "table.csv"));
  EXPECT_TRUE(fs::exists(dir / "ev" / "success_curve.csv"));
  ASSERT_EQ(run_cli("track -m " + ckpt + " -d " + data + " -s synth_Car_0 -o " +
                    (dir / "traj.txt").string()),
            0);
  std::ifstream traj(dir / "traj.txt");
  EXPECT_EQ(read_trajectory(traj).size(), 9u);
  EXPECT_EQ(run_cli("plot --success " + (dir / "ev" / "success_curve.csv").string() + " -o " +
                    dir.string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "success.svg"));
  EXPECT_EQ(run_cli("import-kitti --velodyne " + std::string(MBPTRACK_FIXTURE_DIR) +
                    "/kitti/velodyne/0000 --labels " + std::string(MBPTRACK_FIXTURE_DIR) +
                    "/kitti/label_02/0000.txt --calib " + std::string(MBPTRACK_FIXTURE_DIR) +
                    "/kitti/calib/0000.txt --track-id 0 -o " + (dir / "kitti").string()),
            0);
  EXPECT_EQ(load_dataset(dir / "kitti").size(), 1u);
}
